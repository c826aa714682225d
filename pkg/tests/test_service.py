"""Live session API: lifecycle, serialization, and harness equivalence."""
import pytest
from fastapi.testclient import TestClient

from activereward.belief import init_belief
from activereward.harness import (
    derive_run_seeds,
    parse_config,
    replay_transcript,
    run_experiment,
)
from activereward.imdp import initial_state, replay
from activereward.service import create_app
from activereward import transcript as tr


def session_config(**overrides):
    doc = {
        "world": {"width": 4, "height": 4, "obstacles": [[1, 1]], "goal": [3, 3],
                  "horizon": 4},
        "d": 4,
        "m": 60,
        "seed": 0,
        "observation": {"beta": 4.0, "label_threshold": 0.0},
        "strategy": {"kind": "info_gain"},
        "transition": {},
        "budgets": {"label": 3, "comparison": 4, "demonstration": 1,
                    "feature_label": 2, "correction": 1, "support_cap": 8},
        "steps": 10,
        "pool_size": 40,
        "init_dataset_size": 0,
        "output_dir": "unused",
    }
    doc.update(overrides)
    return doc


@pytest.fixture()
def client(tmp_path):
    app = create_app(storage_dir=tmp_path / "sessions")
    with TestClient(app) as c:
        yield c


def create(client, **overrides):
    resp = client.post("/sessions", json={"v": 1, "config": session_config(**overrides)})
    assert resp.status_code == 201, resp.text
    return resp.json()


def answer_value(query_doc):
    """A valid wire response for whatever query was served."""
    schema = query_doc["response_schema"]
    if schema["type"] == "choice":
        return {"kind": query_doc["kind"], "value": schema["options"][0]}
    return {"kind": query_doc["kind"], "value": 0}


class TestLifecycle:
    def test_create_issues_distinct_ids(self, client):
        a, b = create(client), create(client)
        assert a["id"] != b["id"]
        assert a["summary"]["step"] == 0
        assert a["v"] == 1

    def test_bad_config_names_field(self, client):
        resp = client.post("/sessions", json={"v": 1, "config": session_config(steps=0)})
        assert resp.status_code == 400
        body = resp.json()
        assert body["code"] == "config_error"
        assert body["field"] == "steps"

    def test_live_sessions_need_empty_init(self, client):
        resp = client.post("/sessions",
                           json={"v": 1, "config": session_config(init_dataset_size=3)})
        assert resp.status_code == 400
        assert resp.json()["field"] == "init_dataset_size"

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope/query").status_code == 404
        assert client.get("/sessions/nope/belief").status_code == 404
        assert client.post("/sessions/nope/response", json={}).status_code == 404


class TestQueryResponseLoop:
    def test_query_payload_shape(self, client):
        session = create(client)
        resp = client.get(f"/sessions/{session['id']}/query")
        assert resp.status_code == 200
        query = resp.json()["query"]
        assert query["kind"] in ("label", "comparison", "demonstration",
                                 "feature_label", "correction")
        assert query["grid"]["width"] == 4
        assert query["trajectories"]
        assert "response_schema" in query

    def test_double_query_conflicts(self, client):
        session = create(client)
        assert client.get(f"/sessions/{session['id']}/query").status_code == 200
        second = client.get(f"/sessions/{session['id']}/query")
        assert second.status_code == 409
        assert second.json()["code"] == "pending_exists"

    def test_response_without_pending_conflicts(self, client):
        session = create(client)
        resp = client.post(f"/sessions/{session['id']}/response",
                           json={"v": 1, "response": {"kind": "label", "value": "good"}})
        assert resp.status_code == 409
        assert resp.json()["code"] == "no_pending"

    def test_out_of_support_value_rejected(self, client):
        session = create(client, budgets={"comparison": 0, "label": 2})
        query = client.get(f"/sessions/{session['id']}/query").json()["query"]
        resp = client.post(f"/sessions/{session['id']}/response",
                           json={"v": 1, "response": {"kind": query["kind"], "value": "maybe"}})
        assert resp.status_code == 422
        assert resp.json()["code"] == "validation_error"

    def test_step_advances_and_pending_clears(self, client):
        session = create(client)
        sid = session["id"]
        for expected_step in (1, 2, 3):
            query = client.get(f"/sessions/{sid}/query").json()["query"]
            resp = client.post(f"/sessions/{sid}/response",
                               json={"v": 1, "response": answer_value(query)})
            assert resp.status_code == 200
            assert resp.json()["summary"]["step"] == expected_step

    def test_comparison_answer_keeps_dataset_size(self, client):
        session = create(client, budgets={"label": 2})
        sid = session["id"]
        # label twice to grow the dataset
        for _ in range(2):
            query = client.get(f"/sessions/{sid}/query").json()["query"]
            client.post(f"/sessions/{sid}/response",
                        json={"v": 1, "response": answer_value(query)})
        # now only comparisons are offered
        app_store = client.app.state.store
        session_obj = app_store.get(sid)
        before = len(session_obj.state.dataset)
        query = client.get(f"/sessions/{sid}/query").json()
        # the label pool is exhausted or comparison chosen; answer whatever came
        out = client.post(f"/sessions/{sid}/response",
                          json={"v": 1, "response": answer_value(query["query"])})
        after = out.json()["summary"]["dataset_size"]
        if query["query"]["kind"] == "comparison":
            assert after == before

    def test_no_candidates_is_explicit(self, client):
        session = create(client, budgets={"comparison": 3})  # empty dataset, no pairs
        resp = client.get(f"/sessions/{session['id']}/query")
        assert resp.status_code == 422
        assert resp.json()["code"] == "no_candidates"


class TestBelief:
    def test_fresh_belief_summary(self, client):
        session = create(client)
        resp = client.get(f"/sessions/{session['id']}/belief")
        body = resp.json()
        assert body["belief_generation"] == 0
        assert len(body["mean_estimate"]) == 4
        assert body["spread"] > 0
        assert len(body["top_particles"]) == 50  # capped below m=60

    def test_generation_grows_with_evidence(self, client):
        session = create(client)
        sid = session["id"]
        query = client.get(f"/sessions/{sid}/query").json()["query"]
        client.post(f"/sessions/{sid}/response", json={"v": 1, "response": answer_value(query)})
        body = client.get(f"/sessions/{sid}/belief").json()
        assert body["belief_generation"] == 1


class TestPersistence:
    def test_restart_resumes_session(self, tmp_path):
        storage = tmp_path / "sessions"
        app = create_app(storage_dir=storage)
        with TestClient(app) as client:
            session = create(client)
            sid = session["id"]
            for _ in range(2):
                query = client.get(f"/sessions/{sid}/query").json()["query"]
                client.post(f"/sessions/{sid}/response",
                            json={"v": 1, "response": answer_value(query)})
            belief_before = client.get(f"/sessions/{sid}/belief").json()

        fresh = create_app(storage_dir=storage)  # new process, same disk
        with TestClient(fresh) as client:
            belief_after = client.get(f"/sessions/{sid}/belief").json()
            assert belief_after == belief_before
            query = client.get(f"/sessions/{sid}/query")
            assert query.status_code == 200

    def test_restart_preserves_pending(self, tmp_path):
        storage = tmp_path / "sessions"
        with TestClient(create_app(storage_dir=storage)) as client:
            session = create(client)
            sid = session["id"]
            served = client.get(f"/sessions/{sid}/query").json()
        with TestClient(create_app(storage_dir=storage)) as client:
            again = client.get(f"/sessions/{sid}/query")
            assert again.status_code == 409  # still pending
            query = served["query"]
            out = client.post(f"/sessions/{sid}/response",
                              json={"v": 1, "response": answer_value(query)})
            assert out.status_code == 200


class TestTranscriptEndpoint:
    def test_transcript_grows_and_parses(self, client):
        session = create(client)
        sid = session["id"]
        for _ in range(3):
            query = client.get(f"/sessions/{sid}/query").json()["query"]
            client.post(f"/sessions/{sid}/response",
                        json={"v": 1, "response": answer_value(query)})
        text = client.get(f"/sessions/{sid}/transcript").text
        header, lines = tr.read_transcript(iter(text.splitlines()))
        assert header["init_dataset_size"] == 0
        assert len(lines) == 3
        assert tr.verify_chain(header, lines) is None


def wire_response(line):
    """Translate a recorded response into its HTTP form (indexes for paths)."""
    if line.response.kind == "comparison":
        return {"kind": "comparison", "value": line.response.value}
    if line.response.kind == "demonstration":
        return {"kind": "demonstration",
                "value": line.query.support.index(line.response.value)}
    if line.response.kind == "correction":
        return {"kind": "correction",
                "value": line.query.candidates.index(line.response.value)}
    return tr.response_to_doc(line.response)


class TestHarnessEquivalence:
    def test_recorded_responses_reproduce_state(self, tmp_path):
        """Feeding a harness transcript's responses through the service yields
        the identical final information state."""
        doc = session_config()
        run_doc = {**doc, "seeds": [doc["seed"]], "output_dir": str(tmp_path / "run")}
        del run_doc["seed"]
        cfg = parse_config(run_doc)
        result = run_experiment(cfg)
        assert not result.failures
        with open(result.transcript_paths[0]) as fh:
            _, lines = tr.read_transcript(iter(fh))
        assert len(lines) == doc["steps"]

        with TestClient(create_app(storage_dir=tmp_path / "svc")) as client:
            sid = create(client)["id"]
            for line in lines:
                assert client.get(f"/sessions/{sid}/query").status_code == 200
                out = client.post(f"/sessions/{sid}/response",
                                  json={"v": 1, "response": wire_response(line)})
                assert out.status_code == 200, out.text
            live_state = client.app.state.store.get(sid).state

        seeds = derive_run_seeds(doc["seed"])
        base = initial_state(init_belief(cfg.d, cfg.m, seeds.belief))
        ref = replay(base, [(l.query, l.response) for l in lines],
                     cfg.transition, cfg.obs)
        assert tr.canonical_json(tr.state_to_doc(live_state)) == \
            tr.canonical_json(tr.state_to_doc(ref))

        summary = replay_transcript(cfg, result.transcript_paths[0])
        assert live_state.step == summary.steps
        assert len(live_state.dataset) == summary.dataset_size
