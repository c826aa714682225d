"""Session-oriented HTTP API: the query loop with a live human as oracle.

Each session owns an information state, a pending query slot, and an
append-only transcript on disk. The loop is strictly serialized per
session: a new query can only be fetched when none is pending, and a
response is only accepted against the pending query. Sessions survive a
server restart; the on-disk snapshot plus transcript is the full state.

Endpoints (all payloads carry a top-level schema version ``v``):
    POST /sessions                  create a session from a config document
    GET  /sessions/{id}/query       select and serve the next query
    POST /sessions/{id}/response    answer the pending query
    GET  /sessions/{id}/belief      read-only belief summary
    GET  /sessions/{id}/transcript  raw transcript (JSONL)
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .acquisition import ScoredQuery
from .belief import init_belief, mean_estimate, spread
from .domain import FEATURE_NAMES, Trajectory
from .errors import ConfigError, EmptySupportError, NoCandidatesError
from .harness import (
    ExperimentConfig,
    RunSeeds,
    build_pool,
    derive_run_seeds,
    parse_config,
    propose_query,
)
from .imdp import InfoState, initial_state, transition_with_record
from .queries import (
    ComparisonQuery,
    CorrectionQuery,
    DemonstrationQuery,
    FeatureLabelQuery,
    LabelQuery,
    Query,
    Response,
    response_index,
    response_support,
)
from . import transcript as tr

API_VERSION = 1


def parse_session_config(doc: dict) -> tuple[ExperimentConfig, int]:
    """Session config: the experiment document with a single seed.

    Live sessions must start with an empty dataset (there is no oracle to
    label an initial batch), so ``init_dataset_size`` must be 0.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config", "config must be a JSON object")
    doc = dict(doc)
    if "seed" in doc:
        seed = doc.pop("seed")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed", "expected an integer")
        doc.setdefault("seeds", [seed])
    doc.setdefault("steps", 1)
    doc.setdefault("init_dataset_size", 0)
    config = parse_config(doc)
    if config.init_dataset_size != 0:
        raise ConfigError("init_dataset_size", "live sessions start with an empty dataset")
    return config, config.seeds[0]


def _traj_cells(traj: Trajectory) -> list[list[int]]:
    return [[int(x), int(y)] for (x, y) in traj.states]


def _grid_doc(config: ExperimentConfig) -> dict:
    world = config.world
    return {
        "width": world.width,
        "height": world.height,
        "obstacles": sorted([list(c) for c in world.obstacles]),
        "goal": list(world.goal),
    }


def render_query(config: ExperimentConfig, scored: ScoredQuery, state: InfoState) -> dict:
    """Everything a renderer needs to pose the pending query."""
    query = scored.query
    base = {
        "kind": query.kind,
        "grid": _grid_doc(config),
    }
    if isinstance(query, LabelQuery):
        base["trajectories"] = [{"cells": _traj_cells(query.candidate)}]
        base["response_schema"] = {"type": "choice", "options": ["good", "bad"]}
    elif isinstance(query, ComparisonQuery):
        base["trajectories"] = [{"cells": _traj_cells(t)} for t in query.items]
        base["response_schema"] = {"type": "index", "count": len(query.items)}
    elif isinstance(query, DemonstrationQuery):
        base["start"] = list(query.start)
        base["waypoints"] = [list(w) for w in query.waypoints]
        base["trajectories"] = [{"cells": _traj_cells(t)} for t in query.support]
        base["response_schema"] = {"type": "index", "count": len(query.support)}
    elif isinstance(query, FeatureLabelQuery):
        names = FEATURE_NAMES
        base["feature_index"] = query.feature_index
        base["feature_name"] = (names[query.feature_index]
                                if query.feature_index < len(names) else
                                f"feature_{query.feature_index}")
        base["trajectories"] = [{"cells": _traj_cells(query.probe)}]
        base["response_schema"] = {"type": "choice",
                                   "options": ["relevant", "not_relevant"]}
    elif isinstance(query, CorrectionQuery):
        base["target"] = {"cells": _traj_cells(query.target)}
        base["trajectories"] = [{"cells": _traj_cells(t)} for t in query.candidates]
        base["response_schema"] = {"type": "index", "count": len(query.candidates)}
    return base


def decode_response(query: Query, doc: dict) -> Response | None:
    """Map a wire response document onto the query's support; None if invalid."""
    if not isinstance(doc, dict):
        return None
    kind, value = doc.get("kind"), doc.get("value")
    if kind != query.kind:
        return None
    if isinstance(query, (ComparisonQuery, DemonstrationQuery, CorrectionQuery)):
        if not isinstance(value, int) or isinstance(value, bool):
            return None
        options = (query.items if isinstance(query, ComparisonQuery)
                   else query.support if isinstance(query, DemonstrationQuery)
                   else query.candidates)
        if not 0 <= value < len(options):
            return None
        if isinstance(query, ComparisonQuery):
            return Response("comparison", value)
        return Response(kind, options[value])
    if not isinstance(value, str):
        return None
    candidate = Response(kind, value)
    return candidate if response_index(query, candidate) is not None else None


@dataclass
class Session:
    id: str
    config: ExperimentConfig
    seed: int
    seeds: RunSeeds
    pool: list[Trajectory]
    state: InfoState
    pending: ScoredQuery | None
    lock: threading.Lock
    dir: Path


class SessionStore:
    """Disk-backed registry; sessions lazily reload after a restart."""

    def __init__(self, storage_dir: str | Path):
        self.storage_dir = Path(storage_dir)
        self.storage_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

    def create(self, config: ExperimentConfig, seed: int) -> Session:
        session_id = uuid.uuid4().hex
        session_dir = self.storage_dir / session_id
        session_dir.mkdir(parents=True)
        seeds = derive_run_seeds(seed)
        pool = build_pool(config.world, config.pool_size, seeds.pool)
        state = initial_state(init_belief(config.d, config.m, seeds.belief))
        session = Session(id=session_id, config=config, seed=seed, seeds=seeds,
                          pool=pool, state=state, pending=None,
                          lock=threading.Lock(), dir=session_dir)
        with open(session_dir / "config.json", "w") as fh:
            json.dump({"v": API_VERSION, "seed": seed, "config": config.doc}, fh)
        with open(session_dir / "transcript.jsonl", "w") as fh:
            writer = tr.TranscriptWriter(fh)
            writer.write_header({
                "run_seed": seed,
                "belief_seed": seeds.belief,
                "omega_star": None,
                "d": config.d,
                "m": config.m,
                "strategy": config.strategy.kind,
                "init_dataset_size": 0,
                "steps": config.steps,
            })
        self._persist(session)
        with self._registry_lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._registry_lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        session = self._load(session_id)
        if session is not None:
            with self._registry_lock:
                self._sessions.setdefault(session_id, session)
                return self._sessions[session_id]
        return None

    def _persist(self, session: Session) -> None:
        pending_doc = None
        if session.pending is not None:
            pending_doc = {
                "query": tr.query_to_doc(session.pending.query),
                "score": session.pending.score,
                "predicted": [[tr.response_to_doc(r), p]
                              for r, p in session.pending.predicted.items()],
            }
        snapshot = {
            "v": API_VERSION,
            "state": tr.state_to_doc(session.state),
            "pending": pending_doc,
        }
        path = session.dir / "snapshot.json"
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            json.dump(snapshot, fh)
        tmp.replace(path)

    def _load(self, session_id: str) -> Session | None:
        session_dir = self.storage_dir / session_id
        if not (session_dir / "snapshot.json").exists():
            return None
        with open(session_dir / "config.json") as fh:
            saved = json.load(fh)
        config, seed = parse_session_config({**saved["config"], "seed": saved["seed"]})
        with open(session_dir / "snapshot.json") as fh:
            snapshot = json.load(fh)
        state = tr.state_from_doc(snapshot["state"])
        pending = None
        if snapshot["pending"] is not None:
            pdoc = snapshot["pending"]
            pending = ScoredQuery(
                query=tr.query_from_doc(pdoc["query"]),
                score=float(pdoc["score"]),
                predicted={tr.response_from_doc(r): float(p)
                           for r, p in pdoc["predicted"]},
            )
        seeds = derive_run_seeds(seed)
        return Session(id=session_id, config=config, seed=seed, seeds=seeds,
                       pool=build_pool(config.world, config.pool_size, seeds.pool),
                       state=state, pending=pending, lock=threading.Lock(),
                       dir=session_dir)

    def append_transcript(self, session: Session, query, response, record) -> None:
        path = session.dir / "transcript.jsonl"
        with open(path) as fh:
            header, lines = tr.read_transcript(iter(fh))
        with open(path, "a") as fh:
            writer = tr.TranscriptWriter(fh, prev_digest=tr.chain_tip(header, lines))
            writer.write_step(query, response, record)


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    body = {"v": API_VERSION, "code": code, "message": message}
    if field is not None:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


def _summary(session: Session) -> dict:
    state = session.state
    return {
        "step": state.step,
        "spread": spread(state.belief),
        "dataset_size": len(state.dataset),
        "belief_generation": state.belief.generation,
        "feature_weights": [float(u) for u in state.feature_weights],
    }


def _alpha_rng(session: Session) -> np.random.Generator:
    # one uniform is consumed per completed step when alpha < 1; burning
    # state.step draws reproduces the exact chain after a restart
    rng = np.random.default_rng(session.seeds.alpha)
    if session.state.step:
        rng.uniform(size=session.state.step)
    return rng


def create_app(storage_dir: str | Path = "sessions",
               default_config: dict | None = None) -> FastAPI:
    app = FastAPI(title="activereward live sessions")
    store = SessionStore(storage_dir)
    app.state.store = store

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "config_error", "request body must be JSON")
        doc = body.get("config") if isinstance(body, dict) else None
        if doc is None:
            doc = default_config
        if doc is None:
            return _error(400, "config_error", "missing config", field="config")
        try:
            config, seed = parse_session_config(doc)
        except ConfigError as exc:
            return _error(400, "config_error", str(exc), field=exc.field)
        session = store.create(config, seed)
        return {"v": API_VERSION, "id": session.id, "summary": _summary(session)}

    @app.get("/sessions/{session_id}/query")
    def next_query(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "not_found", f"no session {session_id}")
        with session.lock:
            if session.pending is not None:
                return _error(409, "pending_exists",
                              "answer the pending query before requesting another")
            loop_step = session.state.step + 1
            try:
                scored = propose_query(session.config, session.state, session.pool,
                                       loop_step, session.seeds)
            except (NoCandidatesError, EmptySupportError) as exc:
                return _error(422, "no_candidates", str(exc))
            session.pending = scored
            store._persist(session)
            return {
                "v": API_VERSION,
                "id": session.id,
                "step": session.state.step,
                "score": scored.score,
                "query": render_query(session.config, scored, session.state),
            }

    @app.post("/sessions/{session_id}/response")
    async def post_response(session_id: str, request: Request):
        session = store.get(session_id)
        if session is None:
            return _error(404, "not_found", f"no session {session_id}")
        try:
            body = await request.json()
        except Exception:
            return _error(422, "validation_error", "request body must be JSON")
        with session.lock:
            if session.pending is None:
                return _error(409, "no_pending", "no pending query to answer")
            response = decode_response(session.pending.query,
                                       body.get("response") if isinstance(body, dict) else None)
            if response is None:
                return _error(422, "validation_error",
                              "response is not in the pending query's support",
                              field="response")
            query = session.pending.query
            session.state, record = transition_with_record(
                session.state, query, response, session.config.transition,
                session.config.obs, rng=_alpha_rng(session))
            session.pending = None
            store.append_transcript(session, query, response, record)
            store._persist(session)
            return {"v": API_VERSION, "id": session.id, "summary": _summary(session)}

    @app.get("/sessions/{session_id}/belief")
    def get_belief(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "not_found", f"no session {session_id}")
        with session.lock:
            belief = session.state.belief
            top = np.argsort(belief.weights)[::-1][:50]
            return {
                "v": API_VERSION,
                "id": session.id,
                "mean_estimate": [float(v) for v in mean_estimate(belief)],
                "spread": spread(belief),
                "feature_weights": [float(u) for u in session.state.feature_weights],
                "belief_generation": belief.generation,
                "top_particles": [
                    {"omega": [float(v) for v in belief.particles[i]],
                     "weight": float(belief.weights[i])}
                    for i in top
                ],
            }

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "not_found", f"no session {session_id}")
        with session.lock:
            text = (session.dir / "transcript.jsonl").read_text()
        return PlainTextResponse(text, media_type="application/jsonl")

    return app
