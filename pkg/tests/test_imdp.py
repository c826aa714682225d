"""Dataset/belief transitions for all five query variants."""
import numpy as np
import pytest

from activereward.belief import init_belief, relearn
from activereward.domain import GridWorld, Trajectory, enumerate_trajectories, features
from activereward.errors import ContractError, StateConsistencyError
from activereward.humans import ObservationModel, SimulatedHuman, respond
from activereward.imdp import (
    InfoState,
    LabeledItem,
    QueryBudgets,
    TransitionConfig,
    initial_state,
    legal_queries,
    replay,
    transition,
    transition_with_record,
)
from activereward.queries import (
    ComparisonQuery,
    CorrectionQuery,
    DemonstrationQuery,
    FeatureLabelQuery,
    LabelQuery,
    Response,
)
from activereward import transcript as tr

WORLD = GridWorld(4, 4, frozenset({(1, 1)}), (3, 3), horizon=4)
OBS = ObservationModel(beta=2.0)
CFG = TransitionConfig()


def make_state(n_items=0, seed=0, m=32):
    pool = enumerate_trajectories(WORLD, (0, 0), max_count=200, seed=1)
    state = initial_state(init_belief(4, m, seed=seed))
    items = tuple(LabeledItem(t, annotation="good") for t in pool[:n_items])
    state = InfoState(dataset=items, belief=state.belief,
                      feature_weights=state.feature_weights)
    return state, pool


def phi(traj):
    return features(WORLD, traj)


def label_query(traj):
    return LabelQuery(candidate=traj, phi=phi(traj))


def comparison_query(trajs):
    return ComparisonQuery(items=tuple(trajs), phis=np.stack([phi(t) for t in trajs]))


class TestLegalQueries:
    def test_empty_dataset_blocks_dataset_variants(self):
        state, pool = make_state(0)
        budgets = QueryBudgets(label=2, comparison=2, demonstration=1,
                               feature_label=2, correction=2)
        kinds = {q.kind for q in legal_queries(state, WORLD, pool, budgets, seed=0)}
        assert "comparison" not in kinds
        assert "feature_label" not in kinds
        assert "correction" not in kinds
        assert "label" in kinds and "demonstration" in kinds

    def test_pool_inside_dataset_blocks_labels(self):
        state, pool = make_state(0)
        items = tuple(LabeledItem(t) for t in pool[:3])
        state = InfoState(dataset=items, belief=state.belief,
                          feature_weights=state.feature_weights)
        budgets = QueryBudgets(label=5)
        assert legal_queries(state, WORLD, pool[:3], budgets, seed=0) == []

    def test_three_items_give_three_pairs(self):
        state, pool = make_state(3)
        budgets = QueryBudgets(comparison=3)
        queries = legal_queries(state, WORLD, pool, budgets, seed=0)
        assert len(queries) == 3  # C(3, 2)
        pairs = {frozenset(q.items) for q in queries}
        assert len(pairs) == 3

    def test_label_candidates_not_in_dataset(self):
        state, pool = make_state(4)
        budgets = QueryBudgets(label=10)
        in_dataset = set(state.dataset_trajectories())
        for q in legal_queries(state, WORLD, pool, budgets, seed=3):
            assert q.candidate not in in_dataset

    def test_deterministic(self):
        state, pool = make_state(5)
        budgets = QueryBudgets(label=3, comparison=3, demonstration=2,
                               feature_label=3, correction=2, support_cap=16)
        a = legal_queries(state, WORLD, pool, budgets, seed=11)
        b = legal_queries(state, WORLD, pool, budgets, seed=11)
        assert [q.kind for q in a] == [q.kind for q in b]
        assert all(type(x) is type(y) for x, y in zip(a, b))

    def test_budget_caps_respected(self):
        state, pool = make_state(6)
        budgets = QueryBudgets(label=2, comparison=4, demonstration=2,
                               feature_label=3, correction=1, support_cap=8)
        queries = legal_queries(state, WORLD, pool, budgets, seed=5)
        by_kind = {}
        for q in queries:
            by_kind[q.kind] = by_kind.get(q.kind, 0) + 1
        assert by_kind["label"] <= 2
        assert by_kind["comparison"] <= 4
        assert by_kind["demonstration"] <= 2
        assert by_kind["feature_label"] <= 3
        assert by_kind["correction"] <= 1


class TestTableConformance:
    """Dataset-update rules, one per variant."""

    def test_label_appends(self):
        state, pool = make_state(2)
        q = label_query(pool[10])
        out = transition(state, q, Response("label", "good"), CFG, OBS)
        assert len(out.dataset) == len(state.dataset) + 1
        assert out.dataset[-1].trajectory == pool[10]
        assert out.dataset[-1].annotation == "good"

    def test_label_bad_still_appends(self):
        state, pool = make_state(0)
        q = label_query(pool[0])
        out = transition(state, q, Response("label", "bad"), CFG, OBS)
        assert len(out.dataset) == 1 and out.dataset[0].annotation == "bad"

    def test_comparison_leaves_dataset_untouched(self):
        state, _ = make_state(3)
        q = comparison_query(state.dataset_trajectories()[:2])
        out = transition(state, q, Response("comparison", 0), CFG, OBS)
        assert out.dataset == state.dataset  # same items, same order

    def test_demonstration_appends_response(self):
        state, _ = make_state(1)
        support = tuple(enumerate_trajectories(WORLD, (2, 2), max_count=8, seed=4))
        q = DemonstrationQuery(start=(2, 2), waypoints=(), support=support,
                               phis=np.stack([phi(t) for t in support]))
        out = transition(state, q, Response("demonstration", support[3]), CFG, OBS)
        assert len(out.dataset) == len(state.dataset) + 1
        assert out.dataset[-1].trajectory == support[3]
        assert out.dataset[-1].annotation == "demonstrated"

    def test_feature_label_leaves_dataset_untouched(self):
        state, _ = make_state(2)
        probe = state.dataset[0].trajectory
        q = FeatureLabelQuery(feature_index=1, probe=probe, phi=phi(probe))
        out = transition(state, q, Response("feature_label", "relevant"), CFG, OBS)
        assert out.dataset == state.dataset

    def test_correction_replaces(self):
        state, _ = make_state(3)
        target = state.dataset[1].trajectory
        candidates = tuple(enumerate_trajectories(WORLD, target.start_state,
                                                  max_count=8, seed=9))
        q = CorrectionQuery(target=target, candidates=candidates,
                            phis=np.stack([phi(t) for t in candidates]))
        replacement = candidates[2]
        out = transition(state, q, Response("correction", replacement), CFG, OBS)
        assert len(out.dataset) == len(state.dataset)
        trajs = out.dataset_trajectories()
        assert replacement in trajs
        # the target was stored once and is gone now
        assert target not in trajs or state.dataset_trajectories().count(target) > 1

    def test_correction_missing_target_raises(self):
        state, pool = make_state(1)
        outsider, cand = pool[-1], pool[-2]
        q = CorrectionQuery(target=outsider, candidates=(cand,),
                            phis=np.stack([phi(cand)]))
        with pytest.raises(StateConsistencyError):
            transition(state, q, Response("correction", cand), CFG, OBS)


class TestTransitionMechanics:
    def test_response_kind_mismatch(self):
        state, pool = make_state(0)
        q = label_query(pool[0])
        with pytest.raises(ContractError):
            transition(state, q, Response("comparison", 0), CFG, OBS)

    def test_out_of_support_response(self):
        state, _ = make_state(2)
        q = comparison_query(state.dataset_trajectories()[:2])
        with pytest.raises(ContractError):
            transition(state, q, Response("comparison", 7), CFG, OBS)

    def test_evidence_and_step_always_advance(self):
        state, _ = make_state(2)
        q = comparison_query(state.dataset_trajectories()[:2])
        out = transition(state, q, Response("comparison", 1), CFG, OBS)
        assert out.step == state.step + 1
        assert len(out.evidence_log) == len(state.evidence_log) + 1
        assert out.belief.generation == state.belief.generation + 1

    def test_alpha_gates_dataset_but_not_belief(self):
        state, pool = make_state(0)
        cfg = TransitionConfig(alpha=0.0)
        q = label_query(pool[0])
        out, rec = transition_with_record(state, q, Response("label", "good"), cfg, OBS,
                                          rng=np.random.default_rng(0))
        assert rec.dataset_delta == 0 and not rec.dataset_mutated
        assert len(out.evidence_log) == 1
        assert out.belief.generation == 1

    def test_alpha_growth_rate_tracks_alpha(self):
        state, pool = make_state(0, m=8)
        for alpha in (0.25, 0.5, 0.75):
            cfg = TransitionConfig(alpha=alpha)
            rng = np.random.default_rng(321)
            added = 0
            for i in range(1000):
                q = label_query(pool[i % len(pool)])
                _, rec = transition_with_record(
                    state, q, Response("label", "good"), cfg, OBS, rng=rng)
                added += rec.dataset_delta
            assert abs(added / 1000 - alpha) < 0.05

    def test_recorded_alpha_draw_reproduces(self):
        state, pool = make_state(0)
        cfg = TransitionConfig(alpha=0.5)
        q = label_query(pool[0])
        _, rec = transition_with_record(state, q, Response("label", "good"), cfg, OBS,
                                        rng=np.random.default_rng(5))
        out2, rec2 = transition_with_record(state, q, Response("label", "good"), cfg, OBS,
                                            alpha_draw=rec.alpha_draw)
        assert rec2.dataset_delta == rec.dataset_delta
        assert rec2.alpha_draw == rec.alpha_draw

    def test_feature_label_updates_relevance(self):
        state, _ = make_state(1)
        probe = state.dataset[0].trajectory
        q = FeatureLabelQuery(feature_index=2, probe=probe, phi=phi(probe))
        down = transition(state, q, Response("feature_label", "not_relevant"), CFG, OBS)
        assert down.feature_weights[2] == 0.5
        up = transition(down, q, Response("feature_label", "relevant"), CFG, OBS)
        assert up.feature_weights[2] == 0.75
        clamped = transition(state, q, Response("feature_label", "relevant"), CFG, OBS)
        assert clamped.feature_weights[2] == 1.0

    def test_tuning_decays_contradicted_items(self):
        state, _ = make_state(2)
        cfg = TransitionConfig(tuning_enabled=True, tuning_decay=0.5)
        trajs = state.dataset_trajectories()
        q = comparison_query(trajs)
        out = transition(state, q, Response("comparison", 1), cfg, OBS)
        assert out.dataset[0].weight == 0.5  # stored good item lost
        assert out.dataset[1].weight == 1.0
        again = transition(out, q, Response("comparison", 1), cfg, OBS)
        assert again.dataset[0].weight == 0.25
        assert all(0.0 <= item.weight <= 1.0 for item in again.dataset)

    def test_tuning_disabled_keeps_weights(self):
        state, _ = make_state(2)
        q = comparison_query(state.dataset_trajectories())
        out = transition(state, q, Response("comparison", 1), CFG, OBS)
        assert all(item.weight == 1.0 for item in out.dataset)


class TestReplayAndModes:
    def run_mixed_transcript(self, steps=12, seed=0):
        state, pool = make_state(0, seed=seed, m=64)
        human = SimulatedHuman(
            omega_star=np.array([0.6, -0.48, 0.4, 0.5]) / np.linalg.norm([0.6, -0.48, 0.4, 0.5]),
            model=OBS, rng=np.random.default_rng(seed + 1))
        budgets = QueryBudgets(label=2, comparison=2, demonstration=1,
                               feature_label=1, correction=1, support_cap=8)
        pairs = []
        for t in range(steps):
            cands = legal_queries(state, WORLD, pool, budgets, seed=seed + t)
            q = cands[t % len(cands)]
            resp = respond(human, q)
            pairs.append((q, resp))
            state = transition(state, q, resp, CFG, OBS)
        return pairs

    def test_empty_transcript_identity(self):
        state, _ = make_state(2)
        out = replay(state, [], CFG, OBS)
        assert out is state

    def test_comparisons_leave_dataset_and_count_steps(self):
        state, _ = make_state(2)
        q = comparison_query(state.dataset_trajectories())
        pairs = [(q, Response("comparison", 0)), (q, Response("comparison", 1))]
        out = replay(state, pairs, CFG, OBS)
        assert out.dataset == state.dataset
        assert out.step == 2

    def test_replay_determinism_and_serialization(self):
        pairs = self.run_mixed_transcript()
        state, _ = make_state(0, m=64)
        a = replay(state, pairs, CFG, OBS)
        b = replay(state, pairs, CFG, OBS)
        assert tr.canonical_json(tr.state_to_doc(a)) == tr.canonical_json(tr.state_to_doc(b))

    def test_markov_resume_from_snapshot(self):
        pairs = self.run_mixed_transcript(steps=10)
        state, _ = make_state(0, m=64)
        straight = replay(state, pairs, CFG, OBS)
        half = replay(state, pairs[:5], CFG, OBS)
        resumed = tr.state_from_doc(tr.state_to_doc(half))
        rest = replay(resumed, pairs[5:], CFG, OBS)
        assert tr.canonical_json(tr.state_to_doc(rest)) == \
            tr.canonical_json(tr.state_to_doc(straight))

    def test_batch_equals_incremental_without_resampling(self):
        pairs = self.run_mixed_transcript(steps=15)
        base_inc = TransitionConfig(resample=False, relearn_mode="incremental")
        base_bat = TransitionConfig(resample=False, relearn_mode="batch")
        s0, _ = make_state(0, m=64)
        inc = replay(s0, pairs, base_inc, OBS)
        bat = replay(s0, pairs, base_bat, OBS)
        np.testing.assert_allclose(inc.belief.weights, bat.belief.weights, atol=1e-12)

    def test_batch_final_belief_equals_relearn(self):
        pairs = self.run_mixed_transcript(steps=10)
        cfg = TransitionConfig(relearn_mode="batch")
        s0, _ = make_state(0, m=64)
        out = replay(s0, pairs, cfg, OBS)
        rebuilt = relearn(s0.belief.seed, out.evidence_log, OBS,
                          d=s0.belief.d, m=s0.belief.m,
                          resample_final=cfg.resample, sigma_rw=cfg.sigma_rw)
        np.testing.assert_allclose(out.belief.weights, rebuilt.weights, atol=1e-12)

    def test_replay_error_names_step(self):
        state, pool = make_state(2)
        good_q = comparison_query(state.dataset_trajectories())
        bad_q = comparison_query(state.dataset_trajectories())
        pairs = [(good_q, Response("comparison", 0)), (bad_q, Response("comparison", 9))]
        with pytest.raises(ContractError, match="step 1"):
            replay(state, pairs, CFG, OBS)
