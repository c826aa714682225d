"""Meta-level decision process: dataset + belief states and query transitions.

A state bundles everything the learner knows: the labeled dataset, the
particle belief over reward weights, the feature relevance vector, and the
evidence log that produced them. Asking a query and receiving a response
moves the state forward in two stages: a dataset transform (append,
replace, or nothing, depending on the query variant) followed by a belief
update from the new evidence.

States are immutable snapshots; a transition returns a new state, so a
serialized snapshot mid-run restores the exact chain.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .belief import Belief, bayes_update, relearn
from .domain import GridWorld, Trajectory, enumerate_trajectories, features
from .errors import ContractError, StateConsistencyError
from .humans import ObservationModel
from .queries import (
    BAD,
    GOOD,
    RELEVANT,
    ComparisonQuery,
    CorrectionQuery,
    DemonstrationQuery,
    Evidence,
    FeatureLabelQuery,
    LabelQuery,
    Query,
    Response,
    response_index,
)

ANNOTATIONS = ("unlabeled", "good", "bad", "demonstrated", "corrected")


@dataclass(frozen=True)
class LabeledItem:
    """One dataset entry: a trajectory, how it was annotated, and its weight."""

    trajectory: Trajectory
    annotation: str = "unlabeled"
    weight: float = 1.0

    def __post_init__(self):
        if self.annotation not in ANNOTATIONS:
            raise ContractError(f"unknown annotation {self.annotation!r}")
        if not 0.0 <= self.weight <= 1.0:
            raise ContractError(f"item weight must be in [0, 1], got {self.weight}")


@dataclass(frozen=True, eq=False)
class InfoState:
    """Everything the learner knows after ``step`` queries."""

    dataset: tuple[LabeledItem, ...]
    belief: Belief
    feature_weights: np.ndarray  # (d,), components in [0, 1]
    evidence_log: tuple[Evidence, ...] = ()
    step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dataset", tuple(self.dataset))
        object.__setattr__(
            self, "feature_weights", np.asarray(self.feature_weights, dtype=np.float64)
        )
        object.__setattr__(self, "evidence_log", tuple(self.evidence_log))
        u = self.feature_weights
        if u.ndim != 1 or np.any(u < 0) or np.any(u > 1):
            raise ContractError("feature weights must be a vector with components in [0, 1]")

    def dataset_trajectories(self) -> tuple[Trajectory, ...]:
        return tuple(item.trajectory for item in self.dataset)


def initial_state(belief: Belief, d: int | None = None) -> InfoState:
    """Fresh state: empty dataset, all features fully relevant."""
    return InfoState(
        dataset=(),
        belief=belief,
        feature_weights=np.ones(d if d is not None else belief.d),
    )


@dataclass(frozen=True)
class TransitionConfig:
    """Knobs of the transition function.

    ``alpha`` probabilistically gates dataset mutations (1 = always apply);
    the belief update is never gated. ``gamma`` is the meta-level discount;
    it is carried for planners that look ahead and is unused by the greedy
    policy. ``relearn_mode`` chooses between conditioning the existing
    belief (incremental) and rebuilding it from the prior over the full
    evidence log (batch).
    """

    alpha: float = 1.0
    tuning_enabled: bool = False
    tuning_decay: float = 0.5
    relearn_mode: str = "incremental"
    gamma: float = 0.9
    feature_delta: float = 0.5
    resample: bool = True
    sigma_rw: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.tuning_decay < 1.0:
            raise ContractError(f"tuning_decay must be in [0, 1), got {self.tuning_decay}")
        if self.relearn_mode not in ("incremental", "batch"):
            raise ContractError(f"unknown relearn_mode {self.relearn_mode!r}")


@dataclass(frozen=True)
class QueryBudgets:
    """How many candidates of each variant to generate per step."""

    label: int = 0
    comparison: int = 0
    demonstration: int = 0
    feature_label: int = 0
    correction: int = 0
    comparison_k: int = 2
    support_cap: int = 64

    def __post_init__(self):
        for name in ("label", "comparison", "demonstration", "feature_label", "correction"):
            if getattr(self, name) < 0:
                raise ContractError(f"budget {name} must be >= 0")
        if self.comparison_k < 2:
            raise ContractError("comparison_k must be >= 2")
        if self.support_cap < 1:
            raise ContractError("support_cap must be >= 1")


FeatureFn = Callable[[GridWorld, Trajectory], np.ndarray]


def _sample_keep_order(rng: np.random.Generator, items: Sequence, count: int) -> list:
    if len(items) <= count:
        return list(items)
    keep = sorted(rng.choice(len(items), size=count, replace=False))
    return [items[i] for i in keep]


def legal_queries(
    state: InfoState,
    world: GridWorld,
    pool: Sequence[Trajectory],
    budgets: QueryBudgets,
    seed: int,
    feature_fn: FeatureFn = features,
) -> list[Query]:
    """Candidate queries that respect each variant's membership rules.

    Label candidates come from the pool minus the dataset; comparison
    tuples, feature-label probes, and correction targets come from the
    dataset; demonstration starts are free cells. Variants whose source is
    empty contribute nothing. Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    in_dataset = set(state.dataset_trajectories())
    dataset_trajs = state.dataset_trajectories()
    out: list[Query] = []

    if budgets.label:
        fresh = [t for t in pool if t not in in_dataset]
        for traj in _sample_keep_order(rng, fresh, budgets.label):
            out.append(LabelQuery(candidate=traj, phi=feature_fn(world, traj)))

    if budgets.comparison and len(dataset_trajs) >= budgets.comparison_k:
        combos = list(itertools.combinations(range(len(dataset_trajs)), budgets.comparison_k))
        for combo in _sample_keep_order(rng, combos, budgets.comparison):
            items = tuple(dataset_trajs[i] for i in combo)
            out.append(ComparisonQuery(
                items=items,
                phis=np.stack([feature_fn(world, t) for t in items]),
            ))

    if budgets.demonstration:
        starts = world.free_cells()
        for start in _sample_keep_order(rng, starts, budgets.demonstration):
            support_seed = int(rng.integers(2**32))
            support = tuple(enumerate_trajectories(
                world, start, (), max_count=budgets.support_cap, seed=support_seed))
            if not support:
                continue
            out.append(DemonstrationQuery(
                start=start,
                waypoints=(),
                support=support,
                phis=np.stack([feature_fn(world, t) for t in support]),
            ))

    d = state.feature_weights.shape[0]
    if budgets.feature_label and dataset_trajs:
        pairs = [(i, j) for i in range(d) for j in range(len(dataset_trajs))]
        for i, j in _sample_keep_order(rng, pairs, budgets.feature_label):
            probe = dataset_trajs[j]
            out.append(FeatureLabelQuery(
                feature_index=i, probe=probe, phi=feature_fn(world, probe)))

    if budgets.correction and dataset_trajs:
        targets = _sample_keep_order(rng, list(range(len(dataset_trajs))), budgets.correction)
        for j in targets:
            target = dataset_trajs[j]
            cand_seed = int(rng.integers(2**32))
            candidates = tuple(enumerate_trajectories(
                world, target.start_state, (), max_count=budgets.support_cap, seed=cand_seed))
            if not candidates:
                continue
            out.append(CorrectionQuery(
                target=target,
                candidates=candidates,
                phis=np.stack([feature_fn(world, t) for t in candidates]),
            ))

    return out


@dataclass(frozen=True)
class TransitionRecord:
    """What a transition did, for transcripts and integrity checks."""

    step: int
    alpha_draw: float | None
    dataset_delta: int
    belief_generation: int
    dataset_mutated: bool


def _apply_tuning(
    dataset: list[LabeledItem], query: ComparisonQuery, chosen: int, decay: float
) -> None:
    """Down-weight stored good/demonstrated items that just lost a comparison."""
    losers = {t for k, t in enumerate(query.items) if k != chosen}
    for i, item in enumerate(dataset):
        if item.trajectory in losers and item.annotation in (GOOD, "demonstrated"):
            dataset[i] = replace(item, weight=item.weight * decay)


def transition_with_record(
    state: InfoState,
    query: Query,
    response: Response,
    cfg: TransitionConfig,
    obs: ObservationModel,
    rng: np.random.Generator | None = None,
    alpha_draw: float | None = None,
) -> tuple[InfoState, TransitionRecord]:
    """Apply one query/response to the state; also report what happened.

    With ``cfg.alpha < 1`` the dataset mutation is applied only when a
    uniform draw falls below alpha; pass ``alpha_draw`` to reuse a recorded
    draw instead of consuming ``rng``. The evidence append and belief
    update always apply.
    """
    idx = response_index(query, response)
    if idx is None:
        raise ContractError("response is outside the query's support")

    draw: float | None = None
    mutate = True
    if cfg.alpha < 1.0:
        if alpha_draw is not None:
            draw = float(alpha_draw)
        elif rng is not None:
            draw = float(rng.uniform())
        else:
            raise ContractError("alpha < 1 requires an rng or a recorded alpha_draw")
        mutate = draw < cfg.alpha

    dataset = list(state.dataset)
    u = state.feature_weights

    if isinstance(query, LabelQuery):
        if mutate:
            dataset.append(LabeledItem(query.candidate, annotation=response.value))
    elif isinstance(query, ComparisonQuery):
        if cfg.tuning_enabled:
            _apply_tuning(dataset, query, int(response.value), cfg.tuning_decay)
    elif isinstance(query, DemonstrationQuery):
        if mutate:
            dataset.append(LabeledItem(response.value, annotation="demonstrated"))
    elif isinstance(query, FeatureLabelQuery):
        u = u.copy()
        i = query.feature_index
        if response.value == RELEVANT:
            u[i] = min(1.0, u[i] * (1.0 + cfg.feature_delta))
        else:
            u[i] = u[i] * (1.0 - cfg.feature_delta)
    elif isinstance(query, CorrectionQuery):
        if mutate:
            positions = [i for i, item in enumerate(dataset)
                         if item.trajectory == query.target]
            if not positions:
                raise StateConsistencyError("correction target is not in the dataset")
            dataset.pop(positions[0])
            dataset.append(LabeledItem(response.value, annotation="corrected"))
    else:
        raise ContractError(f"unknown query type {type(query).__name__}")

    evidence = Evidence(query=query, response=response, weight=1.0, feature_weights=u)
    log = (*state.evidence_log, evidence)
    if cfg.relearn_mode == "batch":
        belief = relearn(
            state.belief.seed, log, obs, d=state.belief.d, m=state.belief.m,
            resample_final=cfg.resample, sigma_rw=cfg.sigma_rw,
        )
    else:
        belief = bayes_update(
            state.belief, evidence, obs,
            history=state.evidence_log, resample=cfg.resample, sigma_rw=cfg.sigma_rw,
        )

    new_state = InfoState(
        dataset=tuple(dataset),
        belief=belief,
        feature_weights=u,
        evidence_log=log,
        step=state.step + 1,
    )
    record = TransitionRecord(
        step=new_state.step,
        alpha_draw=draw,
        dataset_delta=len(dataset) - len(state.dataset),
        belief_generation=belief.generation,
        dataset_mutated=mutate,
    )
    return new_state, record


def transition(
    state: InfoState,
    query: Query,
    response: Response,
    cfg: TransitionConfig,
    obs: ObservationModel,
    rng: np.random.Generator | None = None,
    alpha_draw: float | None = None,
) -> InfoState:
    """Apply one query/response pair; see ``transition_with_record``."""
    return transition_with_record(state, query, response, cfg, obs, rng, alpha_draw)[0]


def replay(
    initial: InfoState,
    transcript: Sequence[tuple[Query, Response]],
    cfg: TransitionConfig,
    obs: ObservationModel,
    rng: np.random.Generator | None = None,
    alpha_draws: Sequence[float | None] | None = None,
) -> InfoState:
    """Fold a transcript of (query, response) pairs over an initial state.

    Errors raised by a transition are re-raised with the failing 0-based
    step index prepended.
    """
    state = initial
    for i, (query, response) in enumerate(transcript):
        draw = alpha_draws[i] if alpha_draws is not None else None
        try:
            state = transition(state, query, response, cfg, obs, rng, draw)
        except Exception as exc:
            raise type(exc)(f"step {i}: {exc}") from exc
    return state
