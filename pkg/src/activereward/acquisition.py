"""Query scoring and selection: the value of asking, and the greedy policy.

Information gain is the headline score: the mutual information between the
reward-weight belief and the response a query would draw. Uncertainty
sampling, query-by-committee, expected model change, and random selection
share the same interface, so any of them can drive the loop.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .belief import Belief, mean_estimate
from .errors import ContractError, NoCandidatesError
from .humans import ObservationModel, grad_log_likelihood, likelihood_matrix
from .imdp import InfoState
from .queries import Query, Response, response_support

STRATEGY_KINDS = ("random", "uncertainty", "qbc", "expected_model_change", "info_gain")


@dataclass(frozen=True)
class Strategy:
    """A named query-selection rule plus its parameters."""

    kind: str
    committee_size: int = 8
    seed: int = 0
    lambda_cost: float = 0.0  # per-candidate ease-of-answering penalty weight

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ContractError(f"unknown strategy {self.kind!r}")
        if self.committee_size < 2:
            raise ContractError("committee_size must be >= 2")


@dataclass(frozen=True, eq=False)
class ScoredQuery:
    """A selected query, its score, and the belief's predicted response."""

    query: Query
    score: float
    predicted: dict[Response, float]


def _mixture(belief: Belief, query: Query, obs: ObservationModel,
             feature_weights: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Per-particle response matrix (M, R) and the predictive mixture (R,)."""
    per_particle = likelihood_matrix(obs, query, belief.particles, feature_weights)
    predictive = belief.weights @ per_particle
    return per_particle, predictive


def predictive_distribution(
    belief: Belief,
    query: Query,
    obs: ObservationModel,
    feature_weights: np.ndarray | None = None,
) -> dict[Response, float]:
    """Belief-averaged response distribution: sum_i w_i P(o | query, w_i)."""
    support = response_support(query)
    _, predictive = _mixture(belief, query, obs, feature_weights)
    total = predictive.sum()
    return {resp: float(p / total) for resp, p in zip(support, predictive)}


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def info_gain(
    belief: Belief,
    query: Query,
    obs: ObservationModel,
    feature_weights: np.ndarray | None = None,
) -> float:
    """Mutual information between the weight belief and the query's response.

    sum_i w_i sum_o P(o|w_i) log[P(o|w_i) / Pbar(o)], natural log, with
    0 log 0 read as 0. Zero when every particle predicts alike; at most
    log of the support size.
    """
    per_particle, predictive = _mixture(belief, query, obs, feature_weights)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log(per_particle) - np.log(predictive)[None, :]
        terms = np.where(per_particle > 0, per_particle * ratio, 0.0)
    return float(belief.weights @ terms.sum(axis=1))


def uncertainty_score(
    belief: Belief,
    query: Query,
    obs: ObservationModel,
    feature_weights: np.ndarray | None = None,
) -> float:
    """Shannon entropy of the predictive response distribution."""
    _, predictive = _mixture(belief, query, obs, feature_weights)
    return _entropy(predictive)


def qbc_score(
    belief: Belief,
    query: Query,
    obs: ObservationModel,
    committee_size: int,
    seed: int,
    feature_weights: np.ndarray | None = None,
) -> float:
    """Vote-entropy of a weighted committee of particles.

    Each committee member votes its most likely response (lowest index on
    ties); the score is the entropy of the vote distribution.
    """
    if committee_size > belief.m:
        raise ContractError(
            f"committee_size {committee_size} exceeds particle count {belief.m}")
    rng = np.random.default_rng(seed)
    members = rng.choice(belief.m, size=committee_size, replace=False, p=belief.weights)
    per_particle = likelihood_matrix(obs, query, belief.particles[members], feature_weights)
    votes = np.argmax(per_particle, axis=1)
    counts = np.bincount(votes, minlength=per_particle.shape[1]).astype(np.float64)
    return _entropy(counts / counts.sum())


def model_change_score(
    belief: Belief,
    query: Query,
    obs: ObservationModel,
    feature_weights: np.ndarray | None = None,
) -> float:
    """Expected norm of the log-likelihood gradient at the mean estimate.

    The gradient of each possible response is projected onto the tangent
    space of the unit sphere at the estimate (weights live on the sphere,
    so only tangential movement changes the model); the expectation is
    taken under the predictive distribution.
    """
    support = response_support(query)
    _, predictive = _mixture(belief, query, obs, feature_weights)
    mu = mean_estimate(belief)
    total = 0.0
    for prob, resp in zip(predictive, support):
        g = grad_log_likelihood(obs, query, resp, mu, feature_weights)
        tangential = g - (g @ mu) * mu
        total += prob * float(np.linalg.norm(tangential))
    return total


def score_query(
    strategy: Strategy,
    belief: Belief,
    query: Query,
    obs: ObservationModel,
    feature_weights: np.ndarray | None = None,
) -> float:
    if strategy.kind == "uncertainty":
        return uncertainty_score(belief, query, obs, feature_weights)
    if strategy.kind == "qbc":
        return qbc_score(belief, query, obs, strategy.committee_size, strategy.seed,
                         feature_weights)
    if strategy.kind == "expected_model_change":
        return model_change_score(belief, query, obs, feature_weights)
    if strategy.kind == "info_gain":
        return info_gain(belief, query, obs, feature_weights)
    raise ContractError(f"strategy {strategy.kind!r} has no per-query scorer")


def select_query(
    strategy: Strategy,
    state: InfoState,
    candidates: list[Query],
    obs: ObservationModel,
) -> ScoredQuery:
    """Score every candidate and return the best (earliest wins ties).

    With the info_gain strategy this is the one-step greedy policy on the
    meta-level reward.
    """
    if not candidates:
        raise NoCandidatesError("no candidate queries to select from")
    u = state.feature_weights
    if strategy.kind == "random":
        rng = np.random.default_rng(strategy.seed)
        scores = rng.uniform(size=len(candidates))
    else:
        scores = np.array([
            score_query(strategy, state.belief, q, obs, u) for q in candidates
        ])
    if strategy.lambda_cost:
        sizes = np.array([len(response_support(q)) for q in candidates], dtype=np.float64)
        scores = scores - strategy.lambda_cost * np.log(sizes)
    best = int(np.argmax(scores))
    chosen = candidates[best]
    return ScoredQuery(
        query=chosen,
        score=float(scores[best]),
        predicted=predictive_distribution(state.belief, chosen, obs, u),
    )
