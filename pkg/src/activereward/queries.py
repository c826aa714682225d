"""Query variants posed to a human, response values, and evidence records.

Each query carries the feature vectors of the trajectories it mentions, so
downstream likelihood math never needs the world again and a serialized
query is self-contained. Response supports are finite and ordered; that
order is the canonical column order for every likelihood computation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Union

import numpy as np

from .domain import Cell, Trajectory
from .errors import ContractError, EmptySupportError

GOOD = "good"
BAD = "bad"
RELEVANT = "relevant"
NOT_RELEVANT = "not_relevant"


@dataclass(frozen=True, eq=False)
class LabelQuery:
    """Ask whether one trajectory (not yet in the dataset) is good or bad."""

    kind: ClassVar[str] = "label"
    candidate: Trajectory
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class ComparisonQuery:
    """Ask which of K dataset trajectories is best."""

    kind: ClassVar[str] = "comparison"
    items: tuple[Trajectory, ...]
    phis: np.ndarray  # (K, d), rows follow ``items``

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "phis", np.asarray(self.phis, dtype=np.float64))
        if len(self.items) < 2:
            raise ContractError("comparison needs at least 2 items")
        if self.phis.shape[0] != len(self.items):
            raise ContractError("one feature row per compared item required")


@dataclass(frozen=True, eq=False)
class DemonstrationQuery:
    """Ask the human to pick the best trajectory from a start cell.

    The finite ``support`` (enumerated or sampled trajectories from the
    start, through any waypoints) stands in for the full trajectory space;
    likelihoods normalize over it.
    """

    kind: ClassVar[str] = "demonstration"
    start: Cell
    waypoints: tuple[Cell, ...]
    support: tuple[Trajectory, ...]
    phis: np.ndarray  # (n, d), rows follow ``support``

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "waypoints", tuple(tuple(w) for w in self.waypoints))
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "phis", np.asarray(self.phis, dtype=np.float64))
        if len(self.support) != self.phis.shape[0]:
            raise ContractError("one feature row per support trajectory required")


@dataclass(frozen=True, eq=False)
class FeatureLabelQuery:
    """Ask whether one feature dimension matters, shown against a probe trajectory."""

    kind: ClassVar[str] = "feature_label"
    feature_index: int
    probe: Trajectory
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=np.float64))
        if self.feature_index < 0:
            raise ContractError("feature_index must be >= 0")


@dataclass(frozen=True, eq=False)
class CorrectionQuery:
    """Ask the human to replace a dataset trajectory with a better candidate."""

    kind: ClassVar[str] = "correction"
    target: Trajectory
    candidates: tuple[Trajectory, ...]
    phis: np.ndarray  # (n, d), rows follow ``candidates``

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "phis", np.asarray(self.phis, dtype=np.float64))
        if len(self.candidates) != self.phis.shape[0]:
            raise ContractError("one feature row per candidate required")


Query = Union[
    LabelQuery, ComparisonQuery, DemonstrationQuery, FeatureLabelQuery, CorrectionQuery
]


@dataclass(frozen=True)
class Response:
    """A human answer: its kind must match the query it answers.

    Values by kind: label -> "good"/"bad"; comparison -> chosen index;
    demonstration/correction -> a trajectory from the query's support;
    feature_label -> "relevant"/"not_relevant".
    """

    kind: str
    value: Union[str, int, Trajectory]


def response_support(query: Query) -> tuple[Response, ...]:
    """The ordered, finite set of responses the query admits."""
    if isinstance(query, LabelQuery):
        return (Response("label", GOOD), Response("label", BAD))
    if isinstance(query, ComparisonQuery):
        return tuple(Response("comparison", i) for i in range(len(query.items)))
    if isinstance(query, DemonstrationQuery):
        if not query.support:
            raise EmptySupportError("demonstration query has empty support")
        return tuple(Response("demonstration", t) for t in query.support)
    if isinstance(query, FeatureLabelQuery):
        return (
            Response("feature_label", RELEVANT),
            Response("feature_label", NOT_RELEVANT),
        )
    if isinstance(query, CorrectionQuery):
        if not query.candidates:
            raise EmptySupportError("correction query has no candidates")
        return tuple(Response("correction", t) for t in query.candidates)
    raise ContractError(f"unknown query type {type(query).__name__}")


def response_index(query: Query, response: Response) -> int | None:
    """Position of ``response`` in the query's support, or None if outside it.

    A mismatched response kind is a contract violation, not a zero-probability
    event.
    """
    if response.kind != query.kind:
        raise ContractError(
            f"response kind {response.kind!r} does not match query kind {query.kind!r}"
        )
    if isinstance(query, LabelQuery):
        return {GOOD: 0, BAD: 1}.get(response.value)
    if isinstance(query, ComparisonQuery):
        idx = response.value
        return idx if isinstance(idx, int) and 0 <= idx < len(query.items) else None
    if isinstance(query, DemonstrationQuery):
        try:
            return query.support.index(response.value)
        except ValueError:
            return None
    if isinstance(query, FeatureLabelQuery):
        return {RELEVANT: 0, NOT_RELEVANT: 1}.get(response.value)
    if isinstance(query, CorrectionQuery):
        try:
            return query.candidates.index(response.value)
        except ValueError:
            return None
    raise ContractError(f"unknown query type {type(query).__name__}")


def support_size(query: Query) -> int:
    return len(response_support(query))


@dataclass(frozen=True, eq=False)
class Evidence:
    """One (query, response) pair as the learner consumes it.

    ``weight`` scales the likelihood exponent, so down-weighted evidence
    pulls the posterior less. ``feature_weights`` snapshots the feature
    relevance vector in force when the evidence was gathered, making a log
    of evidence self-contained for batch relearning.
    """

    query: Query
    response: Response
    weight: float = 1.0
    feature_weights: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ContractError(f"evidence weight must be in [0, 1], got {self.weight}")
        if self.response.kind != self.query.kind:
            raise ContractError(
                f"evidence response kind {self.response.kind!r} does not match "
                f"query kind {self.query.kind!r}"
            )
        if self.feature_weights is not None:
            object.__setattr__(
                self, "feature_weights", np.asarray(self.feature_weights, dtype=np.float64)
            )
