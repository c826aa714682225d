"""Boltzmann-rational response likelihoods and a seeded simulated human.

Response probability is proportional to the exponentiated utility of each
option under a weight vector. ``beta`` is the rationality temperature:
0 makes every answer uniform, large values approach a perfectly rational
chooser. All softmax/sigmoid evaluations subtract the row maximum first,
so probabilities stay finite for beta up to 1e6 and beyond.

Likelihoods optionally apply a per-dimension feature relevance vector
``feature_weights`` elementwise to the query's feature rows before taking
dot products. The simulated human always answers from the raw features of
its own ground-truth weights; relevance reweighting is a modelling device
on the learner's side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ContractError, DomainError, EmptySupportError
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


@dataclass(frozen=True)
class ObservationModel:
    """Parameters of the human response model.

    ``label_threshold`` is the return level above which a trajectory reads
    as "good"; ``feature_threshold`` is the weight magnitude above which a
    feature reads as "relevant".
    """

    beta: float
    label_threshold: float = 0.5
    feature_threshold: float = 0.25

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise DomainError(f"beta must be finite and >= 0, got {self.beta}")


def _effective_phis(phis: np.ndarray, feature_weights: np.ndarray | None) -> np.ndarray:
    if feature_weights is None:
        return phis
    u = np.asarray(feature_weights, dtype=np.float64)
    if u.shape != (phis.shape[-1],):
        raise ContractError(
            f"feature_weights shape {u.shape} does not match feature dim {phis.shape[-1]}"
        )
    return phis * u


def _softmax_rows(utilities: np.ndarray) -> np.ndarray:
    shifted = utilities - utilities.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def likelihood_matrix(
    model: ObservationModel,
    query: Query,
    omegas: np.ndarray,
    feature_weights: np.ndarray | None = None,
) -> np.ndarray:
    """Response probabilities for each weight vector.

    ``omegas`` is (n, d); the result is (n, R) with columns in
    ``response_support`` order, each row summing to 1.
    """
    omegas = np.atleast_2d(np.asarray(omegas, dtype=np.float64))
    if isinstance(query, LabelQuery):
        phi = _effective_phis(query.phi, feature_weights)
        z = model.beta * (omegas @ phi - model.label_threshold)
        p_good = expit(z)
        return np.column_stack([p_good, 1.0 - p_good])
    if isinstance(query, (ComparisonQuery, DemonstrationQuery, CorrectionQuery)):
        phis = query.phis
        if phis.shape[0] == 0:
            raise EmptySupportError(f"{query.kind} query has empty support")
        psis = _effective_phis(phis, feature_weights)
        return _softmax_rows(model.beta * (omegas @ psis.T))
    if isinstance(query, FeatureLabelQuery):
        if query.feature_index >= omegas.shape[1]:
            raise ContractError(
                f"feature_index {query.feature_index} out of range for d={omegas.shape[1]}"
            )
        z = model.beta * (np.abs(omegas[:, query.feature_index]) - model.feature_threshold)
        p_rel = expit(z)
        return np.column_stack([p_rel, 1.0 - p_rel])
    raise ContractError(f"unknown query type {type(query).__name__}")


def likelihood_vector(
    model: ObservationModel,
    query: Query,
    response: Response,
    omegas: np.ndarray,
    feature_weights: np.ndarray | None = None,
) -> np.ndarray:
    """P(response | query, omega) for each row of ``omegas``.

    A well-typed response outside the query's support has probability 0
    for every weight vector.
    """
    idx = response_index(query, response)
    omegas = np.atleast_2d(np.asarray(omegas, dtype=np.float64))
    if idx is None:
        return np.zeros(omegas.shape[0])
    return likelihood_matrix(model, query, omegas, feature_weights)[:, idx]


def likelihood(
    model: ObservationModel,
    query: Query,
    response: Response,
    omega: np.ndarray,
    feature_weights: np.ndarray | None = None,
) -> float:
    """Scalar P(response | query, omega)."""
    return float(likelihood_vector(model, query, response, omega, feature_weights)[0])


def response_distribution(
    model: ObservationModel,
    query: Query,
    omega: np.ndarray,
    feature_weights: np.ndarray | None = None,
) -> dict[Response, float]:
    """Full normalized distribution over the query's response support."""
    support = response_support(query)
    probs = likelihood_matrix(model, query, np.asarray(omega), feature_weights)[0]
    return {resp: float(p) for resp, p in zip(support, probs)}


def grad_log_likelihood(
    model: ObservationModel,
    query: Query,
    response: Response,
    omega: np.ndarray,
    feature_weights: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient of log P(response | query, omega) with respect to omega.

    The gradient is taken in the ambient space (no sphere projection);
    callers that need the tangent component project afterwards.
    """
    omega = np.asarray(omega, dtype=np.float64)
    idx = response_index(query, response)
    if idx is None:
        raise ContractError("cannot differentiate a zero-probability response")
    if isinstance(query, LabelQuery):
        phi = _effective_phis(query.phi, feature_weights)
        z = model.beta * (omega @ phi - model.label_threshold)
        sig = expit(z)
        return model.beta * ((1.0 - sig) * phi if idx == 0 else -sig * phi)
    if isinstance(query, (ComparisonQuery, DemonstrationQuery, CorrectionQuery)):
        psis = _effective_phis(query.phis, feature_weights)
        probs = _softmax_rows(model.beta * (omega[None, :] @ psis.T))[0]
        return model.beta * (psis[idx] - probs @ psis)
    if isinstance(query, FeatureLabelQuery):
        i = query.feature_index
        z = model.beta * (abs(omega[i]) - model.feature_threshold)
        sig = expit(z)
        g = np.zeros_like(omega)
        sign = np.sign(omega[i])
        g[i] = model.beta * sign * ((1.0 - sig) if idx == 0 else -sig)
        return g
    raise ContractError(f"unknown query type {type(query).__name__}")


@dataclass(eq=False)
class SimulatedHuman:
    """A Boltzmann-rational oracle with known ground-truth weights.

    Holds its own generator, so a fixed seed gives a reproducible answer
    sequence. One human per session; callers serialize access.
    """

    omega_star: np.ndarray
    model: ObservationModel
    rng: np.random.Generator

    def __post_init__(self):
        self.omega_star = np.asarray(self.omega_star, dtype=np.float64)
        norm = np.linalg.norm(self.omega_star)
        if abs(norm - 1.0) > 1e-9:
            raise DomainError(f"omega_star must be unit-norm, got |w| = {norm}")


def respond(human: SimulatedHuman, query: Query) -> Response:
    """Sample a response from the human's own response distribution."""
    support = response_support(query)
    probs = likelihood_matrix(human.model, query, human.omega_star)[0]
    choice = human.rng.choice(len(support), p=probs / probs.sum())
    return support[int(choice)]
