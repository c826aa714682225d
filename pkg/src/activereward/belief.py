"""Weighted particle posterior over unit reward-weight vectors.

The learned reward is a distribution, not a point: M unit vectors with
normalized weights. Conditioning on evidence multiplies each weight by the
particle's response likelihood (raised to the evidence weight) and
renormalizes. When the effective sample size drops below M/2 the cloud is
systematically resampled and refreshed with one Metropolis-adjusted
random-walk step per particle, targeting the posterior over the full
evidence log.

Belief values are immutable snapshots: every update returns a new value
and never touches the input's arrays or generator.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateEvidenceError, DomainError
from .humans import ObservationModel, likelihood_vector
from .queries import Evidence

#: Random-walk scale used by rejuvenation unless overridden.
DEFAULT_SIGMA_RW = 0.1


@dataclass(frozen=True, eq=False)
class Belief:
    """Immutable particle snapshot.

    ``seed`` records the prior seed the cloud was initialized from, so the
    belief can be rebuilt from scratch against an evidence log.
    """

    particles: np.ndarray  # (M, d), unit rows
    weights: np.ndarray  # (M,), nonnegative, sums to 1
    rng: np.random.Generator
    generation: int = 0
    seed: int = 0

    @property
    def m(self) -> int:
        return self.particles.shape[0]

    @property
    def d(self) -> int:
        return self.particles.shape[1]


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / norms


def init_belief(d: int, m: int, seed: int) -> Belief:
    """Uniform prior: M particles drawn uniformly from the unit sphere in R^d."""
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    if m < 2:
        raise DomainError(f"particle count must be >= 2, got {m}")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((m, d))
    # a zero row has probability 0 but would poison the normalization
    while True:
        norms = np.linalg.norm(raw, axis=1)
        bad = norms < 1e-12
        if not bad.any():
            break
        raw[bad] = rng.standard_normal((int(bad.sum()), d))
    return Belief(
        particles=_unit_rows(raw),
        weights=np.full(m, 1.0 / m),
        rng=rng,
        generation=0,
        seed=seed,
    )


def effective_sample_size(weights: np.ndarray) -> float:
    total = weights.sum()
    return float(total * total / np.square(weights).sum())


def _systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m = weights.shape[0]
    positions = (rng.uniform() + np.arange(m)) / m
    return np.searchsorted(np.cumsum(weights), positions).clip(max=m - 1)


def _log_posterior(
    particles: np.ndarray, evidence_log: Sequence[Evidence], obs: ObservationModel
) -> np.ndarray:
    """Unnormalized log posterior of each particle under the whole log."""
    total = np.zeros(particles.shape[0])
    for ev in evidence_log:
        like = likelihood_vector(obs, ev.query, ev.response, particles, ev.feature_weights)
        with np.errstate(divide="ignore"):
            total += ev.weight * np.log(like)
    return total


def _rejuvenate(
    particles: np.ndarray,
    evidence_log: Sequence[Evidence],
    obs: ObservationModel,
    rng: np.random.Generator,
    sigma_rw: float,
) -> np.ndarray:
    """One Gaussian random-walk step per particle, Metropolis-corrected."""
    proposals = _unit_rows(particles + sigma_rw * rng.standard_normal(particles.shape))
    lp_old = _log_posterior(particles, evidence_log, obs)
    lp_new = _log_posterior(proposals, evidence_log, obs)
    # -inf log posteriors make the delta NaN; NaN compares False, so those
    # proposals are rejected, which is the conservative choice
    with np.errstate(invalid="ignore", divide="ignore"):
        accept = np.log(rng.uniform(size=particles.shape[0])) < (lp_new - lp_old)
    out = particles.copy()
    out[accept] = proposals[accept]
    return out


def bayes_update(
    belief: Belief,
    evidence: Evidence,
    obs: ObservationModel,
    *,
    history: Sequence[Evidence] = (),
    resample: bool = True,
    sigma_rw: float = DEFAULT_SIGMA_RW,
) -> Belief:
    """Condition the belief on one piece of evidence.

    ``history`` is the evidence already folded into the belief (oldest
    first); it is only consulted when a resample triggers rejuvenation,
    whose Metropolis target is the posterior over history + evidence.

    Raises DegenerateEvidenceError (and leaves the input belief untouched)
    when every particle has zero likelihood.
    """
    like = likelihood_vector(obs, evidence.query, evidence.response, belief.particles,
                             evidence.feature_weights)
    new_weights = belief.weights * np.power(like, evidence.weight)
    total = new_weights.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateEvidenceError(
            "evidence has zero likelihood under every particle; belief unchanged"
        )
    new_weights = new_weights / total

    rng = copy.deepcopy(belief.rng)
    particles = belief.particles
    if resample and effective_sample_size(new_weights) < belief.m / 2:
        idx = _systematic_resample(new_weights, rng)
        particles = particles[idx]
        new_weights = np.full(belief.m, 1.0 / belief.m)
        particles = _rejuvenate(particles, [*history, evidence], obs, rng, sigma_rw)
    return Belief(
        particles=particles,
        weights=new_weights,
        rng=rng,
        generation=belief.generation + 1,
        seed=belief.seed,
    )


def relearn(
    prior_seed: int,
    evidence_log: Sequence[Evidence],
    obs: ObservationModel,
    d: int,
    m: int,
    *,
    resample_final: bool = True,
    sigma_rw: float = DEFAULT_SIGMA_RW,
) -> Belief:
    """Rebuild the belief from the prior by folding the whole evidence log.

    Resampling is disabled for all but the final entry, so the result is a
    pure function of the log (and, with ``resample_final=False``, equals
    the incremental no-resample fold exactly).
    """
    belief = init_belief(d, m, prior_seed)
    last = len(evidence_log) - 1
    for i, ev in enumerate(evidence_log):
        belief = bayes_update(
            belief,
            ev,
            obs,
            history=evidence_log[:i],
            resample=resample_final and i == last,
            sigma_rw=sigma_rw,
        )
    return belief


def mean_estimate(belief: Belief) -> np.ndarray:
    """Weighted particle mean, renormalized to the unit sphere.

    Falls back to the highest-weight particle (first on ties) when the
    mean is numerically zero, e.g. for an antipodal pair.
    """
    mu = belief.weights @ belief.particles
    norm = np.linalg.norm(mu)
    if norm < 1e-12:
        return belief.particles[int(np.argmax(belief.weights))].copy()
    return mu / norm


def spread(belief: Belief) -> float:
    """Trace of the weighted particle covariance; 0 means full agreement."""
    mu = belief.weights @ belief.particles
    diffs = belief.particles - mu
    return float(max(0.0, belief.weights @ np.square(diffs).sum(axis=1)))
