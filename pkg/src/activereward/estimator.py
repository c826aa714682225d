"""Scikit-learn style facade over the particle reward learner.

``RewardBeliefEstimator`` fits on query/response evidence and predicts
trajectory rewards from feature vectors, so the learner drops into
pipelines and model-selection tooling that speak the estimator protocol.
The functional core stays immutable underneath; the estimator holds the
current belief snapshot as fitted state.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .belief import bayes_update, init_belief, mean_estimate, relearn, spread
from .humans import ObservationModel
from .validation import check_evidence_sequence, check_feature_matrix


class RewardBeliefEstimator(BaseEstimator):
    """Bayesian reward-weight inference with an estimator interface.

    Parameters
    ----------
    n_features : dimension of the trajectory feature vectors.
    n_particles : particle count of the posterior approximation.
    beta : rationality temperature of the response model.
    label_threshold, feature_threshold : response-model thresholds.
    resample : enable adaptive resampling with rejuvenation.
    sigma_rw : random-walk scale used by rejuvenation.
    random_state : prior seed.
    """

    def __init__(self, n_features=4, n_particles=200, beta=5.0, label_threshold=0.5,
                 feature_threshold=0.25, resample=True, sigma_rw=0.1, random_state=0):
        self.n_features = n_features
        self.n_particles = n_particles
        self.beta = beta
        self.label_threshold = label_threshold
        self.feature_threshold = feature_threshold
        self.resample = resample
        self.sigma_rw = sigma_rw
        self.random_state = random_state

    def _observation_model(self) -> ObservationModel:
        return ObservationModel(beta=self.beta, label_threshold=self.label_threshold,
                                feature_threshold=self.feature_threshold)

    def fit(self, X, y=None):
        """Rebuild the posterior from the prior over an evidence sequence.

        ``X`` is an iterable of Evidence objects or (query, response)
        pairs; ``y`` is ignored and present for API compatibility.
        """
        evidence = check_evidence_sequence(X)
        self.belief_ = relearn(
            self.random_state, evidence, self._observation_model(),
            d=self.n_features, m=self.n_particles,
            resample_final=self.resample, sigma_rw=self.sigma_rw,
        )
        self.evidence_log_ = list(evidence)
        self.n_features_in_ = self.n_features
        self.coef_ = mean_estimate(self.belief_)
        return self

    def partial_fit(self, X, y=None):
        """Condition the current posterior on additional evidence."""
        if not hasattr(self, "belief_"):
            self.belief_ = init_belief(self.n_features, self.n_particles,
                                       self.random_state)
            self.evidence_log_ = []
            self.n_features_in_ = self.n_features
        obs = self._observation_model()
        for ev in check_evidence_sequence(X):
            self.belief_ = bayes_update(
                self.belief_, ev, obs, history=tuple(self.evidence_log_),
                resample=self.resample, sigma_rw=self.sigma_rw,
            )
            self.evidence_log_.append(ev)
        self.coef_ = mean_estimate(self.belief_)
        return self

    def predict(self, X) -> np.ndarray:
        """Expected reward of each feature row under the posterior mean."""
        self._check_fitted()
        X = check_feature_matrix(X, self.n_features_in_)
        return X @ self.coef_

    def uncertainty(self) -> float:
        """Trace of the posterior particle covariance."""
        self._check_fitted()
        return spread(self.belief_)

    def _check_fitted(self):
        if not hasattr(self, "belief_"):
            raise NotFittedError(
                "this RewardBeliefEstimator is not fitted yet; call fit or partial_fit")
