"""Response likelihoods, their gradients, and the simulated human."""
import math

import numpy as np
import pytest

from activereward.domain import Trajectory
from activereward.errors import ContractError, DomainError, EmptySupportError
from activereward.humans import (
    ObservationModel,
    SimulatedHuman,
    grad_log_likelihood,
    likelihood,
    respond,
    response_distribution,
)
from activereward.queries import (
    ComparisonQuery,
    CorrectionQuery,
    DemonstrationQuery,
    FeatureLabelQuery,
    LabelQuery,
    Response,
    response_support,
)

TRAJ = Trajectory(steps=(((0, 0), "stay"),))
TRAJ_B = Trajectory(steps=(((1, 0), "stay"),))
TRAJ_C = Trajectory(steps=(((0, 1), "stay"),))
TRAJ_D = Trajectory(steps=(((1, 1), "stay"),))


def comparison(phis, beta=1.0):
    items = (TRAJ, TRAJ_B, TRAJ_C, TRAJ_D)[: len(phis)]
    return ComparisonQuery(items=items, phis=np.array(phis)), ObservationModel(beta=beta)


class TestLikelihood:
    def test_equal_features_symmetric(self):
        q, model = comparison([[0.3, 0.1], [0.3, 0.1]])
        assert likelihood(model, q, Response("comparison", 0), np.array([1.0, 0.0])) == 0.5

    def test_beta_zero_uniform(self):
        q, model = comparison([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]], beta=0.0)
        dist = response_distribution(model, q, np.array([1.0, 0.0]))
        assert all(abs(p - 1 / 3) < 1e-12 for p in dist.values())

        label = LabelQuery(candidate=TRAJ, phi=np.array([0.9, 0.0]))
        dist = response_distribution(ObservationModel(beta=0.0), label, np.array([1.0, 0.0]))
        assert all(abs(p - 0.5) < 1e-12 for p in dist.values())

    def test_two_item_softmax_value(self):
        # softmax(beta * [1, 0]) picks item a with probability e / (1 + e)
        q, model = comparison([[1.0, 0.0], [0.0, 0.0]], beta=1.0)
        p = likelihood(model, q, Response("comparison", 0), np.array([1.0, 0.0]))
        assert abs(p - math.e / (1 + math.e)) < 1e-12
        assert abs(p - 0.7310585786300049) < 1e-12

    def test_label_sigmoid_form(self):
        model = ObservationModel(beta=2.0, label_threshold=0.5)
        q = LabelQuery(candidate=TRAJ, phi=np.array([0.8, 0.0]))
        omega = np.array([1.0, 0.0])
        expected = 1.0 / (1.0 + math.exp(-2.0 * (0.8 - 0.5)))
        assert abs(likelihood(model, q, Response("label", "good"), omega) - expected) < 1e-12
        assert abs(likelihood(model, q, Response("label", "bad"), omega) - (1 - expected)) < 1e-12

    def test_feature_label_uses_weight_magnitude(self):
        model = ObservationModel(beta=3.0, feature_threshold=0.25)
        q = FeatureLabelQuery(feature_index=1, probe=TRAJ, phi=np.array([0.0, 1.0]))
        omega = np.array([0.6, -0.8])
        expected = 1.0 / (1.0 + math.exp(-3.0 * (0.8 - 0.25)))
        assert abs(likelihood(model, q, Response("feature_label", "relevant"), omega)
                   - expected) < 1e-12

    def test_out_of_support_response_is_zero(self):
        q = DemonstrationQuery(start=(0, 0), waypoints=(), support=(TRAJ,),
                               phis=np.array([[0.1, 0.2]]))
        model = ObservationModel(beta=1.0)
        assert likelihood(model, q, Response("demonstration", TRAJ_B),
                          np.array([1.0, 0.0])) == 0.0

    def test_kind_mismatch_is_contract_error(self):
        q, model = comparison([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(ContractError):
            likelihood(model, q, Response("label", "good"), np.array([1.0, 0.0]))

    def test_feature_weights_scale_features(self):
        model = ObservationModel(beta=1.0)
        q, _ = comparison([[1.0, 0.0], [0.0, 0.0]])
        omega = np.array([1.0, 0.0])
        damped = likelihood(model, q, Response("comparison", 0), omega,
                            feature_weights=np.array([0.0, 1.0]))
        assert abs(damped - 0.5) < 1e-12

    def test_extreme_beta_is_finite(self):
        q, model = comparison([[1.0, 0.0], [0.0, 0.0]], beta=1e6)
        for resp in response_support(q):
            p = likelihood(model, q, resp, np.array([1.0, 0.0]))
            assert np.isfinite(p)
        label = LabelQuery(candidate=TRAJ, phi=np.array([1.0, 0.0]))
        big = ObservationModel(beta=1e6)
        assert likelihood(big, label, Response("label", "good"), np.array([1.0, 0.0])) == 1.0

    def test_negative_beta_rejected(self):
        with pytest.raises(DomainError):
            ObservationModel(beta=-1.0)


class TestResponseDistribution:
    def test_binary_sums_to_one(self):
        q = LabelQuery(candidate=TRAJ, phi=np.array([0.4, 0.4]))
        dist = response_distribution(ObservationModel(beta=2.0), q, np.array([0.6, 0.8]))
        assert len(dist) == 2
        assert abs(sum(dist.values()) - 1.0) < 1e-12

    def test_three_way_tie(self):
        q, model = comparison([[0.5, 0.5]] * 3, beta=4.0)
        dist = response_distribution(model, q, np.array([0.0, 1.0]))
        assert all(abs(p - 1 / 3) < 1e-12 for p in dist.values())

    def test_demonstration_hand_softmax(self):
        # utilities omega . phi = [0.2, -0.1, 0.4, 0.0], beta = 2
        phis = np.array([[0.2, 0.0], [-0.1, 0.0], [0.4, 0.0], [0.0, 0.0]])
        q = DemonstrationQuery(start=(0, 0), waypoints=(),
                               support=(TRAJ, TRAJ_B, TRAJ_C, TRAJ_D), phis=phis)
        model = ObservationModel(beta=2.0)
        dist = response_distribution(model, q, np.array([1.0, 0.0]))
        exp = [math.exp(2 * u) for u in (0.2, -0.1, 0.4, 0.0)]
        z = sum(exp)
        got = [dist[r] for r in response_support(q)]
        for g, e in zip(got, exp):
            assert abs(g - e / z) < 1e-12

    def test_empty_support_raises(self):
        q = CorrectionQuery(target=TRAJ, candidates=(), phis=np.zeros((0, 2)))
        with pytest.raises(EmptySupportError):
            response_distribution(ObservationModel(beta=1.0), q, np.array([1.0, 0.0]))

    def test_normalization_grid(self):
        rng = np.random.default_rng(0)
        model = ObservationModel(beta=3.0)
        phis = rng.normal(size=(4, 3))
        q = DemonstrationQuery(start=(0, 0), waypoints=(),
                               support=(TRAJ, TRAJ_B, TRAJ_C, TRAJ_D), phis=phis)
        for _ in range(100):
            omega = rng.normal(size=3)
            omega /= np.linalg.norm(omega)
            dist = response_distribution(model, q, omega)
            assert abs(sum(dist.values()) - 1.0) < 1e-12

    def test_comparison_monotone_in_utility_gap(self):
        model = ObservationModel(beta=2.0)
        omega = np.array([1.0, 0.0])
        last = 0.0
        for gap in (0.1, 0.2, 0.5, 1.0):
            q = ComparisonQuery(items=(TRAJ, TRAJ_B),
                                phis=np.array([[gap, 0.0], [0.0, 0.0]]))
            p = likelihood(model, q, Response("comparison", 0), omega)
            assert p > last
            last = p

    def test_scale_invariance(self):
        # scaling features by c and beta by 1/c leaves the softmax unchanged
        rng = np.random.default_rng(3)
        phis = rng.normal(size=(3, 4))
        omega = rng.normal(size=4)
        omega /= np.linalg.norm(omega)
        items = (TRAJ, TRAJ_B, TRAJ_C)
        c = 37.5
        qa = ComparisonQuery(items=items, phis=phis)
        qb = ComparisonQuery(items=items, phis=c * phis)
        da = response_distribution(ObservationModel(beta=2.0), qa, omega)
        db = response_distribution(ObservationModel(beta=2.0 / c), qb, omega)
        for ra, rb in zip(response_support(qa), response_support(qb)):
            assert abs(da[ra] - db[rb]) < 1e-12


class TestRespond:
    def human(self, beta, omega=(1.0, 0.0), seed=0):
        return SimulatedHuman(omega_star=np.array(omega), model=ObservationModel(beta=beta),
                              rng=np.random.default_rng(seed))

    def test_rational_limit_picks_best(self):
        q, _ = comparison([[0.0, 0.0], [1.0, 0.0]])
        h = self.human(beta=1e6)
        for _ in range(20):
            assert respond(h, q) == Response("comparison", 1)

    def test_beta_zero_empirical_uniform(self):
        q, _ = comparison([[1.0, 0.0], [0.0, 0.0]])
        h = self.human(beta=0.0, seed=7)
        n = 100_000
        picks = sum(respond(h, q).value == 0 for _ in range(n))
        assert abs(picks / n - 0.5) < 0.01

    def test_seeded_determinism(self):
        q, _ = comparison([[0.4, 0.0], [0.0, 0.4]])
        a = [respond(self.human(2.0, seed=42), q) for _ in range(5)]
        b = [respond(self.human(2.0, seed=42), q) for _ in range(5)]
        assert a == b

    def test_empty_support_raises(self):
        q = DemonstrationQuery(start=(0, 0), waypoints=(), support=(), phis=np.zeros((0, 2)))
        with pytest.raises(EmptySupportError):
            respond(self.human(1.0), q)

    def test_non_unit_omega_star_rejected(self):
        with pytest.raises(DomainError):
            SimulatedHuman(omega_star=np.array([2.0, 0.0]),
                           model=ObservationModel(beta=1.0),
                           rng=np.random.default_rng(0))


class TestGradients:
    def finite_difference(self, model, q, resp, omega, u=None, h=1e-5):
        g = np.zeros_like(omega)
        for j in range(omega.size):
            up, dn = omega.copy(), omega.copy()
            up[j] += h
            dn[j] -= h
            g[j] = (math.log(likelihood(model, q, resp, up, u))
                    - math.log(likelihood(model, q, resp, dn, u))) / (2 * h)
        return g

    def check(self, model, q, resp, omega, u=None):
        got = grad_log_likelihood(model, q, resp, omega, u)
        want = self.finite_difference(model, q, resp, omega, u)
        assert np.linalg.norm(got - want) <= 1e-5 * max(np.linalg.norm(want), 1e-12)

    def test_label_gradient(self):
        rng = np.random.default_rng(11)
        model = ObservationModel(beta=2.5)
        for _ in range(20):
            omega = rng.normal(size=3)
            omega /= np.linalg.norm(omega)
            q = LabelQuery(candidate=TRAJ, phi=rng.normal(size=3))
            for value in ("good", "bad"):
                self.check(model, q, Response("label", value), omega)

    def test_softmax_gradient(self):
        rng = np.random.default_rng(12)
        model = ObservationModel(beta=3.0)
        for _ in range(20):
            omega = rng.normal(size=4)
            omega /= np.linalg.norm(omega)
            phis = rng.normal(size=(3, 4))
            q = ComparisonQuery(items=(TRAJ, TRAJ_B, TRAJ_C), phis=phis)
            for k in range(3):
                self.check(model, q, Response("comparison", k), omega)

    def test_feature_label_gradient_away_from_zero(self):
        model = ObservationModel(beta=2.0)
        omega = np.array([0.6, 0.8])
        q = FeatureLabelQuery(feature_index=1, probe=TRAJ, phi=np.array([0.0, 1.0]))
        for value in ("relevant", "not_relevant"):
            self.check(model, q, Response("feature_label", value), omega)

    def test_feature_weights_enter_gradient(self):
        model = ObservationModel(beta=2.0)
        omega = np.array([0.6, 0.8])
        u = np.array([0.5, 1.0])
        q = LabelQuery(candidate=TRAJ, phi=np.array([0.7, -0.2]))
        self.check(model, q, Response("label", "good"), omega, u)
