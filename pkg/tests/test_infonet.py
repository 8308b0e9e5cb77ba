import numpy as np
import pytest

from cigen import infonet
from cigen.infonet import (InfoNet, LOGEXP_CLAMP, _logmeanexp, build_pairs,
                           dv_objective, dv_step, fit_and_estimate,
                           marginal_gradient_wrt_x_tilde)

# closed-form Gaussian MI: -0.5 ln(1 - rho^2)
MI_RHO_05 = 0.14384103622589045
MI_RHO_08 = 0.5108256237659907


def correlated_gaussians(rho, n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = rho * a + np.sqrt(1.0 - rho ** 2) * rng.normal(size=n)
    return a[:, None], b[:, None]


def zeroed(info):
    for w in info.network.weights:
        w[:] = 0.0
    for b in info.network.biases:
        b[:] = 0.0
    return info


class TestLogMeanExp:
    def test_constant_zero(self):
        value, saturated = _logmeanexp(np.zeros(4))
        assert value == 0.0 and not saturated

    def test_hand_value(self):
        value, _ = _logmeanexp(np.array([0.0, np.log(3.0)]))
        assert value == pytest.approx(np.log(2.0), abs=1e-12)

    def test_clamp_flags_saturation(self):
        value, saturated = _logmeanexp(np.array([LOGEXP_CLAMP + 10.0]))
        assert saturated
        assert value == pytest.approx(LOGEXP_CLAMP)

    def test_large_negative_inputs_are_fine(self):
        value, saturated = _logmeanexp(np.array([-1e4, -1e4]))
        assert value == pytest.approx(-1e4)
        assert not saturated


class TestObjective:
    def test_constant_witness_gives_zero(self):
        info = zeroed(InfoNet.create(1, seed=0))
        x = np.random.default_rng(0).normal(size=(20, 1))
        paired, marginal = build_pairs(x, x, np.random.default_rng(1))
        assert dv_objective(info, paired, marginal) == 0.0

    def test_needs_two_rows(self):
        info = InfoNet.create(1, seed=0)
        with pytest.raises(ValueError):
            dv_objective(info, np.zeros((1, 2)), np.zeros((1, 2)))

    def test_ascent_improves_on_dependent_data(self):
        x, y = correlated_gaussians(0.9, 500, seed=2)
        info = InfoNet.create(1, seed=3)
        rng = np.random.default_rng(4)
        paired, marginal = build_pairs(x, y, rng)
        before = dv_objective(info, paired, marginal)
        for _ in range(100):
            p, m = build_pairs(x, y, rng)
            dv_step(info, p, m)
        after = dv_objective(info, paired, marginal)
        assert after > before

    def test_nonfinite_weights_raise(self):
        info = InfoNet.create(1, seed=0)
        info.network.weights[0][0, 0] = np.nan
        x = np.zeros((4, 1))
        with pytest.raises(infonet.DivergedError):
            dv_step(info, np.hstack([x, x]), np.hstack([x, x]))


class TestBuildPairs:
    def test_shapes_and_content(self):
        x = np.arange(6.0).reshape(3, 2)
        xt = 10.0 + np.arange(6.0).reshape(3, 2)
        paired, marginal = build_pairs(x, xt, np.random.default_rng(0))
        assert paired.shape == (3, 4) and marginal.shape == (3, 4)
        assert np.array_equal(paired[:, :2], x)
        assert np.array_equal(marginal[:, :2], x)
        # the marginal block is a row permutation of x_tilde
        assert sorted(map(tuple, marginal[:, 2:])) == sorted(map(tuple, xt))

    def test_row_count_mismatch(self):
        with pytest.raises(ValueError):
            build_pairs(np.zeros((3, 1)), np.zeros((4, 1)),
                        np.random.default_rng(0))


class _FixedPerm:
    """Stand-in rng whose permutation is deterministic, for gradient checks."""

    def __init__(self, perm):
        self.perm = np.asarray(perm)

    def permutation(self, n):
        assert n == self.perm.size
        return self.perm.copy()


class TestMarginalGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(6, 1))
        xt = rng.normal(size=(6, 1))
        info = InfoNet.create(1, seed=6)
        perm = np.array([2, 0, 5, 4, 1, 3])
        value, grad = marginal_gradient_wrt_x_tilde(info, x, xt,
                                                    _FixedPerm(perm))

        def objective(xt_flat):
            a = xt_flat.reshape(xt.shape)
            return dv_objective(info, np.hstack([x, a]),
                                np.hstack([x, a[perm]]))

        assert value == pytest.approx(objective(xt.ravel()), abs=1e-12)
        h = 1e-6
        for i in range(xt.size):
            e = np.zeros(xt.size)
            e[i] = h
            fd = (objective(xt.ravel() + e) - objective(xt.ravel() - e)) / (2 * h)
            assert grad.ravel()[i] == pytest.approx(fd, abs=1e-6)


class TestFitAndEstimate:
    def test_independent_data_estimates_near_zero(self):
        x, y = correlated_gaussians(0.0, 2000, seed=7)
        est = fit_and_estimate(x, y, seed=0)
        assert abs(est.value - 0.0) < 0.1

    def test_rho_half(self):
        x, y = correlated_gaussians(0.5, 2000, seed=8)
        est = fit_and_estimate(x, y, seed=0)
        assert abs(est.value - MI_RHO_05) < 0.1

    def test_rho_point_eight(self):
        x, y = correlated_gaussians(0.8, 2000, seed=9)
        est = fit_and_estimate(x, y, seed=0)
        assert abs(est.value - MI_RHO_08) < 0.1

    def test_deterministic_given_seed(self):
        x, y = correlated_gaussians(0.5, 400, seed=10)
        a = fit_and_estimate(x, y, steps=50, seed=1)
        b = fit_and_estimate(x, y, steps=50, seed=1)
        assert a.value == b.value and a.saturated == b.saturated

    def test_estimate_respects_data_processing(self):
        # MI(X; X~) cannot exceed MI with a lossless copy; the estimate of
        # a weakly dependent pair should sit well below a strong pair
        x, y_weak = correlated_gaussians(0.2, 2000, seed=11)
        _, y_strong = correlated_gaussians(0.95, 2000, seed=11)
        weak = fit_and_estimate(x, y_weak, seed=2).value
        strong = fit_and_estimate(x, y_strong, seed=2).value
        assert strong > weak
