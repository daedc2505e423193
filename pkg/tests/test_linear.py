import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from emhd2d import linear
from emhd2d.diagnostics import fit_decay
from emhd2d.grid import SpectralField, make_grid
from emhd2d.model import ModelParams, PerturbationState, field_from_function, linearized_rhs
from emhd2d.storage import random_band_state
from emhd2d.verify import ode_residual

DECAY_TIMES = np.geomspace(1e2, 1e4, 16)

# frozen from decay_quadrature at s = 0.45 with the default rule
D8_B_SLOPES = {0: -0.7229017500179444, 1: -1.2213265783427276, 2: -1.7212344444701768}
BORDERLINE_GRAD_PSI_SLOPES = {0: -0.24284272093746276, 1: -0.7521404374092184, 2: -1.2597443292045398}

freq = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)
sign = st.sampled_from([-1.0, 1.0])


class TestModeRoots:
    def test_zero_xi1(self):
        lp, lm, regime = linear.mode_roots(0, 1)
        assert (lp, lm, regime) == (-1, 0, "zero-xi1")

    def test_distinct_real(self):
        lp, lm, regime = linear.mode_roots(1, 3)
        assert regime == "distinct-real"
        assert lp.real == pytest.approx(-8.872983346207416, abs=1e-12)
        assert lm.real == pytest.approx(-1.1270166537925832, abs=1e-12)
        assert (lp + lm).real == pytest.approx(-10)
        assert (lp * lm).real == pytest.approx(10)

    def test_complex_pair(self):
        lp, lm, regime = linear.mode_roots(1, 0)
        assert regime == "complex-pair"
        assert abs(lp - complex(-0.5, -math.sqrt(3) / 2)) < 1e-15
        assert abs(lm - complex(-0.5, math.sqrt(3) / 2)) < 1e-15

    def test_double_root(self):
        lp, lm, regime = linear.mode_roots(1, math.sqrt(3))
        assert regime == "double-root"
        assert lp == lm == pytest.approx(-2)

    def test_zero_frequency_rejected(self):
        with pytest.raises(ValueError):
            linear.mode_roots(0, 0)

    def test_slow_root_is_accurate_when_xi1_is_tiny(self):
        # -xi1^2 (1 + xi1^2/k2 + ...) without cancellation
        _, lm, _ = linear.mode_roots(1e-6, 1.0)
        assert lm.real == pytest.approx(-1e-12, rel=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(a=freq, b=freq, sa=sign, sb=sign)
    def test_vieta(self, a, b, sa, sb):
        xi1, xi2 = sa * a, sb * b
        k2 = xi1**2 + xi2**2
        lp, lm, _ = linear.mode_roots(xi1, xi2)
        assert abs(lp + lm + k2) <= 1e-10 * k2
        assert abs(lp * lm - xi1**2 * k2) <= 1e-10 * xi1**2 * k2
        assert lp.real <= lm.real <= 0

    @settings(max_examples=100, deadline=None)
    @given(a=freq, b=freq)
    def test_batch_matches_scalar(self, a, b):
        lp, lm, _ = linear.mode_roots(a, b)
        bp, bm = linear.batch_roots(np.array([a]), np.array([b]))
        k2 = a * a + b * b
        assert abs(bp[0] - lp) <= 1e-12 * k2
        assert abs(bm[0] - lm) <= 1e-12 * k2


class TestModeSolution:
    @pytest.mark.parametrize("xi", [(1, 3), (1, 0.5), (1, math.sqrt(3)), (0, 1.5), (2, 0.1)])
    def test_initial_data(self, xi):
        sol = linear.mode_solution(xi, 0.3 - 0.2j, 0.7 + 0.1j)
        assert abs(sol.b(0.0) - sol.b0_hat) < 1e-14
        assert abs(sol.db_dt(0.0) - sol.b1_hat) < 1e-13
        assert abs(sol.psi(0.0) - sol.psi0_hat) < 1e-15
        h = 1e-7
        assert abs((sol.b(h) - sol.b(0.0)) / h - sol.b1_hat) < 1e-5

    def test_zero_xi1_decouples(self):
        sol = linear.mode_solution((0, 1.5), 0.4j, 2.0)
        t = np.linspace(0, 3, 7)
        np.testing.assert_allclose(sol.b(t), 2.0 * np.exp(-2.25 * t), rtol=1e-14)
        np.testing.assert_array_equal(sol.psi(t), 0.4j)

    def test_double_root_is_limit_of_distinct_roots(self):
        k2 = 4 / (1 - 1e-6)
        near = linear.mode_solution((1.0, math.sqrt(k2 - 1)), 0.2, 1.0)
        exact = linear.mode_solution((1.0, math.sqrt(3)), 0.2, 1.0)
        assert near.regime == "distinct-real" and exact.regime == "double-root"
        t = np.linspace(0, 5, 26)
        assert np.max(np.abs(near.b(t) - exact.b(t))) <= 1e-4
        assert np.max(np.abs(near.psi(t) - exact.psi(t))) <= 1e-4

    @pytest.mark.parametrize("xi", [(1, 3), (1, 0.5), (1, math.sqrt(3)), (0.5, 0)])
    def test_psi_equation(self, xi):
        # psi' = -i xi1 b along the mu1 = 0 solution
        sol = linear.mode_solution(xi, 0.5, -0.25j)
        t, h = np.linspace(0.1, 2, 9), 1e-5
        dpsi = (sol.psi(t + h) - sol.psi(t - h)) / (2 * h)
        np.testing.assert_allclose(dpsi, -1j * sol.xi1 * sol.b(t), atol=1e-8)

    @pytest.mark.parametrize("xi", [(1, 3), (1, 0.5), (1, math.sqrt(3)), (0, 1.5)])
    def test_ode_residual_second_order(self, xi):
        sol = linear.mode_solution(xi, 0.3 - 0.2j, 0.7 + 0.1j)
        t = np.linspace(0.2, 2.0, 10)
        r1, r2 = ode_residual(sol, t, 1e-2), ode_residual(sol, t, 5e-3)
        assert math.log2(r1 / r2) >= 1.9


class TestPropagateLinearGrid:
    def test_identity_at_zero(self, small_state):
        out = linear.propagate_linear_grid(small_state, 0.0)
        np.testing.assert_array_equal(out.psi.coeffs, small_state.psi.coeffs)
        np.testing.assert_array_equal(out.b.coeffs, small_state.b.coeffs)

    def test_negative_time(self, small_state):
        with pytest.raises(ValueError):
            linear.propagate_linear_grid(small_state, -1.0)

    def test_single_mode_against_ode_solver(self, grid32):
        psi = field_from_function(grid32, lambda x, y: np.sin(x))
        st0 = PerturbationState(psi, SpectralField.zeros(grid32), ModelParams(0, 1))
        t = 0.1
        out = linear.propagate_linear_grid(st0, t)
        # two coupled modes (1, 0) and (-1, 0); integrate the real system for (psi, b) coefficients
        xi1, k2 = 1.0, 1.0

        def f(_, y):
            p = y[0] + 1j * y[1]
            b = y[2] + 1j * y[3]
            dp = -1j * xi1 * b
            db = -1j * xi1 * k2 * p - k2 * b
            return [dp.real, dp.imag, db.real, db.imag]

        p0 = st0.psi.coeffs[1, 0]
        sol = solve_ivp(f, (0, t), [p0.real, p0.imag, 0, 0], method="DOP853", rtol=1e-13, atol=1e-15)
        y = sol.y[:, -1]
        assert abs(out.psi.coeffs[1, 0] - (y[0] + 1j * y[1])) <= 1e-8
        assert abs(out.b.coeffs[1, 0] - (y[2] + 1j * y[3])) <= 1e-8

    def test_semigroup(self, grid32):
        st0 = random_band_state(grid32, 1.0, 10, seed=3, params=ModelParams(0.0, 1.0))
        a = linear.propagate_linear_grid(linear.propagate_linear_grid(st0, 0.3), 0.7)
        b = linear.propagate_linear_grid(st0, 1.0)
        assert np.max(np.abs(a.psi.coeffs - b.psi.coeffs)) <= 1e-10
        assert np.max(np.abs(a.b.coeffs - b.b.coeffs)) <= 1e-10
        assert a.time == pytest.approx(1.0)

    def test_matches_mode_solution(self, grid32):
        st0 = random_band_state(grid32, 1.0, 6, seed=5, params=ModelParams(0.0, 1.0))
        out = linear.propagate_linear_grid(st0, 0.8)
        for i, j in [(1, 3), (2, 0), (0, 5), (3, 31)]:
            sol = linear.mode_solution((grid32.kx[i], grid32.ky[j]), st0.psi.coeffs[i, j], st0.b.coeffs[i, j])
            assert abs(out.b.coeffs[i, j] - sol.b(0.8)) < 1e-14
            assert abs(out.psi.coeffs[i, j] - sol.psi(0.8)) < 1e-14

    def test_generator_is_linearized_rhs(self, grid32):
        st0 = random_band_state(grid32, 1.0, 6, seed=9, params=ModelParams(0.3, 0.8))
        h = 1e-5
        u1, u2 = linear.propagate_linear_grid(st0, h), linear.propagate_linear_grid(st0, 2 * h)
        dpsi, db = linearized_rhs(st0)

        def one_sided(f0, f1, f2):
            return (-3 * f0 + 4 * f1 - f2) / (2 * h)

        assert np.max(np.abs(one_sided(st0.psi.coeffs, u1.psi.coeffs, u2.psi.coeffs) - dpsi.coeffs)) < 1e-5
        assert np.max(np.abs(one_sided(st0.b.coeffs, u1.b.coeffs, u2.b.coeffs) - db.coeffs)) < 1e-5

    def test_energy_nonincreasing(self, grid32):
        from emhd2d.diagnostics import basic_energy

        st0 = random_band_state(grid32, 1.0, 10, seed=4, params=ModelParams(0.0, 1.0))
        E = [basic_energy(linear.propagate_linear_grid(st0, t)) for t in np.linspace(0, 2, 11)]
        assert all(b <= a for a, b in zip(E, E[1:]))


class TestDecayQuadrature:
    def test_initial_norm_closed_form(self):
        v = linear.decay_quadrature(linear.DecayProfile(), [0.0], 0)
        assert v[0] == pytest.approx(linear.d8_initial_norm(0.45), rel=1e-10)
        assert v[0] == pytest.approx(0.1301924025274493, rel=1e-10)

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_d8_slopes(self, k):
        vals = linear.decay_quadrature(linear.DecayProfile(), DECAY_TIMES, k)
        slope, r2 = fit_decay(DECAY_TIMES, vals, (1e2, 1e4))
        assert slope == pytest.approx(D8_B_SLOPES[k], abs=1e-6)
        assert r2 > 0.9999
        # b is odd in xi1 near the slow root, which buys one extra half power
        assert slope == pytest.approx(-(0.45 + k + 1) / 2, abs=0.01)
        # still consistent with the upper bound (1+t)^{-(s+k)/2}
        assert slope <= -(0.45 + k) / 2

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_borderline_grad_psi_slopes(self, k):
        vals = linear.decay_quadrature(linear.DecayProfile(shape="borderline"), DECAY_TIMES, k, field="grad_psi")
        slope, _ = fit_decay(DECAY_TIMES, vals, (1e2, 1e4))
        assert slope == pytest.approx(BORDERLINE_GRAD_PSI_SLOPES[k], abs=1e-6)
        assert slope == pytest.approx(-(0.45 + k) / 2, abs=0.05)

    def test_unresolved_rule_raises(self):
        with pytest.raises(linear.QuadratureError):
            linear.decay_quadrature(linear.DecayProfile(panels=3, points=2), [0.0, 1e4], 0)

    @pytest.mark.parametrize("kwargs", [{"k": 3}, {"times": [1.0, 0.5]}, {"times": [-1.0, 1.0]}])
    def test_rejects_bad_input(self, kwargs):
        args = {"profile": linear.DecayProfile(), "times": [1.0, 2.0], "k": 0}
        args.update(kwargs)
        with pytest.raises(ValueError):
            linear.decay_quadrature(**args)

    @pytest.mark.parametrize("kwargs", [{"s": 0.5}, {"s": 0.0}, {"shape": "box"}, {"shape": "borderline", "eta": 0.0}])
    def test_profile_validation(self, kwargs):
        with pytest.raises(ValueError):
            linear.DecayProfile(**kwargs)

    def test_rule_integrates_gaussian(self):
        xi1, xi2, w = linear.DecayProfile().nodes()
        assert np.sum(w * np.exp(-(xi1**2 + xi2**2))) == pytest.approx(math.pi, rel=1e-12)


def test_complex_sqrt_branch_consistency():
    # c1 + c2 = b0 in every regime, including the complex pair where the root is imaginary
    for xi in [(1, 0.2), (1, 3), (0.3, 0.1)]:
        sol = linear.mode_solution(xi, 1.0, 1.0 - 1j)
        assert abs(sol.c1 + sol.c2 - (1.0 - 1j)) < 1e-14
        assert cmath.isfinite(sol.c1)
