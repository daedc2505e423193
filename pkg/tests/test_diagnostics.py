import math
import warnings

import numpy as np
import pytest

from emhd2d import diagnostics as dg
from emhd2d import lp
from emhd2d.grid import derivative
from emhd2d.linear import propagate_linear_grid
from emhd2d.model import ModelParams, PerturbationState, field_from_function
from emhd2d.storage import random_band_state

from conftest import zero_state

CFG = dg.DiagnosticsConfig()


def make_state(grid, psi=None, b=None, params=ModelParams(0.0, 1.0)):
    z = lambda x, y: np.zeros_like(x)  # noqa: E731
    return PerturbationState(field_from_function(grid, psi or z), field_from_function(grid, b or z), params)


def sine_b(grid, m=1):
    return make_state(grid, b=lambda x, y: np.sin(m * x))


def grad_parts(state):
    return state.b, derivative(state.psi, 1, 0), derivative(state.psi, 0, 1)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [{"eps1": 0.0}, {"eps1": math.nan}, {"s": 0.5}, {"s": 0.0}, {"fit_window": (5.0, 1.0)}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            dg.DiagnosticsConfig(**kwargs)

    def test_warns_below_one_third(self):
        with pytest.warns(UserWarning):
            dg.DiagnosticsConfig(s=0.3)

    def test_no_warning_in_range(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            dg.DiagnosticsConfig(s=0.45)


class TestCertification:
    def test_default_grid(self, grid64):
        cert = dg.certify(grid64, 0.1)
        assert cert.c_E == pytest.approx(0.95, rel=1e-12)
        assert cert.c_D == pytest.approx(0.0985319472692005, rel=1e-12)
        assert cert.valid and cert.c == cert.c_D

    def test_ladder_picks_largest(self, grid64):
        cert = dg.eps1_ladder(grid64)
        assert cert.eps1 == 0.5
        assert cert.c_E == pytest.approx(0.75, rel=1e-12)
        assert cert.c_D == pytest.approx(0.40849364905389035, rel=1e-12)

    def test_ladder_can_fail(self, grid64):
        assert dg.eps1_ladder(grid64, threshold=2.0) is None

    def test_random_states_are_coercive(self, grid32, rng):
        cert = dg.certify(grid32, 0.1)
        for seed in range(100):
            st = random_band_state(grid32, 1.0, 12, seed=seed, params=ModelParams(0.0, 1.0))
            E, D = dg.eval_E_D(st, CFG)
            nE, nD = dg.reference_norms(st)
            assert E >= cert.c_E * nE * (1 - 1e-12)
            assert D >= cert.c_D * nD * (1 - 1e-12)


class TestQuadraticFunctionals:
    def test_b_only_example(self, grid32):
        E, D = dg.eval_E_D(sine_b(grid32), CFG)
        assert E == pytest.approx(4 * math.pi**2, rel=1e-13)
        # the cross term -eps1 ||b_x||^2 enters D
        assert D == pytest.approx((2 - CFG.eps1) * 2 * math.pi**2, rel=1e-13)
        assert D == pytest.approx(37.50449672413956, rel=1e-13)

    def test_mixed_example(self, grid32):
        st = make_state(grid32, psi=lambda x, y: np.cos(x) * np.sin(y), b=lambda x, y: np.sin(x))
        E, D = dg.eval_E_D(st, CFG)
        assert E == pytest.approx(10 * math.pi**2, rel=1e-12)
        assert D == pytest.approx(4 * math.pi**2, rel=1e-12)
        assert dg.eval_El_Dl(st, CFG, 1) == pytest.approx((E, D), rel=1e-12)
        assert dg.eval_E_high(st, CFG, 0.0) == pytest.approx(10 * math.pi**2, rel=1e-12)
        assert dg.eval_E_high(st, CFG, 1.0) == pytest.approx(157.91367041742976, rel=1e-12)

    def test_mixed_example_g(self, grid32):
        st = make_state(grid32, psi=lambda x, y: np.cos(x) * np.sin(y), b=lambda x, y: np.sin(x))
        assert dg.eval_g(st) == pytest.approx((13.32864881447895, 4.44288293815845, 46.07905467135096), rel=1e-12)

    def test_zero_state(self, grid32):
        z = zero_state(grid32)
        assert dg.eval_E_D(z, CFG) == (0.0, 0.0)
        assert dg.eval_E_s(z, CFG) == 0.0
        assert dg.eval_g(z) == (0.0, 0.0, 0.0)

    def test_basic_energy_and_dissipation(self, grid32):
        st = sine_b(grid32)
        assert dg.basic_energy(st) == pytest.approx(math.pi**2, rel=1e-13)
        assert dg.basic_dissipation(st) == pytest.approx(2 * math.pi**2, rel=1e-13)

    def test_E1_of_horizontal_wave(self, grid32):
        E1, _ = dg.eval_El_Dl(sine_b(grid32, 2), CFG, 1)
        assert E1 == pytest.approx(40 * math.pi**2, rel=1e-12)

    def test_El_index_checked(self, grid32):
        with pytest.raises(ValueError):
            dg.eval_El_Dl(zero_state(grid32), CFG, 3)

    def test_E_s_definition(self, small_state):
        s = CFG.s
        parts = grad_parts(small_state)
        expected = lp.sobolev_norm(parts, -s, 0) ** 2 + lp.sobolev_norm(parts, -s, 1 + s) ** 2
        assert dg.eval_E_s(small_state, CFG) == pytest.approx(expected, rel=1e-12)
        assert dg.eval_E_s(sine_b(small_state.grid), CFG) == pytest.approx(4 * math.pi**2, rel=1e-12)

    @pytest.mark.parametrize("s1", [0.0, 1.0, 2.5])
    def test_E_high_definition(self, small_state, s1):
        s = CFG.s
        parts = grad_parts(small_state)
        expected = lp.sobolev_norm(parts, -s, s1) ** 2 + lp.sobolev_norm(parts, -s, s1 + 1) ** 2
        assert dg.eval_E_high(small_state, CFG, s1) == pytest.approx(expected, rel=1e-12)

    def test_translation_invariance(self, grid32):
        a = make_state(grid32, psi=lambda x, y: np.cos(x) * np.sin(2 * y), b=lambda x, y: np.sin(x + y))
        b = make_state(grid32, psi=lambda x, y: np.cos(x + 0.7) * np.sin(2 * y - 1.1), b=lambda x, y: np.sin(x + y - 0.4))
        for f in (lambda s: dg.eval_E_D(s, CFG), lambda s: dg.eval_E_s(s, CFG), dg.eval_g):
            assert f(a) == pytest.approx(f(b), rel=1e-10)

    def test_quadratic_homogeneity(self, small_state):
        E, D = dg.eval_E_D(small_state, CFG)
        E3, D3 = dg.eval_E_D(small_state.scaled(3.0), CFG)
        assert (E3, D3) == pytest.approx((9 * E, 9 * D), rel=1e-12)

    def test_g_homogeneity(self, small_state):
        g1, g2, _ = dg.eval_g(small_state)
        h1, h2, _ = dg.eval_g(small_state.scaled(2.0))
        assert (h1, h2) == pytest.approx((2 * g1, 2 * g2), rel=1e-12)

    def test_g2_is_besov_norm_of_b(self, small_state):
        assert dg.eval_g(small_state)[1] == lp.besov_norm(small_state.b, 1.5, 0.5)


class TestEnergyLaw:
    @pytest.mark.parametrize("t", [0.3, 1.0])
    def test_linear_flow_dissipates_at_twice_D(self, grid32, t):
        st = random_band_state(grid32, 1.0, 6, seed=1, params=ModelParams(0.0, 1.0))
        h = 1e-4
        E = lambda s: dg.eval_E_D(propagate_linear_grid(st, s), CFG)  # noqa: E731
        dE = (E(t + h)[0] - E(t - h)[0]) / (2 * h)
        assert dE / E(t)[1] == pytest.approx(-2.0, abs=1e-5)

    def test_time_derivative_exact_on_quadratics(self):
        t = np.linspace(0, 1, 11)
        np.testing.assert_allclose(dg.time_derivative(t, t**2), 2 * t, atol=1e-12)
        np.testing.assert_allclose(dg.time_derivative(t, t**4, order=4)[2:-2], 4 * t[2:-2] ** 3, atol=1e-12)

    @pytest.mark.parametrize("times", [[0.0, 1.0], [0.0, 0.1, 0.3]])
    def test_time_derivative_rejects(self, times):
        with pytest.raises(ValueError):
            dg.time_derivative(np.array(times), np.zeros(len(times)))

    def test_residual_vanishes_for_zero_trajectory(self, grid32):
        states = [zero_state(grid32)] * 5
        np.testing.assert_array_equal(dg.energy_law_residual(np.linspace(0, 1, 5), states), 0.0)


class TestDecayFit:
    @pytest.mark.parametrize("slope", [-0.4, -0.725])
    def test_recovers_power_law(self, slope):
        t = np.geomspace(10, 1e4, 16)
        fit, r2 = dg.fit_decay(t, 3.0 * (1 + t) ** slope)
        assert fit == pytest.approx(slope, abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_window(self):
        t = np.geomspace(1, 1e4, 40)
        v = np.where(t < 100, 1.0, (1 + t) ** -0.5)
        assert dg.fit_decay(t, v, window=(100, 1e4))[0] == pytest.approx(-0.5, abs=1e-12)

    @pytest.mark.parametrize("values", [np.zeros(10), -np.ones(10), np.full(10, np.nan)])
    def test_rejects_bad_values(self, values):
        with pytest.raises(ValueError):
            dg.fit_decay(np.arange(10.0), values)

    def test_needs_samples(self):
        with pytest.raises(ValueError):
            dg.fit_decay(np.arange(5.0), np.ones(5))


class TestMonotonicity:
    def test_linear_trajectory_passes(self, grid32):
        st = random_band_state(grid32, 1.0, 6, seed=3, params=ModelParams(0.0, 1.0))
        times = np.linspace(0, 1, 41)
        states = [propagate_linear_grid(st, t) for t in times]
        rep = dg.monotonicity_probe(times, states, CFG)
        assert rep.passed and not rep.increasing
        assert rep.c == dg.certify(grid32, CFG.eps1).c
        assert dg.is_nonincreasing(rep.E)

    def test_zero_trajectory_passes(self, grid32):
        rep = dg.monotonicity_probe(np.linspace(0, 1, 5), [zero_state(grid32)] * 5, CFG)
        assert rep.passed

    def test_growing_energy_is_flagged(self, grid32):
        st = random_band_state(grid32, 1.0, 6, seed=3, params=ModelParams(0.0, 1.0))
        times = np.linspace(0, 1, 9)
        states = [st.scaled(1 + t) for t in times]
        rep = dg.monotonicity_probe(times, states, CFG)
        assert not rep.passed and rep.increasing

    def test_needs_five_snapshots(self, grid32):
        with pytest.raises(ValueError):
            dg.monotonicity_probe(np.linspace(0, 1, 4), [zero_state(grid32)] * 4, CFG)


class TestRecords:
    def test_csv_columns(self):
        cols = dg.csv_columns(CFG)
        assert cols[:8] == dg.CSV_COLUMNS_FIXED
        assert cols[8:10] == ("E_high:0", "E_high:1")
        assert cols[-1] == "energy_law_residual"

    def test_row_matches_columns(self, small_state):
        rec = dg.evaluate(small_state, CFG)
        assert len(rec.row(CFG)) == len(dg.csv_columns(CFG))
        assert rec.E == dg.eval_E_D(small_state, CFG)[0]
        assert math.isnan(rec.energy_law_residual)

    def test_trajectory_records(self, small_state):
        times = np.linspace(0, 0.2, 5)
        states = [propagate_linear_grid(small_state, t) for t in times]
        recs = dg.evaluate_trajectory(times, states, CFG)
        assert [r.time for r in recs] == pytest.approx(list(times))
        assert all(np.isfinite(r.energy_law_residual) for r in recs)

