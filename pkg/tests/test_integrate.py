import math
import warnings

import numpy as np
import pytest

from emhd2d.diagnostics import basic_energy
from emhd2d.grid import make_grid
from emhd2d.integrate import IntegrationError, IntegratorConfig, StepSizeWarning, integrate, step
from emhd2d.linear import propagate_linear_grid
from emhd2d.model import ModelParams
from emhd2d.storage import random_band_state

from conftest import zero_state


def gap(a, b):
    return max(float(np.max(np.abs(a.psi.coeffs - b.psi.coeffs))), float(np.max(np.abs(a.b.coeffs - b.b.coeffs))))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"scheme": "rk45"},
            {"dt": 0.0},
            {"dt": -1e-3},
            {"t_end": -1.0},
            {"dt": 0.3, "t_end": 0.1},
            {"dt": 0.03, "t_end": 0.1},
            {"output_stride": 0},
            {"output_stride": 3, "dt": 0.01, "t_end": 0.1},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            IntegratorConfig(**kwargs)

    def test_step_count(self):
        assert IntegratorConfig(dt=1e-3, t_end=1.0).n_steps == 1000
        assert IntegratorConfig(dt=0.1, t_end=0.0).n_steps == 0


class TestStep:
    @pytest.mark.parametrize("scheme", ["etd-rk4", "imex-cn-ab2"])
    def test_zero_is_fixed_point(self, grid32, scheme):
        z = zero_state(grid32)
        out = step(z, IntegratorConfig(scheme, dt=0.01, t_end=0.01))
        assert not out.psi.coeffs.any() and not out.b.coeffs.any()
        assert out.time == pytest.approx(0.01)

    def test_step_matches_integrate(self, small_state):
        cfg = IntegratorConfig(dt=0.01, t_end=0.01)
        assert gap(step(small_state, cfg), integrate(small_state, cfg).final) == 0


class TestIntegrate:
    def test_zero_duration(self, small_state):
        tr = integrate(small_state, IntegratorConfig(dt=0.1, t_end=0.0))
        assert len(tr) == 1 and tr.final is small_state

    def test_snapshot_times(self, small_state):
        tr = integrate(small_state, IntegratorConfig(dt=0.01, t_end=0.1, output_stride=5))
        np.testing.assert_allclose(tr.times, [0.0, 0.05, 0.1])
        assert [s.time for _, s in tr] == list(tr.times)

    def test_linear_only_is_exact(self, grid32):
        st0 = random_band_state(grid32, 1.0, 10, seed=2, params=ModelParams(0.0, 1.0))
        tr = integrate(st0, IntegratorConfig(dt=0.05, t_end=1.0, output_stride=20, nonlinear=False))
        assert gap(tr.final, propagate_linear_grid(st0, 1.0)) <= 1e-12

    def test_etd_self_convergence(self, grid32):
        st0 = random_band_state(grid32, 0.5, 4, seed=2, params=ModelParams(0.0, 1.0))

        def final(dt):
            return integrate(st0, IntegratorConfig(dt=dt, t_end=0.5, output_stride=round(0.5 / dt))).final

        ref = final(1 / 1280)
        errs = [gap(final(dt), ref) for dt in (1 / 40, 1 / 80, 1 / 160)]
        orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert all(abs(o - 4) <= 0.5 for o in orders), orders

    def test_imex_self_convergence(self, grid32):
        st0 = random_band_state(grid32, 0.5, 4, seed=2, params=ModelParams(0.0, 1.0))

        def final(dt):
            return integrate(st0, IntegratorConfig("imex-cn-ab2", dt=dt, t_end=0.5, output_stride=round(0.5 / dt))).final

        ref = final(1 / 6400)
        errs = [gap(final(dt), ref) for dt in (1 / 100, 1 / 200, 1 / 400)]
        orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert all(abs(o - 2) <= 0.5 for o in orders), orders

    def test_energy_conserved_without_dissipation(self):
        st0 = random_band_state(make_grid(64, 64), 1e-2, 6, seed=4, params=ModelParams(0.0, 0.0))
        tr = integrate(st0, IntegratorConfig(dt=1e-3, t_end=0.2, output_stride=50))
        E = np.array([basic_energy(s) for s in tr.states])
        assert np.max(np.abs(E - E[0])) / E[0] <= 1e-6

    def test_blow_up_reports_last_finite_state(self, grid32):
        st0 = random_band_state(grid32, 50.0, 10, seed=1, params=ModelParams(0.0, 0.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(IntegrationError) as info:
                integrate(st0, IntegratorConfig(dt=0.05, t_end=2.0))
        snap = info.value.snapshot
        assert np.all(np.isfinite(snap.psi.coeffs)) and np.all(np.isfinite(snap.b.coeffs))
        assert snap.time == pytest.approx(0.05)

    def test_step_size_warning_once(self, grid32):
        st0 = random_band_state(grid32, 1.0, 10, seed=1, params=ModelParams(0.0, 1.0))
        with pytest.warns(StepSizeWarning) as rec:
            tr = integrate(st0, IntegratorConfig(dt=0.01, t_end=0.03))
        assert len([w for w in rec if w.category is StepSizeWarning]) == 1
        assert len(tr.warnings) == 1

    def test_no_warning_for_linear_runs(self, grid32):
        st0 = random_band_state(grid32, 5.0, 10, seed=1, params=ModelParams(0.0, 1.0))
        with warnings.catch_warnings():
            warnings.simplefilter("error", StepSizeWarning)
            integrate(st0, IntegratorConfig(dt=0.01, t_end=0.03, nonlinear=False))

    def test_time_offset(self, small_state):
        st0 = small_state.with_fields(small_state.psi.coeffs, small_state.b.coeffs, time=2.0)
        tr = integrate(st0, IntegratorConfig(dt=0.01, t_end=0.02))
        np.testing.assert_allclose(tr.times, [2.0, 2.01, 2.02])

    def test_gap_scales_quadratically(self, grid32):
        gaps = []
        for eps in (1e-2, 5e-3):
            st0 = random_band_state(grid32, eps, 4, seed=8, params=ModelParams(0.0, 1.0))
            nl = integrate(st0, IntegratorConfig(dt=1e-2, t_end=1.0, output_stride=100)).final
            gaps.append(gap(nl, propagate_linear_grid(st0, 1.0)))
        assert 3.0 <= gaps[0] / gaps[1] <= 5.0
