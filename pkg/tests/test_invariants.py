import numpy as np
import pytest

from mzak import dynamics as dyn
from mzak import invariants as inv
from mzak.grids import (
    Field,
    MultiplierSpec,
    PHYSICAL,
    SPECTRAL,
    apply_multiplier,
    as_physical,
    gradient,
    make_grid,
    random_band_limited_field,
    zeros_field,
)
from conftest import single_mode_field
from test_dynamics import E3, random_state

TWO_PI_SQ = (2 * np.pi) ** 2


def physical_l2_sq(field):
    phys = as_physical(field)
    return float(np.sum(np.abs(phys.values) ** 2) * field.grid.cell_volume)


class TestI1:
    def test_plane_wave(self, grid2d):
        phi = single_mode_field(grid2d, (1, 0))
        assert abs(inv.compute_I1(phi) - TWO_PI_SQ) < 1e-10

    def test_zero(self, grid2d):
        assert inv.compute_I1(zeros_field(grid2d)) == 0.0

    def test_quadrature_paths_agree(self, grid2d, rng):
        phi = random_band_limited_field(grid2d, rng)
        spectral = inv.compute_I1(phi)
        physical = sum(physical_l2_sq(c) for c in gradient(phi))
        assert abs(spectral - physical) <= 1e-10 * max(1.0, spectral)


class TestI2:
    def test_pure_phi(self, grid2d):
        phi = single_mode_field(grid2d, (1, 0))
        zero = zeros_field(grid2d)
        assert abs(inv.compute_I2(phi, zero, zero) - TWO_PI_SQ) < 1e-10

    def test_real_phi_kills_cubic(self, grid2d, rng):
        phi = random_band_limited_field(grid2d, rng, real=True)
        chi = random_band_limited_field(grid2d, rng, real=True)
        assert abs(inv.cubic_term(phi, chi)) < 1e-12

    def test_against_physical_quadrature_oracle(self, grid3d, rng):
        phi = random_band_limited_field(grid3d, rng)
        chi = random_band_limited_field(grid3d, rng, real=True)
        chi_t = random_band_limited_field(grid3d, rng, real=True)
        val = inv.compute_I2(phi, chi, chi_t, e=E3)

        lap = apply_multiplier(phi, MultiplierSpec("laplacian"))
        binv = apply_multiplier(chi_t, MultiplierSpec("riesz_power", -1.0))
        gphi = gradient(phi)
        gbar = [as_physical(c).values.conj() for c in gphi]
        gphys = [as_physical(c).values for c in gphi]
        cross3 = gbar[0] * gphys[1] - gbar[1] * gphys[0]
        cubic = np.sum(
            as_physical(chi).values * (-1j) * cross3
        ) * grid3d.cell_volume
        oracle = (
            physical_l2_sq(lap)
            + 0.5 * (physical_l2_sq(binv) + physical_l2_sq(chi))
            + cubic.real
        )
        assert abs(val - oracle) <= 1e-10 * max(1.0, abs(val))


class TestMonitor:
    def test_zero_state(self, grid2d):
        state = dyn.State(0.0, zeros_field(grid2d), zeros_field(grid2d),
                          zeros_field(grid2d))
        assert inv.compute_m(state) == 0.0

    def test_plane_wave(self, grid2d):
        phi = single_mode_field(grid2d, (1, 0))
        state = dyn.State(0.0, phi, zeros_field(grid2d), zeros_field(grid2d))
        assert abs(inv.compute_m(state) - 2 * TWO_PI_SQ) < 1e-10

    def test_term_oracle(self, grid2d, rng):
        state = random_state(grid2d, rng)
        chi, chi_t = dyn.from_first_order(state.chi_plus, state.chi_minus)
        lap = apply_multiplier(state.phi, MultiplierSpec("laplacian"))
        binv = apply_multiplier(chi_t, MultiplierSpec("riesz_power", -1.0))
        oracle = (
            physical_l2_sq(lap)
            + 0.25 * physical_l2_sq(chi)
            + 0.5 * physical_l2_sq(binv)
            + sum(physical_l2_sq(c) for c in gradient(state.phi))
        )
        assert abs(inv.compute_m(state) - oracle) <= 1e-10 * max(1.0, oracle)


class TestEstimateC0:
    def test_rejects_small_ensemble(self, grid2d):
        with pytest.raises(ValueError):
            inv.estimate_c0(grid2d, ensemble_size=10)

    def test_monotone_in_ensemble_size(self, grid2d):
        small = inv.estimate_c0(grid2d, ensemble_size=100, seed=7)
        large = inv.estimate_c0(grid2d, ensemble_size=150, seed=7)
        assert large >= small

    def test_stable_under_refinement(self):
        coarse = inv.estimate_c0(make_grid(2, 16, 2 * np.pi),
                                 ensemble_size=150, seed=3)
        fine = inv.estimate_c0(make_grid(2, 32, 2 * np.pi),
                               ensemble_size=150, seed=3)
        assert 0.5 <= fine / coarse <= 2.0

    def test_bound_holds_on_fresh_samples(self, grid2d):
        c0 = inv.estimate_c0(grid2d, ensemble_size=200, seed=11)
        rng = np.random.default_rng(999)
        for _ in range(50):
            phi = random_band_limited_field(grid2d, rng, decay=1.0)
            chi = random_band_limited_field(grid2d, rng, real=True, decay=1.0)
            lhs = abs(inv.cubic_term(phi, chi))
            d = inv._sobolev_sq(phi, 1.0) + inv._sobolev_sq(phi, 2.0)
            rhs = 0.25 * inv._sobolev_sq(chi, 0.0) + c0 * d * d
            assert lhs <= rhs * (1 + 1e-9)


def series_from(times, m_values, i1=1.0, i2=1.0, cubic=0.0):
    s = inv.InvariantSeries()
    for t, m in zip(times, m_values):
        s.append(t, i1, i2, m, cubic)
    return s


class TestTrapCheck:
    def test_zero_energy_traps_only_zero(self):
        s = inv.InvariantSeries()
        s.append(0.0, 0.0, 0.0, 0.0, 0.0)
        s.append(1.0, 0.0, 0.0, 0.0, 0.0)
        report = inv.trap_check(s, c0=1.0)
        assert report.E_tilde == 0.0
        assert report.m1 == 0.0
        assert all(report.satisfied)

    def test_quarter_root(self):
        # E~ = 3/16, c0 = 1: the smaller root is 1/4; cross-check with np.roots
        s = inv.InvariantSeries()
        s.append(0.0, 0.0, 3.0 / 16.0, 0.1, 0.0)
        report = inv.trap_check(s, c0=1.0)
        assert abs(report.m1 - 0.25) < 1e-12
        roots = np.roots([1.0, -1.0, report.E_tilde])
        assert abs(report.m1 - roots.min()) < 1e-10
        assert abs(report.E_tilde - report.m1 + report.c0 * report.m1**2) <= 1e-10

    def test_smallness_not_met(self):
        s = inv.InvariantSeries()
        s.append(0.0, 1.0, 1.0, 0.5, 0.0)
        report = inv.trap_check(s, c0=1.0)
        assert not report.smallness_met
        assert report.m1 is None
        assert "not met" in report.note

    def test_inconsistent_initial_monitor_flagged(self):
        s = inv.InvariantSeries()
        s.append(0.0, 0.0, 0.1, 0.9, 0.0)  # m(0) > m0 = 0.5 but E~ = 0.1 < 0.25
        report = inv.trap_check(s, c0=1.0)
        assert report.smallness_met
        assert not report.consistent

    def test_e_tilde_uses_absolute_cubic(self):
        s = inv.InvariantSeries()
        s.append(0.0, 0.2, 0.3, 0.1, -0.05)
        report = inv.trap_check(s, c0=0.1)
        assert abs(report.E_tilde - (0.2 + 0.3 + 0.05 + 0.05)) < 1e-14


class TestSeriesAndCsv:
    def test_rejects_nonincreasing_times(self):
        s = inv.InvariantSeries()
        s.append(0.0, 1, 1, 1, 0)
        with pytest.raises(ValueError):
            s.append(0.0, 1, 1, 1, 0)

    def test_csv_format(self, tmp_path):
        s = inv.InvariantSeries()
        s.append(0.0, 1.0, 2.0, 3.0, 0.0)
        s.append(0.5, 1.0 + 1e-15, 2.0, 3.0, 0.0)
        path = tmp_path / "inv.csv"
        inv.write_invariant_csv(s, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,I1,I2,m"
        assert len(lines) == 3
        assert lines[2].split(",")[1] == "1.0000000000000011"


class TestConservationDrift:
    def test_small_smooth_drift(self, rng):
        grid = make_grid(2, 32, 2 * np.pi)
        state = random_state(grid, rng, amplitude=0.1)
        rec = inv.InvariantRecorder()
        cfg = dyn.SimConfig(dt=2e-3, t_end=0.5, checkpoint_stride=50)
        dyn.evolve(state, cfg, observers=[rec])
        s = rec.series
        i1_drift = max(abs(v - s.I1[0]) for v in s.I1) / abs(s.I1[0])
        i2_drift = max(abs(v - s.I2[0]) for v in s.I2) / abs(s.I2[0])
        assert i1_drift <= 1e-6
        assert i2_drift <= 1e-4
