import numpy as np
import pytest

from mzak import dynamics as dyn
from mzak import grids
from mzak.grids import (
    Field,
    PHYSICAL,
    SPECTRAL,
    as_physical,
    as_spectral,
    dealias,
    forward_transform,
    l2_norm,
    make_grid,
    random_band_limited_field,
)
from conftest import exact_product_coeffs, single_mode_field

E3 = (0.0, 0.0, 1.0)


def random_state(grid, rng, amplitude=0.1, e=None):
    phi = random_band_limited_field(grid, rng, decay=2.0, amplitude=amplitude)
    chi0 = random_band_limited_field(grid, rng, real=True, decay=2.0,
                                     amplitude=amplitude)
    chi1 = random_band_limited_field(grid, rng, real=True, decay=2.0,
                                     amplitude=amplitude)
    cp, cm = dyn.to_first_order(chi0, chi1)
    return dyn.State(0.0, phi, cp, cm, None if grid.dimension == 2 else e)


class TestSchrodingerNonlinearity:
    def test_constant_chi_gives_zero(self, grid2d, rng):
        phi = random_band_limited_field(grid2d, rng)
        chi = grids.zeros_field(grid2d, SPECTRAL)
        chi.values[0, 0] = 2.5
        out = dyn.schrodinger_nonlinearity(phi, chi)
        assert np.max(np.abs(out.values)) < 1e-14

    def test_3d_reduces_to_2d(self, rng):
        g2 = make_grid(2, 8, 2 * np.pi)
        g3 = make_grid(3, 8, 2 * np.pi)
        phi2 = random_band_limited_field(g2, rng)
        chi2 = random_band_limited_field(g2, rng, real=True)
        phi3 = Field(g3, PHYSICAL,
                     np.repeat(as_physical(phi2).values[:, :, None], 8, axis=2))
        chi3 = Field(g3, PHYSICAL,
                     np.repeat(as_physical(chi2).values[:, :, None], 8, axis=2))
        out2 = as_physical(dyn.schrodinger_nonlinearity(phi2, chi2))
        out3 = as_physical(dyn.schrodinger_nonlinearity(phi3, chi3, e=E3))
        assert np.max(np.abs(out3.values[:, :, 0] - out2.values)) < 1e-12

    def test_matches_convolution_oracle(self, rng):
        g = make_grid(2, 8, 2 * np.pi)
        phi = random_band_limited_field(g, rng)
        chi = random_band_limited_field(g, rng, real=True)
        out = dyn.schrodinger_nonlinearity(phi, chi)

        ny = g.nyquist_free
        dphi = [1j * g.xi[j] * phi.values * ny for j in range(2)]
        pchi = [1j * g.xi[1] * chi.values * ny, -1j * g.xi[0] * chi.values * ny]
        conv = exact_product_coeffs(dphi[0], pchi[0], g) + exact_product_coeffs(
            dphi[1], pchi[1], g
        )
        expected = -1j * conv * g.dealias_mask
        expected[0, 0] = 0.0
        assert np.max(np.abs(out.values - expected)) <= 1e-12

    def test_geometry_mismatch(self, grid2d, rng):
        phi = random_band_limited_field(grid2d, rng)
        with pytest.raises(grids.GridError):
            dyn.schrodinger_nonlinearity(phi, phi, e=E3)


class TestWaveNonlinearity:
    def test_real_phi_gives_zero(self, grid2d, rng):
        phi = random_band_limited_field(grid2d, rng, real=True)
        out = dyn.wave_nonlinearity(phi)
        assert np.max(np.abs(out.values)) < 1e-13

    def test_gauge_invariance(self, grid2d, rng):
        phi = random_band_limited_field(grid2d, rng)
        rotated = Field(grid2d, SPECTRAL, np.exp(1j * 0.7) * phi.values)
        a = dyn.wave_nonlinearity(phi)
        b = dyn.wave_nonlinearity(rotated)
        assert np.max(np.abs(a.values - b.values)) <= 1e-12

    def test_single_mode_gives_zero(self, grid3d):
        phi = single_mode_field(grid3d, (1, 2, 0))
        out = dyn.wave_nonlinearity(phi, e=E3)
        assert np.max(np.abs(out.values)) < 1e-13

    def test_output_is_real(self, grid2d, rng):
        phi = random_band_limited_field(grid2d, rng)
        out = as_physical(dyn.wave_nonlinearity(phi))
        assert np.max(np.abs(out.values.imag)) <= 1e-12 * max(
            1.0, np.max(np.abs(out.values))
        )


class TestFirstOrderMaps:
    def test_zero_rate_part(self, grid2d, rng):
        chi0 = random_band_limited_field(grid2d, rng, real=True)
        zero = grids.zeros_field(grid2d)
        cp, cm = dyn.to_first_order(chi0, zero)
        assert np.max(np.abs(cp.values - chi0.values)) < 1e-14
        assert np.max(np.abs(cm.values - chi0.values)) < 1e-14

    def test_zero_position_part(self, grid2d, rng):
        chi1 = random_band_limited_field(grid2d, rng, real=True)
        zero = grids.zeros_field(grid2d)
        cp, cm = dyn.to_first_order(zero, chi1)
        assert np.max(np.abs(cp.values + cm.values)) < 1e-14

    def test_round_trip(self, grid2d, rng):
        chi0 = random_band_limited_field(grid2d, rng, real=True)
        chi1 = random_band_limited_field(grid2d, rng, real=True)
        cp, cm = dyn.to_first_order(chi0, chi1)
        back0, back1 = dyn.from_first_order(cp, cm)
        assert np.max(np.abs(back0.values - chi0.values)) <= 1e-12
        assert np.max(np.abs(back1.values - chi1.values)) <= 1e-12

    def test_equal_pair_has_zero_rate(self, grid2d, rng):
        chi0 = random_band_limited_field(grid2d, rng, real=True)
        _, chi_t = dyn.from_first_order(chi0, chi0.copy())
        assert np.max(np.abs(chi_t.values)) < 1e-14

    def test_definition_against_multipliers(self, grid2d, rng):
        cp = random_band_limited_field(grid2d, rng)
        cm = grids.conjugate_field(cp)
        chi, chi_t = dyn.from_first_order(cp, cm)
        assert np.max(np.abs(chi.values - 0.5 * (cp.values + cm.values))) < 1e-14
        expected = grid2d.xi_abs * (cp.values - cm.values) / 2j
        assert np.max(np.abs(chi_t.values - expected)) < 1e-14

    def test_rejects_nonzero_mean(self, grid2d):
        vals = np.zeros(grid2d.shape, dtype=complex)
        vals[0, 0] = 1.0
        bad = Field(grid2d, SPECTRAL, vals)
        with pytest.raises(ValueError, match="mean-zero"):
            dyn.to_first_order(bad, grids.zeros_field(grid2d))

    def test_rejects_conjugacy_violation(self, grid2d, rng):
        cp = random_band_limited_field(grid2d, rng)
        with pytest.raises(dyn.StateCorruptionError):
            dyn.from_first_order(cp, cp)


class TestLinearPropagator:
    def test_identity_at_zero(self, grid2d, rng):
        f = random_band_limited_field(grid2d, rng)
        for kind in dyn.PROPAGATOR_KINDS:
            out = dyn.linear_propagator(f, 0.0, kind)
            assert np.array_equal(out.values, f.values)

    def test_phase_on_mode(self, grid2d):
        f = single_mode_field(grid2d, (1, 0))
        out = dyn.linear_propagator(f, np.pi, "schrodinger")
        assert np.max(np.abs(out.values + f.values)) < 1e-12

    def test_group_property(self, grid2d, rng):
        f = random_band_limited_field(grid2d, rng)
        for kind in dyn.PROPAGATOR_KINDS:
            a = dyn.linear_propagator(dyn.linear_propagator(f, 0.3, kind), 0.4, kind)
            b = dyn.linear_propagator(f, 0.7, kind)
            assert np.max(np.abs(a.values - b.values)) <= 1e-12

    def test_unitary(self, grid2d, rng):
        f = random_band_limited_field(grid2d, rng)
        for kind in dyn.PROPAGATOR_KINDS:
            out = dyn.linear_propagator(f, 1.7, kind)
            assert abs(l2_norm(out) - l2_norm(f)) <= 1e-12 * l2_norm(f)


class TestRhs:
    def test_linear_rates(self, grid2d, rng):
        state = random_state(grid2d, rng)
        dphi, dcp, dcm = dyn.rhs_first_order(state, nonlinearity=False)
        assert np.max(
            np.abs(dphi.values + 1j * grid2d.xi_sq * state.phi.values)
        ) < 1e-10
        assert np.max(
            np.abs(dcp.values + 1j * grid2d.xi_abs * state.chi_plus.values)
        ) < 1e-10
        assert np.max(
            np.abs(dcm.values - 1j * grid2d.xi_abs * state.chi_minus.values)
        ) < 1e-10

    def test_zero_phi_makes_chi_rates_linear(self, grid2d, rng):
        state = random_state(grid2d, rng)
        state.phi.values[:] = 0.0
        _, dcp, dcm = dyn.rhs_first_order(state)
        assert np.max(
            np.abs(dcp.values + 1j * grid2d.xi_abs * state.chi_plus.values)
        ) < 1e-13
        assert np.max(
            np.abs(dcm.values - 1j * grid2d.xi_abs * state.chi_minus.values)
        ) < 1e-13

    def test_finite_difference_oracle(self, grid2d, rng):
        state = random_state(grid2d, rng, amplitude=0.2)
        rates = dyn.rhs_first_order(state)
        errs = []
        for h in (1e-6, 5e-7):
            cfg = dyn.SimConfig(dt=h, t_end=h,
                                integrator="reference_rk4_second_order")
            nxt = dyn.step(state, cfg)
            for rate, before, after in zip(
                rates,
                (state.phi, state.chi_plus, state.chi_minus),
                (nxt.phi, nxt.chi_plus, nxt.chi_minus),
            ):
                fd = (after.values - before.values) / h
                scale = max(np.max(np.abs(rate.values)), 1e-12)
                errs.append(np.max(np.abs(fd - rate.values)) / scale)
        assert max(errs) < 1e-4


class TestStep:
    def test_linear_step_equals_propagator(self, grid2d, rng):
        state = random_state(grid2d, rng)
        cfg = dyn.SimConfig(dt=0.01, t_end=0.01, nonlinearity_enabled=False)
        nxt = dyn.step(state, cfg)
        ref_phi = dyn.linear_propagator(state.phi, 0.01, "schrodinger")
        ref_cp = dyn.linear_propagator(state.chi_plus, 0.01, "wave_plus")
        ref_cm = dyn.linear_propagator(state.chi_minus, 0.01, "wave_minus")
        assert np.max(np.abs(nxt.phi.values - ref_phi.values)) <= 1e-12
        assert np.max(np.abs(nxt.chi_plus.values - ref_cp.values)) <= 1e-12
        assert np.max(np.abs(nxt.chi_minus.values - ref_cm.values)) <= 1e-12

    def test_zero_data_stays_zero(self, grid2d):
        state = dyn.State(
            0.0,
            grids.zeros_field(grid2d),
            grids.zeros_field(grid2d),
            grids.zeros_field(grid2d),
        )
        for integrator in dyn.INTEGRATORS:
            cfg = dyn.SimConfig(dt=0.01, t_end=0.05, integrator=integrator)
            out = dyn.evolve(state, cfg)
            assert np.max(np.abs(out.final_state.phi.values)) == 0.0

    @pytest.mark.filterwarnings("ignore:invalid value")
    def test_blowup_detection(self, grid2d):
        phi = grids.zeros_field(grid2d)
        phi.values[1, 0] = np.inf
        state = dyn.State(0.0, phi, grids.zeros_field(grid2d),
                          grids.zeros_field(grid2d))
        cfg = dyn.SimConfig(dt=0.01, t_end=0.01)
        with pytest.raises(dyn.BlowUpError):
            dyn.step(state, cfg)

    @pytest.mark.parametrize(
        "integrator,min_order",
        [("strang", 1.9), ("interaction_rk4", 3.7)],
    )
    def test_observed_order(self, rng, integrator, min_order):
        grid = make_grid(2, 16, 2 * np.pi)
        state = random_state(grid, rng, amplitude=0.6)
        t_end = 0.2

        def run(dt):
            cfg = dyn.SimConfig(dt=dt, t_end=t_end, integrator=integrator)
            return dyn.evolve(state, cfg).final_state

        fine = dyn.evolve(
            state, dyn.SimConfig(dt=t_end / 1024, t_end=t_end,
                                 integrator="interaction_rk4")
        ).final_state

        def err(s):
            return np.sqrt(
                sum(
                    l2_norm(Field(grid, SPECTRAL, a.values - b.values)) ** 2
                    for a, b in (
                        (s.phi, fine.phi),
                        (s.chi_plus, fine.chi_plus),
                        (s.chi_minus, fine.chi_minus),
                    )
                )
            )

        e1 = err(run(t_end / 20))
        e2 = err(run(t_end / 40))
        order = np.log2(e1 / e2)
        assert order >= min_order, f"{integrator}: observed order {order:.2f}"


class TestEvolve:
    def test_zero_t_end_returns_initial(self, grid2d, rng):
        state = random_state(grid2d, rng)
        cfg = dyn.SimConfig(dt=0.01, t_end=0.0)
        out = dyn.evolve(state, cfg)
        assert out.n_steps == 0
        assert np.array_equal(out.final_state.phi.values, state.phi.values)

    def test_observer_count(self, grid2d, rng):
        state = random_state(grid2d, rng, amplitude=0.01)
        calls = []
        cfg = dyn.SimConfig(dt=0.01, t_end=0.1, checkpoint_stride=3)
        out = dyn.evolve(state, cfg, observers=[lambda s, i: calls.append(i)])
        assert len(calls) == 10 // 3 + 1
        assert calls == [0, 3, 6, 9]
        assert out.observer_calls == len(calls)

    def test_linear_run_matches_closed_form(self, grid2d):
        phi = single_mode_field(grid2d, (2, 1), 0.5)
        state = dyn.State(0.0, phi, grids.zeros_field(grid2d),
                          grids.zeros_field(grid2d))
        cfg = dyn.SimConfig(dt=1e-3, t_end=0.5, nonlinearity_enabled=False)
        out = dyn.evolve(state, cfg)
        exact = dyn.linear_propagator(phi, 0.5, "schrodinger")
        assert np.max(np.abs(out.final_state.phi.values - exact.values)) < 1e-10


class TestStructure:
    def test_reality_and_conjugacy_preserved(self, grid2d, rng):
        state = random_state(grid2d, rng, amplitude=0.3)
        cfg = dyn.SimConfig(dt=5e-3, t_end=0.25)
        residues = []

        def obs(s, i):
            residues.append(dyn.conjugacy_residual(s))
            chi, chi_t = dyn.from_first_order(s.chi_plus, s.chi_minus)
            for f in (chi, chi_t):
                phys = as_physical(f)
                residues.append(
                    np.max(np.abs(phys.values.imag))
                    / max(1.0, np.max(np.abs(phys.values)))
                )

        dyn.evolve(state, cfg, observers=[obs])
        assert max(residues) <= 1e-10

    def test_gauge_covariance(self, grid2d, rng):
        state = random_state(grid2d, rng, amplitude=0.3)
        theta = 0.9
        rotated = state.copy()
        rotated.phi.values *= np.exp(1j * theta)
        cfg = dyn.SimConfig(dt=5e-3, t_end=1.0)
        out_a = dyn.evolve(state, cfg).final_state
        out_b = dyn.evolve(rotated, cfg).final_state
        scale = max(1.0, np.max(np.abs(out_b.phi.values)))
        assert np.max(
            np.abs(out_b.phi.values - np.exp(1j * theta) * out_a.phi.values)
        ) / scale <= 1e-8
        assert np.max(np.abs(out_b.chi_plus.values - out_a.chi_plus.values)) <= 1e-8

    def test_dimensional_reduction(self, rng):
        g2 = make_grid(2, 8, 2 * np.pi)
        g3 = make_grid(3, 8, 2 * np.pi)
        state2 = random_state(g2, rng, amplitude=0.2)
        n = 8

        def lift(f):
            return Field(g3, PHYSICAL,
                         np.repeat(as_physical(f).values[:, :, None], n, axis=2))

        state3 = dyn.State(0.0, lift(state2.phi), lift(state2.chi_plus),
                           lift(state2.chi_minus), np.array(E3))
        cfg2 = dyn.SimConfig(dt=2e-3, t_end=0.1)
        cfg3 = dyn.SimConfig(dt=2e-3, t_end=0.1, e=E3)
        out2 = dyn.evolve(state2, cfg2).final_state
        out3 = dyn.evolve(state3, cfg3).final_state
        p2 = as_physical(out2.phi).values
        p3 = as_physical(out3.phi).values
        for k in range(n):
            assert np.max(np.abs(p3[:, :, k] - p2)) <= 1e-10

    def test_reformulation_equivalence(self, rng):
        grid = make_grid(2, 16, 2 * np.pi)
        state = random_state(grid, rng, amplitude=0.3)
        t_end = 0.1

        def final(integrator, dt):
            cfg = dyn.SimConfig(dt=dt, t_end=t_end, integrator=integrator)
            return dyn.evolve(state, cfg).final_state

        def disc(a, b):
            return max(
                l2_norm(Field(grid, SPECTRAL, x.values - y.values))
                / max(l2_norm(y), 1e-30)
                for x, y in ((a.phi, b.phi), (a.chi_plus, b.chi_plus))
            )

        d1 = disc(final("strang", 2e-3), final("reference_rk4_second_order", 2e-3))
        d2 = disc(final("strang", 1e-3), final("reference_rk4_second_order", 1e-3))
        assert d1 < 1e-4
        assert d1 / d2 > 3.0  # discrepancy shrinks at the dominant (Strang) order


class TestCheckpoints:
    def test_round_trip(self, grid3d, rng, tmp_path):
        state = random_state(grid3d, rng, e=np.array(E3))
        state = dyn.State(0.25, state.phi, state.chi_plus, state.chi_minus,
                          np.array(E3))
        cfg = dyn.SimConfig(dt=1e-3, t_end=0.5, e=E3)
        path = tmp_path / "run.mzck"
        dyn.write_checkpoint(path, state, cfg, t0=0.0, step_index=250)
        back, t0, idx, digest = dyn.read_checkpoint(path)
        assert back.t == state.t
        assert t0 == 0.0
        assert idx == 250
        assert digest == dyn.config_hash(cfg)
        assert np.array_equal(back.phi.values, state.phi.values)
        assert np.array_equal(back.chi_minus.values, state.chi_minus.values)

    def test_resume_bit_identical(self, grid2d, rng, tmp_path):
        state = random_state(grid2d, rng, amplitude=0.2)
        cfg = dyn.SimConfig(dt=1e-3, t_end=0.05, checkpoint_stride=10)
        full = dyn.evolve(state, cfg).final_state

        mid = dyn.evolve(state, dyn.SimConfig(dt=1e-3, t_end=0.02,
                                              checkpoint_stride=10)).final_state
        path = tmp_path / "mid.mzck"
        dyn.write_checkpoint(path, mid, cfg, t0=0.0, step_index=20)
        loaded, t0, idx, _ = dyn.read_checkpoint(path)
        rest = dyn.evolve(loaded, dyn.SimConfig(dt=1e-3, t_end=0.03,
                                                checkpoint_stride=10)).final_state
        assert np.array_equal(rest.phi.values, full.phi.values)
        assert np.array_equal(rest.chi_plus.values, full.chi_plus.values)
