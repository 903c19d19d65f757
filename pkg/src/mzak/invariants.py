"""Conserved quantities and the quartic energy-trap bound.

Two functionals are conserved by the flow:

    I1 = || grad phi ||^2
    I2 = || Delta phi ||^2 + (1/2)(||B^{-1} chi_t||^2 + ||chi||^2) + C

where C is the cubic coupling integral

    C = (1/i) int chi * (grad(conj phi) (x) grad(phi)) dx

with (x) the rotated dot product in 2D and the e-projected cross product
in 3D.  The monitor

    m(t) = ||Delta phi||^2 + (1/4)||chi||^2 + (1/2)||B^{-1} chi_t||^2
           + ||grad phi||^2

obeys m <= E~ + c0 m^2 once |C| <= (1/4)||chi||^2 + c0(||grad phi||^2 +
||Delta phi||^2)^2, which traps m below the smaller root of
f(m) = E~ - m + c0 m^2 whenever E~ < 1/(4 c0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import State, from_first_order, gauge_bilinear
from .grids import Field, Grid, as_physical, as_spectral, random_band_limited_field


class DegenerateEnsembleError(ValueError):
    """Constant-estimation ensemble carried no usable samples."""


def _sobolev_sq(f: Field, power: float) -> float:
    """||B^power f||^2 = L^d sum |xi|^{2 power} |c|^2 (zero mode dropped for power<0)."""
    s = as_spectral(f)
    grid = s.grid
    w = grid.xi_abs
    if power < 0:
        pos = w > 0
        safe = np.where(pos, w, 1.0)
        weights = np.where(pos, safe ** (2 * power), 0.0)
    else:
        weights = w ** (2 * power)
    return float(np.sum(weights * np.abs(s.values) ** 2) * grid.volume)


def compute_I1(phi: Field) -> float:
    """Quadrature of |grad phi|^2 over the torus (spectral sum)."""
    return _sobolev_sq(phi, 1.0)


def cubic_term(phi: Field, chi: Field, e=None, imag_tol: float = 1e-10) -> float:
    """(1/i) int chi * (grad conj(phi) (x) grad(phi)) dx; real up to rounding."""
    grid = phi.grid
    q = gauge_bilinear(phi, e)
    chi_p = as_physical(chi)
    val = complex(np.sum(chi_p.values * q.values) * grid.cell_volume)
    scale = max(1.0, abs(val))
    if abs(val.imag) > imag_tol * scale:
        raise ValueError(
            f"cubic energy integral has imaginary residue {val.imag:.3e}; "
            "upstream fields are corrupted"
        )
    return val.real


def compute_I2(phi: Field, chi: Field, chi_t: Field, e=None) -> float:
    """||Delta phi||^2 + (||B^{-1}chi_t||^2 + ||chi||^2)/2 + cubic coupling."""
    return (
        _sobolev_sq(phi, 2.0)
        + 0.5 * (_sobolev_sq(chi_t, -1.0) + _sobolev_sq(chi, 0.0))
        + cubic_term(phi, chi, e)
    )


def compute_m(state: State) -> float:
    """Monitor ||Delta phi||^2 + ||chi||^2/4 + ||B^{-1}chi_t||^2/2 + ||grad phi||^2."""
    chi, chi_t = from_first_order(state.chi_plus, state.chi_minus)
    return (
        _sobolev_sq(state.phi, 2.0)
        + 0.25 * _sobolev_sq(chi, 0.0)
        + 0.5 * _sobolev_sq(chi_t, -1.0)
        + _sobolev_sq(state.phi, 1.0)
    )


def compute_E_tilde(phi0: Field, chi0: Field, chi1: Field, e=None) -> float:
    """Initial-data majorant: I2 with the cubic term in absolute value, plus I1."""
    return (
        _sobolev_sq(phi0, 2.0)
        + 0.5 * (_sobolev_sq(chi0, 0.0) + _sobolev_sq(chi1, -1.0))
        + abs(cubic_term(phi0, chi0, e))
        + _sobolev_sq(phi0, 1.0)
    )


@dataclass
class InvariantSeries:
    """Sampled diagnostics along one trajectory.

    The cubic channel is bookkeeping for the trap check (it enters E~ at
    t=0); the serialized contract is the four columns t, I1, I2, m.
    """

    times: list = field(default_factory=list)
    I1: list = field(default_factory=list)
    I2: list = field(default_factory=list)
    m: list = field(default_factory=list)
    cubic: list = field(default_factory=list)

    def append(self, t, i1, i2, m, cubic):
        if self.times and t <= self.times[-1]:
            raise ValueError("sample times must be strictly increasing")
        self.times.append(t)
        self.I1.append(i1)
        self.I2.append(i2)
        self.m.append(m)
        self.cubic.append(cubic)

    def __len__(self):
        return len(self.times)


class InvariantRecorder:
    """Evolution observer appending (t, I1, I2, m) samples to a series."""

    def __init__(self):
        self.series = InvariantSeries()

    def __call__(self, state: State, step_index: int) -> None:
        chi, chi_t = from_first_order(state.chi_plus, state.chi_minus)
        e = state.e
        cub = cubic_term(state.phi, chi, e)
        i2 = (
            _sobolev_sq(state.phi, 2.0)
            + 0.5 * (_sobolev_sq(chi_t, -1.0) + _sobolev_sq(chi, 0.0))
            + cub
        )
        i1 = compute_I1(state.phi)
        mm = (
            _sobolev_sq(state.phi, 2.0)
            + 0.25 * _sobolev_sq(chi, 0.0)
            + 0.5 * _sobolev_sq(chi_t, -1.0)
            + i1
        )
        self.series.append(state.t, i1, i2, mm, cub)


def write_invariant_csv(series: InvariantSeries, path) -> None:
    """CSV contract: header t,I1,I2,m; full f64 precision."""
    with open(path, "w", newline="") as fh:
        fh.write("t,I1,I2,m\n")
        for t, a, b, c in zip(series.times, series.I1, series.I2, series.m):
            fh.write(f"{t:.17g},{a:.17g},{b:.17g},{c:.17g}\n")


def estimate_c0(
    grid: Grid,
    e=None,
    ensemble_size: int = 200,
    rng: np.random.Generator | None = None,
    seed: int = 0,
    safety: float = 2.0,
) -> float:
    """Empirical quartic-bound constant on the discrete grid.

    For each random band-limited pair (phi, chi) the binding rescaling of
    chi is taken analytically: with A = |int chi_hat q dx| for the unit
    chi direction and D = ||grad phi||^2 + ||Delta phi||^2, the smallest
    constant closing  |C| <= ||chi||^2/4 + c0 D^2  over all rescalings of
    that chi is A^2 / D^2.  The estimate is the ensemble max, inflated by
    the documented safety factor.

    The ensemble band is a fixed ball |m| <= 5, independent of the grid,
    so the estimate is a refinement-stable quadrature of one function
    class rather than a resolution-dependent quantity.
    """
    if ensemble_size < 100:
        raise ValueError("ensemble_size must be >= 100")
    if rng is None:
        rng = np.random.default_rng(seed)
    worst = 0.0
    usable = 0
    for _ in range(ensemble_size):
        phi = random_band_limited_field(grid, rng, decay=1.0, max_mode=5)
        chi = random_band_limited_field(grid, rng, real=True, decay=1.0, max_mode=5)
        d = _sobolev_sq(phi, 1.0) + _sobolev_sq(phi, 2.0)
        chi_norm = np.sqrt(_sobolev_sq(chi, 0.0))
        if d <= 0 or chi_norm <= 0:
            continue
        unit_chi = Field(grid, chi.rep, chi.values / chi_norm)
        a = abs(cubic_term(phi, unit_chi, e))
        worst = max(worst, (a * a) / (d * d))
        usable += 1
    if usable == 0 or worst == 0.0:
        raise DegenerateEnsembleError("ensemble produced no nondegenerate samples")
    return safety * worst


@dataclass
class TrapReport:
    c0: float
    E_tilde: float
    m0: float
    m1: float | None
    smallness_met: bool
    satisfied: list | None
    consistent: bool
    note: str = ""


def trap_check(series: InvariantSeries, c0: float, slack: float = 1e-6) -> TrapReport:
    """Check m(t) <= m1 against the smaller root of f(m) = E~ - m + c0 m^2.

    E~ is formed from the t=0 sample with the cubic term replaced by its
    absolute value.  E~ >= 1/(4 c0) is reported as hypothesis failure,
    not as a violation.
    """
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    if len(series) == 0:
        raise ValueError("empty invariant series")
    if len(series.cubic) != len(series):
        raise ValueError("series is missing the cubic channel needed for E~")
    cubic0 = series.cubic[0]
    e_tilde = series.I1[0] + series.I2[0] - cubic0 + abs(cubic0)
    m0 = 1.0 / (2.0 * c0)
    disc = 1.0 - 4.0 * c0 * e_tilde
    if disc < 0:
        return TrapReport(
            c0, e_tilde, m0, None, False, None, True,
            note="smallness hypothesis not met",
        )
    m1 = (1.0 - np.sqrt(disc)) / (2.0 * c0)
    satisfied = [mv <= m1 * (1.0 + slack) for mv in series.m]
    consistent = series.m[0] <= m0 * (1.0 + slack)
    note = "" if consistent else "m(0) exceeds m0 despite the smallness hypothesis"
    return TrapReport(c0, e_tilde, m0, float(m1), True, satisfied, consistent, note)
