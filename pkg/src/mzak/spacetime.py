"""Space-time fields on the discrete torus and their dispersive norms.

A SpaceTimeField stacks n_time spatial slices (time-major) sampled with
spacing dt; the time axis is treated as one more torus direction whose
coordinates run over [-T/2, T/2) in fftfreq order, so a centered cutoff
window is a plain pointwise multiply.  Frequencies:

    tau_j = (2*pi / (n_time*dt)) * j,   j in [-n_time/2, n_time/2).

Spectral values are joint Fourier-series coefficients c_{m,j}; with the
density normalization g := sqrt(L^d * T) * c the plain l2 sum of g equals
the space-time L2 norm, and the weighted norms are

    X^{k,b}:  || <sigma>^b w(xi)^k g ||_{l2}
    Y^{k}:    || <sigma>^{-1} w(xi)^k g ||_{l2_xi(l1_tau)}

where sigma is the modulation tau + |xi|^2 (dispersion "schrodinger") or
tau +- |xi| ("wave_plus"/"wave_minus"), w(xi) = <xi> = (1+|xi|^2)^(1/2)
for the inhomogeneous weight style and |xi| for the homogeneous one.  A
field supported on a single tau slice makes Y^k equal X^{k,-1} exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid, GridError, ZeroModeError, hermitian_reflect

PHYSICAL = "physical"
SPECTRAL_XT = "spectral_xt"

DISPERSIONS = ("schrodinger", "wave_plus", "wave_minus")
WEIGHT_STYLES = ("inhomogeneous", "homogeneous")


@dataclass
class SpaceTimeField:
    grid: Grid
    n_time: int
    dt: float
    rep: str
    values: np.ndarray  # shape (n_time, *grid.shape)

    def __post_init__(self):
        if self.n_time % 2 != 0 or self.n_time < 8:
            raise GridError(
                f"n_time must be an even integer >= 8, got {self.n_time}"
            )
        if not (self.dt > 0):
            raise GridError("dt must be positive")
        if self.rep not in (PHYSICAL, SPECTRAL_XT):
            raise GridError(f"unknown representation {self.rep!r}")
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.n_time, *self.grid.shape):
            raise GridError(
                f"values shape {self.values.shape} does not match "
                f"(n_time, *grid.shape) = {(self.n_time, *self.grid.shape)}"
            )

    @property
    def duration(self) -> float:
        return self.n_time * self.dt

    @property
    def times(self) -> np.ndarray:
        """Sample times in storage order: 0, dt, .., -dt (fftfreq layout)."""
        return self.dt * np.fft.fftfreq(self.n_time, 1.0 / self.n_time)

    @property
    def taus(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_time, d=self.dt)

    @property
    def total_modes(self) -> int:
        return self.n_time * self.grid.size

    def copy(self) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.n_time, self.dt, self.rep,
                              self.values.copy())


def stf_forward(stf: SpaceTimeField) -> SpaceTimeField:
    if stf.rep != PHYSICAL:
        raise GridError("stf_forward expects a physical field")
    coeffs = np.fft.fftn(stf.values) / stf.total_modes
    return SpaceTimeField(stf.grid, stf.n_time, stf.dt, SPECTRAL_XT, coeffs)


def stf_inverse(stf: SpaceTimeField) -> SpaceTimeField:
    if stf.rep != SPECTRAL_XT:
        raise GridError("stf_inverse expects a spectral field")
    vals = np.fft.ifftn(stf.values) * stf.total_modes
    return SpaceTimeField(stf.grid, stf.n_time, stf.dt, PHYSICAL, vals)


def stf_as_spectral(stf: SpaceTimeField) -> SpaceTimeField:
    return stf if stf.rep == SPECTRAL_XT else stf_forward(stf)


def stf_as_physical(stf: SpaceTimeField) -> SpaceTimeField:
    return stf if stf.rep == PHYSICAL else stf_inverse(stf)


def measure(stf: SpaceTimeField) -> float:
    """L^d * T: the weight turning coefficient sums into space-time integrals."""
    return stf.grid.volume * stf.duration


def density_coefficients(stf: SpaceTimeField) -> np.ndarray:
    """sqrt(measure) * coefficients; plain l2 of this equals the L2_xt norm."""
    return stf_as_spectral(stf).values * np.sqrt(measure(stf))


@dataclass(frozen=True)
class NormSpec:
    spatial_exponent: float
    modulation_exponent: float
    dispersion: str = "schrodinger"
    weight_style: str = "inhomogeneous"

    def __post_init__(self):
        if self.dispersion not in DISPERSIONS:
            raise ValueError(f"unknown dispersion {self.dispersion!r}")
        if self.weight_style not in WEIGHT_STYLES:
            raise ValueError(f"unknown weight style {self.weight_style!r}")


def modulation(grid: Grid, taus: np.ndarray, dispersion: str) -> np.ndarray:
    """sigma(xi, tau) broadcast to shape (n_time, *grid.shape)."""
    tau = taus.reshape((-1,) + (1,) * grid.dimension)
    if dispersion == "schrodinger":
        return tau + grid.xi_sq
    if dispersion == "wave_plus":
        return tau + grid.xi_abs
    if dispersion == "wave_minus":
        return tau - grid.xi_abs
    raise ValueError(f"unknown dispersion {dispersion!r}")


def bracket(x: np.ndarray) -> np.ndarray:
    return np.sqrt(1.0 + x * x)


def _spatial_weight(grid: Grid, k: float, style: str) -> np.ndarray:
    if style == "inhomogeneous":
        return bracket(grid.xi_abs) ** k
    pos = grid.xi_abs > 0
    safe = np.where(pos, grid.xi_abs, 1.0)
    return np.where(pos, safe**k, 0.0)


def _check_homogeneous_input(stf_spec: SpaceTimeField, style: str) -> None:
    if style != "homogeneous":
        return
    zero_col = stf_spec.values[(slice(None),) + (0,) * stf_spec.grid.dimension]
    scale = max(1.0, float(np.max(np.abs(stf_spec.values))))
    if float(np.max(np.abs(zero_col))) > 1e-12 * scale:
        raise ZeroModeError(
            "homogeneous spatial weight requires zero-mode-free input"
        )


def xkb_norm(stf: SpaceTimeField, spec: NormSpec) -> float:
    """Weighted space-time L2 norm under the documented measure convention."""
    s = stf_as_spectral(stf)
    _check_homogeneous_input(s, spec.weight_style)
    sig = modulation(s.grid, s.taus, spec.dispersion)
    w_mod = bracket(sig) ** spec.modulation_exponent
    w_sp = _spatial_weight(s.grid, spec.spatial_exponent, spec.weight_style)
    weighted = np.abs(s.values) ** 2 * (w_mod**2) * (w_sp**2)
    return float(np.sqrt(np.sum(weighted) * measure(stf)))


def yk_norm(stf: SpaceTimeField, spec: NormSpec) -> float:
    """l2 over xi of the l1-over-tau sums of <sigma>^{-1} w(xi)^k |g|.

    The modulation weight is fixed at <sigma>^{-1}; spec.modulation_exponent
    is ignored by construction of the space.
    """
    s = stf_as_spectral(stf)
    _check_homogeneous_input(s, spec.weight_style)
    sig = modulation(s.grid, s.taus, spec.dispersion)
    w_sp = _spatial_weight(s.grid, spec.spatial_exponent, spec.weight_style)
    g = np.abs(s.values) * np.sqrt(measure(stf))
    per_xi = np.sum(g / bracket(sig), axis=0) * w_sp
    return float(np.sqrt(np.sum(per_xi**2)))


# --- smooth time cutoff --------------------------------------------------------


def smooth_plateau(t: np.ndarray) -> np.ndarray:
    """Even C^inf bump: 1 on [-1,1], supported in (-2,2), values in [0,1].

    On 1 < |t| < 2 it is h(2-|t|) / (h(2-|t|) + h(|t|-1)) with
    h(u) = exp(-1/u); this is the standard two-sided mollifier glue.
    """
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    out = np.zeros_like(a)
    out[a <= 1.0] = 1.0
    mid = (a > 1.0) & (a < 2.0)
    if np.any(mid):
        u = 2.0 - a[mid]  # in (0,1)
        h1 = np.exp(-1.0 / u)
        h2 = np.exp(-1.0 / (1.0 - u))
        out[mid] = h1 / (h1 + h2)
    return out


def time_window(stf: SpaceTimeField, delta: float) -> SpaceTimeField:
    """Multiply by the plateau cutoff psi(t/delta); needs supp inside the axis."""
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    if 2.0 * delta > stf.duration / 2.0:
        raise ValueError(
            f"window support (-2*{delta}, 2*{delta}) does not fit inside the "
            f"time extent [-{stf.duration / 2}, {stf.duration / 2})"
        )
    phys = stf_as_physical(stf)
    w = smooth_plateau(phys.times / delta)
    vals = phys.values * w.reshape((-1,) + (1,) * stf.grid.dimension)
    return SpaceTimeField(stf.grid, stf.n_time, stf.dt, PHYSICAL, vals)


# --- construction helpers -------------------------------------------------------


def random_spacetime_field(
    grid: Grid,
    n_time: int,
    dt: float,
    rng: np.random.Generator,
    *,
    real: bool = False,
    max_mode: int | None = None,
    max_tau_mode: int | None = None,
    decay: float = 1.0,
    spatial_mean_zero: bool = True,
) -> SpaceTimeField:
    """Band-limited random space-time field (spectral output).

    Spatial modes are restricted to |m_j| <= max_mode and time modes to
    |j| <= max_tau_mode, with smooth polynomial damping; the spatial zero
    mode is removed (the ratio harness feeds homogeneous multipliers).
    """
    if max_mode is None:
        max_mode = grid.points_per_axis // 3
    if max_tau_mode is None:
        max_tau_mode = n_time // 3
    tmodes = np.fft.fftfreq(n_time, 1.0 / n_time)
    shape = (n_time, *grid.shape)
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    t_mask = (np.abs(tmodes) <= max_tau_mode).reshape((-1,) + (1,) * grid.dimension)
    s_mask = np.all(np.abs(grid.modes) <= max_mode, axis=0)
    mode_sq = np.sum(grid.modes**2, axis=0) + (tmodes**2).reshape(
        (-1,) + (1,) * grid.dimension
    )
    coeffs *= t_mask * s_mask / (1.0 + mode_sq) ** decay
    if real:
        coeffs = 0.5 * (coeffs + hermitian_reflect(coeffs))
    if spatial_mean_zero:
        coeffs[(slice(None),) + (0,) * grid.dimension] = 0.0
    return SpaceTimeField(grid, n_time, dt, SPECTRAL_XT, coeffs)


def spectral_embed(stf: SpaceTimeField, factor: int = 2) -> SpaceTimeField:
    """Same function on a dyadically refined lattice.

    Doubles the per-axis point count and n_time while halving dt, keeping
    both the spatial box and the time extent (hence the frequency lattice
    spacing) fixed; coefficients are copied to their matching modes.
    """
    g = stf.grid
    fine_grid = Grid(g.dimension, factor * g.points_per_axis, g.period)
    fine_nt = factor * stf.n_time
    s = stf_as_spectral(stf)
    out = np.zeros((fine_nt, *fine_grid.shape), dtype=np.complex128)

    def half_slices(n):
        return [(slice(0, n // 2), slice(0, n // 2)),
                (slice(n // 2, n), slice(-(n // 2), None))]

    # copy per-axis halves (nonnegative block, negative block)
    src_blocks = [half_slices(stf.n_time)] + [half_slices(g.points_per_axis)] * g.dimension
    import itertools

    for combo in itertools.product(*src_blocks):
        src = tuple(c[0] for c in combo)
        dst = tuple(c[1] for c in combo)
        out[dst] = s.values[src]
    return SpaceTimeField(fine_grid, fine_nt, stf.dt / factor, SPECTRAL_XT, out)


def stf_derivative(stf: SpaceTimeField, axis: int = 0) -> SpaceTimeField:
    """First spatial derivative along the given axis (Nyquist zeroed)."""
    s = stf_as_spectral(stf)
    g = s.grid
    if not (0 <= axis < g.dimension):
        raise GridError(f"axis {axis} out of range for dimension {g.dimension}")
    sym = 1j * g.xi[axis] * g.nyquist_free
    return SpaceTimeField(g, s.n_time, s.dt, SPECTRAL_XT, s.values * sym)


def stf_spatial_riesz(stf: SpaceTimeField, power: float) -> SpaceTimeField:
    """B^power = |xi|^power applied slice-wise; zero mode annihilated."""
    s = stf_as_spectral(stf)
    g = s.grid
    if power < 0:
        _check_homogeneous_input(s, "homogeneous")
    pos = g.xi_abs > 0
    safe = np.where(pos, g.xi_abs, 1.0)
    sym = np.where(pos, safe**power, 0.0 if power != 0 else 1.0)
    return SpaceTimeField(g, s.n_time, s.dt, SPECTRAL_XT, s.values * sym)


def stf_multiply(a: SpaceTimeField, b: SpaceTimeField) -> SpaceTimeField:
    """Pointwise product in physical space-time."""
    pa = stf_as_physical(a)
    pb = stf_as_physical(b)
    return SpaceTimeField(a.grid, a.n_time, a.dt, PHYSICAL, pa.values * pb.values)


def stf_conjugate(stf: SpaceTimeField) -> SpaceTimeField:
    if stf.rep == PHYSICAL:
        return SpaceTimeField(stf.grid, stf.n_time, stf.dt, PHYSICAL,
                              np.conj(stf.values))
    return SpaceTimeField(stf.grid, stf.n_time, stf.dt, SPECTRAL_XT,
                          hermitian_reflect(stf.values))


def stf_project_spatial_mean(stf: SpaceTimeField) -> SpaceTimeField:
    """Remove the spatial zero mode at every tau (torus zero-frequency caveat)."""
    s = stf_as_spectral(stf)
    vals = s.values.copy()
    vals[(slice(None),) + (0,) * s.grid.dimension] = 0.0
    return SpaceTimeField(s.grid, s.n_time, s.dt, SPECTRAL_XT, vals)
