"""Periodic-torus grids, Fourier transforms, and multiplier operators.

Conventions, fixed once and tested via Parseval:

* physical samples live at x_j = j*L/N per axis, j = 0..N-1;
* spectral values are Fourier-series coefficients c_m with

      f(x) = sum_m c_m exp(i xi_m . x),   xi_m = (2*pi/L) * m,

  where the integer mode vector m runs over [-N/2, N/2) per axis in
  numpy fftfreq order;
* the physical quadrature weight is (L/N)^d and the spectral weight is
  L^d per coefficient, so that

      sum_j |f(x_j)|^2 (L/N)^d  ==  L^d sum_m |c_m|^2 .

The Nyquist index (m = -N/2) has an ambiguous sign under first-order
differentiation; every multiplier and derivative operator therefore
annihilates it.  Raw transforms are exact inverses of each other and do
not touch any mode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

PHYSICAL = "physical"
SPECTRAL = "spectral"

SNAPSHOT_MAGIC = b"MZAK"
SNAPSHOT_VERSION = 1


class GridError(ValueError):
    """Invalid grid parameters."""


class RepresentationError(ValueError):
    """Field passed in the wrong representation."""


class ZeroModeError(ValueError):
    """Negative-order homogeneous multiplier hit a nonzero zero mode."""


class Grid:
    """Uniform periodic grid on the torus [0, L)^d, d in {2, 3}.

    Holds the frequency lattice and the masks shared by every operator.
    """

    def __init__(self, dimension: int, points_per_axis: int, period: float):
        if dimension not in (2, 3):
            raise GridError(f"dimension must be 2 or 3, got {dimension}")
        if points_per_axis % 2 != 0 or points_per_axis < 8:
            raise GridError(
                f"points_per_axis must be an even integer >= 8, got {points_per_axis}"
            )
        if not (period > 0):
            raise GridError(f"period must be positive, got {period}")
        self.dimension = int(dimension)
        self.points_per_axis = int(points_per_axis)
        self.period = float(period)

        n = self.points_per_axis
        self.shape = (n,) * self.dimension
        self.size = n**self.dimension
        self.spacing = self.period / n

        # integer modes in fftfreq order: 0, 1, .., N/2-1, -N/2, .., -1
        self.axis_modes = np.fft.fftfreq(n, 1.0 / n)
        self.axis_freqs = (2.0 * np.pi / self.period) * self.axis_modes
        mode_mesh = np.meshgrid(*([self.axis_modes] * self.dimension), indexing="ij")
        self.modes = np.stack(mode_mesh)
        freq_mesh = np.meshgrid(*([self.axis_freqs] * self.dimension), indexing="ij")
        self.xi = np.stack(freq_mesh)
        self.xi_sq = np.sum(self.xi * self.xi, axis=0)
        self.xi_abs = np.sqrt(self.xi_sq)

        # 2/3-rule mask: keep |m_j| <= N/3 on every axis
        self.dealias_mask = np.all(np.abs(self.modes) <= n / 3.0, axis=0)
        # Nyquist-free mask: |m_j| != N/2 on every axis
        self.nyquist_free = np.all(np.abs(self.modes) != n // 2, axis=0)

        axis_x = self.spacing * np.arange(n)
        self.x = np.stack(np.meshgrid(*([axis_x] * self.dimension), indexing="ij"))

        self.cell_volume = self.spacing**self.dimension
        self.volume = self.period**self.dimension

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.dimension == other.dimension
            and self.points_per_axis == other.points_per_axis
            and self.period == other.period
        )

    def __hash__(self):
        return hash((self.dimension, self.points_per_axis, self.period))

    def __repr__(self):
        return (
            f"Grid(dimension={self.dimension}, points_per_axis={self.points_per_axis},"
            f" period={self.period})"
        )


def make_grid(dimension: int, points_per_axis: int, period: float) -> Grid:
    """Validated Grid constructor."""
    return Grid(dimension, points_per_axis, period)


@dataclass
class Field:
    """Complex scalar samples on a Grid, tagged physical or spectral."""

    grid: Grid
    rep: str
    values: np.ndarray

    def __post_init__(self):
        if self.rep not in (PHYSICAL, SPECTRAL):
            raise RepresentationError(f"unknown representation {self.rep!r}")
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.grid.shape:
            raise GridError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.rep, self.values.copy())


def zeros_field(grid: Grid, rep: str = SPECTRAL) -> Field:
    return Field(grid, rep, np.zeros(grid.shape, dtype=np.complex128))


def forward_transform(field: Field) -> Field:
    """Physical -> spectral (Fourier-series coefficients)."""
    if field.rep != PHYSICAL:
        raise RepresentationError("forward_transform expects a physical field")
    coeffs = np.fft.fftn(field.values) / field.grid.size
    return Field(field.grid, SPECTRAL, coeffs)


def inverse_transform(field: Field) -> Field:
    """Spectral -> physical samples."""
    if field.rep != SPECTRAL:
        raise RepresentationError("inverse_transform expects a spectral field")
    vals = np.fft.ifftn(field.values) * field.grid.size
    return Field(field.grid, PHYSICAL, vals)


def as_spectral(field: Field) -> Field:
    return field if field.rep == SPECTRAL else forward_transform(field)


def as_physical(field: Field) -> Field:
    return field if field.rep == PHYSICAL else inverse_transform(field)


@dataclass(frozen=True)
class MultiplierSpec:
    """Fourier-multiplier descriptor.

    kind:
      riesz_power          |xi|^s            (s = exponent; s < 0 needs a
                                              zero-free zero mode)
      laplacian            -|xi|^2
      bilaplacian          |xi|^4
      bracket_power        (1+|xi|^2)^(k/2)  (k = exponent)
      zero_mean_projection 1 - delta_{xi=0}
    """

    kind: str
    exponent: float | None = None

    _KINDS = ("riesz_power", "laplacian", "bilaplacian", "bracket_power",
              "zero_mean_projection")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if self.kind in ("riesz_power", "bracket_power") and self.exponent is None:
            raise ValueError(f"multiplier {self.kind!r} requires an exponent")


def multiplier_symbol(grid: Grid, spec: MultiplierSpec) -> np.ndarray:
    """Symbol of the multiplier on the grid's frequency lattice.

    Homogeneous negative powers put 0 at the zero mode; apply_multiplier
    checks that the input carries no content there.
    """
    if spec.kind == "riesz_power":
        s = float(spec.exponent)
        with np.errstate(divide="ignore"):
            sym = np.where(grid.xi_abs > 0, grid.xi_abs, 1.0) ** s
        sym = np.where(grid.xi_abs > 0, sym, 0.0 if s != 0 else 1.0)
        return sym
    if spec.kind == "laplacian":
        return -grid.xi_sq
    if spec.kind == "bilaplacian":
        return grid.xi_sq**2
    if spec.kind == "bracket_power":
        return (1.0 + grid.xi_sq) ** (float(spec.exponent) / 2.0)
    if spec.kind == "zero_mean_projection":
        return np.where(grid.xi_abs > 0, 1.0, 0.0)
    raise AssertionError(spec.kind)


def _check_zero_mode_free(field: Field, what: str) -> None:
    c0 = field.values[(0,) * field.grid.dimension]
    scale = max(1.0, float(np.max(np.abs(field.values))))
    if abs(c0) > 1e-12 * scale:
        raise ZeroModeError(
            f"{what} is undefined on the zero mode: field has mean coefficient "
            f"{c0!r}; compose zero_mean_projection first"
        )


def apply_multiplier(field: Field, spec: MultiplierSpec) -> Field:
    """Pointwise spectrum multiplication by the symbol (spectral output).

    The Nyquist planes are annihilated (sign ambiguity policy).
    """
    f = as_spectral(field)
    if spec.kind == "riesz_power" and float(spec.exponent) < 0:
        _check_zero_mode_free(f, f"riesz_power({spec.exponent})")
    sym = multiplier_symbol(f.grid, spec)
    out = f.values * sym * f.grid.nyquist_free
    return Field(f.grid, SPECTRAL, out)


def gradient(field: Field) -> tuple[Field, ...]:
    """Spectral gradient: component j multiplies by i*xi_j (Nyquist zeroed)."""
    f = as_spectral(field)
    grid = f.grid
    comps = []
    for j in range(grid.dimension):
        vals = 1j * grid.xi[j] * f.values * grid.nyquist_free
        comps.append(Field(grid, SPECTRAL, vals))
    return tuple(comps)


def perp_gradient(field: Field) -> tuple[Field, Field]:
    """Rotated gradient (d/dx2, -d/dx1); 2D only."""
    f = as_spectral(field)
    if f.grid.dimension != 2:
        raise GridError("perp_gradient is defined on 2D grids only")
    d1, d2 = gradient(f)
    return d2, Field(f.grid, SPECTRAL, -d1.values)


def cross_dot_e(vf1, vf2, e) -> Field:
    """Pointwise (vf1 x vf2) . e in physical space; 3D only."""
    e = np.asarray(e, dtype=float)
    if e.shape != (3,):
        raise GridError("e must be a real 3-vector")
    if len(vf1) != 3 or len(vf2) != 3:
        raise GridError("cross_dot_e expects two 3-component vector fields")
    grid = vf1[0].grid
    if grid.dimension != 3:
        raise GridError("cross_dot_e is defined on 3D grids only")
    a = [as_physical(c).values for c in vf1]
    b = [as_physical(c).values for c in vf2]
    out = (
        e[0] * (a[1] * b[2] - a[2] * b[1])
        + e[1] * (a[2] * b[0] - a[0] * b[2])
        + e[2] * (a[0] * b[1] - a[1] * b[0])
    )
    return Field(grid, PHYSICAL, out)


def dealias(field: Field) -> Field:
    """2/3-rule truncation: zero every mode with any |m_j| > N/3."""
    f = as_spectral(field)
    return Field(f.grid, SPECTRAL, f.values * f.grid.dealias_mask)


def project_zero_mean(field: Field) -> Field:
    f = as_spectral(field)
    vals = f.values.copy()
    vals[(0,) * f.grid.dimension] = 0.0
    return Field(f.grid, SPECTRAL, vals)


def conjugate_field(field: Field) -> Field:
    """Complex conjugate of the represented function, same representation."""
    if field.rep == PHYSICAL:
        return Field(field.grid, PHYSICAL, np.conj(field.values))
    return Field(field.grid, SPECTRAL, hermitian_reflect(field.values))


def hermitian_reflect(values: np.ndarray) -> np.ndarray:
    """conj(c_{-m}): the coefficient array of the conjugate function."""
    out = np.conj(values)
    for ax in range(values.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def l2_norm(field: Field) -> float:
    """Torus L2 norm under the documented measure convention."""
    if field.rep == PHYSICAL:
        return float(
            np.sqrt(np.sum(np.abs(field.values) ** 2) * field.grid.cell_volume)
        )
    return float(np.sqrt(np.sum(np.abs(field.values) ** 2) * field.grid.volume))


def integrate(field: Field) -> complex:
    """Integral of the field over the torus."""
    if field.rep == PHYSICAL:
        return complex(np.sum(field.values) * field.grid.cell_volume)
    return complex(field.values[(0,) * field.grid.dimension] * field.grid.volume)


def inner_product(f: Field, g: Field) -> complex:
    """<f, g> = integral of f * conj(g)."""
    fv = as_physical(f).values
    gv = as_physical(g).values
    return complex(np.sum(fv * np.conj(gv)) * f.grid.cell_volume)


def random_band_limited_field(
    grid: Grid,
    rng: np.random.Generator,
    *,
    real: bool = False,
    max_mode: int | None = None,
    decay: float = 1.0,
    amplitude: float = 1.0,
) -> Field:
    """Mean-zero random field supported in |m_j| <= max_mode (spectral output).

    Coefficients are complex Gaussian draws damped by (1+|m|^2)^(-decay);
    real=True enforces Hermitian symmetry so the physical samples are real.
    The default band is the 2/3-rule ball, so products of two such fields
    are alias-free after one dealias pass.
    """
    if max_mode is None:
        max_mode = grid.points_per_axis // 3
    max_mode = min(max_mode, grid.points_per_axis // 3)
    mode_sq = np.sum(grid.modes**2, axis=0)
    mask = np.all(np.abs(grid.modes) <= max_mode, axis=0)
    coeffs = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    coeffs *= mask / (1.0 + mode_sq) ** decay
    if real:
        coeffs = 0.5 * (coeffs + hermitian_reflect(coeffs))
    coeffs[(0,) * grid.dimension] = 0.0
    f = Field(grid, SPECTRAL, amplitude * coeffs)
    return f


# --- field snapshot format --------------------------------------------------
#
# fixed header: magic "MZAK", version u32, dimension u32, N u32, period f64,
# representation u8 (0 = physical, 1 = spectral); then little-endian f64
# interleaved (re, im) values in row-major index order.

_HEADER = struct.Struct("<4sIIIdB")


def field_snapshot_bytes(field: Field) -> bytes:
    rep_code = 0 if field.rep == PHYSICAL else 1
    header = _HEADER.pack(
        SNAPSHOT_MAGIC,
        SNAPSHOT_VERSION,
        field.grid.dimension,
        field.grid.points_per_axis,
        field.grid.period,
        rep_code,
    )
    body = np.ascontiguousarray(field.values, dtype="<c16").tobytes()
    return header + body


def field_from_snapshot_bytes(buf: bytes, offset: int = 0) -> tuple[Field, int]:
    """Decode one snapshot from buf starting at offset; returns (field, end)."""
    magic, version, dim, n, period, rep_code = _HEADER.unpack_from(buf, offset)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"not a field snapshot: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    grid = make_grid(dim, n, period)
    start = offset + _HEADER.size
    end = start + grid.size * 16
    values = np.frombuffer(buf[start:end], dtype="<c16").reshape(grid.shape)
    rep = PHYSICAL if rep_code == 0 else SPECTRAL
    return Field(grid, rep, values.astype(np.complex128)), end


def write_field_snapshot(field: Field, path) -> None:
    with open(path, "wb") as fh:
        fh.write(field_snapshot_bytes(field))


def read_field_snapshot(path, grid: Grid | None = None) -> Field:
    with open(path, "rb") as fh:
        field, _ = field_from_snapshot_bytes(fh.read())
    if grid is not None and grid != field.grid:
        raise GridError("snapshot grid does not match the supplied grid")
    return field
