"""Time evolution of the coupled fourth-order Schrodinger / wave system.

The evolved unknowns are (phi, chi_plus, chi_minus) where

    chi_pm = chi +- i B^{-1} chi_t,   B = (-Delta)^{1/2},

so the real wave pair (chi, chi_t) is carried as a conjugate pair of
complex first-order variables.  The rates used everywhere are the ones
obtained by substituting that change of variables into the second-order
system (and validated numerically against a method-of-lines integrator
for the original second-order form):

    d/dt phi     = i Delta phi + i Delta^{-1} N_S
    d/dt chi_pm  = -+ i B chi_pm  +- i B^{-1} N_W

with the nonlinearities

    N_S = (1/i) grad(phi) . perp_grad(chi)          (2D)
          (1/i) (grad(phi) x grad(chi)) . e         (3D)
    N_W = (1/i) Delta(grad(conj phi) . perp_grad(phi))      (2D)
          (1/i) Delta(grad(conj phi) x grad(phi)) . e       (3D).

Nonlinearities are evaluated pseudospectrally: derivatives in spectral
space, products in physical space, one 2/3-rule dealias plus zero-mean
projection after each product.  Linear flows use exact propagators.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .grids import (
    Field,
    Grid,
    PHYSICAL,
    SPECTRAL,
    as_physical,
    as_spectral,
    conjugate_field,
    cross_dot_e,
    dealias,
    field_from_snapshot_bytes,
    field_snapshot_bytes,
    gradient,
    GridError,
    l2_norm,
    perp_gradient,
    project_zero_mean,
)

INTEGRATORS = ("strang", "interaction_rk4", "reference_rk4_second_order")


class BlowUpError(RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message, t=None, step_index=None):
        super().__init__(message)
        self.t = t
        self.step_index = step_index


class StateCorruptionError(RuntimeError):
    """chi_minus stopped being the conjugate of chi_plus."""


@dataclass
class SimConfig:
    dt: float
    t_end: float
    integrator: str = "strang"
    dealias: bool = True
    nonlinearity_enabled: bool = True
    e: tuple[float, float, float] | None = None
    checkpoint_stride: int = 100

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.t_end > 0 and self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if self.e is not None:
            e = tuple(float(c) for c in self.e)
            if len(e) != 3 or not all(np.isfinite(e)):
                raise ValueError("e must be a finite real 3-vector")
            self.e = e
        if self.checkpoint_stride < 1:
            raise ValueError("checkpoint_stride must be >= 1")

    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class State:
    """Evolution state (t, phi, chi_plus, chi_minus); fields kept spectral."""

    t: float
    phi: Field
    chi_plus: Field
    chi_minus: Field
    e: np.ndarray | None = None

    def __post_init__(self):
        self.phi = as_spectral(self.phi)
        self.chi_plus = as_spectral(self.chi_plus)
        self.chi_minus = as_spectral(self.chi_minus)
        grid = self.phi.grid
        if self.chi_plus.grid != grid or self.chi_minus.grid != grid:
            raise GridError("state fields must share one grid")
        if grid.dimension == 3:
            if self.e is None:
                raise ValueError("3D states require the constant vector e")
            self.e = np.asarray(self.e, dtype=float)
        elif self.e is not None:
            raise ValueError("e is only meaningful on 3D grids")

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    def copy(self) -> "State":
        return State(
            self.t,
            self.phi.copy(),
            self.chi_plus.copy(),
            self.chi_minus.copy(),
            None if self.e is None else self.e.copy(),
        )


def conjugacy_residual(state: State) -> float:
    """Relative L2 distance between chi_minus and conj(chi_plus)."""
    ref = conjugate_field(state.chi_plus)
    num = l2_norm(Field(state.grid, SPECTRAL, state.chi_minus.values - ref.values))
    den = max(l2_norm(state.chi_plus), 1e-300)
    return num / den


# --- nonlinearities ----------------------------------------------------------


def _postprocess(product: Field, do_dealias: bool) -> Field:
    out = as_spectral(product)
    if do_dealias:
        out = dealias(out)
    return project_zero_mean(out)


def schrodinger_nonlinearity(
    phi: Field, chi: Field, e=None, do_dealias: bool = True
) -> Field:
    """N_S = (1/i) grad(phi) . perp_grad(chi) in 2D, (1/i)(grad phi x grad chi).e in 3D.

    chi is the real wave field; output is spectral, dealiased, mean-zero.
    """
    grid = phi.grid
    if grid.dimension == 2:
        if e is not None:
            raise GridError("2D geometry takes no vector e")
        gphi = [as_physical(c) for c in gradient(phi)]
        pchi = [as_physical(c) for c in perp_gradient(chi)]
        prod = gphi[0].values * pchi[0].values + gphi[1].values * pchi[1].values
        out = Field(grid, PHYSICAL, -1j * prod)
    else:
        if e is None:
            raise GridError("3D geometry requires the vector e")
        gphi = gradient(phi)
        gchi = gradient(chi)
        crossed = cross_dot_e(gphi, gchi, e)
        out = Field(grid, PHYSICAL, -1j * crossed.values)
    return _postprocess(out, do_dealias)


def gauge_bilinear(phi: Field, e=None) -> Field:
    """q = (1/i) grad(conj phi) . perp_grad(phi) (2D) or (1/i)(grad conj phi x grad phi).e (3D).

    The integrand of the cubic energy term; real-valued up to rounding
    because the bilinear is anti-Hermitian in phi.  Physical output.
    """
    grid = phi.grid
    gphi = gradient(phi)
    gbar = [conjugate_field(c) for c in gphi]
    if grid.dimension == 2:
        if e is not None:
            raise GridError("2D geometry takes no vector e")
        a = [as_physical(c).values for c in gbar]
        b1, b2 = (as_physical(c).values for c in gphi)
        prod = a[0] * b2 - a[1] * b1
        return Field(grid, PHYSICAL, -1j * prod)
    if e is None:
        raise GridError("3D geometry requires the vector e")
    crossed = cross_dot_e(gbar, gphi, e)
    return Field(grid, PHYSICAL, -1j * crossed.values)


def wave_nonlinearity(phi: Field, e=None, do_dealias: bool = True) -> Field:
    """N_W = Delta applied to the gauge bilinear; real-valued, spectral, mean-zero."""
    grid = phi.grid
    q = _postprocess(gauge_bilinear(phi, e), do_dealias)
    out = Field(grid, SPECTRAL, -grid.xi_sq * q.values)
    return out


# --- first-order reformulation ------------------------------------------------


def _check_real(f: Field, what: str, tol: float = 1e-10) -> None:
    phys = as_physical(f)
    scale = max(1.0, float(np.max(np.abs(phys.values))))
    if float(np.max(np.abs(phys.values.imag))) > tol * scale:
        raise ValueError(f"{what} must be real-valued")


def to_first_order(chi0: Field, chi1: Field) -> tuple[Field, Field]:
    """chi_pm = chi0 +- i B^{-1} chi1; both inputs real and mean-zero."""
    grid = chi0.grid
    c0 = as_spectral(chi0)
    c1 = as_spectral(chi1)
    _check_real(c0, "chi0")
    _check_real(c1, "chi1")
    for f, name in ((c0, "chi0"), (c1, "chi1")):
        mean = abs(f.values[(0,) * grid.dimension])
        if mean > 1e-12 * max(1.0, float(np.max(np.abs(f.values)))):
            raise ValueError(f"{name} must be mean-zero")
    with np.errstate(divide="ignore"):
        inv_b = np.where(grid.xi_abs > 0, 1.0 / np.where(grid.xi_abs > 0, grid.xi_abs, 1.0), 0.0)
    w = 1j * inv_b * c1.values
    chi_plus = Field(grid, SPECTRAL, c0.values + w)
    chi_minus = Field(grid, SPECTRAL, c0.values - w)
    return chi_plus, chi_minus


def from_first_order(
    chi_plus: Field, chi_minus: Field, tol: float = 1e-8
) -> tuple[Field, Field]:
    """Recover (chi, chi_t) = ((chi+ + chi-)/2, B (chi+ - chi-)/(2i))."""
    grid = chi_plus.grid
    cp = as_spectral(chi_plus)
    cm = as_spectral(chi_minus)
    ref = conjugate_field(cp)
    num = l2_norm(Field(grid, SPECTRAL, cm.values - ref.values))
    den = max(l2_norm(cp), 1e-300)
    if num / den > tol and num > 1e-14:
        raise StateCorruptionError(
            f"chi_minus is not the conjugate of chi_plus (relative residual {num / den:.3e})"
        )
    chi = Field(grid, SPECTRAL, 0.5 * (cp.values + cm.values))
    chi_t = Field(grid, SPECTRAL, grid.xi_abs * (cp.values - cm.values) / 2j)
    return chi, chi_t


# --- propagators and rates ----------------------------------------------------

PROPAGATOR_KINDS = ("schrodinger", "wave_plus", "wave_minus")


def _propagator_phase(grid: Grid, t: float, kind: str) -> np.ndarray:
    if kind == "schrodinger":
        return np.exp(-1j * t * grid.xi_sq)
    if kind == "wave_plus":
        return np.exp(-1j * t * grid.xi_abs)
    if kind == "wave_minus":
        return np.exp(1j * t * grid.xi_abs)
    raise ValueError(f"unknown propagator kind {kind!r}")


def linear_propagator(field: Field, t: float, kind: str) -> Field:
    """Exact free flow: spectrum times e^{-it|xi|^2} or e^{-+it|xi|}."""
    f = as_spectral(field)
    return Field(f.grid, SPECTRAL, f.values * _propagator_phase(f.grid, t, kind))


def _inv_symbols(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    pos = grid.xi_abs > 0
    safe_sq = np.where(pos, grid.xi_sq, 1.0)
    safe_abs = np.where(pos, grid.xi_abs, 1.0)
    return np.where(pos, 1.0 / safe_sq, 0.0), np.where(pos, 1.0 / safe_abs, 0.0)


def _nonlinear_rates(state_vals, grid, e, do_dealias):
    """Rates from the nonlinearities alone, on raw coefficient arrays."""
    phi_v, cp_v, cm_v = state_vals
    phi = Field(grid, SPECTRAL, phi_v)
    chi = Field(grid, SPECTRAL, 0.5 * (cp_v + cm_v))
    ns = schrodinger_nonlinearity(phi, chi, e, do_dealias)
    nw = wave_nonlinearity(phi, e, do_dealias)
    inv_sq, inv_abs = _inv_symbols(grid)
    dphi = -1j * inv_sq * ns.values
    dcp = 1j * inv_abs * nw.values
    dcm = -1j * inv_abs * nw.values
    return dphi, dcp, dcm


def rhs_first_order(state: State, do_dealias: bool = True, nonlinearity: bool = True):
    """Full time derivatives (dphi, dchi_plus, dchi_minus) as spectral Fields."""
    grid = state.grid
    dphi = -1j * grid.xi_sq * state.phi.values
    dcp = -1j * grid.xi_abs * state.chi_plus.values
    dcm = 1j * grid.xi_abs * state.chi_minus.values
    if nonlinearity:
        nl = _nonlinear_rates(
            (state.phi.values, state.chi_plus.values, state.chi_minus.values),
            grid,
            state.e,
            do_dealias,
        )
        dphi = dphi + nl[0]
        dcp = dcp + nl[1]
        dcm = dcm + nl[2]
    return (
        Field(grid, SPECTRAL, dphi),
        Field(grid, SPECTRAL, dcp),
        Field(grid, SPECTRAL, dcm),
    )


# --- steppers -------------------------------------------------------------------


class _StepperBase:
    def __init__(self, grid: Grid, config: SimConfig):
        self.grid = grid
        self.config = config
        self.e = None if config.e is None else np.asarray(config.e, dtype=float)

    def _linear_phases(self, tau):
        g = self.grid
        return (
            np.exp(-1j * tau * g.xi_sq),
            np.exp(-1j * tau * g.xi_abs),
            np.exp(1j * tau * g.xi_abs),
        )


class _StrangStepper(_StepperBase):
    """Exact linear half-step, explicit-midpoint nonlinear step, linear half-step."""

    def __init__(self, grid, config):
        super().__init__(grid, config)
        self.half = self._linear_phases(config.dt / 2.0)

    def __call__(self, vals):
        ps, wp, wm = self.half
        phi = vals[0] * ps
        cp = vals[1] * wp
        cm = vals[2] * wm
        if self.config.nonlinearity_enabled:
            dt = self.config.dt
            k1 = _nonlinear_rates((phi, cp, cm), self.grid, self.e, self.config.dealias)
            mid = (
                phi + 0.5 * dt * k1[0],
                cp + 0.5 * dt * k1[1],
                cm + 0.5 * dt * k1[2],
            )
            k2 = _nonlinear_rates(mid, self.grid, self.e, self.config.dealias)
            phi = phi + dt * k2[0]
            cp = cp + dt * k2[1]
            cm = cm + dt * k2[2]
        return phi * ps, cp * wp, cm * wm


class _InteractionRK4Stepper(_StepperBase):
    """Classical four-stage scheme on the interaction-picture variables."""

    def __init__(self, grid, config):
        super().__init__(grid, config)
        self.half = self._linear_phases(config.dt / 2.0)
        self.full = self._linear_phases(config.dt)

    def _n(self, vals):
        if not self.config.nonlinearity_enabled:
            z = np.zeros(self.grid.shape, dtype=complex)
            return (z, z, z)
        return _nonlinear_rates(vals, self.grid, self.e, self.config.dealias)

    @staticmethod
    def _mul(phases, vals):
        return tuple(p * v for p, v in zip(phases, vals))

    @staticmethod
    def _axpy(a, xs, ys):
        return tuple(y + a * x for x, y in zip(xs, ys))

    def __call__(self, vals):
        dt = self.config.dt
        u_half = self._mul(self.half, vals)
        u_full = self._mul(self.full, vals)

        k1 = self._n(vals)
        k2 = self._n(self._mul(self.half, self._axpy(0.5 * dt, k1, vals)))
        k3 = self._n(self._axpy(0.5 * dt, k2, u_half))
        k4 = self._n(self._mul(self.half, self._axpy(dt, k3, u_half)))

        ek1 = self._mul(self.full, k1)
        ek2 = self._mul(self.half, k2)
        ek3 = self._mul(self.half, k3)
        return tuple(
            uf + (dt / 6.0) * (a + 2.0 * (b + c) + d)
            for uf, a, b, c, d in zip(u_full, ek1, ek2, ek3, k4)
        )


class _ReferenceRK4Stepper(_StepperBase):
    """Method-of-lines RK4 on the original second-order unknowns (phi, chi, chi_t)."""

    def _rates(self, vals):
        phi_v, chi_v, nu_v = vals
        g = self.grid
        dphi = -1j * g.xi_sq * phi_v
        dchi = nu_v
        dnu = -g.xi_sq * chi_v
        if self.config.nonlinearity_enabled:
            phi = Field(g, SPECTRAL, phi_v)
            chi = Field(g, SPECTRAL, chi_v)
            ns = schrodinger_nonlinearity(phi, chi, self.e, self.config.dealias)
            nw = wave_nonlinearity(phi, self.e, self.config.dealias)
            inv_sq, _ = _inv_symbols(g)
            dphi = dphi - 1j * inv_sq * ns.values
            dnu = dnu + nw.values
        return dphi, dchi, dnu

    def __call__(self, vals):
        g = self.grid
        cp = Field(g, SPECTRAL, vals[1])
        cm = Field(g, SPECTRAL, vals[2])
        chi, chi_t = from_first_order(cp, cm)
        u = (vals[0], chi.values, chi_t.values)

        dt = self.config.dt
        k1 = self._rates(u)
        k2 = self._rates(tuple(x + 0.5 * dt * k for x, k in zip(u, k1)))
        k3 = self._rates(tuple(x + 0.5 * dt * k for x, k in zip(u, k2)))
        k4 = self._rates(tuple(x + dt * k for x, k in zip(u, k3)))
        out = tuple(
            x + (dt / 6.0) * (a + 2 * b + 2 * c + d)
            for x, a, b, c, d in zip(u, k1, k2, k3, k4)
        )
        chi_p, chi_m = to_first_order(
            Field(g, SPECTRAL, out[1]), Field(g, SPECTRAL, out[2])
        )
        return out[0], chi_p.values, chi_m.values


_STEPPERS = {
    "strang": _StrangStepper,
    "interaction_rk4": _InteractionRK4Stepper,
    "reference_rk4_second_order": _ReferenceRK4Stepper,
}


def _make_stepper(grid: Grid, config: SimConfig):
    return _STEPPERS[config.integrator](grid, config)


def step(state: State, config: SimConfig) -> State:
    """Advance one step of config.dt with the configured integrator."""
    stepper = _make_stepper(state.grid, config)
    vals = stepper((state.phi.values, state.chi_plus.values, state.chi_minus.values))
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise BlowUpError(
                f"non-finite values after step at t={state.t + config.dt:.6g}",
                t=state.t + config.dt,
            )
    g = state.grid
    return State(
        state.t + config.dt,
        Field(g, SPECTRAL, vals[0]),
        Field(g, SPECTRAL, vals[1]),
        Field(g, SPECTRAL, vals[2]),
        state.e,
    )


@dataclass
class EvolveResult:
    final_state: State
    n_steps: int
    observer_calls: int


def evolve(state: State, config: SimConfig, observers=()) -> EvolveResult:
    """Repeated stepping with observer callbacks every checkpoint_stride steps.

    Observers are called as obs(state, step_index) at step indices
    0, stride, 2*stride, ...; they receive immutable snapshots.
    """
    stepper = _make_stepper(state.grid, config)
    n_steps = config.n_steps()
    stride = config.checkpoint_stride
    t0 = state.t
    calls = 0

    def notify(s, idx):
        nonlocal calls
        for obs in observers:
            obs(s, idx)
        calls += 1

    notify(state, 0)
    vals = (state.phi.values, state.chi_plus.values, state.chi_minus.values)
    g = state.grid
    current = state
    for i in range(1, n_steps + 1):
        vals = stepper(vals)
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise BlowUpError(
                f"non-finite values at step {i} (t={t0 + i * config.dt:.6g})",
                t=t0 + i * config.dt,
                step_index=i,
            )
        if i % stride == 0 or i == n_steps:
            current = State(
                t0 + i * config.dt,
                Field(g, SPECTRAL, vals[0]),
                Field(g, SPECTRAL, vals[1]),
                Field(g, SPECTRAL, vals[2]),
                state.e,
            )
            if i % stride == 0:
                notify(current, i)
    return EvolveResult(current, n_steps, calls)


# --- checkpoints ---------------------------------------------------------------
#
# header: magic "MZCK", version u32, t f64, t0 f64, step_index u64,
# e[3] f64, sha256(config) 32 bytes; then three field snapshots
# (phi, chi_plus, chi_minus) in the spectral_core snapshot format.

CHECKPOINT_MAGIC = b"MZCK"
CHECKPOINT_VERSION = 1
_CK_HEADER = struct.Struct("<4sIddQddd32s")


def config_hash(config: SimConfig) -> str:
    payload = json.dumps(
        {
            "dt": config.dt,
            "t_end": config.t_end,
            "integrator": config.integrator,
            "dealias": config.dealias,
            "nonlinearity_enabled": config.nonlinearity_enabled,
            "e": config.e,
            "checkpoint_stride": config.checkpoint_stride,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def write_checkpoint(path, state: State, config: SimConfig, t0: float, step_index: int) -> None:
    e = (0.0, 0.0, 0.0) if state.e is None else tuple(float(c) for c in state.e)
    header = _CK_HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        state.t,
        t0,
        step_index,
        *e,
        bytes.fromhex(config_hash(config)),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for f in (state.phi, state.chi_plus, state.chi_minus):
            fh.write(field_snapshot_bytes(f))


def read_checkpoint(path):
    """Returns (state, t0, step_index, config_hash_hex)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, version, t, t0, step_index, e0, e1, e2, digest = _CK_HEADER.unpack_from(buf)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    offset = _CK_HEADER.size
    fields = []
    for _ in range(3):
        f, offset = field_from_snapshot_bytes(buf, offset)
        fields.append(f)
    e = np.array([e0, e1, e2]) if fields[0].grid.dimension == 3 else None
    state = State(t, fields[0], fields[1], fields[2], e)
    return state, t0, step_index, digest.hex()
