import numpy as np
import pytest

from mzak import grids


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid2d():
    return grids.make_grid(2, 16, 2 * np.pi)


@pytest.fixture
def grid3d():
    return grids.make_grid(3, 8, 2 * np.pi)


def single_mode_field(grid, mode, amplitude=1.0):
    """amplitude * exp(i xi_m . x) as a spectral field."""
    vals = np.zeros(grid.shape, dtype=np.complex128)
    idx = tuple(int(m) % grid.points_per_axis for m in mode)
    vals[idx] = amplitude
    return grids.Field(grid, grids.SPECTRAL, vals)


def exact_product_coeffs(fv, gv, grid):
    """Direct O(N^(2d)) convolution of coefficient arrays over Z^d.

    True (non-aliased) product coefficients computed with explicit loops;
    modes falling outside the representable range are dropped.
    """
    modes = grid.axis_modes.astype(int)
    out = np.zeros(grid.shape, dtype=complex)
    idx_of = {m: i for i, m in enumerate(modes)}
    flat = list(np.ndindex(grid.shape))
    for i1 in flat:
        c1 = fv[i1]
        if c1 == 0:
            continue
        m1 = tuple(modes[k] for k in i1)
        for i2 in flat:
            c2 = gv[i2]
            if c2 == 0:
                continue
            m = tuple(modes[k] + mm for k, mm in zip(i2, m1))
            try:
                target = tuple(idx_of[mk] for mk in m)
            except KeyError:
                continue
            out[target] += c1 * c2
    return out
