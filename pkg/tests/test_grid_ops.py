"""Stencil oracles and summation-by-parts properties for the grid operators.

Oracles are independent loop-based reimplementations of each stencil on tiny
grids; property tests check the adjoint/conservation identities that the
energy bookkeeping relies on.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from copolymer.grid_ops import (
    Grid2D,
    ScalarField,
    NEUMANN_ZERO,
    dirichlet,
    pad_ghost,
    lap,
    lap_x,
    lap_y,
    grad,
    mixed_xy,
    mixed_xy_sym,
    centered_x_adjoint,
    centered_y_adjoint,
    face_diff_x,
    face_diff_y,
    laplacian_h,
    grad_h,
    inner_h,
    norm_h,
    mean_h,
)

RNG = np.random.default_rng(7)


def pad_oracle(v, bc=NEUMANN_ZERO):
    """Loop-based ghost padding: mirror for Neumann, 2c - interior for Dirichlet."""
    nx, ny = v.shape
    p = np.zeros((nx + 2, ny + 2))
    for i in range(nx):
        for j in range(ny):
            p[i + 1, j + 1] = v[i, j]

    def ghost(interior):
        if bc.tag == "neumann":
            return interior
        return 2.0 * bc.value - interior

    for j in range(ny):
        p[0, j + 1] = ghost(v[0, j])
        p[-1, j + 1] = ghost(v[-1, j])
    for i in range(nx):
        p[i + 1, 0] = ghost(v[i, 0])
        p[i + 1, -1] = ghost(v[i, -1])
    p[0, 0] = ghost(v[0, 0])
    p[0, -1] = ghost(v[0, -1])
    p[-1, 0] = ghost(v[-1, 0])
    p[-1, -1] = ghost(v[-1, -1])
    return p


def lap_oracle(v, hx, hy, bc=NEUMANN_ZERO):
    p = pad_oracle(v, bc)
    nx, ny = v.shape
    out = np.zeros_like(v)
    for i in range(nx):
        for j in range(ny):
            out[i, j] = (p[i + 2, j + 1] - 2 * v[i, j] + p[i, j + 1]) / hx**2 + (
                p[i + 1, j + 2] - 2 * v[i, j] + p[i + 1, j]
            ) / hy**2
    return out


def grad_oracle(v, hx, hy, bc=NEUMANN_ZERO):
    p = pad_oracle(v, bc)
    nx, ny = v.shape
    gx = np.zeros_like(v)
    gy = np.zeros_like(v)
    for i in range(nx):
        for j in range(ny):
            gx[i, j] = (p[i + 2, j + 1] - p[i, j + 1]) / (2 * hx)
            gy[i, j] = (p[i + 1, j + 2] - p[i + 1, j]) / (2 * hy)
    return gx, gy


def mixed_oracle(v, hx, hy):
    p = pad_oracle(v)
    nx, ny = v.shape
    out = np.zeros_like(v)
    for i in range(nx):
        for j in range(ny):
            out[i, j] = (
                p[i + 2, j + 2] - p[i + 2, j] - p[i, j + 2] + p[i, j]
            ) / (4 * hx * hy)
    return out


def dense_matrix(op, nx, ny):
    """Materialize a linear operator on (nx, ny) arrays as a dense matrix."""
    n = nx * ny
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        cols.append(op(e.reshape(nx, ny)).ravel())
    return np.array(cols).T


# ---------------------------------------------------------------------------
# oracle equivalence
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("bc", [NEUMANN_ZERO, dirichlet(0.0), dirichlet(1.3)])
def test_pad_ghost_matches_oracle(bc):
    v = RNG.standard_normal((5, 4))
    np.testing.assert_allclose(pad_ghost(v, bc), pad_oracle(v, bc), rtol=0, atol=0)


@pytest.mark.parametrize("bc", [NEUMANN_ZERO, dirichlet(0.7)])
def test_lap_matches_oracle(bc):
    v = RNG.standard_normal((6, 5))
    np.testing.assert_allclose(lap(v, 0.25, 0.2, bc), lap_oracle(v, 0.25, 0.2, bc),
                               rtol=1e-14, atol=1e-13)


@pytest.mark.parametrize("bc", [NEUMANN_ZERO, dirichlet(-0.4)])
def test_grad_matches_oracle(bc):
    v = RNG.standard_normal((6, 5))
    gx, gy = grad(v, 0.25, 0.2, bc)
    ox, oy = grad_oracle(v, 0.25, 0.2, bc)
    np.testing.assert_allclose(gx, ox, rtol=1e-14, atol=1e-13)
    np.testing.assert_allclose(gy, oy, rtol=1e-14, atol=1e-13)


def test_mixed_matches_oracle():
    v = RNG.standard_normal((6, 6))
    np.testing.assert_allclose(mixed_xy(v, 0.1, 0.1), mixed_oracle(v, 0.1, 0.1),
                               rtol=1e-13, atol=1e-12)


def test_lap_splits_into_lap_x_plus_lap_y():
    v = RNG.standard_normal((7, 6))
    np.testing.assert_allclose(
        lap(v, 0.3, 0.5), lap_x(v, 0.3) + lap_y(v, 0.5), rtol=1e-14, atol=1e-13
    )


def test_face_diffs():
    v = RNG.standard_normal((5, 4))
    np.testing.assert_allclose(face_diff_x(v, 0.5), (v[1:] - v[:-1]) / 0.5)
    np.testing.assert_allclose(face_diff_y(v, 0.25), (v[:, 1:] - v[:, :-1]) / 0.25)


# ---------------------------------------------------------------------------
# exactness on polynomials / constants
# ---------------------------------------------------------------------------

def test_lap_of_constant_is_zero():
    v = np.full((8, 9), 2.5)
    assert np.abs(lap(v, 0.125, 0.1)).max() == 0.0


def test_grad_of_constant_is_zero():
    gx, gy = grad(np.full((8, 9), -1.25), 0.125, 0.1)
    assert np.abs(gx).max() == 0.0 and np.abs(gy).max() == 0.0


def test_second_order_convergence_on_smooth_field():
    # Richardson on a Neumann-compatible function: cos(pi x) cos(2 pi y)
    errs = []
    for n in (16, 32, 64):
        g = Grid2D(n, n)
        X, Y = g.cell_centers()
        v = np.cos(np.pi * X) * np.cos(2 * np.pi * Y)
        exact = -(np.pi**2 + 4 * np.pi**2) * v
        err = np.abs(lap(v, g.hx, g.hy) - exact).max()
        errs.append(err)
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9) and np.all(orders < 2.1)


# ---------------------------------------------------------------------------
# adjoint / conservation identities (property tests)
# ---------------------------------------------------------------------------

small = st.integers(min_value=3, max_value=7)


@given(small, small, st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_lap_self_adjoint_and_conservative(nx, ny, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((nx, ny))
    v = rng.standard_normal((nx, ny))
    hx, hy = 1.0 / nx, 1.0 / ny
    lu, lv = lap(u, hx, hy), lap(v, hx, hy)
    # self-adjoint in the cell inner product
    assert np.sum(lu * v) == pytest.approx(np.sum(u * lv), rel=1e-11, abs=1e-11)
    # zero-flux walls conserve the mean
    assert np.sum(lu) == pytest.approx(0.0, abs=1e-10 * max(1.0, np.abs(lu).max()))


@given(small, small, st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_centered_adjoints_are_exact_transposes(nx, ny, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((nx, ny))
    v = rng.standard_normal((nx, ny))
    hx, hy = 0.37, 0.21

    def cx(w):
        return grad(w, hx, hy)[0]

    def cy(w):
        return grad(w, hx, hy)[1]

    assert np.sum(cx(u) * v) == pytest.approx(np.sum(u * centered_x_adjoint(v, hx)),
                                              rel=1e-12, abs=1e-12)
    assert np.sum(cy(u) * v) == pytest.approx(np.sum(u * centered_y_adjoint(v, hy)),
                                              rel=1e-12, abs=1e-12)


@given(small, small, st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_mixed_sym_is_self_adjoint(nx, ny, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((nx, ny))
    v = rng.standard_normal((nx, ny))
    mu, mv = mixed_xy_sym(u, 0.2, 0.3), mixed_xy_sym(v, 0.2, 0.3)
    assert np.sum(mu * v) == pytest.approx(np.sum(u * mv), rel=1e-11, abs=1e-11)


def test_mixed_sym_equals_mixed_in_the_interior():
    v = RNG.standard_normal((8, 8))
    a = mixed_xy(v, 0.125, 0.125)
    b = mixed_xy_sym(v, 0.125, 0.125)
    np.testing.assert_allclose(a[2:-2, 2:-2], b[2:-2, 2:-2], rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# field wrappers and inner product
# ---------------------------------------------------------------------------

def test_inner_product_and_norm():
    g = Grid2D(4, 5, lx=2.0, ly=1.0)
    f1 = ScalarField.full(g, 3.0)
    f2 = ScalarField.full(g, -2.0)
    # (f1, f2)_h = sum f1 f2 hx hy = 3 * (-2) * |domain|
    assert inner_h(f1, f2) == pytest.approx(-6.0 * 2.0, rel=1e-14)
    assert norm_h(f1) == pytest.approx(3.0 * np.sqrt(2.0), rel=1e-14)
    assert mean_h(f1) == pytest.approx(3.0, rel=1e-15)


def test_field_wrappers_delegate_to_kernels():
    g = Grid2D(6, 6)
    v = RNG.standard_normal((6, 6))
    f = ScalarField(g, v)
    np.testing.assert_array_equal(laplacian_h(f).values, lap(v, g.hx, g.hy))
    gx, gy = grad_h(f)
    ox, oy = grad(v, g.hx, g.hy)
    np.testing.assert_array_equal(gx.values, ox)
    np.testing.assert_array_equal(gy.values, oy)


def test_grid_geometry():
    g = Grid2D(10, 20, lx=2.0, ly=4.0)
    assert g.hx == pytest.approx(0.2)
    assert g.hy == pytest.approx(0.2)
    assert g.cell_area == pytest.approx(0.04)
    X, Y = g.cell_centers()
    assert X[0, 0] == pytest.approx(0.1)     # first cell center at h/2
    assert Y[-1, -1] == pytest.approx(3.9)   # last cell center at L - h/2
    assert X.shape == (10, 20)


def test_mismatched_grids_rejected():
    f1 = ScalarField.full(Grid2D(4, 4), 1.0)
    f2 = ScalarField.full(Grid2D(5, 4), 1.0)
    with pytest.raises(ValueError):
        inner_h(f1, f2)
