"""Eigenbasis identities and dense-matrix oracles for the fast solvers."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from copolymer.grid_ops import Grid2D, lap, dirichlet
from copolymer.model_core import ModelParams
from copolymer.spectral_solvers import (
    BlockHelmholtzPlan,
    KrylovResult,
    SingularModeError,
    cosine_plan,
    sine_plan,
    krylov_solve,
    solve_block_helmholtz,
)

RNG = np.random.default_rng(11)


def make_params(**kw):
    base = dict(
        n_poly=(3.0, 2.0, 1.0),
        chi=np.array([[0.0, 2.0, 3.0], [2.0, 0.0, 4.0], [3.0, 4.0, 0.0]]),
        eps=0.1,
        gamma=1.0,
        phibar=(0.3, 0.3, 0.4),
        mobility=1e-5 * np.array([[4.0, 1.0, 2.0], [1.0, 5.0, 3.0], [2.0, 3.0, 6.0]]),
    )
    base.update(kw)
    return ModelParams(**base)


# ---------------------------------------------------------------------------
# cosine basis: diagonalizes the zero-Neumann Laplacian
# ---------------------------------------------------------------------------

def test_cosine_eigenvalue_formula():
    g = Grid2D(8, 8)
    plan = cosine_plan(g)
    # lam_k = -(4/h^2) sin^2(k pi / (2N)) summed over the two axes
    kx = np.arange(8)
    lx = -(4.0 / g.hx**2) * np.sin(kx * np.pi / 16) ** 2
    np.testing.assert_allclose(plan.eigenvalues, lx[:, None] + lx[None, :],
                               rtol=1e-13, atol=1e-10)


@given(st.integers(3, 10), st.integers(3, 10), st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_cosine_plan_diagonalizes_lap(nx, ny, seed):
    g = Grid2D(nx, ny)
    plan = cosine_plan(g)
    v = np.random.default_rng(seed).standard_normal((nx, ny))
    lhs = plan.forward(lap(v, g.hx, g.hy))
    rhs = plan.eigenvalues * plan.forward(v)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-8)


def test_cosine_roundtrip():
    g = Grid2D(6, 9)
    plan = cosine_plan(g)
    v = RNG.standard_normal((6, 9))
    np.testing.assert_allclose(plan.inverse(plan.forward(v)), v, rtol=0, atol=1e-13)


def test_poisson_neumann_residual_and_mean():
    g = Grid2D(16, 12)
    plan = cosine_plan(g)
    rhs = RNG.standard_normal((16, 12))
    rhs -= rhs.mean()
    psi = plan.poisson_neumann(rhs)
    np.testing.assert_allclose(lap(psi, g.hx, g.hy), rhs, rtol=0, atol=1e-9)
    assert abs(psi.mean()) < 1e-12


def test_poisson_neumann_drops_mean_mode():
    g = Grid2D(8, 8)
    plan = cosine_plan(g)
    psi = plan.poisson_neumann(np.ones((8, 8)))  # pure mean: projected away
    assert np.abs(psi).max() < 1e-12


# ---------------------------------------------------------------------------
# sine basis: homogeneous-Dirichlet Poisson
# ---------------------------------------------------------------------------

def test_poisson_dirichlet_residual():
    g = Grid2D(12, 10)
    plan = sine_plan(g)
    rhs = RNG.standard_normal((12, 10))
    u = plan.poisson_dirichlet0(rhs)
    np.testing.assert_allclose(lap(u, g.hx, g.hy, dirichlet(0.0)), rhs,
                               rtol=0, atol=1e-9)


def test_poisson_dirichlet_dense_oracle():
    nx = ny = 8
    g = Grid2D(nx, ny)
    n = nx * ny
    A = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        A[:, k] = lap(e.reshape(nx, ny), g.hx, g.hy, dirichlet(0.0)).ravel()
    rhs = RNG.standard_normal(n)
    u_dense = np.linalg.solve(A, rhs)
    u_fast = sine_plan(g).poisson_dirichlet0(rhs.reshape(nx, ny)).ravel()
    np.testing.assert_allclose(u_fast, u_dense, rtol=1e-9, atol=1e-11)


# ---------------------------------------------------------------------------
# block Helmholtz: dense oracle on 8x8
# ---------------------------------------------------------------------------

def dense_block_system(g, params, coeff):
    """Dense matrix of v -> v - coeff * m_eff lap(L v) on stacked fields."""
    from copolymer.model_core import lh_apply_state

    nx, ny = g.nx, g.ny
    n = 3 * nx * ny

    def op(v3):
        lv = lh_apply_state(v3, params, g)
        ml = np.einsum("kl,lxy->kxy", params.m_eff,
                       np.stack([lap(lv[k], g.hx, g.hy) for k in range(3)]))
        return v3 - coeff * ml

    A = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        A[:, k] = op(e.reshape(3, nx, ny)).ravel()
    return A


def test_block_helmholtz_dense_oracle():
    g = Grid2D(8, 8)
    params = make_params()
    coeff = 0.5 * 1e-3
    plan = BlockHelmholtzPlan(cosine_plan(g), coeff, params.m_eff,
                              params.gamma_i, params.chi, params.alpha)
    A = dense_block_system(g, params, coeff)
    rhs3 = RNG.standard_normal((3, 8, 8))
    # the dense operator treats psi via the mean-projected Neumann solve, which
    # matches the per-mode elimination only on zero-mean inputs plus means
    x_fast = plan.solve_stacked(rhs3)
    x_dense = np.linalg.solve(A, rhs3.ravel()).reshape(3, 8, 8)
    np.testing.assert_allclose(x_fast, x_dense, rtol=1e-9, atol=1e-9)


def test_block_helmholtz_apply_inverts_solve():
    g = Grid2D(8, 6)
    params = make_params()
    plan = BlockHelmholtzPlan(cosine_plan(g), 2.5e-4, params.m_eff,
                              params.gamma_i, params.chi, params.alpha)
    v = RNG.standard_normal((3, 8, 6))
    np.testing.assert_allclose(plan.solve_stacked(plan.apply_stacked(v)), v,
                               rtol=1e-10, atol=1e-10)


def test_block_helmholtz_preserves_means():
    g = Grid2D(8, 8)
    params = make_params()
    plan = BlockHelmholtzPlan(cosine_plan(g), 5e-4, params.m_eff,
                              params.gamma_i, params.chi, params.alpha)
    v = RNG.standard_normal((3, 8, 8))
    out = plan.solve_stacked(v)
    np.testing.assert_allclose(out.mean(axis=(1, 2)), v.mean(axis=(1, 2)),
                               rtol=1e-13, atol=1e-13)


def test_solve_block_helmholtz_wrapper():
    from copolymer.grid_ops import ScalarField

    g = Grid2D(6, 6)
    params = make_params()
    plan = BlockHelmholtzPlan(cosine_plan(g), 1e-4, params.m_eff,
                              params.gamma_i, params.chi, params.alpha)
    rhs = RNG.standard_normal((3, 6, 6))
    fields = solve_block_helmholtz(plan, tuple(ScalarField(g, rhs[k]) for k in range(3)))
    np.testing.assert_array_equal(np.stack([f.values for f in fields]),
                                  plan.solve_stacked(rhs))


# ---------------------------------------------------------------------------
# Krylov driver
# ---------------------------------------------------------------------------

def test_krylov_solves_spd_system():
    n = 40
    M = RNG.standard_normal((n, n))
    A = M @ M.T + n * np.eye(n)
    b = RNG.standard_normal(n)

    res = krylov_solve(lambda x: A @ x, b, tol=1e-12, maxit=500)
    assert isinstance(res, KrylovResult)
    assert res.converged
    np.testing.assert_allclose(A @ res.solution, b, rtol=0,
                               atol=1e-10 * np.linalg.norm(b))
    assert res.iterations > 0


def test_krylov_reports_nonconvergence():
    # an indefinite ill-conditioned system BiCGStab cannot finish in 1 product
    n = 30
    A = np.diag(np.linspace(1e-8, 1.0, n))
    b = np.ones(n)
    res = krylov_solve(lambda x: A @ x, b, tol=1e-14, maxit=1)
    assert not res.converged


def test_krylov_uses_preconditioner():
    n = 50
    d = np.linspace(1.0, 1e6, n)
    A = np.diag(d)
    b = RNG.standard_normal(n)
    res = krylov_solve(lambda x: A @ x, b, precond=lambda r: r / d,
                       tol=1e-13, maxit=100)
    assert res.converged
    np.testing.assert_allclose(res.solution, b / d, rtol=1e-9, atol=1e-12)


def test_singular_mode_detection():
    g = Grid2D(4, 4)
    params = make_params()
    # coeff chosen so the (0,0) block stays identity: no singularity there;
    # force one by zeroing a diagonal block via absurd coefficients is not
    # reachable with PSD mobilities, so check the exception type exists and
    # carries the offending mode when constructed directly.
    with pytest.raises(SingularModeError):
        raise SingularModeError((0, 0))
