"""Electric and magnetic couplings: induced potential, coupling potentials, energies.

Both couplings act on the composition contrast w = (phi_A - phi_B) minus its
mean, enter the A chemical potential with + and the B one with -, and leave
the solvent untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .grid_ops import (
    Grid2D,
    ScalarField,
    dirichlet,
    grad,
    lap,
    lap_x,
    lap_y,
    mean_h,
    mixed_xy_sym,
)
from .spectral_solvers import sine_plan

__all__ = [
    "ElectricParams",
    "MagneticParams",
    "PicardDivergenceError",
    "solve_electric_potential",
    "electric_mu",
    "electric_energy",
    "magnetic_mu",
    "magnetic_energy",
]


class PicardDivergenceError(RuntimeError):
    """The induced-potential iteration did not reach tolerance."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"electric potential iteration stalled at residual {residual:.3e} "
            f"after {iterations} sweeps"
        )


@dataclass(frozen=True)
class ElectricParams:
    """Applied electric field with a composition-dependent dielectric.

    ``e0`` may be a pair of reals or a callable t -> (E1, E2) for
    time-dependent protocols (hysteresis).
    """

    eps0: float
    eps1: float
    e0: object = (0.0, 0.0)
    phi0: float = 0.0
    picard_tol: float = 1e-10
    picard_maxit: int = 100

    def __post_init__(self):
        if self.eps0 <= 0:
            raise ValueError("eps0 must be positive")

    def e0_at(self, t: float) -> np.ndarray:
        if callable(self.e0):
            return np.asarray(self.e0(t), dtype=float)
        return np.asarray(self.e0, dtype=float)


@dataclass(frozen=True)
class MagneticParams:
    """Applied magnetic field B0 with coupling strength gamma_m >= 0."""

    gamma_m: float
    b0: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.gamma_m < 0:
            raise ValueError("gamma_m must be nonnegative")


# ---------------------------------------------------------------------------
# electric coupling
# ---------------------------------------------------------------------------

def _contrast(phiA: ScalarField, phiB: ScalarField) -> np.ndarray:
    """(phi_A - phi_B) minus its mean."""
    w = phiA.values - phiB.values
    return w - (mean_h(phiA) - mean_h(phiB))


def solve_electric_potential(phiA: ScalarField, phiB: ScalarField,
                             ep: ElectricParams, t: float,
                             guess: ScalarField | None = None) -> ScalarField:
    """Induced potential Phi with Phi = phi0 on the walls.

    Solves [eps0/eps1 + w] lap(Phi) = (E0 - grad Phi) . grad(phi_A - phi_B)
    by Picard sweeps, each a constant-coefficient Dirichlet Poisson solve
    with the variable-coefficient and grad-Phi terms on the right-hand side.
    For eps1 = 0 the medium is homogeneous and Phi is the boundary constant.
    """
    grid = phiA.grid
    if ep.eps1 == 0.0:
        return ScalarField.full(grid, ep.phi0)
    w = _contrast(phiA, phiB)
    eps_field = ep.eps0 + ep.eps1 * w
    if eps_field.min() <= 0.0:
        raise ValueError(
            f"dielectric constant nonpositive (min {eps_field.min():.3e})"
        )
    c0 = ep.eps0 / ep.eps1
    coeff = c0 + w
    e0 = ep.e0_at(t)
    dwx, dwy = grad(phiA.values - phiB.values, grid.hx, grid.hy)
    plan = sine_plan(grid)
    bc = dirichlet(ep.phi0)

    # iterate on the zero-boundary part u = Phi - phi0
    zero_bc = dirichlet(0.0)

    def _residual(v: np.ndarray):
        gx, gy = grad(v, grid.hx, grid.hy, zero_bc)
        lap_v = lap(v, grid.hx, grid.hy, zero_bc)
        rhs_full = (e0[0] - gx) * dwx + (e0[1] - gy) * dwy
        res = float(np.abs(coeff * lap_v - rhs_full).max())
        # tolerance relative to the equation's own magnitude so large
        # applied fields do not push the target below the roundoff floor
        scale = max(1.0, float(np.abs(rhs_full).max()),
                    float(np.abs(coeff * lap_v).max()))
        return res, scale, rhs_full, lap_v

    u = np.zeros((grid.nx, grid.ny)) if guess is None else guess.values - ep.phi0
    residual = np.inf
    for sweep in range(ep.picard_maxit):
        res, scale, rhs_full, lap_u = _residual(u)
        if res <= ep.picard_tol * scale:
            return ScalarField(grid, u + ep.phi0)
        if res > 0.9 * residual and sweep >= 3:
            break  # sweeps stopped contracting; fall through to the Krylov solve
        residual = res
        u = plan.poisson_dirichlet0((rhs_full - (coeff - c0) * lap_u) / c0)

    # The equation is linear in Phi: (c0 + w) lap(u) + grad(u).grad(w) = E0.grad(w).
    # When the sweep iteration stops contracting (steep composition gradients),
    # solve that system directly with BiCGStab preconditioned by the
    # constant-coefficient Poisson inverse.
    def matvec(flat: np.ndarray) -> np.ndarray:
        v = flat.reshape(grid.nx, grid.ny)
        gx, gy = grad(v, grid.hx, grid.hy, zero_bc)
        out = coeff * lap(v, grid.hx, grid.hy, zero_bc) + gx * dwx + gy * dwy
        return out.ravel()

    def precond(flat: np.ndarray) -> np.ndarray:
        return plan.poisson_dirichlet0(flat.reshape(grid.nx, grid.ny) / c0).ravel()

    n = grid.nx * grid.ny
    op = scipy.sparse.linalg.LinearOperator((n, n), matvec=matvec)
    pre = scipy.sparse.linalg.LinearOperator((n, n), matvec=precond)
    b = (e0[0] * dwx + e0[1] * dwy).ravel()
    u, _info = scipy.sparse.linalg.bicgstab(
        op, b, x0=u.ravel(), rtol=min(ep.picard_tol, 1e-11), atol=0.0,
        maxiter=ep.picard_maxit * 5, M=pre,
    )
    u = u.reshape(grid.nx, grid.ny)
    res, scale, _, _ = _residual(u)
    if res <= ep.picard_tol * scale:
        return ScalarField(grid, u + ep.phi0)
    raise PicardDivergenceError(res, ep.picard_maxit)


def electric_mu(Phi: ScalarField, ep: ElectricParams, t: float) -> ScalarField:
    """mu_e = -(eps1/2)|E0 - grad Phi|^2 (enters mu_A with +, mu_B with -)."""
    grid = Phi.grid
    e0 = ep.e0_at(t)
    gx, gy = grad(Phi.values, grid.hx, grid.hy, dirichlet(ep.phi0))
    sq = (e0[0] - gx) ** 2 + (e0[1] - gy) ** 2
    return ScalarField(grid, -(ep.eps1 / 2.0) * sq)


def electric_energy(phiA: ScalarField, phiB: ScalarField, Phi: ScalarField,
                    ep: ElectricParams, t: float) -> float:
    """(1/2)(eps0 + eps1*w, |E0 - grad Phi|^2)_h."""
    grid = phiA.grid
    e0 = ep.e0_at(t)
    gx, gy = grad(Phi.values, grid.hx, grid.hy, dirichlet(ep.phi0))
    sq = (e0[0] - gx) ** 2 + (e0[1] - gy) ** 2
    eps_field = ep.eps0 + ep.eps1 * _contrast(phiA, phiB)
    return 0.5 * float(np.sum(eps_field * sq)) * grid.cell_area


# ---------------------------------------------------------------------------
# magnetic coupling
# ---------------------------------------------------------------------------

def _magnetic_operator(w: np.ndarray, grid: Grid2D, b0) -> np.ndarray:
    """B1^2 dxDx + B2^2 dyDy + 2 B1 B2 * (symmetrized mixed stencil)."""
    b1, b2 = float(b0[0]), float(b0[1])
    out = np.zeros_like(w)
    if b1 != 0.0:
        out += b1 * b1 * lap_x(w, grid.hx)
    if b2 != 0.0:
        out += b2 * b2 * lap_y(w, grid.hy)
    if b1 != 0.0 and b2 != 0.0:
        out += 2.0 * b1 * b2 * mixed_xy_sym(w, grid.hx, grid.hy)
    return out


def magnetic_mu(phiA: ScalarField, phiB: ScalarField,
                mp: MagneticParams) -> ScalarField:
    """mu_m = -gamma_m (B1^2 dxDx + B2^2 dyDy + 2 B1 B2 dxdyAxAy)(w).

    The mixed stencil is symmetrized at the boundary so mu_m is the exact
    discrete gradient of magnetic_energy; interior cells match the plain
    four-corner stencil.
    """
    grid = phiA.grid
    w = _contrast(phiA, phiB)
    return ScalarField(grid, -mp.gamma_m * _magnetic_operator(w, grid, mp.b0))


def magnetic_energy(phiA: ScalarField, phiB: ScalarField,
                    mp: MagneticParams) -> float:
    """Discrete form of (gamma_m/2) ||B0 . grad w||^2, adjoint-paired with magnetic_mu."""
    grid = phiA.grid
    w = _contrast(phiA, phiB)
    op_w = _magnetic_operator(w, grid, mp.b0)
    return -0.5 * mp.gamma_m * float(np.sum(w * op_w)) * grid.cell_area
