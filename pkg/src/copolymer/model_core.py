"""Model parameters, regularized bulk potential, discrete free energy and potentials.

Species order is (A, B, S) throughout; stacked arrays have shape (3, nx, ny).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid_ops import Grid2D, ScalarField, lap, mean_h
from .spectral_solvers import CosineBasisPlan, cosine_plan

__all__ = [
    "ModelParams",
    "PhaseState",
    "reg_log",
    "solve_psi",
    "chemical_potentials",
    "free_energy_h",
    "effective_mobility",
    "lagrange_multiplier",
]


class IncompatibleMeanError(ValueError):
    """Neumann Poisson right-hand side has a nonzero mean."""


def effective_mobility(m: np.ndarray) -> np.ndarray:
    """Mobility after eliminating the incompressibility Lagrange multiplier.

    m_kl = M_kl - (sum_j M_kj)(sum_j M_lj) / (sum_ij M_ij); rows sum to zero.
    """
    m = np.asarray(m, dtype=float)
    row = m.sum(axis=1)
    total = row.sum()
    if total <= 0:
        raise ValueError("total mobility must be positive")
    return m - np.outer(row, row) / total


def lagrange_multiplier(mu, m: np.ndarray):
    """Pointwise multiplier L = -(sum_ij M_ij mu_i) / (sum_ij M_ij)."""
    m = np.asarray(m, dtype=float)
    row = m.sum(axis=1)
    total = row.sum()
    if total <= 0:
        raise ValueError("total mobility must be positive")
    grid = mu[0].grid
    acc = sum(row[i] * mu[i].values for i in range(3))
    return ScalarField(grid, -acc / total)


@dataclass
class ModelParams:
    """Physical constants plus derived quantities.

    ``bulk`` selects the entropic potential: "log" is the regularized
    logarithmic potential, "none" switches it off (quadratic-energy test mode
    in which every scheme collapses to the same linear Crank-Nicolson step).
    """

    n_poly: np.ndarray          # polymerization degrees (N_A, N_B, N_S)
    chi: np.ndarray             # 3x3 interaction matrix, symmetric, zero diagonal
    eps: float                  # interface scale
    gamma: float                # long-range strength
    phibar: np.ndarray          # conserved means, on the open simplex
    mobility: np.ndarray        # 3x3 symmetric PSD
    sigma: float = 0.01         # log regularization threshold
    eq_shift: float = 1.0       # C in q = sqrt(f + C)
    bulk: str = "log"
    gamma_i: np.ndarray = field(init=False)
    alpha: np.ndarray = field(init=False)
    m_eff: np.ndarray = field(init=False)

    def __post_init__(self):
        self.n_poly = np.asarray(self.n_poly, dtype=float)
        self.chi = np.asarray(self.chi, dtype=float)
        self.phibar = np.asarray(self.phibar, dtype=float)
        self.mobility = np.asarray(self.mobility, dtype=float)
        if np.any(self.n_poly <= 0):
            raise ValueError("polymerization degrees must be positive")
        if not np.allclose(self.chi, self.chi.T, atol=0):
            raise ValueError("chi must be symmetric")
        if np.any(np.diag(self.chi) != 0):
            raise ValueError("chi must have zero diagonal")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not (0 < self.sigma < 1):
            raise ValueError("sigma must lie in (0, 1)")
        if np.any(self.phibar <= 0) or np.any(self.phibar >= 1):
            raise ValueError("phibar entries must lie in (0, 1)")
        if abs(self.phibar.sum() - 1.0) > 1e-12:
            raise ValueError("phibar must sum to 1")
        if not np.allclose(self.mobility, self.mobility.T, atol=0):
            raise ValueError("mobility must be symmetric")
        eig = np.linalg.eigvalsh(self.mobility)
        if eig.min() < -1e-14 * max(abs(eig).max(), 1.0):
            raise ValueError("mobility must be positive semidefinite")
        if self.bulk not in ("log", "none"):
            raise ValueError(f"unknown bulk potential {self.bulk!r}")
        self.gamma_i = self.eps**2 / self.phibar
        a, b = self.phibar[0], self.phibar[1]
        c = 1.5 * self.eps * self.gamma
        self.alpha = np.array([
            [c / (a * a), -c / (a * b), 0.0],
            [-c / (a * b), c / (b * b), 0.0],
            [0.0, 0.0, 0.0],
        ])
        self.m_eff = effective_mobility(self.mobility)


@dataclass
class PhaseState:
    """Volume fractions (phi_A, phi_B, phi_S)."""

    phiA: ScalarField
    phiB: ScalarField
    phiS: ScalarField

    @property
    def grid(self) -> Grid2D:
        return self.phiA.grid

    def stacked(self) -> np.ndarray:
        return np.stack([self.phiA.values, self.phiB.values, self.phiS.values])

    @classmethod
    def from_stacked(cls, grid: Grid2D, v: np.ndarray) -> "PhaseState":
        return cls(ScalarField(grid, v[0]), ScalarField(grid, v[1]), ScalarField(grid, v[2]))

    def means(self) -> np.ndarray:
        return np.array([mean_h(self.phiA), mean_h(self.phiB), mean_h(self.phiS)])

    def fields(self):
        return (self.phiA, self.phiB, self.phiS)


# ---------------------------------------------------------------------------
# bulk potential
# ---------------------------------------------------------------------------

def reg_log(phi, n: float, sigma: float):
    """Regularized (phi/N) ln(phi) and its derivative.

    Quadratic continuation below sigma keeps the potential C^2 on all of R.
    Works elementwise on arrays.
    """
    phi = np.asarray(phi, dtype=float)
    low = phi <= sigma
    safe = np.where(low, 1.0, phi)
    value = np.where(
        low,
        (phi * phi / (2.0 * sigma) + phi * np.log(sigma) - sigma / 2.0) / n,
        safe * np.log(safe) / n,
    )
    deriv = np.where(low, (phi / sigma + np.log(sigma)) / n, (np.log(safe) + 1.0) / n)
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def bulk_value(phi3: np.ndarray, params: ModelParams) -> np.ndarray:
    if params.bulk == "none":
        return np.zeros_like(phi3[0])
    total = np.zeros_like(phi3[0])
    for i in range(3):
        v, _ = reg_log(phi3[i], params.n_poly[i], params.sigma)
        total += v
    return total


def bulk_deriv(phi3: np.ndarray, params: ModelParams) -> np.ndarray:
    if params.bulk == "none":
        return np.zeros_like(phi3)
    out = np.empty_like(phi3)
    for i in range(3):
        _, d = reg_log(phi3[i], params.n_poly[i], params.sigma)
        out[i] = d
    return out


# ---------------------------------------------------------------------------
# nonlocal term and linear operator
# ---------------------------------------------------------------------------

def solve_psi(phi: ScalarField, phibar: float, plan: CosineBasisPlan | None = None,
              strict: bool = True) -> ScalarField:
    """Solve lap(psi) = phi - phibar with zero-Neumann walls, mean(psi) = 0.

    The rhs is projected to zero mean (the Neumann problem is only solvable
    then); with ``strict`` the incoming mean must already match phibar.
    """
    grid = phi.grid
    if plan is None:
        plan = cosine_plan(grid)
    m = mean_h(phi)
    if strict and abs(m - phibar) > 1e-10:
        raise IncompatibleMeanError(
            f"mean_h(phi) = {m!r} incompatible with phibar = {phibar!r}"
        )
    psi = plan.poisson_neumann(phi.values - phibar)
    return ScalarField(grid, psi)


def _psis(phi3: np.ndarray, params: ModelParams, plan: CosineBasisPlan):
    """Zero-mean psi_A, psi_B for a stacked state (rhs projected)."""
    psi_a = plan.poisson_neumann(phi3[0] - params.phibar[0])
    psi_b = plan.poisson_neumann(phi3[1] - params.phibar[1])
    return psi_a, psi_b


def lh_apply(phi3: np.ndarray, params: ModelParams, grid: Grid2D,
             psi_a: np.ndarray, psi_b: np.ndarray) -> np.ndarray:
    """Linear part of the chemical potential, L_h phi (3, nx, ny)."""
    out = np.einsum("ij,jxy->ixy", params.chi, phi3)
    for i in range(3):
        out[i] -= params.gamma_i[i] * lap(phi3[i], grid.hx, grid.hy)
    out[0] -= params.alpha[0, 0] * psi_a + params.alpha[0, 1] * psi_b
    out[1] -= params.alpha[1, 0] * psi_a + params.alpha[1, 1] * psi_b
    return out


def lh_apply_state(phi3: np.ndarray, params: ModelParams, grid: Grid2D,
                   plan: CosineBasisPlan | None = None) -> np.ndarray:
    if plan is None:
        plan = cosine_plan(grid)
    psi_a, psi_b = _psis(phi3, params, plan)
    return lh_apply(phi3, params, grid, psi_a, psi_b)


def chemical_potentials(state: PhaseState, params: ModelParams,
                        psiA: ScalarField, psiB: ScalarField):
    """mu_i = -gamma_i lap(phi_i) + sum_j chi_ij phi_j + f'_i - nonlocal term."""
    grid = state.grid
    phi3 = state.stacked()
    mu = lh_apply(phi3, params, grid, psiA.values, psiB.values)
    mu += bulk_deriv(phi3, params)
    return tuple(ScalarField(grid, mu[i]) for i in range(3))


def free_energy_stacked(phi3: np.ndarray, params: ModelParams, grid: Grid2D,
                        plan: CosineBasisPlan | None = None) -> float:
    """Discrete free energy F_h = (1/2)(phi, L phi)_h + (f(phi), 1)_h."""
    if plan is None:
        plan = cosine_plan(grid)
    lphi = lh_apply_state(phi3, params, grid, plan)
    quad = 0.5 * float(np.sum(phi3 * lphi)) * grid.cell_area
    bulk = float(np.sum(bulk_value(phi3, params))) * grid.cell_area
    return quad + bulk


def free_energy_h(state: PhaseState, params: ModelParams) -> float:
    return free_energy_stacked(state.stacked(), params, state.grid)
