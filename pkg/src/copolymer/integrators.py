"""Time integration: EQ and SVM1-4 second-order schemes plus the two-level bootstrap.

All schemes share the same linear constant-coefficient implicit operator
A = I - (dt/2) (m) lap L_h, factored once per run in the cosine eigenbasis.
SVM steps correct the Crank-Nicolson solution along a zero-mean,
species-sum-free direction until the discrete energy matches the predicted
value; the EQ step eliminates the auxiliary variable and solves the
resulting variable-coefficient system iteratively with A as preconditioner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field_couplings import (
    ElectricParams,
    MagneticParams,
    electric_energy,
    electric_mu,
    magnetic_energy,
    magnetic_mu,
    solve_electric_potential,
)
from .grid_ops import Grid2D, ScalarField, lap
from .model_core import (
    ModelParams,
    PhaseState,
    bulk_deriv,
    bulk_value,
    free_energy_stacked,
    lh_apply_state,
)
from .spectral_solvers import BlockHelmholtzPlan, cosine_plan, krylov_solve

__all__ = [
    "SCHEMES",
    "StepRecord",
    "Trajectory",
    "Stepper",
    "NewtonDivergenceError",
    "KrylovDivergenceError",
    "bootstrap_step",
    "run",
]

SCHEMES = ("EQ", "SVM1", "SVM2", "SVM3", "SVM4")


class NewtonDivergenceError(RuntimeError):
    """The scalar energy-matching solve failed; a smaller dt usually helps."""


class KrylovDivergenceError(RuntimeError):
    """The EQ linear system did not converge."""


@dataclass
class StepRecord:
    """Per-step ledger entry."""

    t: float
    energy: float
    predicted_energy: float
    dissipation: float
    alpha: float
    beta: float
    newton_iters: int
    krylov_iters: int
    means: np.ndarray


@dataclass
class Trajectory:
    records: list
    final_state: PhaseState
    snapshots: list  # (t, PhaseState, Phi ScalarField or None)


class Stepper:
    """Owns the state history and per-run factorizations for one scheme.

    ``dissipation_at_final`` logs the dissipation form re-evaluated at the
    accepted state instead of the prediction stage (bookkeeping only; the
    energy constraint always targets the prediction-stage value).

    ``refresh_phi_in_newton`` re-solves the induced electric potential at
    every Newton iterate instead of freezing it at the half-step value.
    Because the potential's own variation drops out of the coupling energy
    (it pairs with the Gauss-law residual), the two settings agree on the
    energy gradient and differ only at second order in the correction.
    """

    def __init__(self, grid: Grid2D, params: ModelParams, scheme: str, dt: float,
                 state0: PhaseState, coupling=None, t0: float = 0.0,
                 dissipation_at_final: bool = False,
                 refresh_phi_in_newton: bool = False,
                 krylov_tol: float = 1e-11, krylov_maxit: int = 500,
                 newton_tol: float = 1e-12, newton_maxit: int = 50):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        if dt < 0:
            raise ValueError("dt must be nonnegative")
        if coupling is not None and not isinstance(coupling, (ElectricParams, MagneticParams)):
            raise TypeError("coupling must be None, ElectricParams or MagneticParams")
        self.grid = grid
        self.params = params
        self.scheme = scheme
        self.dt = float(dt)
        self.coupling = coupling
        self.t = float(t0)
        self.dissipation_at_final = dissipation_at_final
        self.refresh_phi_in_newton = refresh_phi_in_newton
        self.krylov_tol = krylov_tol
        self.krylov_maxit = krylov_maxit
        self.newton_tol = newton_tol
        self.newton_maxit = newton_maxit
        self.plan = cosine_plan(grid)
        self.helm = BlockHelmholtzPlan(
            self.plan, self.dt / 2.0, params.m_eff, params.gamma_i,
            params.chi, params.alpha,
        )
        self.prev3: np.ndarray | None = None
        self.curr3 = state0.stacked().copy()
        self.q: np.ndarray | None = None
        if scheme == "EQ":
            self.q = np.sqrt(bulk_value(self.curr3, params) + params.eq_shift)
        self.phi_elec: ScalarField | None = None
        if isinstance(coupling, ElectricParams):
            self.phi_elec = solve_electric_potential(
                *self._ab(self.curr3), coupling, self.t, guess=None
            )
        self.energy = self._total_energy(self.curr3, self.t, self.phi_elec)
        # field time at which the stored (enforced) energy was evaluated;
        # needed to charge external work when the applied field varies in time
        self.energy_t = self.t
        if scheme == "EQ":
            self.mod_energy = self._eq_energy(self.curr3, self.q)

    # -- small helpers ------------------------------------------------------

    def _ab(self, phi3: np.ndarray):
        return (ScalarField(self.grid, phi3[0]), ScalarField(self.grid, phi3[1]))

    def state(self) -> PhaseState:
        return PhaseState.from_stacked(self.grid, self.curr3.copy())

    def _mdlap(self, v3: np.ndarray) -> np.ndarray:
        """(m) lap v, species-coupled mobility times the Neumann Laplacian."""
        g = self.grid
        lap3 = np.stack([lap(v3[k], g.hx, g.hy) for k in range(3)])
        return np.einsum("kl,lxy->kxy", self.params.m_eff, lap3)

    def _lh(self, phi3: np.ndarray) -> np.ndarray:
        return lh_apply_state(phi3, self.params, self.grid, self.plan)

    def _coupling_mu(self, phi3: np.ndarray, t: float, warm: ScalarField | None):
        """Dynamic coupling potential (+ for A, - for B) and induced Phi if any."""
        add = np.zeros_like(phi3)
        if isinstance(self.coupling, ElectricParams):
            phi_field = solve_electric_potential(*self._ab(phi3), self.coupling, t, guess=warm)
            mu_e = electric_mu(phi_field, self.coupling, t).values
            add[0] += mu_e
            add[1] -= mu_e
            return add, phi_field
        if isinstance(self.coupling, MagneticParams):
            mu_m = magnetic_mu(*self._ab(phi3), self.coupling).values
            add[0] += mu_m
            add[1] -= mu_m
        return add, None

    def _coupling_energy(self, phi3: np.ndarray, t: float, phi_field: ScalarField | None) -> float:
        """Coupling contribution to the Lyapunov functional of the dynamics.

        The electric term enters with a minus sign (fixed-applied-field free
        energy): the Gauss-constrained derivative of -electric_energy is the
        dynamic coupling potential +mu_e, so the dissipation identity
        dE/dt = (mu_hat, m lap mu_hat)_h holds exactly for this functional.
        With the opposite sign the enforced-energy correction pumps the
        contrast mode and the electric runs blow up.
        """
        if isinstance(self.coupling, ElectricParams):
            return -electric_energy(*self._ab(phi3), phi_field, self.coupling, t)
        if isinstance(self.coupling, MagneticParams):
            return magnetic_energy(*self._ab(phi3), self.coupling)
        return 0.0

    def _total_energy(self, phi3: np.ndarray, t: float, phi_field: ScalarField | None) -> float:
        return free_energy_stacked(phi3, self.params, self.grid, self.plan) + \
            self._coupling_energy(phi3, t, phi_field)

    def _grad_energy(self, phi3: np.ndarray, t: float, phi_field: ScalarField | None) -> np.ndarray:
        """Derivative per species of the total energy used in the Newton solve.

        Both couplings contribute their dynamic potential (+mu in the A slot,
        -mu in the B slot): the magnetic term is directly variational, and the
        electric term's potential variation pairs with the Gauss-law residual
        and drops out, leaving +mu_e as the exact derivative of the
        minus-signed coupling energy whether the potential is frozen or
        re-solved.
        """
        grad3 = self._lh(phi3) + bulk_deriv(phi3, self.params)
        if isinstance(self.coupling, ElectricParams):
            mu_e = electric_mu(phi_field, self.coupling, t).values
            grad3[0] += mu_e
            grad3[1] -= mu_e
        elif isinstance(self.coupling, MagneticParams):
            mu_m = magnetic_mu(*self._ab(phi3), self.coupling).values
            grad3[0] += mu_m
            grad3[1] -= mu_m
        return grad3

    def _project_constraints(self, r3: np.ndarray) -> None:
        """Pin the exact invariants: pointwise species sum 1, species means phibar.

        Both shifts stay within solver tolerance of the unprojected solution;
        the mean shifts sum to zero so they do not disturb the sum projection.
        """
        r3 -= (r3.sum(axis=0) - 1.0) / 3.0
        for k in range(3):
            r3[k] += self.params.phibar[k] - r3[k].mean()

    def _eq_energy(self, phi3: np.ndarray, q: np.ndarray) -> float:
        """Modified quadratic energy (1/2)(phi, L phi)_h + ||q||^2_h - C|domain|."""
        quad = 0.5 * float(np.sum(phi3 * self._lh(phi3))) * self.grid.cell_area
        return quad + float(np.sum(q * q)) * self.grid.cell_area - \
            self.params.eq_shift * self.grid.area

    # -- SVM ---------------------------------------------------------------

    def _svm_predict(self, phi_bar: np.ndarray, t_mid: float):
        """Half-step solve at the linearization state phi_bar; returns
        (phi_tilde, mu_tilde, h_tilde, dissipation, Phi_tilde)."""
        h_bar, phi_field = self._coupling_mu(phi_bar, t_mid, self.phi_elec)
        h_bar += bulk_deriv(phi_bar, self.params)
        rhs = self.curr3 + (self.dt / 2.0) * self._mdlap(h_bar)
        phi_tilde = self.helm.solve_stacked(rhs)
        h_tilde, phi_field = self._coupling_mu(
            phi_tilde, t_mid, phi_field if phi_field is not None else self.phi_elec
        )
        h_tilde += bulk_deriv(phi_tilde, self.params)
        mu_tilde = self._lh(phi_tilde) + h_tilde
        diss = float(np.sum(mu_tilde * self._mdlap(mu_tilde))) * self.grid.cell_area
        return phi_tilde, mu_tilde, h_tilde, diss, phi_field

    def _svm_direction(self, variant: str, phi_tilde, mu_tilde, h_tilde, phi_hat):
        """Correction direction: zero species means, zero pointwise species sum."""
        pb = self.params.phibar[:, None, None]
        if variant == "SVM1":
            return self.helm.solve_stacked(self._mdlap(h_tilde))
        if variant == "SVM2":
            return self.helm.solve_stacked(self._mdlap(mu_tilde))
        if variant == "SVM3":
            return phi_tilde - pb
        return phi_hat - pb  # SVM4

    def _newton_beta(self, phi_hat: np.ndarray, direction: np.ndarray, target: float,
                     t_mid: float, phi_field: ScalarField | None):
        scale = max(1.0, abs(target))
        beta = 0.0
        refresh = self.refresh_phi_in_newton and isinstance(self.coupling, ElectricParams)
        for it in range(self.newton_maxit + 1):
            phi3 = phi_hat + beta * direction
            cur_phi = phi_field
            if refresh:
                cur_phi = solve_electric_potential(
                    *self._ab(phi3), self.coupling, t_mid, guess=phi_field
                )
            residual = self._total_energy(phi3, t_mid, cur_phi) - target
            if abs(residual) <= self.newton_tol * scale:
                return beta, it
            if it == self.newton_maxit:
                break
            slope = float(np.sum(self._grad_energy(phi3, t_mid, cur_phi) * direction)) \
                * self.grid.cell_area
            if slope == 0.0 or not np.isfinite(slope):
                # degenerate near equilibrium: the predicted energy already
                # matches to truncation order, keep the current iterate
                if abs(residual) <= 1e-11 * scale:
                    return beta, it
                raise NewtonDivergenceError(
                    f"degenerate direction, energy residual {residual:.3e}"
                )
            beta -= residual / slope
            if not np.isfinite(beta) or abs(beta) > 1e8:
                raise NewtonDivergenceError(
                    f"beta diverged ({beta!r}); try a smaller dt"
                )
        raise NewtonDivergenceError(
            f"no energy match in {self.newton_maxit} iterations "
            f"(residual {residual:.3e}); try a smaller dt"
        )

    def _external_work(self, t_mid: float) -> float:
        """Energy change of the current state due to the applied field moving.

        Time-varying fields do work on the system on top of the internal
        dissipation; without this term the energy-matching target is off by
        O(dE0/dt * dt) and the scalar solve cannot close the gap (the field
        change is rigid, not reachable along the correction direction).
        Zero for static fields, so the enforced-energy telescoping is exact
        in the autonomous case.
        """
        if not (isinstance(self.coupling, ElectricParams)
                and callable(self.coupling.e0) and t_mid != self.energy_t):
            return 0.0
        phi_old = solve_electric_potential(
            *self._ab(self.curr3), self.coupling, self.energy_t, guess=self.phi_elec
        )
        phi_new = solve_electric_potential(
            *self._ab(self.curr3), self.coupling, t_mid, guess=phi_old
        )
        return self._coupling_energy(self.curr3, t_mid, phi_new) \
            - self._coupling_energy(self.curr3, self.energy_t, phi_old)

    def _svm_step(self, phi_bar: np.ndarray) -> StepRecord:
        dt = self.dt
        t_mid = self.t + dt / 2.0
        phi_tilde, mu_tilde, h_tilde, diss, phi_field = self._svm_predict(phi_bar, t_mid)
        target = self.energy + dt * diss + self._external_work(t_mid)
        rhs = self.curr3 + (dt / 2.0) * self._mdlap(self._lh(self.curr3)) \
            + dt * self._mdlap(h_tilde)
        phi_hat = self.helm.solve_stacked(rhs)
        direction = self._svm_direction(self.scheme, phi_tilde, mu_tilde, h_tilde, phi_hat)
        beta, iters = self._newton_beta(phi_hat, direction, target, t_mid, phi_field)
        next3 = phi_hat + beta * direction
        self._project_constraints(next3)

        logged_diss = diss
        if self.dissipation_at_final:
            h_fin, _ = self._coupling_mu(next3, t_mid, phi_field)
            mu_fin = self._lh(next3) + bulk_deriv(next3, self.params) + h_fin
            logged_diss = float(np.sum(mu_fin * self._mdlap(mu_fin))) * self.grid.cell_area

        self.prev3 = self.curr3
        self.curr3 = next3
        self.t += dt
        self.energy = target
        self.energy_t = t_mid
        if isinstance(self.coupling, ElectricParams):
            self.phi_elec = solve_electric_potential(
                *self._ab(next3), self.coupling, self.t, guess=phi_field
            )
        return StepRecord(
            t=self.t, energy=target, predicted_energy=target,
            dissipation=logged_diss,
            alpha=beta / dt if dt > 0 else 0.0, beta=beta,
            newton_iters=iters, krylov_iters=0,
            means=next3.mean(axis=(1, 2)),
        )

    # -- EQ ------------------------------------------------------------------

    def _eq_step(self, phi_bar: np.ndarray) -> StepRecord:
        dt = self.dt
        t_mid = self.t + dt / 2.0
        params = self.params
        # chain-rule coefficients at the linearization state
        q_bar = np.sqrt(bulk_value(phi_bar, params) + params.eq_shift)
        b = bulk_deriv(phi_bar, params) / (2.0 * q_bar)

        c_bar, phi_field = self._coupling_mu(phi_bar, t_mid, self.phi_elec)

        def apply(r3):
            inner = 0.5 * self._lh(r3) + b * np.sum(b * r3, axis=0)
            return r3 - dt * self._mdlap(inner)

        rhs_inner = 0.5 * self._lh(self.curr3) + 2.0 * self.q * b \
            - b * np.sum(b * self.curr3, axis=0) + c_bar
        rhs = self.curr3 + dt * self._mdlap(rhs_inner)
        result = krylov_solve(
            apply, rhs, precond=self.helm.solve_stacked,
            tol=self.krylov_tol, maxit=self.krylov_maxit, x0=phi_bar.copy(),
        )
        if not result.converged:
            raise KrylovDivergenceError(
                f"EQ linear solve stalled at residual {result.residual:.3e} "
                f"after {result.iterations} products"
            )
        next3 = result.solution
        self._project_constraints(next3)
        q_next = self.q + np.sum(b * (next3 - self.curr3), axis=0)

        mod_next = self._eq_energy(next3, q_next)
        diss = mod_next - self.mod_energy
        self.mod_energy = mod_next
        self.prev3 = self.curr3
        self.curr3 = next3
        self.q = q_next
        self.t += dt
        if isinstance(self.coupling, ElectricParams):
            self.phi_elec = solve_electric_potential(
                *self._ab(next3), self.coupling, self.t, guess=phi_field
            )
        self.energy = self._total_energy(next3, self.t, self.phi_elec)
        self.energy_t = self.t
        return StepRecord(
            t=self.t, energy=self.energy, predicted_energy=mod_next,
            dissipation=diss, alpha=0.0, beta=0.0,
            newton_iters=0, krylov_iters=result.iterations,
            means=next3.mean(axis=(1, 2)),
        )

    # -- public stepping ------------------------------------------------------

    def step(self) -> StepRecord:
        """Advance by dt; the first call is the two-level bootstrap."""
        if self.prev3 is None:
            phi_bar = self.curr3
        else:
            phi_bar = 1.5 * self.curr3 - 0.5 * self.prev3
        if self.scheme == "EQ":
            return self._eq_step(phi_bar)
        return self._svm_step(phi_bar)


def bootstrap_step(state0: PhaseState, dt: float, params: ModelParams,
                   coupling=None, scheme: str = "SVM2") -> PhaseState:
    """One first-order step (extrapolated quantities replaced by current)."""
    stepper = Stepper(state0.grid, params, scheme, dt, state0, coupling=coupling)
    stepper.step()
    return stepper.state()


def run(grid: Grid2D, params: ModelParams, scheme: str, dt: float,
        state0: PhaseState, n_steps: int, coupling=None,
        snapshot_times=(), **stepper_kwargs) -> Trajectory:
    """Bootstrap then march n_steps, recording every step.

    Snapshots are taken at the first step whose time reaches each requested
    value; the initial state is always included.
    """
    stepper = Stepper(grid, params, scheme, dt, state0, coupling=coupling,
                      **stepper_kwargs)
    records = []
    snapshots = [(stepper.t, stepper.state(), stepper.phi_elec)]
    pending = sorted(float(s) for s in snapshot_times)
    for _ in range(n_steps):
        records.append(stepper.step())
        while pending and stepper.t >= pending[0] - 1e-12:
            snapshots.append((stepper.t, stepper.state(), stepper.phi_elec))
            pending.pop(0)
    return Trajectory(records=records, final_state=stepper.state(), snapshots=snapshots)
