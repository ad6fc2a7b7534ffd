"""Cell-centered 2D grid, discrete difference/average operators and inner products.

All fields live at cell centers x_i = (i-1/2)hx, y_j = (j-1/2)hy.  Boundary
conditions are realized through one layer of ghost cells:

* zero-Neumann: mirror reflection (ghost equals the adjacent interior value),
  which makes both the face-normal difference and the centered difference
  vanish at the wall and keeps the summation-by-parts identities exact;
* constant Dirichlet c: reflection through the boundary value
  (ghost = 2c - interior), second order accurate at the wall.

Arrays are indexed ``values[i, j]`` with i along x and j along y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid2D",
    "ScalarField",
    "BoundaryKind",
    "NEUMANN_ZERO",
    "dirichlet",
    "laplacian_h",
    "grad_h",
    "mixed_xy_h",
    "inner_h",
    "norm_h",
    "mean_h",
]


class GridMismatchError(ValueError):
    """Raised when fields from different grids are combined."""


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centered grid on [0, Lx] x [0, Ly]."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid needs at least one cell per axis, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def cell_centers(self):
        """Coordinate arrays (x, y), each of shape (nx, ny)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def center(self, i: int, j: int):
        """Center of cell (i, j) with 1-based indices."""
        return ((i - 0.5) * self.hx, (j - 0.5) * self.hy)


@dataclass(frozen=True)
class BoundaryKind:
    """Ghost-cell rule: zero-Neumann mirror or constant-Dirichlet reflection."""

    tag: str  # "neumann" | "dirichlet"
    value: float = 0.0

    def __post_init__(self):
        if self.tag not in ("neumann", "dirichlet"):
            raise ValueError(f"unknown boundary kind {self.tag!r}")


NEUMANN_ZERO = BoundaryKind("neumann")


def dirichlet(value: float) -> BoundaryKind:
    return BoundaryKind("dirichlet", float(value))


@dataclass
class ScalarField:
    """One real value per cell."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.nx, self.grid.ny):
            raise GridMismatchError(
                f"values shape {v.shape} does not match grid {(self.grid.nx, self.grid.ny)}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite entries")
        object.__setattr__(self, "values", v)

    @classmethod
    def full(cls, grid: Grid2D, value: float) -> "ScalarField":
        return cls(grid, np.full((grid.nx, grid.ny), float(value)))

    @classmethod
    def from_function(cls, grid: Grid2D, fn) -> "ScalarField":
        x, y = grid.cell_centers()
        return cls(grid, np.asarray(fn(x, y), dtype=float))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def _require_same_grid(*fields: ScalarField) -> Grid2D:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError("fields live on different grids")
    return g


# ---------------------------------------------------------------------------
# array kernels (used by the solvers and integrators; fields wrap them)
# ---------------------------------------------------------------------------

def pad_ghost(v: np.ndarray, bc: BoundaryKind = NEUMANN_ZERO) -> np.ndarray:
    """Extend by one ghost layer on every side according to the bc rule."""
    p = np.empty((v.shape[0] + 2, v.shape[1] + 2))
    p[1:-1, 1:-1] = v
    if bc.tag == "neumann":
        p[0, 1:-1] = v[0, :]
        p[-1, 1:-1] = v[-1, :]
        p[1:-1, 0] = v[:, 0]
        p[1:-1, -1] = v[:, -1]
        # corners: mirror in both directions
        p[0, 0] = v[0, 0]
        p[0, -1] = v[0, -1]
        p[-1, 0] = v[-1, 0]
        p[-1, -1] = v[-1, -1]
    else:
        c = bc.value
        p[0, 1:-1] = 2.0 * c - v[0, :]
        p[-1, 1:-1] = 2.0 * c - v[-1, :]
        p[1:-1, 0] = 2.0 * c - v[:, 0]
        p[1:-1, -1] = 2.0 * c - v[:, -1]
        p[0, 0] = 2.0 * c - v[0, 0]
        p[0, -1] = 2.0 * c - v[0, -1]
        p[-1, 0] = 2.0 * c - v[-1, 0]
        p[-1, -1] = 2.0 * c - v[-1, -1]
    return p


def lap(v: np.ndarray, hx: float, hy: float, bc: BoundaryKind = NEUMANN_ZERO) -> np.ndarray:
    """Five-point Laplacian (d_x D_x + d_y D_y) with ghost cells."""
    p = pad_ghost(v, bc)
    return (p[2:, 1:-1] - 2.0 * v + p[:-2, 1:-1]) / hx**2 + (
        p[1:-1, 2:] - 2.0 * v + p[1:-1, :-2]
    ) / hy**2


def lap_x(v: np.ndarray, hx: float, bc: BoundaryKind = NEUMANN_ZERO) -> np.ndarray:
    """d_x D_x only (used by the magnetic coupling)."""
    p = pad_ghost(v, bc)
    return (p[2:, 1:-1] - 2.0 * v + p[:-2, 1:-1]) / hx**2


def lap_y(v: np.ndarray, hy: float, bc: BoundaryKind = NEUMANN_ZERO) -> np.ndarray:
    p = pad_ghost(v, bc)
    return (p[1:-1, 2:] - 2.0 * v + p[1:-1, :-2]) / hy**2


def grad(v: np.ndarray, hx: float, hy: float, bc: BoundaryKind = NEUMANN_ZERO):
    """Cell-centered gradient (d_x A_x, d_y A_y), i.e. centered differences."""
    p = pad_ghost(v, bc)
    gx = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2.0 * hx)
    gy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2.0 * hy)
    return gx, gy


def mixed_xy(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Cell-centered mixed derivative d_x d_y A_x A_y with Neumann ghosts."""
    p = pad_ghost(v, NEUMANN_ZERO)
    return (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4.0 * hx * hy)


def centered_x_adjoint(v: np.ndarray, hx: float) -> np.ndarray:
    """Transpose of the centered x-difference with mirror ghosts."""
    p = pad_ghost(v, NEUMANN_ZERO)
    out = -(p[2:, 1:-1] - p[:-2, 1:-1]) / (2.0 * hx)
    out[0, :] -= v[0, :] / hx
    out[-1, :] += v[-1, :] / hx
    return out


def centered_y_adjoint(v: np.ndarray, hy: float) -> np.ndarray:
    p = pad_ghost(v, NEUMANN_ZERO)
    out = -(p[1:-1, 2:] - p[1:-1, :-2]) / (2.0 * hy)
    out[:, 0] -= v[:, 0] / hy
    out[:, -1] += v[:, -1] / hy
    return out


def mixed_xy_sym(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """Symmetrized mixed derivative (exact adjoint pairing for energies).

    Agrees with mixed_xy away from the boundary; the symmetrization only
    touches boundary cells and is what makes the mixed term an exact
    gradient of a quadratic form.
    """
    cy = centered_y_adjoint(v, hy)
    ct = centered_x_adjoint(cy, hx)
    return 0.5 * (mixed_xy(v, hx, hy) + ct)


def face_diff_x(v: np.ndarray, hx: float) -> np.ndarray:
    """D_x at interior x-faces, shape (nx-1, ny); boundary faces vanish."""
    return (v[1:, :] - v[:-1, :]) / hx


def face_diff_y(v: np.ndarray, hy: float) -> np.ndarray:
    return (v[:, 1:] - v[:, :-1]) / hy


# ---------------------------------------------------------------------------
# field-level operations
# ---------------------------------------------------------------------------

def laplacian_h(f: ScalarField, bc: BoundaryKind = NEUMANN_ZERO) -> ScalarField:
    g = f.grid
    return ScalarField(g, lap(f.values, g.hx, g.hy, bc))


def grad_h(f: ScalarField, bc: BoundaryKind = NEUMANN_ZERO):
    g = f.grid
    gx, gy = grad(f.values, g.hx, g.hy, bc)
    return ScalarField(g, gx), ScalarField(g, gy)


def mixed_xy_h(f: ScalarField) -> ScalarField:
    g = f.grid
    return ScalarField(g, mixed_xy(f.values, g.hx, g.hy))


def inner_h(f: ScalarField, g: ScalarField) -> float:
    grid = _require_same_grid(f, g)
    return float(np.sum(f.values * g.values)) * grid.cell_area


def norm_h(f: ScalarField) -> float:
    grid = f.grid
    return float(np.sqrt(np.sum(f.values**2) * grid.cell_area))


def mean_h(f: ScalarField) -> float:
    return float(np.mean(f.values))
