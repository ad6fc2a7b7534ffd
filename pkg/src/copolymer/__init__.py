"""Energy-dissipative finite-difference solver for copolymer-solution phase fields."""

from .grid_ops import Grid2D, ScalarField
from .model_core import ModelParams, PhaseState
from .field_couplings import ElectricParams, MagneticParams
from .integrators import SCHEMES, StepRecord, Stepper, Trajectory, run

__all__ = [
    "Grid2D",
    "ScalarField",
    "ModelParams",
    "PhaseState",
    "ElectricParams",
    "MagneticParams",
    "SCHEMES",
    "StepRecord",
    "Stepper",
    "Trajectory",
    "run",
]
