"""Figure generation from simulator output files.

This package is deliberately decoupled from the simulator: it consumes only
the documented file formats (text energy logs, text refinement reports, and
PHFLD1 binary snapshots).
"""

from .readers import (
    EnergyLog,
    RefinementReport,
    Snapshot,
    read_energy_log,
    read_refinement_report,
    read_snapshot,
)
from .plots import plot_convergence, plot_energy, plot_hysteresis, plot_portrait

__all__ = [
    "EnergyLog",
    "RefinementReport",
    "Snapshot",
    "read_energy_log",
    "read_refinement_report",
    "read_snapshot",
    "plot_convergence",
    "plot_energy",
    "plot_hysteresis",
    "plot_portrait",
]
