"""Paper-style figures from simulator outputs.

Every plotting function returns the information it annotated (slopes,
asymmetry, ...) so tests can verify the figure against the source data.
Figures carry no timestamps; re-running a command yields identical bytes.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .readers import read_energy_log, read_refinement_report, read_snapshot

_SAVE_KW = {"dpi": 150, "metadata": {"Software": None}}


def fitted_slope(levels: np.ndarray, errors: np.ndarray) -> float:
    """Least-squares slope of log(error) vs log(level)."""
    return float(np.polyfit(np.log(levels), np.log(errors), 1)[0])


def plot_convergence(report_paths, out_path, title: str | None = None) -> dict:
    """Log-log ladder plot, one series per report, fitted slope annotated.

    Returns {scheme: annotated slope}.
    """
    reports = [read_refinement_report(p) for p in report_paths]
    if not reports:
        raise ValueError("no reports given")
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    slopes = {}
    for rep in reports:
        total = np.sqrt((rep.errors ** 2).sum(axis=1))
        if len(rep.levels) < 2:
            raise ValueError(f"report for {rep.scheme} has fewer than 2 levels")
        slope = fitted_slope(rep.levels, total)
        slopes[rep.scheme] = slope
        ax.loglog(rep.levels, total, marker="o",
                  label=f"{rep.scheme} (slope {slope:.2f})")
    xlab = "dt" if reports[0].axis == "time" else "h"
    ax.set_xlabel(xlab)
    ax.set_ylabel("successive-difference $L^2$ error")
    ax.set_title(title or f"{reports[0].axis} refinement")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return slopes


def plot_energy(log_paths, out_path, labels=None, title: str | None = None) -> dict:
    """Energy decay (top) and species means (bottom) against time.

    Returns {label: max energy increment} for monotonicity inspection.
    """
    logs = [read_energy_log(p) for p in log_paths]
    if not logs:
        raise ValueError("no energy logs given")
    labels = labels or [str(p) for p in log_paths]
    fig, (ax_e, ax_m) = plt.subplots(
        2, 1, figsize=(5.5, 5.5), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]},
    )
    increments = {}
    for log, label in zip(logs, labels):
        t, e = log["t"], log["energy"]
        ax_e.plot(t, e, label=label)
        increments[label] = float(np.diff(e).max()) if len(e) > 1 else 0.0
        for species in ("mean_A", "mean_B", "mean_S"):
            ax_m.plot(t, log[species], lw=0.8)
    ax_e.set_ylabel("energy")
    ax_e.legend(fontsize=8)
    ax_m.set_ylabel("species means")
    ax_m.set_xlabel("t")
    ax_e.set_title(title or "energy decay and conservation")
    for ax in (ax_e, ax_m):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return increments


def plot_portrait(snapshot_paths, out_path, field: str = "AB",
                  title: str | None = None) -> list:
    """Heatmap grid of phi_A - phi_B (field="AB") or phi_S (field="S"),
    ordered by snapshot time. Returns the plotted times."""
    if field not in ("AB", "S"):
        raise ValueError(f"field must be 'AB' or 'S', got {field!r}")
    snaps = sorted((read_snapshot(p) for p in snapshot_paths), key=lambda s: s.t)
    if not snaps:
        raise ValueError("no snapshots given")
    shapes = {(s.nx, s.ny) for s in snaps}
    if len(shapes) != 1:
        raise ValueError(f"mixed grid sizes in portrait inputs: {sorted(shapes)}")
    n = len(snaps)
    fig, axes = plt.subplots(1, n, figsize=(3.0 * n, 3.2), squeeze=False)
    for ax, snap in zip(axes[0], snaps):
        if field == "AB":
            img = snap.fields["phi_A"] - snap.fields["phi_B"]
        else:
            img = snap.fields["phi_S"]
        # axis 0 is x: transpose so x runs horizontally, origin lower-left
        ax.imshow(img.T, origin="lower", cmap="RdBu_r",
                  extent=(0, snap.nx * snap.hx, 0, snap.ny * snap.hy))
        ax.set_title(f"t = {snap.t:g}", fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return [s.t for s in snaps]


def plot_hysteresis(log_path, out_path, ramp_fraction: float = 0.25,
                    title: str | None = None) -> float:
    """Overlay the ramp-up energy trace with the time-mirrored ramp-down
    trace; annotate and return their relative L2 difference."""
    if not 0.0 < ramp_fraction <= 0.5:
        raise ValueError("ramp_fraction must be in (0, 0.5]")
    log = read_energy_log(log_path)
    t, e = log["t"], log["energy"]
    if len(t) < 4:
        raise ValueError("energy log too short for a hysteresis figure")
    t_end = t[-1]
    half = ramp_fraction * t_end
    up = e[t <= half + 1e-12]
    down = e[t >= t_end - half - 1e-12][::-1]
    m = min(len(up), len(down))
    asym = float(np.linalg.norm(up[:m] - down[:m]) / np.linalg.norm(up[:m]))

    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    tau = t[t <= half + 1e-12][:m]
    ax.plot(tau, up[:m], label="ramp-up")
    ax.plot(tau, down[:m], "--", label="ramp-down (time-mirrored)")
    ax.set_xlabel("t within ramp")
    ax.set_ylabel("energy")
    ax.set_title(title or "hysteresis: ramp-up vs mirrored ramp-down")
    ax.legend()
    ax.annotate(f"relative $L^2$ difference: {asym:.3f}",
                xy=(0.03, 0.05), xycoords="axes fraction")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return asym


def portrait_stripe_angle(snapshot) -> float:
    """Structure-tensor orientation (degrees) of phi_A - phi_B in a snapshot;
    diagnostic used by tests to confirm portraits show the constructed
    pattern."""
    w = snapshot.fields["phi_A"] - snapshot.fields["phi_B"]
    gx, gy = np.gradient(w, snapshot.hx, snapshot.hy)
    jxx, jyy, jxy = (gx * gx).sum(), (gy * gy).sum(), (gx * gy).sum()
    return math.degrees(0.5 * math.atan2(2.0 * jxy, jxx - jyy))
