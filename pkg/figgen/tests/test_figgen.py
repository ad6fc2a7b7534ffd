"""Readers and figures exercised on synthetic, independently written inputs."""

import struct

import numpy as np
import pytest

from figgen.cli import cli_main
from figgen.plots import (
    plot_convergence,
    plot_energy,
    plot_hysteresis,
    plot_portrait,
    portrait_stripe_angle,
)
from figgen.readers import read_energy_log, read_refinement_report, read_snapshot


# ---------------------------------------------------------------------------
# synthetic writers (independent of both packages' writers)
# ---------------------------------------------------------------------------

COLUMNS = ("t", "energy", "predicted_energy", "dissipation", "alpha", "beta",
           "newton_iters", "krylov_iters", "mean_A", "mean_B", "mean_S")


def write_log(path, t, e):
    rows = [" ".join(COLUMNS)]
    for tk, ek in zip(t, e):
        rows.append(f"{tk:.17g} {ek:.17g} {ek:.17g} -1.0 0 0 1 0 0.3 0.2 0.5")
    path.write_text("\n".join(rows) + "\n")


def write_report(path, scheme, levels, errors, slopes):
    lines = [f"# refinement axis=time scheme={scheme}", "# step err_A err_B err_S"]
    for lv, err in zip(levels, errors):
        lines.append(f"{lv:.17g} " + " ".join(f"{e:.17g}" for e in err))
    lines.append("# fitted slopes: " + " ".join(f"{s:.4f}" for s in slopes))
    path.write_text("\n".join(lines) + "\n")


def write_snapshot(path, t, arrays, hx=None, hy=None):
    names = list(arrays)
    nx, ny = arrays[names[0]].shape
    hx = hx or 1.0 / nx
    hy = hy or 1.0 / ny
    buf = bytearray(b"PHFLD1\x00\x00")
    buf += struct.pack("<IIIdddI", 1, nx, ny, hx, hy, t, len(names))
    for name in names:
        raw = name.encode()
        buf += struct.pack("<I", len(raw)) + raw
    for name in names:
        buf += np.ascontiguousarray(arrays[name], dtype="<f8").tobytes()
    path.write_bytes(bytes(buf))


def stripe_snapshot(path, t, angle_deg=0.0, n=32):
    x = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    a = np.cos(np.radians(angle_deg))
    s = np.sin(np.radians(angle_deg))
    w = 0.1 * np.cos(8 * np.pi * (a * X + s * Y))
    fields = {"phi_A": 0.3 + w, "phi_B": 0.3 - w, "phi_S": np.full((n, n), 0.4)}
    write_snapshot(path, t, fields)


# ---------------------------------------------------------------------------
# readers
# ---------------------------------------------------------------------------

def test_energy_log_reader(tmp_path):
    p = tmp_path / "log.txt"
    write_log(p, [0.1, 0.2], [2.0, 1.5])
    log = read_energy_log(p)
    np.testing.assert_allclose(log["t"], [0.1, 0.2])
    np.testing.assert_allclose(log["energy"], [2.0, 1.5])
    np.testing.assert_allclose(log["mean_S"], [0.5, 0.5])
    with pytest.raises(KeyError):
        log["voltage"]


def test_energy_log_missing_columns(tmp_path):
    p = tmp_path / "log.txt"
    p.write_text("t volume\n0.0 1.0\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_energy_log(p)


def test_report_reader(tmp_path):
    p = tmp_path / "rep.txt"
    write_report(p, "SVM2", [0.05, 0.025], [(1e-3, 2e-3, 3e-3), (2.5e-4, 5e-4, 7.5e-4)],
                 [2.0, 2.0, 2.0])
    rep = read_refinement_report(p)
    assert rep.axis == "time" and rep.scheme == "SVM2"
    np.testing.assert_allclose(rep.levels, [0.05, 0.025])
    assert rep.errors.shape == (2, 3)
    np.testing.assert_allclose(rep.reported_slopes, 2.0)


def test_report_reader_rejects_headerless(tmp_path):
    p = tmp_path / "rep.txt"
    p.write_text("0.05 1e-3\n")
    with pytest.raises(ValueError, match="missing refinement header"):
        read_refinement_report(p)


def test_snapshot_reader_roundtrip(tmp_path):
    p = tmp_path / "s.bin"
    rng = np.random.default_rng(5)
    arrays = {"phi_A": rng.random((6, 4)), "phi_B": rng.random((6, 4)),
              "phi_S": rng.random((6, 4))}
    write_snapshot(p, 1.5, arrays, hx=0.25, hy=0.125)
    snap = read_snapshot(p)
    assert snap.t == 1.5 and snap.nx == 6 and snap.ny == 4
    assert snap.hx == 0.25
    np.testing.assert_array_equal(snap.fields["phi_B"], arrays["phi_B"])


def test_snapshot_reader_rejects_bad_magic(tmp_path):
    p = tmp_path / "s.bin"
    p.write_bytes(b"JUNKJUNK" + b"\x00" * 64)
    with pytest.raises(ValueError, match="not a snapshot"):
        read_snapshot(p)


# ---------------------------------------------------------------------------
# convergence figure
# ---------------------------------------------------------------------------

def test_convergence_slope_matches_manufactured_order(tmp_path):
    # manufactured exact order-2 ladder: annotated slope must be 2.00 +- 0.01
    levels = [0.1 / 2**k for k in range(4)]
    errors = [(lv**2, 0.5 * lv**2, 0.25 * lv**2) for lv in levels]
    rep = tmp_path / "rep.txt"
    write_report(rep, "SVM2", levels, errors, [2.0, 2.0, 2.0])
    out = tmp_path / "conv.png"
    slopes = plot_convergence([rep], out)
    assert out.exists()
    assert slopes["SVM2"] == pytest.approx(2.0, abs=0.01)


def test_convergence_annotation_matches_report_trailer(tmp_path):
    # perturbed ladder: the annotated slope must agree with the slopes the
    # report itself carries, to 0.01
    rng = np.random.default_rng(11)
    levels = [0.1 / 2**k for k in range(5)]
    errors = [tuple(lv**2 * (1 + 0.05 * rng.uniform(-1, 1)) for _ in range(3))
              for lv in levels]
    total = np.sqrt((np.array(errors) ** 2).sum(axis=1))
    slope = float(np.polyfit(np.log(levels), np.log(total), 1)[0])
    rep = tmp_path / "rep.txt"
    write_report(rep, "EQ", levels, errors, [slope] * 3)
    got = plot_convergence([rep], tmp_path / "c.png")
    ref = read_refinement_report(rep).reported_slopes[0]
    assert abs(got["EQ"] - ref) <= 0.01


def test_convergence_multiple_series(tmp_path):
    paths = []
    for k, scheme in enumerate(("EQ", "SVM1", "SVM2")):
        levels = [0.1 / 2**j for j in range(3)]
        errors = [((1 + k) * lv**2,) * 3 for lv in levels]
        p = tmp_path / f"{scheme}.txt"
        write_report(p, scheme, levels, errors, [2.0] * 3)
        paths.append(p)
    slopes = plot_convergence(paths, tmp_path / "multi.png")
    assert set(slopes) == {"EQ", "SVM1", "SVM2"}


def test_convergence_rejects_single_level(tmp_path):
    rep = tmp_path / "rep.txt"
    write_report(rep, "SVM2", [0.1], [(1e-3, 1e-3, 1e-3)], [0.0] * 3)
    with pytest.raises(ValueError, match="fewer than 2 levels"):
        plot_convergence([rep], tmp_path / "x.png")


# ---------------------------------------------------------------------------
# energy figure
# ---------------------------------------------------------------------------

def test_energy_plot_monotone_synthetic(tmp_path):
    t = np.linspace(0, 1, 50)
    e = np.exp(-3 * t)
    p = tmp_path / "log.txt"
    write_log(p, t, e)
    out = tmp_path / "energy.png"
    increments = plot_energy([p], out, labels=["decay"])
    assert out.exists()
    assert increments["decay"] <= 0.0


def test_energy_plot_overlays(tmp_path):
    paths = []
    for k in range(3):
        t = np.linspace(0, 1, 20)
        p = tmp_path / f"log{k}.txt"
        write_log(p, t, 1.0 / (1 + k) * np.exp(-t))
        paths.append(p)
    inc = plot_energy(paths, tmp_path / "e.png", labels=["m1", "m2", "m3"])
    assert set(inc) == {"m1", "m2", "m3"}


# ---------------------------------------------------------------------------
# portraits
# ---------------------------------------------------------------------------

def test_portrait_grid_in_time_order(tmp_path):
    paths = []
    for k, t in enumerate((2.0, 0.5, 1.0)):  # deliberately unsorted
        p = tmp_path / f"s{k}.bin"
        stripe_snapshot(p, t)
        paths.append(p)
    out = tmp_path / "portrait.png"
    times = plot_portrait(paths, out)
    assert times == [0.5, 1.0, 2.0]
    assert out.exists()


def test_portrait_mixed_grids_rejected(tmp_path):
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    stripe_snapshot(p1, 0.0, n=16)
    stripe_snapshot(p2, 1.0, n=32)
    with pytest.raises(ValueError, match="mixed grid sizes"):
        plot_portrait([p1, p2], tmp_path / "x.png")


def test_portrait_field_selector(tmp_path):
    p = tmp_path / "s.bin"
    stripe_snapshot(p, 0.0)
    plot_portrait([p], tmp_path / "s.png", field="S")
    with pytest.raises(ValueError, match="field must be"):
        plot_portrait([p], tmp_path / "x.png", field="Phi")


def test_constructed_stripes_have_expected_angle(tmp_path):
    p = tmp_path / "s.bin"
    stripe_snapshot(p, 0.0, angle_deg=30.0)
    snap = read_snapshot(p)
    assert portrait_stripe_angle(snap) == pytest.approx(30.0, abs=2.0)


# ---------------------------------------------------------------------------
# hysteresis figure
# ---------------------------------------------------------------------------

def test_hysteresis_asymmetry_value(tmp_path):
    # asymmetric synthetic loop: decaying trend superposed on the ramp
    t = np.linspace(0, 2, 201)
    e = -np.minimum(np.minimum(2 * t, 2 * (2 - t)), 1.0) - 0.3 * np.exp(-2 * t)
    p = tmp_path / "log.txt"
    write_log(p, t, e)
    out = tmp_path / "hyst.png"
    asym = plot_hysteresis(p, out, ramp_fraction=0.25)
    up = e[t <= 0.5 + 1e-12]
    down = e[t >= 1.5 - 1e-12][::-1]
    expected = np.linalg.norm(up - down) / np.linalg.norm(up)
    assert asym == pytest.approx(expected, rel=1e-12)
    assert out.exists()


def test_hysteresis_symmetric_trace_is_near_zero(tmp_path):
    t = np.linspace(0, 2, 101)
    e = -np.sin(np.pi * t / 2) ** 2  # exactly mirror-symmetric about t = 1
    p = tmp_path / "log.txt"
    write_log(p, t, e)
    asym = plot_hysteresis(p, tmp_path / "h.png")
    assert asym < 1e-12


# ---------------------------------------------------------------------------
# CLI and determinism
# ---------------------------------------------------------------------------

def test_cli_convergence(tmp_path, capsys):
    rep = tmp_path / "rep.txt"
    levels = [0.1 / 2**k for k in range(3)]
    write_report(rep, "SVM3", levels, [(lv**2,) * 3 for lv in levels], [2.0] * 3)
    out = tmp_path / "c.png"
    assert cli_main(["convergence", str(rep), "--out", str(out)]) == 0
    assert "SVM3: fitted slope 2.00" in capsys.readouterr().out


def test_cli_error_reporting(tmp_path, capsys):
    missing = tmp_path / "nope.txt"
    assert cli_main(["energy", str(missing), "--out", str(tmp_path / "x.png")]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_hysteresis_and_portrait(tmp_path, capsys):
    t = np.linspace(0, 2, 41)
    log = tmp_path / "log.txt"
    write_log(log, t, -t * (2 - t))
    assert cli_main(["hysteresis", str(log), "--out", str(tmp_path / "h.png")]) == 0
    snap = tmp_path / "s.bin"
    stripe_snapshot(snap, 0.25)
    assert cli_main(["portrait", str(snap), "--out", str(tmp_path / "p.png"),
                     "--field", "AB"]) == 0
    out = capsys.readouterr().out
    assert "asymmetry" in out and "1 panels" in out


def test_rerendering_is_byte_identical(tmp_path):
    t = np.linspace(0, 1, 30)
    p = tmp_path / "log.txt"
    write_log(p, t, np.exp(-t))
    out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
    plot_energy([p], out1, labels=["x"])
    plot_energy([p], out2, labels=["x"])
    assert out1.read_bytes() == out2.read_bytes()
