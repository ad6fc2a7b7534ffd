"""Config parsing, energy-log/snapshot persistence and the command-line front end."""

from __future__ import annotations

import argparse
import configparser
import io
import struct
import sys
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from .field_couplings import ElectricParams, MagneticParams
from .grid_ops import Grid2D, ScalarField
from .harness import (
    InitialCondition,
    build_initial_state,
    builtin_experiments,
    get_experiment,
    hysteresis_field,
    hysteresis_field_desk,
    refinement_study,
    structure_metrics,
)
from .integrators import Stepper
from .model_core import ModelParams, PhaseState

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "write_energy_log",
    "write_snapshot",
    "read_snapshot",
    "cli_main",
    "main",
]

SNAPSHOT_MAGIC = b"PHFLD1\x00\x00"
SNAPSHOT_VERSION = 1

ENERGY_COLUMNS = ("t", "energy", "predicted_energy", "dissipation", "alpha",
                  "beta", "newton_iters", "krylov_iters", "mean_A", "mean_B",
                  "mean_S")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description (round-trips through the INI format)."""

    # [model]
    n_poly: tuple
    chi_ab: float
    chi_as: float
    chi_bs: float
    eps: float
    gamma: float
    mobility: tuple            # row-major 3x3
    sigma: float
    eq_shift: float
    bulk: str
    initial_kind: str
    base_a: float
    amp_a: float
    base_b: float
    amp_b: float
    # [coupling]
    coupling_kind: str         # none | electric | magnetic
    eps0: float
    eps1: float
    e0_kind: str               # constant | hysteresis
    e0x: float
    e0y: float
    phi0: float
    picard_tol: float
    picard_maxit: int
    gamma_m: float
    b0x: float
    b0y: float
    # [grid]
    nx: int
    ny: int
    lx: float
    ly: float
    # [time]
    scheme: str
    dt: float
    t_end: float
    # [output]
    out_dir: str
    seed: int
    snapshot_times: tuple
    dissipation_at_final: bool
    refresh_phi_in_newton: bool

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("[time] dt must be positive")
        if self.t_end < 0:
            raise ConfigError("[time] t_end must be nonnegative")
        if self.nx < 4 or self.ny < 4:
            raise ConfigError("[grid] nx and ny must be at least 4")
        if self.coupling_kind not in ("none", "electric", "magnetic"):
            raise ConfigError(f"[coupling] unknown kind {self.coupling_kind!r}")
        if self.e0_kind not in ("constant", "hysteresis", "hysteresis_desk"):
            raise ConfigError(f"[coupling] unknown e0_kind {self.e0_kind!r}")

    # -- builders ----------------------------------------------------------

    def grid(self) -> Grid2D:
        return Grid2D(self.nx, self.ny, self.lx, self.ly)

    def initial_condition(self) -> InitialCondition:
        return InitialCondition(self.initial_kind, self.base_a, self.amp_a,
                                self.base_b, self.amp_b, seed=self.seed)

    def model_params(self) -> ModelParams:
        chi = np.array([
            [0.0, self.chi_ab, self.chi_as],
            [self.chi_ab, 0.0, self.chi_bs],
            [self.chi_as, self.chi_bs, 0.0],
        ])
        try:
            return ModelParams(
                n_poly=np.array(self.n_poly), chi=chi, eps=self.eps,
                gamma=self.gamma, phibar=self.initial_condition().means(),
                mobility=np.array(self.mobility).reshape(3, 3),
                sigma=self.sigma, eq_shift=self.eq_shift, bulk=self.bulk,
            )
        except ValueError as exc:
            raise ConfigError(f"[model] {exc}") from exc

    def coupling(self):
        if self.coupling_kind == "electric":
            e0 = {"hysteresis": hysteresis_field,
                  "hysteresis_desk": hysteresis_field_desk}.get(
                self.e0_kind, (self.e0x, self.e0y))
            return ElectricParams(eps0=self.eps0, eps1=self.eps1, e0=e0,
                                  phi0=self.phi0, picard_tol=self.picard_tol,
                                  picard_maxit=self.picard_maxit)
        if self.coupling_kind == "magnetic":
            return MagneticParams(gamma_m=self.gamma_m, b0=(self.b0x, self.b0y))
        return None

    def initial_state(self) -> PhaseState:
        return build_initial_state(self.initial_condition(), self.grid())


_DEFAULTS = {
    "sigma": "0.01",
    "eq_shift": "1.0",
    "bulk": "log",
    "eps0": "1.0",
    "eps1": "0.0",
    "e0_kind": "constant",
    "e0": "0 0",
    "phi0": "0.0",
    "picard_tol": "1e-10",
    "picard_maxit": "100",
    "gamma_m": "0.0",
    "b0": "0 0",
    "lx": "1.0",
    "ly": "1.0",
    "out_dir": "out",
    "seed": "0",
    "snapshot_times": "",
    "dissipation_at_final": "false",
    "refresh_phi_in_newton": "false",
    "kind": "none",
}

_SECTION_KEYS = {
    "model": {"experiment", "n_poly", "chi_ab", "chi_as", "chi_bs", "eps",
              "gamma", "mobility", "sigma", "eq_shift", "bulk", "initial_kind",
              "base_a", "amp_a", "base_b", "amp_b"},
    "coupling": {"kind", "eps0", "eps1", "e0", "e0_kind", "phi0", "picard_tol",
                 "picard_maxit", "gamma_m", "b0"},
    "grid": {"nx", "ny", "lx", "ly"},
    "time": {"scheme", "dt", "t_end"},
    "output": {"out_dir", "seed", "snapshot_times", "dissipation_at_final",
               "refresh_phi_in_newton"},
}


def _floats(text: str, n: int | None, where: str) -> tuple:
    try:
        vals = tuple(float(tok) for tok in text.replace(";", " ").split())
    except ValueError as exc:
        raise ConfigError(f"{where}: not a number list: {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"{where}: expected {n} numbers, got {len(vals)}")
    return vals


def _bool(text: str, where: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{where}: not a boolean: {text!r}")


def _experiment_defaults(name: str) -> dict:
    """Seed the key/value table from a built-in experiment."""
    try:
        spec = get_experiment(name)
    except KeyError as exc:
        raise ConfigError(f"[model] {exc.args[0]}") from exc
    p = spec.params
    ic = spec.initial
    out = {
        "n_poly": " ".join(repr(float(v)) for v in p.n_poly),
        "chi_ab": repr(float(p.chi[0, 1])),
        "chi_as": repr(float(p.chi[0, 2])),
        "chi_bs": repr(float(p.chi[1, 2])),
        "eps": repr(float(p.eps)),
        "gamma": repr(float(p.gamma)),
        "mobility": " ".join(repr(float(v)) for v in p.mobility.ravel()),
        "sigma": repr(float(p.sigma)),
        "eq_shift": repr(float(p.eq_shift)),
        "bulk": p.bulk,
        "initial_kind": ic.kind,
        "base_a": repr(float(ic.base_a)),
        "amp_a": repr(float(ic.amp_a)),
        "base_b": repr(float(ic.base_b)),
        "amp_b": repr(float(ic.amp_b)),
        "nx": str(spec.grid_n),
        "ny": str(spec.grid_n),
        "dt": repr(float(spec.dt)),
        "t_end": repr(float(spec.t_end)),
        "seed": str(ic.seed),
    }
    c = spec.coupling
    if isinstance(c, ElectricParams):
        out.update({
            "kind": "electric",
            "eps0": repr(float(c.eps0)),
            "eps1": repr(float(c.eps1)),
            "phi0": repr(float(c.phi0)),
            "picard_tol": repr(float(c.picard_tol)),
            "picard_maxit": str(c.picard_maxit),
        })
        if c.e0 is hysteresis_field_desk:
            out["e0_kind"] = "hysteresis_desk"
        elif callable(c.e0):
            out["e0_kind"] = "hysteresis"
        else:
            out["e0"] = " ".join(repr(float(v)) for v in c.e0)
    elif isinstance(c, MagneticParams):
        out.update({
            "kind": "magnetic",
            "gamma_m": repr(float(c.gamma_m)),
            "b0": " ".join(repr(float(v)) for v in c.b0),
        })
    return out


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    table = dict(_DEFAULTS)
    model = dict(parser["model"]) if parser.has_section("model") else {}
    if "experiment" in model:
        table.update(_experiment_defaults(model.pop("experiment")))
    table.update(model)
    for section in ("coupling", "grid", "time", "output"):
        if parser.has_section(section):
            table.update(dict(parser[section]))

    def need(key: str, section: str) -> str:
        if key not in table:
            raise ConfigError(f"missing required key {key!r} in section [{section}]")
        return table[key]

    def f(key: str, section: str) -> float:
        raw = need(key, section)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from exc

    def i(key: str, section: str) -> int:
        raw = need(key, section)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not an integer: {raw!r}") from exc

    e0 = _floats(table["e0"], 2, "[coupling] e0")
    b0 = _floats(table["b0"], 2, "[coupling] b0")
    snap = _floats(table["snapshot_times"], None, "[output] snapshot_times")
    scheme = need("scheme", "time").upper()
    return RunConfig(
        n_poly=_floats(need("n_poly", "model"), 3, "[model] n_poly"),
        chi_ab=f("chi_ab", "model"), chi_as=f("chi_as", "model"),
        chi_bs=f("chi_bs", "model"), eps=f("eps", "model"),
        gamma=f("gamma", "model"),
        mobility=_floats(need("mobility", "model"), 9, "[model] mobility"),
        sigma=f("sigma", "model"), eq_shift=f("eq_shift", "model"),
        bulk=need("bulk", "model"),
        initial_kind=need("initial_kind", "model"),
        base_a=f("base_a", "model"), amp_a=f("amp_a", "model"),
        base_b=f("base_b", "model"), amp_b=f("amp_b", "model"),
        coupling_kind=need("kind", "coupling"),
        eps0=f("eps0", "coupling"), eps1=f("eps1", "coupling"),
        e0_kind=need("e0_kind", "coupling"), e0x=e0[0], e0y=e0[1],
        phi0=f("phi0", "coupling"), picard_tol=f("picard_tol", "coupling"),
        picard_maxit=i("picard_maxit", "coupling"),
        gamma_m=f("gamma_m", "coupling"), b0x=b0[0], b0y=b0[1],
        nx=i("nx", "grid"), ny=i("ny", "grid"),
        lx=f("lx", "grid"), ly=f("ly", "grid"),
        scheme=scheme, dt=f("dt", "time"), t_end=f("t_end", "time"),
        out_dir=need("out_dir", "output"), seed=i("seed", "output"),
        snapshot_times=snap,
        dissipation_at_final=_bool(table["dissipation_at_final"],
                                   "[output] dissipation_at_final"),
        refresh_phi_in_newton=_bool(table["refresh_phi_in_newton"],
                                    "[output] refresh_phi_in_newton"),
    )


def serialize_config(cfg: RunConfig) -> str:
    """Write the fully resolved config; parse_config inverts this exactly."""
    out = io.StringIO()
    out.write("[model]\n")
    out.write(f"n_poly = {' '.join(repr(v) for v in cfg.n_poly)}\n")
    for key in ("chi_ab", "chi_as", "chi_bs", "eps", "gamma"):
        out.write(f"{key} = {getattr(cfg, key)!r}\n")
    out.write(f"mobility = {' '.join(repr(v) for v in cfg.mobility)}\n")
    out.write(f"sigma = {cfg.sigma!r}\neq_shift = {cfg.eq_shift!r}\nbulk = {cfg.bulk}\n")
    out.write(f"initial_kind = {cfg.initial_kind}\n")
    for key in ("base_a", "amp_a", "base_b", "amp_b"):
        out.write(f"{key} = {getattr(cfg, key)!r}\n")
    out.write("\n[coupling]\n")
    out.write(f"kind = {cfg.coupling_kind}\n")
    out.write(f"eps0 = {cfg.eps0!r}\neps1 = {cfg.eps1!r}\n")
    out.write(f"e0_kind = {cfg.e0_kind}\ne0 = {cfg.e0x!r} {cfg.e0y!r}\n")
    out.write(f"phi0 = {cfg.phi0!r}\npicard_tol = {cfg.picard_tol!r}\n")
    out.write(f"picard_maxit = {cfg.picard_maxit}\n")
    out.write(f"gamma_m = {cfg.gamma_m!r}\nb0 = {cfg.b0x!r} {cfg.b0y!r}\n")
    out.write("\n[grid]\n")
    out.write(f"nx = {cfg.nx}\nny = {cfg.ny}\nlx = {cfg.lx!r}\nly = {cfg.ly!r}\n")
    out.write("\n[time]\n")
    out.write(f"scheme = {cfg.scheme}\ndt = {cfg.dt!r}\nt_end = {cfg.t_end!r}\n")
    out.write("\n[output]\n")
    out.write(f"out_dir = {cfg.out_dir}\nseed = {cfg.seed}\n")
    out.write(f"snapshot_times = {' '.join(repr(v) for v in cfg.snapshot_times)}\n")
    out.write(f"dissipation_at_final = {str(cfg.dissipation_at_final).lower()}\n")
    out.write(f"refresh_phi_in_newton = {str(cfg.refresh_phi_in_newton).lower()}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def write_energy_log(records, path) -> None:
    lines = [" ".join(ENERGY_COLUMNS)]
    for r in records:
        lines.append(" ".join([
            f"{r.t:.17g}", f"{r.energy:.17g}", f"{r.predicted_energy:.17g}",
            f"{r.dissipation:.17g}", f"{r.alpha:.17g}", f"{r.beta:.17g}",
            str(r.newton_iters), str(r.krylov_iters),
            f"{r.means[0]:.17g}", f"{r.means[1]:.17g}", f"{r.means[2]:.17g}",
        ]))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write energy log {path}: {exc}") from exc


def write_snapshot(state: PhaseState, t: float, path, Phi: ScalarField | None = None) -> None:
    grid = state.grid
    names = ["phi_A", "phi_B", "phi_S"]
    arrays = [state.phiA.values, state.phiB.values, state.phiS.values]
    if Phi is not None:
        names.append("Phi")
        arrays.append(Phi.values)
    buf = io.BytesIO()
    buf.write(SNAPSHOT_MAGIC)
    buf.write(struct.pack("<IIIdddI", SNAPSHOT_VERSION, grid.nx, grid.ny,
                          grid.hx, grid.hy, t, len(names)))
    for name in names:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    for arr in arrays:
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    try:
        Path(path).write_bytes(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot_fields(path):
    """Low-level reader: (fields dict, grid, t)."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read snapshot {path}: {exc}") from exc
    if data[:8] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    off = 8
    version, nx, ny, hx, hy, t, nfields = struct.unpack_from("<IIIdddI", data, off)
    off += struct.calcsize("<IIIdddI")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    names = []
    for _ in range(nfields):
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        names.append(data[off:off + ln].decode("utf-8"))
        off += ln
    expected = off + nfields * nx * ny * 8
    if len(data) != expected:
        raise ValueError(f"{path}: truncated snapshot ({len(data)} != {expected})")
    grid = Grid2D(nx, ny, nx * hx, ny * hy)
    out = {}
    for name in names:
        arr = np.frombuffer(data, dtype="<f8", count=nx * ny, offset=off)
        out[name] = arr.reshape(nx, ny).copy()
        off += nx * ny * 8
    return out, grid, t


def read_snapshot(path):
    """(PhaseState, t); the induced potential, when present, is dropped here."""
    fields, grid, t = read_snapshot_fields(path)
    try:
        state = PhaseState(ScalarField(grid, fields["phi_A"]),
                           ScalarField(grid, fields["phi_B"]),
                           ScalarField(grid, fields["phi_S"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing field {exc}") from exc
    return state, t


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _cmd_experiments(_args) -> int:
    for spec in builtin_experiments():
        coupling = "none"
        if isinstance(spec.coupling, ElectricParams):
            coupling = "electric"
        elif isinstance(spec.coupling, MagneticParams):
            coupling = "magnetic"
        print(f"{spec.name:16s} grid={spec.grid_n}^2 dt={spec.dt:g} "
              f"T={spec.t_end:g} coupling={coupling}  {spec.description}")
    return 0


def _cmd_run(args) -> int:
    cfg = parse_config(Path(args.config).read_text())
    if args.scheme:
        cfg = RunConfig(**{**{f.name: getattr(cfg, f.name) for f in dc_fields(RunConfig)},
                           "scheme": args.scheme.upper()})
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.cfg").write_text(serialize_config(cfg))
    grid = cfg.grid()
    stepper = Stepper(grid, cfg.model_params(), cfg.scheme, cfg.dt,
                      cfg.initial_state(), coupling=cfg.coupling(),
                      dissipation_at_final=cfg.dissipation_at_final,
                      refresh_phi_in_newton=cfg.refresh_phi_in_newton)
    n_steps = round(cfg.t_end / cfg.dt)
    pending = sorted(cfg.snapshot_times)
    records = []
    write_snapshot(stepper.state(), stepper.t,
                   out_dir / f"snapshot_{stepper.t:012.6f}.bin", stepper.phi_elec)
    code = 0
    try:
        for _ in range(n_steps):
            records.append(stepper.step())
            while pending and stepper.t >= pending[0] - 1e-12:
                write_snapshot(stepper.state(), stepper.t,
                               out_dir / f"snapshot_{stepper.t:012.6f}.bin",
                               stepper.phi_elec)
                pending.pop(0)
    except Exception as exc:  # noqa: BLE001 - flush partial results, then report
        print(f"run failed at t={stepper.t:g}: {exc}", file=sys.stderr)
        code = 1
    write_energy_log(records, out_dir / "energy_log.txt")
    write_snapshot(stepper.state(), stepper.t,
                   out_dir / f"snapshot_{stepper.t:012.6f}.bin", stepper.phi_elec)
    return code


def format_refinement_report(report) -> str:
    lines = [f"# refinement axis={report.axis} scheme={report.scheme}",
             "# step err_A err_B err_S"]
    for k, err in enumerate(report.errors):
        lines.append(f"{report.levels[k]:.17g} " +
                     " ".join(f"{e:.17g}" for e in err))
    if report.errors:
        logs = np.log2(np.array(report.errors))
        ks = -np.arange(len(report.errors))
        slopes = [np.polyfit(ks, logs[:, s], 1)[0] for s in range(3)]
        lines.append("# fitted slopes: " +
                     " ".join(f"{s:.4f}" for s in slopes))
    return "\n".join(lines) + "\n"


def _cmd_refine(args) -> int:
    spec = get_experiment(args.experiment)
    report = refinement_study(spec, args.axis, args.scheme.upper(),
                              n_levels=args.levels, t_end=args.t_end,
                              grid_n=args.grid_n, dt=args.dt)
    text = format_refinement_report(report)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def _cmd_metrics(args) -> int:
    for path in args.snapshots:
        state, t = read_snapshot(path)
        m = structure_metrics(state)
        angle = "undefined" if not m.angle_defined else f"{np.degrees(m.stripe_angle):.2f}deg"
        print(f"{path}: t={t:g} stripe_angle={angle} anisotropy={m.anisotropy:.4f}")
    return 0


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="copolymer",
        description="Energy-dissipative copolymer-solution phase-field solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured simulation")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--scheme", default=None,
                       help="override the scheme from the config")
    p_run.set_defaults(fn=_cmd_run)

    p_ref = sub.add_parser("refine", help="convergence ladder study")
    p_ref.add_argument("--axis", choices=("time", "space"), required=True)
    p_ref.add_argument("--scheme", default="SVM2")
    p_ref.add_argument("--experiment", default="refinement")
    p_ref.add_argument("--levels", type=int, default=5)
    p_ref.add_argument("--t-end", type=float, default=None)
    p_ref.add_argument("--grid-n", type=int, default=None)
    p_ref.add_argument("--dt", type=float, default=None)
    p_ref.add_argument("--out", default=None)
    p_ref.set_defaults(fn=_cmd_refine)

    p_exp = sub.add_parser("experiments", help="list built-in experiments")
    p_exp.set_defaults(fn=_cmd_experiments)

    p_met = sub.add_parser("metrics", help="structure metrics of snapshots")
    p_met.add_argument("snapshots", nargs="+")
    p_met.set_defaults(fn=_cmd_metrics)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.fn(args)
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
