"""Command-line entry point: ``circlewave <command> --config run.json``.

Commands: simulate, classify, spectrum, zeros, subshift, sweep.
Exit codes: 0 ok, 2 configuration or parse error, 3 blow-up, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import classify_autonomous, classify_periodic
from .expr import ExpressionError, ExpressionSyntaxError, is_autonomous, parse_expression, parse_nonlinearity
from .field import FieldError, GridField, grid, read_csv
from .linear import LinearCoefficients, finite_time_spectrum, linearize_along
from .solver import BlowUpError, NumericalFailure, SolverConfig, integrate, metadata
from .subshift import demo_csv, nonwandering_demo, x_zero
from .symmetry import estimate_wave_speed
from .zeros import TrivialFieldError, zero_track

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NUMERICAL = 0, 2, 3, 4
ANALYSES = {"classify", "zeros", "speed", "spectrum", "recurrence"}
_RANDOM = re.compile(r"^\s*random\(\s*([^,]+),\s*([^,]+),\s*([^)]+)\)\s*$")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    f_source: str | None
    params: dict = field(default_factory=dict)
    period: float | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    initial_data: str = "sin(x)"
    analyses: set = field(default_factory=set)
    sections: dict = field(default_factory=dict)  # command-specific blocks
    base_dir: Path = Path(".")
    seed: int | None = None

    def nonlinearity(self):
        if self.f_source is None:
            raise ConfigError("config needs a nonlinearity 'f'")
        return parse_nonlinearity(self.f_source, self.params)

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name) or {})


def _unflatten(doc: dict) -> dict:
    """Expand dotted keys ("solver.dt": 0.01) into nested blocks."""
    out: dict = {}
    for key, value in doc.items():
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"key {key!r} conflicts with a scalar entry")
        if isinstance(value, dict) and isinstance(node.get(parts[-1]), dict):
            node[parts[-1]].update(_unflatten(value))
        else:
            node[parts[-1]] = _unflatten(value) if isinstance(value, dict) else value
    return out


def config_from_dict(doc: dict, base_dir: Path = Path("."), seed: int | None = None) -> ExperimentConfig:
    doc = _unflatten(doc)
    solver = doc.get("solver", {})
    allowed = set(SolverConfig.__dataclass_fields__)
    unknown = set(solver) - allowed
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    try:
        cfg = SolverConfig(**solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    analyses = set(doc.get("analyses", []))
    if analyses - ANALYSES:
        raise ConfigError(f"unknown analyses: {sorted(analyses - ANALYSES)}")
    period = doc.get("period")
    if period is not None and not float(period) > 0:
        raise ConfigError("period must be positive")
    known = {"f", "params", "period", "solver", "initial_data", "analyses"}
    return ExperimentConfig(
        f_source=None if doc.get("f") is None else str(doc["f"]),
        params={k: float(v) for k, v in doc.get("params", {}).items()},
        period=None if period is None else float(period),
        solver=cfg,
        initial_data=str(doc.get("initial_data", "sin(x)")),
        analyses=analyses,
        sections={k: v for k, v in doc.items() if k not in known},
        base_dir=base_dir,
        seed=seed,
    )


def load_config(path: str | os.PathLike, seed: int | None = None) -> ExperimentConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {str(p)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(doc, p.parent, seed)


def random_profile(seed: int, amplitude: float, max_mode: int, n: int) -> np.ndarray:
    """amplitude * sum_{k <= max_mode} (a_k cos kx + b_k sin kx) / (1 + k), a_k, b_k ~ U(-1, 1)."""
    rng = np.random.default_rng(seed)
    x = grid(n)
    u = np.zeros(n)
    for k in range(max_mode + 1):
        a, b = rng.uniform(-1.0, 1.0, 2)
        u += (a * np.cos(k * x) + (b * np.sin(k * x) if k else 0.0)) / (1.0 + k)
    return amplitude * u


def _read_profile(path: Path, n: int) -> np.ndarray:
    text = path.read_text()
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if rows and rows[0].lstrip().startswith("t,"):
        _, states = read_csv(rows)
        values = states[-1]
    else:
        values = np.array([float(v) for v in re.split(r"[,\s]+", text.strip()) if v])
    if values.size != n:
        raise ConfigError(f"{path}: profile has {values.size} values, solver.N = {n}")
    return values


def initial_profile(cfg: ExperimentConfig) -> GridField:
    source = cfg.initial_data
    n = cfg.solver.N
    m = _RANDOM.match(source)
    if m:
        try:
            seed, amp, modes = int(m.group(1)), float(m.group(2)), int(m.group(3))
        except ValueError:
            raise ConfigError(f"bad random initial data {source!r}") from None
        if cfg.seed is not None:
            seed = cfg.seed
        return GridField(random_profile(seed, amp, modes, n))
    if "/" in source or source.endswith((".csv", ".txt", ".dat")):
        path = Path(source)
        if not path.is_absolute():
            path = cfg.base_dir / path
        if not path.exists():
            raise ConfigError(f"initial data file {str(path)!r} does not exist")
        return GridField(_read_profile(path, n))
    ast = parse_expression(source, cfg.params, ("x",))
    return GridField(np.broadcast_to(ast(grid(n)), (n,)))


# --------------------------------------------------------------------------
# commands

def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    target = out / name
    tmp = out / (name + ".tmp")
    tmp.write_text(text)
    tmp.replace(target)
    return target


def _csv(writer) -> str:
    import io

    buf = io.StringIO()
    writer(buf)
    return buf.getvalue()


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    f = cfg.nonlinearity()
    traj = integrate(initial_profile(cfg), f, cfg.solver)
    _write(out, "trajectory.csv", _csv(traj.to_csv))
    _write(out, "meta.json", metadata(cfg.solver, f, initial_data=cfg.initial_data, period=cfg.period) + "\n")
    return {"records": len(traj), "t_final": float(traj.times[-1]), "max_norm": traj.final.max_norm()}


def cmd_classify(cfg: ExperimentConfig, out: Path) -> dict:
    f = cfg.nonlinearity()
    u0 = initial_profile(cfg)
    opts = cfg.section("classify")
    if cfg.period is None:
        if not is_autonomous(f):
            raise ConfigError("nonlinearity depends on t: give 'period'")
        report = classify_autonomous(u0, f, cfg.solver, float(opts.get("t_transient", 0.0)))
    else:
        report = classify_periodic(u0, f, cfg.period, cfg.solver, n_max=int(opts.get("n_max", 50)),
                                   n_transient=int(opts.get("n_transient", 0)))
    doc = report.to_dict()
    if "speed" in cfg.analyses and cfg.period is None and report.verdict == "rotating_wave":
        t0 = float(opts.get("t_transient", 0.0))
        w = u0 if t0 <= 0 else GridField(
            integrate(u0, f, cfg.solver.replace(t_end=t0, record_stride=max(1, round(t0 / cfg.solver.dt)))).states[-1])
        ws = estimate_wave_speed(integrate(w, f, cfg.solver))
        _write(out, "speed.csv", _csv(ws.to_csv))
    _write(out, "report.json", report.to_json() + "\n")
    return doc


def spectrum_coefficients(cfg: ExperimentConfig) -> tuple[LinearCoefficients, dict]:
    opts = cfg.section("spectrum")
    if "b" in opts:
        return LinearCoefficients.constant(float(opts.get("a", 0.0)), float(opts["b"]), cfg.solver.N), opts
    f = cfg.nonlinearity()
    traj = integrate(initial_profile(cfg), f, cfg.solver)
    return linearize_along(traj, f), opts


def cmd_spectrum(cfg: ExperimentConfig, out: Path) -> dict:
    coeffs, opts = spectrum_coefficients(cfg)
    window = tuple(float(w) for w in opts.get("window", (0.0, 20.0)))
    seed = cfg.seed if cfg.seed is not None else int(opts.get("seed", 0))
    est = finite_time_spectrum(
        coeffs, window, m=int(opts.get("m", 5)), t_qr=float(opts.get("t_qr", 0.1)),
        dt=float(opts.get("dt", cfg.solver.dt)), t_spinup=float(opts.get("t_spinup", 5.0)), seed=seed,
    )
    _write(out, "spectrum.csv", _csv(est.to_csv))
    return {"exponents": [float(e) for e in est.exponents], "clusters": est.clusters()}


def cmd_zeros(cfg: ExperimentConfig, out: Path) -> dict:
    f = cfg.nonlinearity()
    traj = integrate(initial_profile(cfg), f, cfg.solver)
    try:
        series = zero_track(traj)
    except TrivialFieldError as exc:
        raise ConfigError(str(exc)) from None
    _write(out, "zeros.csv", _csv(series.to_csv))
    return {"increases": series.increases, "drops": len(series.drops),
            "final_count": int(series.counts[-1]), "settle_index": series.settle_index()}


def cmd_subshift(cfg: ExperimentConfig, out: Path) -> dict:
    opts = cfg.section("subshift")
    n_max = int(opts.get("n_max", 8))
    if n_max < 1:
        raise ConfigError("subshift.n_max must be >= 1")
    rows, is_limit = nonwandering_demo(n_max)
    table = demo_csv(rows)
    _write(out, "subshift.csv", table)
    sys.stdout.write(table)
    verdict = {"x0": str(x_zero()), "x0_nonwandering": True, "x0_limit_point": is_limit}
    _write(out, "subshift.json", json.dumps(verdict, indent=2, sort_keys=True) + "\n")
    return verdict


def _sweep_point(args) -> dict:
    index, name, value, doc, base_dir, seed, out = args
    point = copy.deepcopy(doc)
    point.setdefault("params", {})[name] = value
    row = {"index": index, "param": name, "value": value, "status": "ok", "verdict": "",
           "speed": "", "amplitude": "", "fixed_point": "", "orbit": "", "message": ""}
    pdir = out / f"point_{index:03d}"
    try:
        cfg = config_from_dict(point, base_dir, seed)
        f = cfg.nonlinearity()
        u0 = initial_profile(cfg)
        opts = cfg.section("classify")
        if cfg.period is None:
            t0 = float(opts.get("t_transient", 0.0))
            rep = classify_autonomous(u0, f, cfg.solver, t0)
        else:
            rep = classify_periodic(u0, f, cfg.period, cfg.solver, n_max=int(opts.get("n_max", 50)))
        _write(pdir, "report.json", rep.to_json() + "\n")
        row.update(verdict=rep.verdict,
                   speed="" if rep.speed is None else format(rep.speed, ".17g"),
                   fixed_point=format(rep.residuals.get("fixed_point", float("nan")), ".17g"),
                   orbit=format(rep.residuals["orbit"], ".17g") if "orbit" in rep.residuals else "")
        if "amplitude" in rep.evidence:
            row["amplitude"] = format(rep.evidence["amplitude"], ".17g")
    except (ConfigError, ExpressionError, FieldError) as exc:
        row.update(status="config_error", message=str(exc))
    except BlowUpError as exc:
        row.update(status="blowup", message=str(exc))
    except NumericalFailure as exc:
        row.update(status="numerical_failure", message=str(exc))
    except Exception as exc:  # isolate anything else to this grid point
        row.update(status="error", message=f"{type(exc).__name__}: {exc}")
    _write(pdir, "status.json", json.dumps({k: row[k] for k in ("status", "message")}, sort_keys=True) + "\n")
    return row


SWEEP_COLUMNS = ("index", "param", "value", "status", "verdict", "speed", "amplitude", "fixed_point", "orbit", "message")


def cmd_sweep(cfg: ExperimentConfig, out: Path, jobs: int | None, raw: dict) -> dict:
    opts = cfg.section("sweep")
    name = opts.get("param")
    values = opts.get("values")
    if not name or not isinstance(values, list) or not values:
        raise ConfigError("sweep needs 'param' and a non-empty 'values' list")
    doc = {k: v for k, v in _unflatten(raw).items() if k != "sweep"}
    tasks = [(i, name, float(v), doc, cfg.base_dir, cfg.seed, out) for i, v in enumerate(values)]
    if jobs == 1 or len(tasks) == 1:
        rows = [_sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        cells = [str(row[c]).replace(",", ";").replace("\n", " ") for c in SWEEP_COLUMNS]
        cells[2] = format(row["value"], ".17g")
        lines.append(",".join(cells))
    _write(out, "sweep.csv", "\n".join(lines) + "\n")
    return {"points": len(rows), "failed": sum(r["status"] != "ok" for r in rows)}


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="circlewave", description="Reaction-diffusion experiments on the circle.")
    ap.add_argument("command", choices=["simulate", "classify", "spectrum", "zeros", "subshift", "sweep"])
    ap.add_argument("--config", required=False, help="JSON experiment config")
    ap.add_argument("--out", default="out", help="output directory (env CIRCLEWAVE_OUT overrides)")
    ap.add_argument("--jobs", type=int, default=None, help="sweep workers (default: all cores)")
    ap.add_argument("--seed", type=int, default=None, help="overrides random(...) seeds and the spectrum frame seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(os.environ.get("CIRCLEWAVE_OUT") or args.out)
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.config is None:
            if args.command != "subshift":
                raise ConfigError("--config is required")
            raw: dict = {}
            cfg = config_from_dict({"subshift": {}}, Path("."), args.seed)
        else:
            raw = json.loads(Path(args.config).read_text()) if Path(args.config).exists() else {}
            cfg = load_config(args.config, args.seed)
        if args.command == "simulate":
            summary = cmd_simulate(cfg, out)
        elif args.command == "classify":
            summary = cmd_classify(cfg, out)
        elif args.command == "spectrum":
            summary = cmd_spectrum(cfg, out)
        elif args.command == "zeros":
            summary = cmd_zeros(cfg, out)
        elif args.command == "subshift":
            summary = cmd_subshift(cfg, out)
        else:
            summary = cmd_sweep(cfg, out, jobs, raw)
    except ExpressionSyntaxError as exc:
        print(f"error: {exc.diagnostic()}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ExpressionError, FieldError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.command != "subshift":
        print(json.dumps(summary, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
