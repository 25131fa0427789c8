"""Command-line front end: YAML config in, CSV + YAML summaries (+ PNGs) out.

Exit codes: 0 success, 2 config problems (parse or validation), 3 numeric
failures, 4 oracle-check mismatch.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import yaml

from .arm import ArmParams
from .arm import validate as validate_arm
from .errors import (
    DegenerateObservation,
    HorizonTooLarge,
    IterationBudgetExceeded,
    MissingIndexTable,
    NoConvergence,
    NoCrossingInBracket,
    NonTerminatingTau,
    OrderViolation,
    OutOfRange,
    ParseError,
    TooCoarse,
    UnsupportedOrdering,
    ValidationError,
)
from .index import (
    INDEX_TOL,
    indexability_check,
    threshold,
    threshold_curve,
    whittle_table,
    write_threshold_curve_csv,
)
from .sim import (
    BanditConfig,
    MyopicPolicy,
    RandomPolicy,
    WhittlePolicy,
    monte_carlo,
)
from .solver import (
    DEFAULT_GRID_POINTS,
    DEFAULT_TOL,
    finite_horizon_oracle,
    oracle_error_bound,
    solve,
)

SCHEMA_VERSION = 1

_ARM_KEYS = {"lambda0", "lambda1", "mu0", "mu1", "rho0", "rho1",
             "eta0", "eta1", "eta2"}
_TOP_KEYS = {"schema_version", "arm", "beta", "grid", "tol", "eta2_sweep",
             "whittle", "oracle", "simulation"}
_SWEEP_KEYS = {"start", "stop", "step"}
_WHITTLE_KEYS = {"method", "index_tol", "bracket"}
_ORACLE_KEYS = {"horizon", "points", "tolerance"}
_SIM_KEYS = {"arms", "horizon", "iterations", "seed", "policies",
             "initial_beliefs", "index_grid"}
_POLICY_NAMES = {"whittle", "myopic", "random"}


@dataclass(frozen=True)
class RunConfig:
    """Parsed and validated contents of one YAML config file."""

    schema_version: int
    arm: ArmParams | None = None
    beta: float | None = None
    grid: int | None = None
    tol: float | None = None
    eta2_sweep: tuple | None = None          # (start, stop, step)
    whittle_method: str = "auto"
    whittle_index_tol: float = INDEX_TOL
    whittle_bracket: tuple | None = None
    oracle_horizon: int | None = None
    oracle_points: int = 21
    oracle_tolerance: float | None = None
    sim: BanditConfig | None = None
    sim_policies: tuple = ("whittle", "myopic", "random")
    sim_index_grid: int = 401


def _expect_mapping(obj, path):
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected a mapping")
    return obj


def _as_float(val, path) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"{path}: expected a number, got {val!r}")
    return float(val)


def _as_int(val, path) -> int:
    if isinstance(val, bool) or not isinstance(val, int):
        raise ValidationError(f"{path}: expected an integer, got {val!r}")
    return int(val)


def _collect_unknown(raw) -> list:
    bad = [k for k in raw if k not in _TOP_KEYS]
    sections = (("arm", _ARM_KEYS), ("eta2_sweep", _SWEEP_KEYS),
                ("whittle", _WHITTLE_KEYS), ("oracle", _ORACLE_KEYS),
                ("simulation", _SIM_KEYS))
    for name, keys in sections:
        sect = raw.get(name)
        if isinstance(sect, dict):
            bad += [f"{name}.{k}" for k in sect if k not in keys]
    sim = raw.get("simulation")
    if isinstance(sim, dict) and isinstance(sim.get("arms"), list):
        for i, a in enumerate(sim["arms"]):
            if isinstance(a, dict):
                bad += [f"simulation.arms[{i}].{k}" for k in a
                        if k not in _ARM_KEYS]
    return bad


def _build_arm(raw, path) -> ArmParams:
    _expect_mapping(raw, path)
    try:
        return validate_arm(raw)
    except (ValidationError, OutOfRange, OrderViolation) as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _parse_sweep(raw) -> tuple:
    _expect_mapping(raw, "eta2_sweep")
    missing = _SWEEP_KEYS - set(raw)
    if missing:
        raise ValidationError(f"eta2_sweep: missing {sorted(missing)}")
    start = _as_float(raw["start"], "eta2_sweep.start")
    stop = _as_float(raw["stop"], "eta2_sweep.stop")
    step = _as_float(raw["step"], "eta2_sweep.step")
    if step <= 0 or stop < start:
        raise ValidationError("eta2_sweep: need step > 0 and stop >= start")
    return start, stop, step


def _parse_simulation(raw, beta) -> tuple:
    _expect_mapping(raw, "simulation")
    if "arms" not in raw or not isinstance(raw["arms"], list) or not raw["arms"]:
        raise ValidationError("simulation.arms: expected a non-empty list")
    if beta is None:
        raise ValidationError("simulation requires a top-level beta")
    arms = tuple(
        _build_arm(a, f"simulation.arms[{i}]") for i, a in enumerate(raw["arms"])
    )
    policies = raw.get("policies", ["whittle", "myopic", "random"])
    if not isinstance(policies, list) or not policies:
        raise ValidationError("simulation.policies: expected a non-empty list")
    normalized = []
    for i, p in enumerate(policies):
        name = str(p).lower()
        if name not in _POLICY_NAMES:
            raise ValidationError(
                f"simulation.policies[{i}]: {p!r} is not one of "
                f"{sorted(_POLICY_NAMES)}"
            )
        normalized.append(name)
    initial = raw.get("initial_beliefs", "random")
    if initial != "random":
        if not isinstance(initial, list):
            raise ValidationError(
                "simulation.initial_beliefs: expected 'random' or a list"
            )
        initial = tuple(
            _as_float(x, f"simulation.initial_beliefs[{i}]")
            for i, x in enumerate(initial)
        )
    config = BanditConfig(
        arms=arms,
        beta=beta,
        horizon=_as_int(raw.get("horizon", 2000), "simulation.horizon"),
        iterations=_as_int(raw.get("iterations", 100), "simulation.iterations"),
        seed=_as_int(raw.get("seed", 0), "simulation.seed"),
        initial_beliefs=initial,
    )
    index_grid = _as_int(raw.get("index_grid", 401), "simulation.index_grid")
    return config, tuple(normalized), index_grid


def parse_config(source) -> RunConfig:
    """Load and validate a config (path or pre-loaded mapping).

    Unknown keys anywhere in the document are rejected, with their paths
    spelled out.
    """
    if isinstance(source, (str, Path)):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read config: {exc}") from exc
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ParseError(f"config is not valid YAML: {exc}") from exc
    elif isinstance(source, dict):
        raw = source
    else:
        raise ParseError(f"config source {type(source).__name__} unsupported")
    if not isinstance(raw, dict):
        raise ValidationError("config root must be a mapping")
    bad = _collect_unknown(raw)
    if bad:
        raise ValidationError("unknown config key(s): " + ", ".join(sorted(bad)))
    if "schema_version" not in raw:
        raise ValidationError("schema_version is required")
    version = _as_int(raw["schema_version"], "schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"schema_version {version} unsupported (expected {SCHEMA_VERSION})"
        )

    kwargs = {"schema_version": version}
    if "arm" in raw:
        kwargs["arm"] = _build_arm(raw["arm"], "arm")
    if "beta" in raw:
        beta = _as_float(raw["beta"], "beta")
        if not 0.0 < beta < 1.0:
            raise ValidationError(f"beta: {beta} outside (0, 1)")
        kwargs["beta"] = beta
    if "grid" in raw:
        grid = _as_int(raw["grid"], "grid")
        if grid < 3:
            raise ValidationError(f"grid: {grid} is too small (minimum 3)")
        kwargs["grid"] = grid
    if "tol" in raw:
        tol = _as_float(raw["tol"], "tol")
        if tol <= 0:
            raise ValidationError("tol: must be positive")
        kwargs["tol"] = tol
    if "eta2_sweep" in raw:
        kwargs["eta2_sweep"] = _parse_sweep(raw["eta2_sweep"])
    if "whittle" in raw:
        sect = _expect_mapping(raw["whittle"], "whittle")
        method = str(sect.get("method", "auto"))
        if method not in ("auto", "scan"):
            raise ValidationError(f"whittle.method: {method!r} not auto/scan")
        kwargs["whittle_method"] = method
        if "index_tol" in sect:
            it = _as_float(sect["index_tol"], "whittle.index_tol")
            if it <= 0:
                raise ValidationError("whittle.index_tol: must be positive")
            kwargs["whittle_index_tol"] = it
        if "bracket" in sect:
            br = sect["bracket"]
            if not isinstance(br, list) or len(br) != 2:
                raise ValidationError("whittle.bracket: expected [low, high]")
            lo = _as_float(br[0], "whittle.bracket[0]")
            hi = _as_float(br[1], "whittle.bracket[1]")
            if hi <= lo:
                raise ValidationError("whittle.bracket: high must exceed low")
            kwargs["whittle_bracket"] = (lo, hi)
    if "oracle" in raw:
        sect = _expect_mapping(raw["oracle"], "oracle")
        if "horizon" not in sect:
            raise ValidationError("oracle.horizon is required")
        kwargs["oracle_horizon"] = _as_int(sect["horizon"], "oracle.horizon")
        if "points" in sect:
            pts = _as_int(sect["points"], "oracle.points")
            if pts < 1:
                raise ValidationError("oracle.points: must be >= 1")
            kwargs["oracle_points"] = pts
        if "tolerance" in sect:
            kwargs["oracle_tolerance"] = _as_float(
                sect["tolerance"], "oracle.tolerance"
            )
    if "simulation" in raw:
        sim, policies, index_grid = _parse_simulation(
            raw["simulation"], kwargs.get("beta")
        )
        kwargs["sim"] = sim
        kwargs["sim_policies"] = policies
        kwargs["sim_index_grid"] = index_grid
    return RunConfig(**kwargs)


def _py(obj):
    """Recursively convert numpy containers so yaml.safe_dump accepts them."""
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _py(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_py(v) for v in obj]
    return obj


def _write_summary(out: Path, name: str, data: dict) -> Path:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    body = yaml.safe_dump(_py(data), sort_keys=True, default_flow_style=False)
    path = out / name
    path.write_text(f"# generated: {stamp}\n{body}", encoding="utf-8")
    print(f"wrote {path}")
    return path


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(cfg: RunConfig, command: str, *fields):
    missing = [f for f in fields if getattr(cfg, f) is None]
    if missing:
        raise ValidationError(
            f"{command} requires config field(s): {', '.join(missing)}"
        )


def _resolved_grid(cfg, args) -> int:
    if args.grid is not None:
        return args.grid
    return cfg.grid if cfg.grid is not None else DEFAULT_GRID_POINTS


def _resolved_tol(cfg, args) -> float:
    if args.tol is not None:
        return args.tol
    return cfg.tol if cfg.tol is not None else DEFAULT_TOL


def _sweep_values(sweep) -> np.ndarray:
    start, stop, step = sweep
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _cmd_validate(cfg, args):
    parts = []
    if cfg.arm is not None:
        parts.append("arm parameters OK")
    if cfg.sim is not None:
        parts.append(f"simulation with {cfg.sim.n_arms} arms OK")
    if not parts:
        parts.append("no arm or simulation section, schema OK")
    print("config valid: " + "; ".join(parts))
    return 0


def _cmd_solve(cfg, args):
    _require(cfg, "solve", "arm", "beta")
    out = _outdir(args)
    grid_n, tol = _resolved_grid(cfg, args), _resolved_tol(cfg, args)
    table = solve(cfg.arm, cfg.arm.eta2, cfg.beta, grid=grid_n, tol=tol)
    csv = out / "value_table.csv"
    table.to_csv(csv)
    print(f"wrote {csv}")
    files = {"table": csv.name}
    if not args.no_plot:
        from . import plots

        fig = plots.plot_value_table(table, out / "value_table.png")
        print(f"wrote {fig}")
        files["figure"] = Path(fig).name
    _write_summary(out, "solve_summary.yaml", {
        "command": "solve",
        "beta": cfg.beta,
        "eta2": cfg.arm.eta2,
        "grid_points": table.grid.n_points,
        "tol": tol,
        "iterations": table.iterations,
        "residual": table.residual,
        "value_at": {"0.0": table.eval(0.0), "0.5": table.eval(0.5),
                     "1.0": table.eval(1.0)},
        "files": files,
    })
    return 0


def _threshold_rows(cfg, args):
    grid_n, tol = _resolved_grid(cfg, args), _resolved_tol(cfg, args)
    if cfg.eta2_sweep is not None:
        etas = _sweep_values(cfg.eta2_sweep)
        return threshold_curve(cfg.arm, etas, cfg.beta, grid=grid_n, tol=tol)
    return [threshold(cfg.arm, cfg.arm.eta2, cfg.beta, grid=grid_n, tol=tol)]


def _cmd_threshold(cfg, args):
    _require(cfg, "threshold", "arm", "beta")
    out = _outdir(args)
    rows = _threshold_rows(cfg, args)
    csv = out / "threshold_curve.csv"
    write_threshold_curve_csv(rows, csv)
    print(f"wrote {csv}")
    files = {"curve": csv.name}
    if not args.no_plot:
        from . import plots

        fig = plots.plot_threshold_curve(rows, out / "threshold_curve.png")
        print(f"wrote {fig}")
        files["figure"] = Path(fig).name
    regimes = {}
    for r in rows:
        regimes[r.regime] = regimes.get(r.regime, 0) + 1
    single = rows[0]
    _write_summary(out, "threshold_summary.yaml", {
        "command": "threshold",
        "beta": cfg.beta,
        "rows": len(rows),
        "regime_counts": regimes,
        "first": {"eta2": single.eta2, "pi_t": single.pi_t,
                  "regime": single.regime, "pi_circ": single.pi_circ,
                  "crossings": list(single.crossings),
                  "hole": list(single.hole) if single.hole else None},
        "files": files,
    })
    return 0


def _cmd_whittle(cfg, args):
    _require(cfg, "whittle", "arm", "beta")
    out = _outdir(args)
    grid_n, tol = _resolved_grid(cfg, args), _resolved_tol(cfg, args)
    table = whittle_table(
        cfg.arm, cfg.beta, grid=grid_n, tol=tol,
        index_tol=cfg.whittle_index_tol, bracket=cfg.whittle_bracket,
        method=cfg.whittle_method,
    )
    csv = out / "whittle.csv"
    table.to_csv(csv)
    print(f"wrote {csv}")
    files = {"table": csv.name}
    if not args.no_plot:
        from . import plots

        fig = plots.plot_whittle_table(table, out / "whittle.png")
        print(f"wrote {fig}")
        files["figure"] = Path(fig).name
    methods = {}
    for m in table.methods:
        methods[m] = methods.get(m, 0) + 1
    _write_summary(out, "whittle_summary.yaml", {
        "command": "whittle",
        "beta": cfg.beta,
        "entries": int(table.pis.size),
        "method_counts": methods,
        "discrepancies": [list(d) for d in table.discrepancies[:20]],
        "discrepancy_count": len(table.discrepancies),
        "index_at": {"0.0": table.lookup(0.0), "0.5": table.lookup(0.5),
                     "1.0": table.lookup(1.0)},
        "files": files,
    })
    return 0


def _cmd_indexability(cfg, args):
    _require(cfg, "indexability", "arm", "beta", "eta2_sweep")
    out = _outdir(args)
    grid_n, tol = _resolved_grid(cfg, args), _resolved_tol(cfg, args)
    etas = _sweep_values(cfg.eta2_sweep)
    report = indexability_check(cfg.arm, etas, cfg.beta, grid=grid_n, tol=tol)
    rows = [
        SimpleNamespace(eta2=float(e), pi_t=float(p), regime=r)
        for e, p, r in zip(report.eta2_values, report.thresholds, report.regimes)
    ]
    csv = out / "indexability_thresholds.csv"
    write_threshold_curve_csv(rows, csv)
    print(f"wrote {csv}")
    files = {"thresholds": csv.name}
    if not args.no_plot:
        from . import plots

        fig = plots.plot_threshold_curve(rows, out / "indexability.png")
        print(f"wrote {fig}")
        files["figure"] = Path(fig).name
    _write_summary(out, "indexability_summary.yaml", {
        "command": "indexability",
        "beta": cfg.beta,
        "eta2_count": int(report.eta2_values.size),
        "indexable": report.indexable,
        "epsilon_indexable": report.epsilon_indexable,
        "pi_t_direction": report.pi_t_direction,
        "violation_count": len(report.violations),
        "violations": [
            [lo, hi, list(pis)] for lo, hi, pis in report.violations[:20]
        ],
        "files": files,
    })
    return 0


def _cmd_simulate(cfg, args):
    _require(cfg, "simulate", "sim")
    out = _outdir(args)
    sim_cfg = cfg.sim
    if args.seed is not None:
        sim_cfg = replace(sim_cfg, seed=args.seed)
    tol = _resolved_tol(cfg, args)
    policies = []
    for name in cfg.sim_policies:
        if name == "whittle":
            tables = []
            for a in sim_cfg.arms:
                bracket = cfg.whittle_bracket or (
                    min(a.eta0, a.rho0) - 0.05, max(a.eta1, a.rho1) + 0.05)
                tables.append(
                    whittle_table(a, sim_cfg.beta, grid=cfg.sim_index_grid,
                                  tol=tol, bracket=bracket, method="scan"))
            policies.append(WhittlePolicy(tables))
        elif name == "myopic":
            policies.append(MyopicPolicy())
        else:
            policies.append(RandomPolicy())
    stats = monte_carlo(sim_cfg, policies)
    csv = out / "simulation.csv"
    stats.to_csv(csv)
    print(f"wrote {csv}")
    files = {"rewards": csv.name}
    if not args.no_plot:
        from . import plots

        fig = plots.plot_sim_stats(stats, out / "simulation.png")
        print(f"wrote {fig}")
        files["figure"] = Path(fig).name
    summary = {
        "command": "simulate",
        "beta": sim_cfg.beta,
        "horizon": sim_cfg.horizon,
        "iterations": sim_cfg.iterations,
        "seed": sim_cfg.seed,
        "policies": list(stats.policies),
        "discounted_means": dict(stats.discounted_means),
        "time_average": {
            name: stats.time_average(name) for name in stats.policies
        },
        "files": files,
    }
    if sim_cfg.horizon > 100:
        summary["time_average_from_slot_100"] = {
            name: stats.time_average(name, start=99) for name in stats.policies
        }
    _write_summary(out, "simulate_summary.yaml", summary)
    return 0


def _cmd_oracle_check(cfg, args):
    _require(cfg, "oracle-check", "arm", "beta", "oracle_horizon")
    out = _outdir(args)
    grid_n, tol = _resolved_grid(cfg, args), _resolved_tol(cfg, args)
    params, beta = cfg.arm, cfg.beta
    pis = np.linspace(0.0, 1.0, cfg.oracle_points)
    table = solve(params, params.eta2, beta, grid=grid_n, tol=tol)
    exact = finite_horizon_oracle(params, params.eta2, beta, pis,
                                  cfg.oracle_horizon)
    approx = table.eval(pis)
    errors = np.abs(approx - exact)
    if cfg.oracle_tolerance is not None:
        bound = cfg.oracle_tolerance
    else:
        try:
            bound = oracle_error_bound(params, params.eta2, beta,
                                       cfg.oracle_horizon, table.grid.spacing)
        except ValueError as exc:
            raise ValidationError(
                f"oracle.tolerance required: {exc}"
            ) from exc
    csv = out / "oracle_check.csv"
    with open(csv, "w", encoding="utf-8") as fh:
        fh.write("pi,v_grid,v_oracle,abs_error\n")
        for p, a, e, d in zip(pis, approx, exact, errors):
            fh.write(f"{p:.17g},{a:.17g},{e:.17g},{d:.17g}\n")
    print(f"wrote {csv}")
    passed = bool(errors.max() <= bound)
    _write_summary(out, "oracle_check_summary.yaml", {
        "command": "oracle-check",
        "beta": beta,
        "eta2": params.eta2,
        "horizon": cfg.oracle_horizon,
        "points": cfg.oracle_points,
        "tolerance": bound,
        "max_abs_error": float(errors.max()),
        "passed": passed,
        "files": {"errors": csv.name},
    })
    if not passed:
        print(
            f"oracle-check FAILED: max error {errors.max():.3e} > {bound:.3e}",
            file=sys.stderr,
        )
        return 4
    print(f"oracle-check passed: max error {errors.max():.3e} <= {bound:.3e}")
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "threshold": _cmd_threshold,
    "whittle": _cmd_whittle,
    "indexability": _cmd_indexability,
    "simulate": _cmd_simulate,
    "oracle-check": _cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML config path")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="override the simulation seed")
    common.add_argument("--grid", type=int, default=None,
                        help="override the belief grid size")
    common.add_argument("--tol", type=float, default=None,
                        help="override the value-iteration tolerance")
    common.add_argument("--no-plot", action="store_true",
                        help="skip PNG figure output")
    parser = argparse.ArgumentParser(
        prog="hmbandit",
        description="Hidden-state bandit arm: solve, index, and simulate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common],
                   help="check a config file and exit")
    sub.add_parser("solve", parents=[common],
                   help="value iteration at one subsidy")
    sub.add_parser("threshold", parents=[common],
                   help="threshold policy at one subsidy or over a sweep")
    sub.add_parser("whittle", parents=[common],
                   help="index table over the belief grid")
    sub.add_parser("indexability", parents=[common],
                   help="set-inclusion indexability over a subsidy sweep")
    sub.add_parser("simulate", parents=[common],
                   help="multi-arm Monte-Carlo policy comparison")
    sub.add_parser("oracle-check", parents=[common],
                   help="grid solver vs exact finite-horizon values")
    return parser


def dispatch(args) -> int:
    """Run one parsed command; map failures onto the exit-code contract."""
    try:
        cfg = parse_config(args.config)
        return _HANDLERS[args.command](cfg, args)
    except (ParseError, ValidationError, OutOfRange, OrderViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NoConvergence, IterationBudgetExceeded, TooCoarse, HorizonTooLarge,
            NonTerminatingTau, NoCrossingInBracket, DegenerateObservation,
            UnsupportedOrdering, MissingIndexTable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
