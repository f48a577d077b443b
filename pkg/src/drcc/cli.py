"""Command-line front end.

Subcommands:
  schedules   emit per-N schedule coefficients for chosen methods
  constants   emit the distribution-family safety constants over an alpha grid
  solve       one data-driven stake solve from a sample CSV
  bench       Monte Carlo benchmark of estimation methods on the wager table
  sequential  streaming re-solve loop with per-step timings

Every command accepts --config FILE (JSON whose keys mirror the command's
flags; explicit flags win), writes delimited output under --out, and
renders a PNG next to it unless --no-plot is given.  Exit codes: 0 on
success, 2 for usage or configuration errors, 3 when the embedded solver
fails outside the benchmark's flagged-trial path.
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import betting, conic, moments, plots, schedules, supports, surrogate

GLOBAL_DEFAULTS = {
    "seed": 2026,
    "out": ".",
    "full_scale": False,
    "no_plot": False,
}

COMMAND_DEFAULTS = {
    "schedules": {
        "alpha": 0.1,
        "methods": "cov-auto",
        "n_grid": "10:100000:30log",
    },
    "constants": {
        "alpha_grid": "0.01:0.99:99",
    },
    "solve": {
        "samples": None,
        "support": None,
        "method": "robust",
        "alpha": 0.1,
        "beta": 0.1,
        "mode": "loss-beta",
    },
    "bench": {
        "methods": "oracle,plugin,robust",
        "n_grid": "50,100,200,1000,10000",
        "trials": 200,
        "test_size": 100000,
        "workers": 1,
        "alpha": 0.2,
        "beta": 0.1,
        "mode": "loss-beta",
    },
    "sequential": {
        "method": "robust",
        "steps": 100,
        "samples_per_step": 100,
        "alpha": 0.2,
        "beta": 0.1,
        "mode": "loss-beta",
    },
}

FULL_SCALE_BENCH = {"trials": 1000, "test_size": 1_000_000}


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation: flags merged over config file over defaults."""

    command: str
    seed: int
    out_dir: Path
    full_scale: bool
    render_plots: bool
    options: dict


def _float(value) -> float:
    return float(value)


def _int(value) -> int:
    return int(value)


def _tokens(value):
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    items = [part.strip() for part in str(value).split(",")]
    if any(not part for part in items):
        raise ValueError(f"empty entry in list {value!r}")
    return items


def _int_list(value):
    return [int(v) for v in _tokens(value)]


def _count_grid(value):
    """Grid spec LO:HI:COUNT with optional trailing `log`, as integers."""
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    text = str(value).strip()
    geometric = text.endswith("log")
    if geometric:
        text = text[:-3]
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid spec must look like LO:HI:COUNT, got {value!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1 or lo <= 0 or hi < lo:
        raise ValueError(f"bad grid range {value!r}")
    points = np.geomspace(lo, hi, count) if geometric else np.linspace(lo, hi, count)
    return [int(round(v)) for v in points]


def _alpha_grid(value):
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    text = str(value).strip()
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid spec must look like LO:HI:COUNT, got {value!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1 or hi < lo:
        raise ValueError(f"bad grid range {value!r}")
    return [float(v) for v in np.linspace(lo, hi, count)]


def _mode(value):
    token = str(value)
    if token == "loss-beta":
        return betting.LOSS_BETA
    if token == "gain-beta":
        return betting.GAIN_BETA
    raise ValueError(
        f"threshold mode must be loss-beta or gain-beta, got {token!r}"
    )


def _path(value):
    return None if value is None else Path(str(value))


COMMAND_PARSERS = {
    "schedules": {"alpha": _float, "methods": _tokens, "n_grid": _count_grid},
    "constants": {"alpha_grid": _alpha_grid},
    "solve": {"samples": _path, "support": _path, "method": str,
              "alpha": _float, "beta": _float, "mode": _mode},
    "bench": {"methods": _tokens, "n_grid": _int_list, "trials": _int,
              "test_size": _int, "workers": _int, "alpha": _float,
              "beta": _float, "mode": _mode},
    "sequential": {"method": str, "steps": _int, "samples_per_step": _int,
                   "alpha": _float, "beta": _float, "mode": _mode},
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", default=None, help="master seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--config", default=None,
                        help="JSON file of defaults; flags win")
    common.add_argument("--full-scale", action="store_true", default=None,
                        dest="full_scale",
                        help="1000-trial, million-outcome benchmark sizes")
    common.add_argument("--no-plot", action="store_true", default=None,
                        dest="no_plot", help="skip PNG rendering")

    parser = argparse.ArgumentParser(
        prog="drcc",
        description="data-driven distributionally robust chance constraints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedules", parents=[common],
                       help="schedule coefficients over an N grid")
    p.add_argument("--alpha", default=None)
    p.add_argument("--methods", default=None,
                   help="comma list: cov-auto, cov:P, mean-auto, mean:P")
    p.add_argument("--n-grid", dest="n_grid", default=None,
                   help="LO:HI:COUNT or LO:HI:COUNTlog")

    p = sub.add_parser("constants", parents=[common],
                       help="safety constants over an alpha grid")
    p.add_argument("--alpha-grid", dest="alpha_grid", default=None,
                   help="LO:HI:COUNT")

    p = sub.add_parser("solve", parents=[common],
                       help="stake solve from a sample CSV")
    p.add_argument("--samples", default=None, help="CSV of outcome rows")
    p.add_argument("--support", default=None,
                   help="JSON support description (box/polytope/ellipsoid)")
    p.add_argument("--method", default=None,
                   help="plugin, robust, robust:P, or fixed:DELTA")
    p.add_argument("--alpha", default=None)
    p.add_argument("--beta", default=None)
    p.add_argument("--mode", default=None, help="loss-beta or gain-beta")

    p = sub.add_parser("bench", parents=[common],
                       help="Monte Carlo benchmark on the wager table")
    p.add_argument("--methods", default=None,
                   help="comma list: oracle, plugin, robust, robust:P, fixed:D")
    p.add_argument("--n-grid", dest="n_grid", default=None,
                   help="comma list of sample counts")
    p.add_argument("--trials", default=None)
    p.add_argument("--test-size", dest="test_size", default=None)
    p.add_argument("--workers", default=None)
    p.add_argument("--alpha", default=None)
    p.add_argument("--beta", default=None)
    p.add_argument("--mode", default=None)

    p = sub.add_parser("sequential", parents=[common],
                       help="streaming re-solve loop with step timings")
    p.add_argument("--method", default=None)
    p.add_argument("--steps", default=None)
    p.add_argument("--samples-per-step", dest="samples_per_step", default=None)
    p.add_argument("--alpha", default=None)
    p.add_argument("--beta", default=None)
    p.add_argument("--mode", default=None)

    return parser


def _load_config(path):
    if path is None:
        return {}
    file_path = Path(path)
    if not file_path.is_file():
        raise ValueError(f"config file not found: {file_path}")
    try:
        data = json.loads(file_path.read_text())
    except json.JSONDecodeError as err:
        raise ValueError(f"config file is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _resolve(args) -> RunConfig:
    command = args.command
    parsers = COMMAND_PARSERS[command]
    config = _load_config(args.config)
    allowed = set(parsers) | set(GLOBAL_DEFAULTS)
    unknown = set(config) - allowed
    if unknown:
        raise ValueError(
            f"config keys not recognized for {command}: {sorted(unknown)}"
        )

    def pick(key, default):
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key, default)
        return value

    defaults = dict(COMMAND_DEFAULTS[command])
    full_scale = bool(pick("full_scale", GLOBAL_DEFAULTS["full_scale"]))
    if full_scale and command == "bench":
        defaults.update(FULL_SCALE_BENCH)

    options = {}
    for key, convert in parsers.items():
        value = pick(key, defaults[key])
        options[key] = None if value is None else convert(value)

    out_dir = Path(str(pick("out", GLOBAL_DEFAULTS["out"])))
    out_dir.mkdir(parents=True, exist_ok=True)
    return RunConfig(
        command=command,
        seed=int(pick("seed", GLOBAL_DEFAULTS["seed"])),
        out_dir=out_dir,
        full_scale=full_scale,
        render_plots=not bool(pick("no_plot", GLOBAL_DEFAULTS["no_plot"])),
        options=options,
    )


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])


def _schedule_fn(token: str):
    if token == "cov-auto":
        return lambda n, alpha: schedules.schedule_cov_auto(n, alpha)
    if token.startswith("cov:"):
        p = float(token.split(":", 1)[1])
        return lambda n, alpha: schedules.schedule_cov(n, alpha, p)
    if token == "mean-auto":
        return lambda n, alpha: schedules.schedule_mean_auto(n, alpha)
    if token.startswith("mean:"):
        p = float(token.split(":", 1)[1])
        return lambda n, alpha: schedules.schedule_mean(n, alpha, p)
    raise ValueError(f"unknown schedule method {token!r}")


def cmd_schedules(run: RunConfig) -> int:
    alpha = run.options["alpha"]
    records = []
    for token in run.options["methods"]:
        fn = _schedule_fn(token)
        for n in run.options["n_grid"]:
            res = fn(n, alpha)
            records.append({
                "method": token,
                "n": n,
                "feasible": res.feasible,
                "kappa": res.kappa,
                "phi": res.phi,
                "nu": res.nu,
            })
    csv_path = run.out_dir / "schedules.csv"
    _write_csv(
        csv_path,
        ("method", "N", "feasible", "kappa", "phi", "nu", "kappa_sqrt_phi"),
        (
            (r["method"], r["n"], r["feasible"], r["kappa"], r["phi"], r["nu"],
             None if r["kappa"] is None or r["phi"] is None
             else r["kappa"] * r["phi"] ** 0.5)
            for r in records
        ),
    )
    written = [csv_path]
    if run.render_plots:
        written.append(plots.render_schedules(records, run.out_dir / "schedules.png"))
    print(f"wrote {', '.join(str(p) for p in written)} ({len(records)} rows)")
    return 0


def cmd_constants(run: RunConfig) -> int:
    records = []
    for alpha in run.options["alpha_grid"]:
        consts = schedules.comparison_constants(alpha)
        records.append({
            "alpha": alpha,
            "general": consts.general,
            "independent": consts.independent,
            "gaussian": consts.gaussian,
        })
    csv_path = run.out_dir / "constants.csv"
    _write_csv(
        csv_path,
        ("alpha", "general", "independent", "gaussian"),
        ((r["alpha"], r["general"], r["independent"], r["gaussian"])
         for r in records),
    )
    written = [csv_path]
    if run.render_plots:
        written.append(plots.render_constants(records, run.out_dir / "constants.png"))
    print(f"wrote {', '.join(str(p) for p in written)} ({len(records)} rows)")
    return 0


def _peek_columns(path: Path) -> int:
    with open(path, newline="") as handle:
        row = next(csv.reader(handle), None)
    if not row:
        raise ValueError(f"sample file {path} is empty")
    return len(row)


def _solve_blocks(method, state, support, spec):
    if method == "plugin":
        return surrogate.build_plugin(state, spec)
    if method in ("robust", "fixed") or method.startswith(("robust:", "fixed:")):
        if support is None:
            raise ValueError(f"method {method!r} requires --support")
    if method == "robust":
        sched = schedules.schedule_cov_auto(state.count, spec.alpha)
        return surrogate.build_robust(state, support, spec, sched)
    if method.startswith("robust:"):
        p = float(method.split(":", 1)[1])
        sched = schedules.schedule_cov(state.count, spec.alpha, p)
        return surrogate.build_robust(state, support, spec, sched)
    if method.startswith("fixed:"):
        delta = float(method.split(":", 1)[1])
        return surrogate.build_fixed_confidence(state, support, spec, delta)
    raise ValueError(f"unknown solve method {method!r}")


def cmd_solve(run: RunConfig) -> int:
    opts = run.options
    samples_path = opts["samples"]
    if samples_path is None:
        raise ValueError("solve requires --samples FILE")
    if not samples_path.is_file():
        raise ValueError(f"sample file not found: {samples_path}")
    dim = _peek_columns(samples_path)
    state = moments.MomentState(dim)
    moments.ingest_csv(state, samples_path)

    support = None
    if opts["support"] is not None:
        if not opts["support"].is_file():
            raise ValueError(f"support file not found: {opts['support']}")
        support = supports.from_config(json.loads(opts["support"].read_text()))

    offset = -opts["beta"] if opts["mode"] == betting.LOSS_BETA else opts["beta"]
    spec = surrogate.ChanceSpec(-np.eye(dim), offset, opts["alpha"])
    blocks = _solve_blocks(opts["method"], state, support, spec)
    mean = state.extract().mean
    prog = surrogate.assemble_program(
        blocks, mean, sense="max",
        extra_rows=[(np.ones(dim), "<=", 1.0)],
        lower_bounds=np.zeros(dim),
    )
    sol = conic.solve(prog)
    stake = sol.x[:dim] if sol.status == conic.OPTIMAL else np.zeros(dim)
    payload = {
        "method": opts["method"],
        "count": state.count,
        "alpha": opts["alpha"],
        "beta": opts["beta"],
        "threshold_mode": opts["mode"],
        "status": sol.status,
        "objective": float(sol.objective) if sol.status == conic.OPTIMAL else None,
        "stake": [float(v) for v in stake],
    }
    out_path = run.out_dir / "solution.json"
    out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"{sol.status}: wrote {out_path}")
    if sol.status in (conic.ITERATION_LIMIT, conic.NUMERICAL_FAILURE):
        return 3
    return 0


def cmd_bench(run: RunConfig) -> int:
    opts = run.options
    cfg = betting.BettingConfig(alpha=opts["alpha"], beta=opts["beta"],
                                threshold_mode=opts["mode"])
    results = betting.run_experiment(
        cfg, opts["methods"], opts["n_grid"], opts["trials"],
        test_size=opts["test_size"], master_seed=run.seed,
        workers=opts["workers"],
    )
    rows = betting.aggregate(results)
    trials_path = run.out_dir / "trials.csv"
    agg_path = run.out_dir / "aggregate.csv"
    betting.write_trials_csv(results, trials_path)
    betting.write_aggregate_csv(rows, agg_path)
    written = [trials_path, agg_path]
    if run.render_plots:
        written.append(plots.render_bench(rows, cfg.alpha,
                                          run.out_dir / "bench.png"))
    flagged = sum(1 for r in results if r.status != conic.OPTIMAL)
    print(f"wrote {', '.join(str(p) for p in written)} "
          f"({len(results)} trials, {flagged} flagged)")
    return 0


def cmd_sequential(run: RunConfig) -> int:
    opts = run.options
    cfg = betting.BettingConfig(alpha=opts["alpha"], beta=opts["beta"],
                                threshold_mode=opts["mode"])
    rows = betting.run_sequential(
        cfg, opts["method"], opts["steps"], opts["samples_per_step"],
        master_seed=run.seed,
    )
    csv_path = run.out_dir / "sequential.csv"
    betting.write_sequential_csv(rows, csv_path)
    written = [csv_path]
    if run.render_plots:
        written.append(plots.render_sequential(rows,
                                               run.out_dir / "sequential.png"))
    flagged = sum(1 for r in rows if r.status != conic.OPTIMAL)
    print(f"wrote {', '.join(str(p) for p in written)} "
          f"({len(rows)} steps, {flagged} flagged)")
    return 0


COMMANDS = {
    "schedules": cmd_schedules,
    "constants": cmd_constants,
    "solve": cmd_solve,
    "bench": cmd_bench,
    "sequential": cmd_sequential,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        run = _resolve(args)
        return COMMANDS[run.command](run)
    except surrogate.NotEnoughSamples as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
