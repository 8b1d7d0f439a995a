"""Command-line front end.

Subcommands:

* ``synth``     generate a synthetic survey snapshot and target series;
* ``simulate``  run a fixed parameter schedule over replicate streams;
* ``calibrate`` run one calibration task, or a model x c_th x algorithm
  grid of tasks, writing one result directory each;
* ``report``    render figures for the CSVs in a result directory.

All randomness flows from a single seed (``--seed`` flag, else the
config's ``seed`` key, else OS entropy); the seed actually used is
recorded in the config echo written next to the outputs, so any run can
be replayed byte for byte. Exit codes: 0 success, 1 runtime failure,
2 configuration or validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import calibrate as cal
from . import dynamics, graph, report, survey
from .errors import ConfigError, ParseError
from .evolve import ALGORITHMS, OptimizerConfig
from .rng import derive_rng, fresh_seed, genome_tag, subseed

CONFIG_SCHEMA_ID = "odcal-config/1"

_MODEL = {"type": "string", "enum": list(dynamics.MODELS)}
_ALGORITHM = {"type": "string", "enum": list(ALGORITHMS)}
_CTH = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "model", "c_th", "survey"],
    "properties": {
        "schema": {"const": CONFIG_SCHEMA_ID},
        "model": {"oneOf": [_MODEL, {"type": "array", "items": _MODEL,
                                     "minItems": 1}]},
        "c_th": {"oneOf": [_CTH, {"type": "array", "items": _CTH,
                                  "minItems": 1}]},
        "algorithm": {"oneOf": [_ALGORITHM, {"type": "array", "items": _ALGORITHM,
                                             "minItems": 1}]},
        "survey": {"type": "string"},
        "targets": {"type": "string"},
        "network": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "edgelist": {"type": "string"},
                "per_replicate": {"type": "boolean"},
            },
        },
        "steps_per_period": {"type": "integer", "minimum": 0},
        "replicates": {"type": "integer", "minimum": 1},
        "population": {"type": "integer", "minimum": 4},
        "budget": {"type": "integer", "minimum": 0},
        "strict_mape_denominator": {"type": "boolean"},
        "fj_daily_sweeps": {"type": "boolean"},
        "hyperparameters": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "de_cr": {"type": "number"},
                "de_f": {"type": "number"},
                "shade_h": {"type": "integer", "minimum": 1},
                "lshade_h": {"type": "integer", "minimum": 1},
                "lshade_min_population": {"type": "integer", "minimum": 4},
                "pso_c1": {"type": "number"},
                "pso_c2": {"type": "number"},
                "pso_w": {"type": "number"},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
        # written into config echoes so a result's config.json replays as-is
        "command": {"type": "string"},
        "params": {"type": "string"},
        "seeds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "master": {"type": "integer"},
                "optimizer": {"type": "integer"},
                "search": {"type": "integer"},
                "reevaluation": {"type": "integer"},
            },
        },
    },
}


def load_config(path) -> dict:
    """Parse and schema-validate a run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}: {exc.message}") from None
    # Resolve data paths against the config's own directory so the file
    # can live next to its data; the echo stores the resolved paths.
    base = path.parent
    for key in ("survey", "targets", "out"):
        if key in cfg:
            cfg[key] = str((base / cfg[key]).resolve())
    if "edgelist" in cfg.get("network", {}):
        cfg["network"]["edgelist"] = str((base / cfg["network"]["edgelist"]).resolve())
    return cfg


def _scalars(cfg: dict, key: str, grid: bool, default=None) -> list:
    """Resolve a config value that is a scalar, or a list under --grid."""
    value = cfg.get(key, default)
    if value is None:
        raise ConfigError(f"config key {key!r} is required")
    if isinstance(value, list):
        if not grid:
            raise ConfigError(f"{key!r} is a list; use --grid to enumerate it")
        return value
    return [value]


def _resolve_seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in cfg:
        return int(cfg["seed"])
    return fresh_seed()


def _resolve_out(args, cfg: dict) -> Path:
    out = args.out or cfg.get("out")
    if not out:
        raise ConfigError("no output directory: pass --out or set 'out' in the config")
    return Path(out)


def _resolve_threads(args, cfg: dict) -> int:
    if args.threads is not None:
        return args.threads
    return int(cfg.get("threads", os.cpu_count() or 1))


def _build_network(cfg: dict, dataset: survey.SurveyDataset,
                   run_seed: int) -> graph.SocialNetwork:
    net_cfg = cfg.get("network", {})
    if "edgelist" in net_cfg:
        net = graph.load_edgelist(net_cfg["edgelist"])
        if net.n != dataset.n:
            raise ConfigError(
                f"edge list has {net.n} nodes but survey has {dataset.n} respondents"
            )
        return net
    m = int(net_cfg.get("m", 3))
    net_seed = net_cfg.get("seed")
    if net_seed is None:
        net_seed = subseed(run_seed, 4)
    return graph.generate_ba(dataset.n, m, int(net_seed))


def _optimizer_config(cfg: dict, algorithm: str) -> OptimizerConfig:
    hyper = cfg.get("hyperparameters", {})
    return OptimizerConfig(
        algorithm=algorithm,
        population_size=int(cfg.get("population", 100)),
        budget=int(cfg.get("budget", 30_000)),
        **hyper,
    )


def _echo_config(cfg: dict, **overrides) -> dict:
    echo = dict(cfg)
    echo.update(overrides)
    return echo


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


# --------------------------------------------------------------------------
# synth
# --------------------------------------------------------------------------

def cmd_synth(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else fresh_seed()

    dataset = survey.synth_dataset(args.n, args.p1, args.p2, args.p3, seed)
    with open(outdir / "survey.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["respondent_id", "rank"])
        for i, rank in enumerate(dataset.ranks, start=1):
            writer.writerow([i, int(rank)])

    if args.trend:
        trend = survey.parse_targets(args.trend)
        labels, values = trend.labels, trend.values
    elif args.months:
        # Oscillation around the snapshot's own concern level, clipped to
        # stay a valid proportion.
        c0 = max(dataset.mentioned_fraction(), 0.01)
        labels = tuple(f"m{k:02d}" for k in range(1, args.months + 1))
        values = np.array([
            min(0.95, max(0.005, c0 * (1.0 + 0.5 * math.sin(2.0 * math.pi * k / 6.0))))
            for k in range(1, args.months + 1)
        ])
    else:
        raise ConfigError("synth needs --trend FILE or --months K")

    with open(outdir / "targets.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "proportion"])
        for label, value in zip(labels, values):
            writer.writerow([label, "" if np.isnan(value) else repr(float(value))])

    _write_json(outdir / "synth_config.json", {
        "schema": CONFIG_SCHEMA_ID,
        "command": "synth",
        "n": args.n,
        "proportions": [args.p1, args.p2, args.p3],
        "months": args.months,
        "trend": str(Path(args.trend).resolve()) if args.trend else None,
        "seed": seed,
    })
    print(f"wrote {outdir / 'survey.csv'} ({dataset.n} respondents) and"
          f" {outdir / 'targets.csv'} ({len(labels)} periods), seed {seed}")
    return 0


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def _simulate_replicates(model, schedule, dataset, net, c_th, seed, replicates,
                         threads, snapshot, fj_daily_sweeps):
    """Concern series per replicate; streams keyed like the objective's."""
    tag = genome_tag(cal.encode(schedule))

    def one(r: int):
        rng = derive_rng(seed, tag, r)
        x0 = survey.initialize_opinions(dataset, c_th, rng)
        return dynamics.simulate_horizon(model, schedule, x0, net, c_th, rng,
                                         snapshot=snapshot,
                                         fj_daily_sweeps=fj_daily_sweeps)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(replicates)))
    else:
        results = [one(r) for r in range(replicates)]
    if snapshot:
        return [r[0] for r in results], [r[1] for r in results]
    return results, None


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    model = _scalars(cfg, "model", grid=False)[0]
    c_th = float(_scalars(cfg, "c_th", grid=False)[0])
    seed = _resolve_seed(args, cfg)
    outdir = _resolve_out(args, cfg)
    threads = _resolve_threads(args, cfg)
    steps = int(cfg.get("steps_per_period", dynamics.DEFAULT_STEPS_PER_PERIOD))
    replicates = int(cfg.get("replicates", 20))

    if not Path(args.params).is_file():
        raise ConfigError(f"params file not found: {args.params}")
    labels, schedule = cal.load_params(args.params, model, steps)
    dataset = survey.parse_survey(cfg["survey"])
    net = _build_network(cfg, dataset, seed)

    concerns, snaps = _simulate_replicates(
        model, schedule, dataset, net, c_th, seed, replicates, threads,
        args.snapshots, bool(cfg.get("fj_daily_sweeps", False)))
    concerns = np.vstack(concerns)

    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "concern.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "mean"]
                        + [f"rep_{r + 1}" for r in range(replicates)])
        means = concerns.mean(axis=0)
        for p, label in enumerate(labels):
            writer.writerow([label, repr(float(means[p]))]
                            + [repr(float(concerns[r, p])) for r in range(replicates)])

    if snaps is not None:
        for r, profile_list in enumerate(snaps):
            dynamics.save_snapshots(profile_list,
                                    outdir / f"snapshots_rep{r + 1:02d}.csv",
                                    labels=labels)

    _write_json(outdir / "config.json", _echo_config(
        cfg, seed=seed, out=str(outdir),
        params=str(Path(args.params).resolve()), command="simulate"))
    print(f"wrote {outdir / 'concern.csv'} ({len(labels)} periods,"
          f" {replicates} replicates)")
    return 0


# --------------------------------------------------------------------------
# calibrate
# --------------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    seed = _resolve_seed(args, cfg)
    outdir = _resolve_out(args, cfg)
    threads = _resolve_threads(args, cfg)

    models = _scalars(cfg, "model", args.grid)
    cths = _scalars(cfg, "c_th", args.grid)
    algorithms = _scalars(cfg, "algorithm", args.grid, default="de")
    if "targets" not in cfg:
        raise ConfigError("calibrate needs a 'targets' file in the config")

    dataset = survey.parse_survey(cfg["survey"])
    targets = survey.parse_targets(cfg["targets"])
    net = _build_network(cfg, dataset, seed)

    tasks = [(m, c, a) for m in models for c in cths for a in algorithms]
    multi = len(tasks) > 1
    if multi and not args.grid:
        raise ConfigError("multiple tasks require --grid")

    for idx, (model, c_th, algorithm) in enumerate(tasks):
        problem = cal.CalibrationProblem(
            model=model,
            network=net,
            dataset=dataset,
            c_th=float(c_th),
            targets=targets,
            steps_per_period=int(cfg.get("steps_per_period",
                                         dynamics.DEFAULT_STEPS_PER_PERIOD)),
            replicates=int(cfg.get("replicates", 20)),
            strict_denominator=bool(cfg.get("strict_mape_denominator", False)),
            per_replicate_network=bool(cfg.get("network", {}).get("per_replicate",
                                                                  False)),
            network_m=int(cfg.get("network", {}).get("m", 3)),
        )
        opt = _optimizer_config(cfg, algorithm)
        task_seed = subseed(seed, 100 + idx) if multi else seed
        task_dir = (outdir / f"{model}_cth{c_th}_{algorithm}") if multi else outdir

        echo = _echo_config(cfg, model=model, c_th=c_th, algorithm=algorithm,
                            seed=seed, out=str(task_dir), command="calibrate")
        result = cal.run_calibration(problem, opt, task_seed, threads=threads,
                                     config_echo=echo)
        cal.save_result(result, task_dir, targets=targets)
        print(f"{model} c_th={c_th} {algorithm}: search MAPE"
              f" {result.search_fitness:.4f}, re-evaluated"
              f" {result.best_fitness:.4f} -> {task_dir}")
    return 0


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

def cmd_report(args) -> int:
    written = report.render_report(args.directory)
    for path in written:
        print(f"wrote {path}")
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odcal",
        description="Calibrate period-dynamic opinion models against an"
                    " observed concern series.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic survey and targets")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=3961, help="respondent count")
    p.add_argument("--p1", type=float, default=0.02,
                   help="P(rank 1: most important)")
    p.add_argument("--p2", type=float, default=0.03, help="P(rank 2)")
    p.add_argument("--p3", type=float, default=0.05, help="P(rank 3)")
    p.add_argument("--months", type=int, default=None,
                   help="generate an oscillating trend of K months")
    p.add_argument("--trend", default=None,
                   help="'period,proportion' CSV giving the target trend")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run a fixed schedule over replicates")
    p.add_argument("--config", required=True)
    p.add_argument("--params", required=True,
                   help="'period,param,value' schedule table")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--snapshots", action="store_true",
                   help="also write per-period opinion snapshots")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="run calibration task(s)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--grid", action="store_true",
                   help="enumerate model x c_th x algorithm lists")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("report", help="render figures for a result directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError, FileNotFoundError,
            jsonschema.ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
