"""Binding of data, model, objective, and optimizer into one task.

A calibration task owns a network, an initial survey, a target series,
and the bounds implied by the chosen model. Genomes are flat parameter
vectors laid out period-major (all of one period's parameters adjacent);
they decode into parameter schedules and are scored by the Monte-Carlo
objective. Results persist as a directory of delimited files plus a
config echo sufficient to replay the run.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evolve, fitness
from .dynamics import (ATBCRParams, DEFAULT_STEPS_PER_PERIOD, DWParams, FJParams,
                       MAX_THETA_EPS_GAP, MIN_THETA_EPS_GAP, MODELS, MODEL_ATBCR,
                       MODEL_DW, MODEL_FJ, PARAM_NAMES, ParameterSchedule)
from .errors import ParseError
from .evolve import Bounds, ConvergenceLog, OptimizerConfig
from .graph import SocialNetwork
from .rng import subseed
from .survey import SurveyDataset, TargetSeries

# Numeric floor standing in for the open lower end of the (0, 0.5]
# convergence-speed range; at this value the rule is effectively off.
MU_FLOOR = 1e-6

PARAMS_PER_MODEL = {MODEL_FJ: 1, MODEL_DW: 2, MODEL_ATBCR: 3}

_PARAM_BOUNDS = {
    MODEL_FJ: ((0.1, 1.0),),
    MODEL_DW: ((MU_FLOOR, 0.5), (0.0, 0.5)),
    MODEL_ATBCR: ((MU_FLOOR, 0.5), (0.0, 0.5), (0.5, 1.0)),
}


def bounds_for_model(model: str, n_periods: int) -> Bounds:
    """Search box (and theta-eps gap constraints) for one model."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    per = _PARAM_BOUNDS[model]
    k = len(per)
    lo = np.array([per[d][0] for _ in range(n_periods) for d in range(k)])
    hi = np.array([per[d][1] for _ in range(n_periods) for d in range(k)])
    constraints = ()
    if model == MODEL_ATBCR:
        constraints = tuple(
            (3 * p + 1, 3 * p + 2, MIN_THETA_EPS_GAP, MAX_THETA_EPS_GAP)
            for p in range(n_periods)
        )
    return Bounds(lo=lo, hi=hi, pair_constraints=constraints)


def decode(genome: np.ndarray, model: str, n_periods: int,
           steps_per_period: int = DEFAULT_STEPS_PER_PERIOD) -> ParameterSchedule:
    """Period-major genome -> schedule; length must be n_periods * k."""
    genome = np.asarray(genome, dtype=np.float64)
    k = PARAMS_PER_MODEL[model]
    if genome.shape != (n_periods * k,):
        raise ValueError(
            f"genome for {model} over {n_periods} periods must have"
            f" {n_periods * k} values, got {genome.shape}"
        )
    cls = {MODEL_FJ: FJParams, MODEL_DW: DWParams, MODEL_ATBCR: ATBCRParams}[model]
    entries = tuple(cls(*genome[p * k:(p + 1) * k]) for p in range(n_periods))
    return ParameterSchedule(entries=entries, steps_per_period=steps_per_period)


def encode(schedule: ParameterSchedule) -> np.ndarray:
    """Inverse of :func:`decode`."""
    names = PARAM_NAMES[schedule.model]
    return np.array([getattr(e, name) for e in schedule.entries for name in names])


def load_params(path, model: str,
                steps_per_period: int = DEFAULT_STEPS_PER_PERIOD
                ) -> tuple[tuple[str, ...], ParameterSchedule]:
    """Read a 'period,param,value' table back into a schedule.

    Periods are ordered by first appearance; every period must carry
    exactly the model's parameter set.
    """
    names = PARAM_NAMES[model]
    labels: list[str] = []
    values: dict[str, dict[str, float]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["period", "param", "value"]:
            raise ParseError(f"{path}: expected header 'period,param,value'")
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: line {reader.line_num}: expected 3 fields")
            period, name, raw = row[0].strip(), row[1].strip(), row[2].strip()
            if name not in names:
                raise ParseError(
                    f"{path}: line {reader.line_num}: param {name!r} not in"
                    f" {model} parameter set {names}"
                )
            if period not in values:
                labels.append(period)
                values[period] = {}
            try:
                values[period][name] = float(raw)
            except ValueError:
                raise ParseError(
                    f"{path}: line {reader.line_num}: value {raw!r} is not a number"
                ) from None
    if not labels:
        raise ParseError(f"{path}: no parameter rows")
    genome = []
    for period in labels:
        missing = [n for n in names if n not in values[period]]
        if missing:
            raise ParseError(f"{path}: period {period!r} missing {missing}")
        genome.extend(values[period][n] for n in names)
    schedule = decode(np.array(genome), model, len(labels), steps_per_period)
    return tuple(labels), schedule


@dataclass(frozen=True)
class CalibrationProblem:
    """Everything an objective evaluation needs, fixed for one task."""

    model: str
    network: SocialNetwork
    dataset: SurveyDataset
    c_th: float
    targets: TargetSeries
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD
    replicates: int = 20
    strict_denominator: bool = False
    per_replicate_network: bool = False
    network_m: int = 3

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if not 0.0 < self.c_th < 1.0:
            raise ValueError(f"concern threshold must lie in (0, 1), got {self.c_th}")
        if self.network.n != self.dataset.n:
            raise ValueError(
                f"network has {self.network.n} nodes but survey has"
                f" {self.dataset.n} respondents (agents map 1:1)"
            )
        if self.replicates < 1:
            raise ValueError("need at least one replicate")

    @property
    def n_periods(self) -> int:
        return len(self.targets)

    @property
    def genome_dim(self) -> int:
        return self.n_periods * PARAMS_PER_MODEL[self.model]

    @property
    def bounds(self) -> Bounds:
        return bounds_for_model(self.model, self.n_periods)

    def decode(self, genome: np.ndarray) -> ParameterSchedule:
        return decode(genome, self.model, self.n_periods, self.steps_per_period)


@dataclass
class CalibrationResult:
    """Best solution found plus everything needed to reproduce it."""

    model: str
    period_labels: tuple[str, ...]
    best_genome: np.ndarray
    schedule: ParameterSchedule
    search_fitness: float             # best objective value seen during search
    reeval: fitness.FitnessValue      # fresh-replicate re-evaluation of the best
    concern: np.ndarray               # simulated concern of the best, replicate mean
    log: ConvergenceLog
    seeds: dict
    config_echo: dict

    @property
    def best_fitness(self) -> float:
        return self.reeval.mean_mape


def run_calibration(problem: CalibrationProblem, config: OptimizerConfig,
                    master_seed: int, *, threads: int = 1,
                    config_echo: dict | None = None) -> CalibrationResult:
    """Optimize the schedule, then re-score the winner on fresh draws.

    The master seed splits into three documented sub-seeds: the optimizer
    stream, the in-search evaluation seed, and the re-evaluation seed.
    Re-evaluation uses fresh replicate streams so the reported fitness is
    not inflated by draws the search happened to exploit.
    """
    opt_seed = subseed(master_seed, 1)
    search_seed = subseed(master_seed, 2)
    reeval_seed = subseed(master_seed, 3)

    def objective(genome: np.ndarray) -> float:
        return fitness.evaluate(genome, problem, master_seed=search_seed,
                                threads=threads).mean_mape

    best, best_fit, log = evolve.run(objective, problem.bounds, config, opt_seed)
    reeval = fitness.evaluate(best, problem, master_seed=reeval_seed,
                              threads=threads)

    seeds = {
        "master": int(master_seed),
        "optimizer": opt_seed,
        "search": search_seed,
        "reevaluation": reeval_seed,
    }
    echo = dict(config_echo) if config_echo is not None else {
        "model": problem.model,
        "c_th": problem.c_th,
        "steps_per_period": problem.steps_per_period,
        "replicates": problem.replicates,
        "algorithm": config.algorithm,
        "population": config.population_size,
        "budget": config.budget,
    }
    echo["seeds"] = seeds

    return CalibrationResult(
        model=problem.model,
        period_labels=problem.targets.labels,
        best_genome=best,
        schedule=problem.decode(best),
        search_fitness=float(best_fit),
        reeval=reeval,
        concern=reeval.mean_concern,
        log=log,
        seeds=seeds,
        config_echo=echo,
    )


def save_result(result: CalibrationResult, outdir,
                targets: TargetSeries | None = None) -> Path:
    """Write the four-file result directory and return its path.

    Files: best_params.csv (period,param,value), concern.csv
    (period,simulated,target), convergence.csv, config.json. Floats are
    written with repr so the params table replays without precision loss.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    names = PARAM_NAMES[result.model]
    with open(outdir / "best_params.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "param", "value"])
        for label, entry in zip(result.period_labels, result.schedule.entries):
            for name in names:
                writer.writerow([label, name, repr(float(getattr(entry, name)))])

    with open(outdir / "concern.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "simulated", "target"])
        for p, label in enumerate(result.period_labels):
            target = ""
            if targets is not None and not np.isnan(targets.values[p]):
                target = repr(float(targets.values[p]))
            writer.writerow([label, repr(float(result.concern[p])), target])

    result.log.save(outdir / "convergence.csv")

    with open(outdir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(result.config_echo, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return outdir
