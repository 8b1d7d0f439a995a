"""Objective: Monte-Carlo-averaged percentage error against the target series.

One evaluation decodes a genome into a parameter schedule, runs a number
of independent simulation replicates (fresh initial opinions and fresh
interaction draws per replicate), scores each replicate's concern series
with MAPE against the observed series, and averages. Replicate streams
are keyed to (master seed, genome tag, replicate index), so re-evaluating
the same genome with the same master seed is bit-identical, and distinct
genomes get independent draws.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import dynamics, graph, survey
from .rng import derive_rng, genome_tag

if TYPE_CHECKING:
    from .calibrate import CalibrationProblem


@dataclass(frozen=True)
class FitnessValue:
    """Aggregate and per-component scores for one genome evaluation."""

    mean_mape: float
    per_replicate: np.ndarray      # MAPE per Monte Carlo replicate
    per_period_error: np.ndarray   # mean |c-h|/h * 100 per period, NaN if missing
    mean_concern: np.ndarray       # simulated concern per period, replicate mean


def mape(simulated: np.ndarray, targets: survey.TargetSeries, *,
         strict_denominator: bool = False) -> float:
    """Mean absolute percentage error over the periods with observed data.

    Computes 100 * sum(|c - h| / h) over present periods, divided by the
    number of present periods; missing targets are skipped entirely. With
    `strict_denominator` the divisor is the full period count instead,
    reproducing the textbook formula even when months are missing.
    """
    simulated = np.asarray(simulated, dtype=np.float64)
    if len(simulated) != len(targets):
        raise ValueError(
            f"series length {len(simulated)} != target length {len(targets)}"
        )
    present = targets.present
    h = targets.values[present]
    c = simulated[present]
    denom = len(targets) if strict_denominator else int(present.sum())
    return float(np.sum(100.0 * np.abs(c - h) / h) / denom)


def _replicate_run(problem: "CalibrationProblem", schedule, master_seed: int,
                   tag: int, r: int) -> np.ndarray:
    """Simulated concern series for replicate r of one evaluation."""
    rng = derive_rng(master_seed, tag, r)
    if problem.per_replicate_network:
        net_seed = np.random.SeedSequence(entropy=(master_seed, tag, r, 2))
        net = graph.generate_ba(problem.network.n, problem.network_m, net_seed)
    else:
        net = problem.network
    x0 = survey.initialize_opinions(problem.dataset, problem.c_th, rng)
    return dynamics.simulate_horizon(problem.model, schedule, x0, net,
                                     problem.c_th, rng)


def evaluate(genome: np.ndarray, problem: "CalibrationProblem",
             replicates: int | None = None, master_seed: int = 0, *,
             threads: int = 1) -> FitnessValue:
    """Score one genome: mean MAPE over independent simulation replicates.

    Replicates may run on a thread pool; results are reduced in replicate
    order, so the outcome does not depend on `threads`.
    """
    genome = np.asarray(genome, dtype=np.float64)
    schedule = problem.decode(genome)
    n_rep = problem.replicates if replicates is None else int(replicates)
    if n_rep < 1:
        raise ValueError(f"need replicates >= 1, got {n_rep}")
    tag = genome_tag(genome)

    def one(r: int) -> np.ndarray:
        return _replicate_run(problem, schedule, master_seed, tag, r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            concerns = list(pool.map(one, range(n_rep)))
    else:
        concerns = [one(r) for r in range(n_rep)]

    concerns = np.vstack(concerns)
    per_rep = np.array([
        mape(concerns[r], problem.targets,
             strict_denominator=problem.strict_denominator)
        for r in range(n_rep)
    ])

    h = problem.targets.values
    with np.errstate(invalid="ignore"):
        per_period = np.mean(100.0 * np.abs(concerns - h) / h, axis=0)

    return FitnessValue(
        mean_mape=float(per_rep.mean()),
        per_replicate=per_rep,
        per_period_error=per_period,
        mean_concern=concerns.mean(axis=0),
    )
