"""Population-based optimizers over bounded, pair-constrained genomes.

Four minimizers share one calling convention: ``run(objective, bounds,
config, seed) -> (best genome, best fitness, convergence log)``. All of
them draw every random number from a single sequential PCG64 stream, so a
fixed seed reproduces the full run bit for bit. Infeasible candidate
vectors are repaired (clamping plus pair-gap adjustment) before every
objective call; the objective only ever sees feasible genomes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .rng import make_rng

ALGORITHMS = ("de", "shade", "lshade", "pso")


@dataclass(frozen=True)
class Bounds:
    """Per-dimension box bounds plus optional linear pair constraints.

    A pair constraint (a, b, min_gap, max_gap) requires
    min_gap <= v[b] - v[a] <= max_gap.
    """

    lo: np.ndarray
    hi: np.ndarray
    pair_constraints: tuple[tuple[int, int, float, float], ...] = ()

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigError("bounds must be matching 1-d arrays")
        if (lo > hi).any():
            raise ConfigError("lower bound exceeds upper bound")
        for a, b, mn, mx in self.pair_constraints:
            if not 0 <= a < len(lo) or not 0 <= b < len(lo) or a == b:
                raise ConfigError(f"bad constraint indices ({a}, {b})")
            if mn > mx:
                raise ConfigError(f"min_gap {mn} exceeds max_gap {mx}")
            # Repair must be able to satisfy the gap inside the box.
            if lo[a] + mn > hi[b] or lo[a] + mx < lo[b]:
                raise ConfigError(
                    f"constraint ({a}, {b}, {mn}, {mx}) infeasible within bounds"
                )
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        lo.setflags(write=False)
        hi.setflags(write=False)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, genome: np.ndarray) -> bool:
        g = np.asarray(genome)
        if (g < self.lo).any() or (g > self.hi).any():
            return False
        for a, b, mn, mx in self.pair_constraints:
            gap = g[b] - g[a]
            if gap < mn or gap > mx:
                return False
        return True


def repair(genome: np.ndarray, bounds: Bounds) -> np.ndarray:
    """Project a genome onto the feasible set.

    Clamps every dimension to its box, then fixes each pair gap: a gap
    below min_gap raises v[b] to v[a] + min_gap (lowering v[a] instead
    when v[b] hits its upper bound); a gap above max_gap lowers v[b] to
    v[a] + max_gap. Feasible inputs pass through unchanged. The rounded
    sums are nudged by ulps where needed so the repaired gap satisfies
    the constraint under exact comparison.
    """
    g = np.clip(np.asarray(genome, dtype=np.float64), bounds.lo, bounds.hi)
    for a, b, mn, mx in bounds.pair_constraints:
        gap = g[b] - g[a]
        if gap < mn:
            g[b] = min(g[a] + mn, bounds.hi[b])
            while g[b] - g[a] < mn and g[b] < bounds.hi[b]:
                g[b] = min(np.nextafter(g[b], np.inf), bounds.hi[b])
            if g[b] - g[a] < mn:
                g[a] = g[b] - mn
                while g[b] - g[a] < mn:
                    g[a] = np.nextafter(g[a], -np.inf)
        elif gap > mx:
            g[b] = g[a] + mx
            while g[b] - g[a] > mx:
                g[b] = np.nextafter(g[b], -np.inf)
    return g


@dataclass(frozen=True)
class OptimizerConfig:
    """Algorithm choice, budget, and hyperparameters.

    Budget counts objective calls; one call (with all its internal
    simulation replicates) is one evaluation.
    """

    algorithm: str = "de"
    population_size: int = 100
    budget: int = 30_000
    de_cr: float = 0.5
    de_f: float = 0.5
    shade_h: int = 100
    lshade_h: int = 6
    lshade_min_population: int = 4
    pso_c1: float = 1.49618
    pso_c2: float = 1.49618
    pso_w: float = 0.7298

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.population_size < 4:
            raise ConfigError("population size must be >= 4")
        if self.budget < self.population_size:
            raise ConfigError(
                f"budget {self.budget} cannot cover one population of"
                f" {self.population_size}"
            )
        if self.lshade_min_population < 4:
            raise ConfigError("terminal population must be >= 4")


@dataclass
class ConvergenceLog:
    """Per-generation trace: evaluations used, best, mean, population size."""

    records: list[tuple[int, float, float, int]] = field(default_factory=list)

    def append(self, evaluations: int, best: float, mean: float,
               population: int) -> None:
        self.records.append((int(evaluations), float(best), float(mean),
                             int(population)))

    @property
    def evaluations(self) -> list[int]:
        return [r[0] for r in self.records]

    @property
    def best(self) -> list[float]:
        return [r[1] for r in self.records]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["evaluations", "best", "mean", "population"])
            for evals, best, mean, population in self.records:
                writer.writerow([evals, repr(best), repr(mean), population])


class _Tracker:
    """Best-so-far bookkeeping shared by all runners."""

    def __init__(self):
        self.best_genome: np.ndarray | None = None
        self.best_fitness = np.inf

    def offer(self, genome: np.ndarray, fitness: float) -> None:
        if fitness < self.best_fitness:
            self.best_fitness = float(fitness)
            self.best_genome = genome.copy()


def _init_population(objective, bounds: Bounds, size: int,
                     rng: np.random.Generator, tracker: _Tracker):
    pop = bounds.lo + rng.random((size, bounds.dim)) * (bounds.hi - bounds.lo)
    for k in range(size):
        pop[k] = repair(pop[k], bounds)
    fits = np.empty(size)
    for k in range(size):
        fits[k] = objective(pop[k])
        tracker.offer(pop[k], fits[k])
    return pop, fits


def _crossover(parent: np.ndarray, mutant: np.ndarray, cr: float,
               rng: np.random.Generator) -> np.ndarray:
    """Binomial crossover with one forced dimension from the mutant."""
    mask = rng.random(len(parent)) < cr
    mask[rng.integers(0, len(parent))] = True
    return np.where(mask, mutant, parent)


def _distinct_indices(rng: np.random.Generator, pool: int, count: int,
                      taboo: set[int]) -> list[int]:
    """`count` distinct indices from range(pool), avoiding `taboo`."""
    picked: list[int] = []
    seen = set(taboo)
    while len(picked) < count:
        r = int(rng.integers(0, pool))
        if r not in seen:
            seen.add(r)
            picked.append(r)
    return picked


def run_de(objective, bounds: Bounds, config: OptimizerConfig, seed: int):
    """Classic differential evolution: one random difference vector,
    binomial crossover, greedy one-to-one selection."""
    rng = make_rng(seed)
    size = config.population_size
    tracker = _Tracker()
    log = ConvergenceLog()

    pop, fits = _init_population(objective, bounds, size, rng, tracker)
    evals = size
    log.append(evals, tracker.best_fitness, fits.mean(), size)

    while evals < config.budget:
        n_trial = min(size, config.budget - evals)
        trials = np.empty((n_trial, bounds.dim))
        for t in range(n_trial):
            r1, r2, r3 = _distinct_indices(rng, size, 3, {t})
            mutant = pop[r1] + config.de_f * (pop[r2] - pop[r3])
            trials[t] = repair(_crossover(pop[t], mutant, config.de_cr, rng), bounds)
        for t in range(n_trial):
            f = objective(trials[t])
            tracker.offer(trials[t], f)
            if f <= fits[t]:
                pop[t] = trials[t]
                fits[t] = f
        evals += n_trial
        log.append(evals, tracker.best_fitness, fits.mean(), size)

    return tracker.best_genome, tracker.best_fitness, log


def _lehmer_mean(values: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(weights * values**2) / np.sum(weights * values))


def _sample_f(rng: np.random.Generator, loc: float) -> float:
    """Cauchy(loc, 0.1) scale factor: resampled while <= 0, capped at 1."""
    while True:
        f = loc + 0.1 * float(rng.standard_cauchy())
        if f > 0.0:
            return min(f, 1.0)


def _evict_archive(archive: list[np.ndarray], max_size: int,
                   rng: np.random.Generator) -> None:
    """Random eviction until the archive fits its cap."""
    while len(archive) > max_size:
        del archive[int(rng.integers(0, len(archive)))]


def _population_target(n_init: int, n_min: int, evals: int, budget: int) -> int:
    """Linear population-size schedule in consumed evaluations."""
    return max(n_min, round(n_init - (n_init - n_min) * evals / budget))


def _run_success_history(objective, bounds: Bounds, config: OptimizerConfig,
                         seed: int, h: int, n_min: int):
    """Success-history adaptive DE; shrinks the population when n_min is
    below the initial size, otherwise runs at constant size."""
    rng = make_rng(seed)
    n_init = config.population_size
    size = n_init
    tracker = _Tracker()
    log = ConvergenceLog()

    pop, fits = _init_population(objective, bounds, size, rng, tracker)
    evals = size
    log.append(evals, tracker.best_fitness, fits.mean(), size)

    mem_cr = np.full(h, 0.5)
    mem_f = np.full(h, 0.5)
    mem_pos = 0
    archive: list[np.ndarray] = []

    while evals < config.budget:
        n_trial = min(size, config.budget - evals)
        p_size = max(2, round(0.1 * size))
        top = np.argsort(fits, kind="stable")[:p_size]

        trials = np.empty((n_trial, bounds.dim))
        trial_cr = np.empty(n_trial)
        trial_f = np.empty(n_trial)
        for t in range(n_trial):
            slot = int(rng.integers(0, h))
            cr = float(np.clip(rng.normal(mem_cr[slot], 0.1), 0.0, 1.0))
            f = _sample_f(rng, mem_f[slot])
            pbest = pop[top[int(rng.integers(0, p_size))]]
            (r1,) = _distinct_indices(rng, size, 1, {t})
            (r2,) = _distinct_indices(rng, size + len(archive), 1, {t, r1})
            donor = pop[r2] if r2 < size else archive[r2 - size]
            mutant = pop[t] + f * (pbest - pop[t]) + f * (pop[r1] - donor)
            trials[t] = repair(_crossover(pop[t], mutant, cr, rng), bounds)
            trial_cr[t] = cr
            trial_f[t] = f

        s_cr, s_f, s_delta = [], [], []
        for t in range(n_trial):
            f_trial = objective(trials[t])
            tracker.offer(trials[t], f_trial)
            if f_trial < fits[t]:
                s_cr.append(trial_cr[t])
                s_f.append(trial_f[t])
                s_delta.append(fits[t] - f_trial)
                archive.append(pop[t].copy())
            if f_trial <= fits[t]:
                pop[t] = trials[t]
                fits[t] = f_trial
        _evict_archive(archive, size, rng)

        if s_delta:
            w = np.array(s_delta) / sum(s_delta)
            mem_f[mem_pos] = _lehmer_mean(np.array(s_f), w)
            mem_cr[mem_pos] = float(np.sum(w * np.array(s_cr)))
            mem_pos = (mem_pos + 1) % h

        evals += n_trial
        target = _population_target(n_init, n_min, evals, config.budget)
        if target < size:
            keep = np.argsort(fits, kind="stable")[:target]
            pop = pop[keep]
            fits = fits[keep]
            size = target
            _evict_archive(archive, size, rng)
        # record the post-reduction state so the population column tracks
        # the size actually carried into the next generation
        log.append(evals, tracker.best_fitness, fits.mean(), size)

    return tracker.best_genome, tracker.best_fitness, log


def run_shade(objective, bounds: Bounds, config: OptimizerConfig, seed: int):
    """Success-history adaptive DE with a constant population."""
    return _run_success_history(objective, bounds, config, seed,
                                h=config.shade_h, n_min=config.population_size)


def run_lshade(objective, bounds: Bounds, config: OptimizerConfig, seed: int):
    """Success-history adaptive DE with linear population reduction."""
    return _run_success_history(objective, bounds, config, seed,
                                h=config.lshade_h,
                                n_min=config.lshade_min_population)


def run_pso(objective, bounds: Bounds, config: OptimizerConfig, seed: int):
    """Global-best particle swarm with per-dimension velocity clamping.

    Boundary handling is absorbing: any velocity component whose raw move
    had to be repaired (box clamp or pair-gap fix) is zeroed, so particles
    do not press against a bound until the swarm freezes there. Initial
    velocities are half the difference to a second uniform draw.
    """
    rng = make_rng(seed)
    size = config.population_size
    dim = bounds.dim
    span = bounds.hi - bounds.lo
    tracker = _Tracker()
    log = ConvergenceLog()

    x, fits = _init_population(objective, bounds, size, rng, tracker)
    v = (bounds.lo + rng.random((size, dim)) * span - x) / 2.0
    pbest = x.copy()
    pbest_f = fits.copy()
    g = int(np.argmin(fits))
    gbest = x[g].copy()
    gbest_f = float(fits[g])
    evals = size
    log.append(evals, tracker.best_fitness, fits.mean(), size)

    while evals < config.budget:
        n = min(size, config.budget - evals)
        for k in range(n):
            r1 = rng.random(dim)
            r2 = rng.random(dim)
            v[k] = (config.pso_w * v[k]
                    + config.pso_c1 * r1 * (pbest[k] - x[k])
                    + config.pso_c2 * r2 * (gbest - x[k]))
            v[k] = np.clip(v[k], -span, span)
            raw = x[k] + v[k]
            x[k] = repair(raw, bounds)
            v[k][x[k] != raw] = 0.0
        for k in range(n):
            fits[k] = objective(x[k])
            tracker.offer(x[k], fits[k])
            if fits[k] < pbest_f[k]:
                pbest[k] = x[k]
                pbest_f[k] = fits[k]
                if fits[k] < gbest_f:
                    gbest = x[k].copy()
                    gbest_f = float(fits[k])
        evals += n
        log.append(evals, tracker.best_fitness, fits[:n].mean(), size)

    return tracker.best_genome, tracker.best_fitness, log


OPTIMIZERS = {
    "de": run_de,
    "shade": run_shade,
    "lshade": run_lshade,
    "pso": run_pso,
}


def run(objective, bounds: Bounds, config: OptimizerConfig, seed: int):
    """Dispatch to the configured algorithm."""
    return OPTIMIZERS[config.algorithm](objective, bounds, config, seed)
