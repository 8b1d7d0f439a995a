"""Opinion fusion rules and period-structured simulation.

Three update rules over opinions in [0, 1]:

* stubborn averaging (``fj``): an agent blends its neighborhood mean with
  its own frozen initial opinion, weighted by a susceptibility ``xi``;
* bounded confidence (``dw``): a connected pair moves together by a
  fraction ``mu`` of their gap, but only when the gap is below a
  confidence threshold ``eps``;
* bounded confidence with repulsion (``atbcr``): additionally, pairs whose
  gap exceeds a polarization threshold ``theta`` move apart by the same
  fraction, with results truncated to [0, 1].

A simulation horizon is a sequence of periods; parameters are constant
within a period and change between periods. Each micro time step is one
social interaction: a uniformly random edge for the pair rules, a
uniformly random agent for the averaging rule. Long runs execute in
compiled kernels that apply exactly the arithmetic of the single-step
functions below; `simulate_period` documents the draw discipline so the
two paths are interchangeable step for step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .graph import SocialNetwork

MODEL_FJ = "fj"
MODEL_DW = "dw"
MODEL_ATBCR = "atbcr"
MODELS = (MODEL_FJ, MODEL_DW, MODEL_ATBCR)

PARAM_NAMES = {
    MODEL_FJ: ("xi",),
    MODEL_DW: ("mu", "eps"),
    MODEL_ATBCR: ("mu", "eps", "theta"),
}

STEPS_PER_DAY = 450
DEFAULT_STEPS_PER_PERIOD = STEPS_PER_DAY * 30  # one calendar month

# Pair-gap constraint for the repulsion model: theta - eps must stay in
# [MIN_THETA_EPS_GAP, MAX_THETA_EPS_GAP] so the two thresholds never collapse.
MIN_THETA_EPS_GAP = 0.1
MAX_THETA_EPS_GAP = 0.9


@dataclass(frozen=True)
class FJParams:
    """Per-period susceptibility; 1 - xi is adherence to the initial opinion."""

    xi: float

    def __post_init__(self):
        if not 0.1 <= self.xi <= 1.0:
            raise ValueError(f"xi must lie in [0.1, 1], got {self.xi}")


@dataclass(frozen=True)
class DWParams:
    """Per-period convergence speed and confidence threshold."""

    mu: float
    eps: float

    def __post_init__(self):
        if not 0.0 < self.mu <= 0.5:
            raise ValueError(f"mu must lie in (0, 0.5], got {self.mu}")
        if not 0.0 <= self.eps <= 0.5:
            raise ValueError(f"eps must lie in [0, 0.5], got {self.eps}")


@dataclass(frozen=True)
class ATBCRParams:
    """DW parameters plus a polarization threshold for the repulsion rule."""

    mu: float
    eps: float
    theta: float

    def __post_init__(self):
        if not 0.0 < self.mu <= 0.5:
            raise ValueError(f"mu must lie in (0, 0.5], got {self.mu}")
        if not 0.0 <= self.eps <= 0.5:
            raise ValueError(f"eps must lie in [0, 0.5], got {self.eps}")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0.5, 1], got {self.theta}")
        gap = self.theta - self.eps
        if not MIN_THETA_EPS_GAP <= gap <= MAX_THETA_EPS_GAP:
            raise ValueError(
                f"theta - eps must lie in [{MIN_THETA_EPS_GAP}, {MAX_THETA_EPS_GAP}],"
                f" got {gap}"
            )


PeriodParams = FJParams | DWParams | ATBCRParams

_PARAMS_MODEL = {FJParams: MODEL_FJ, DWParams: MODEL_DW, ATBCRParams: MODEL_ATBCR}


def params_model(params: PeriodParams) -> str:
    return _PARAMS_MODEL[type(params)]


@dataclass(frozen=True)
class ParameterSchedule:
    """One PeriodParams entry per period, plus the period length in steps."""

    entries: tuple[PeriodParams, ...]
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD

    def __post_init__(self):
        if not self.entries:
            raise ValueError("schedule must have at least one period")
        if self.steps_per_period < 0:
            raise ValueError("steps_per_period must be >= 0")
        variants = {type(e) for e in self.entries}
        if len(variants) != 1:
            raise ValueError("all schedule entries must share one model variant")
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def model(self) -> str:
        return params_model(self.entries[0])

    def __len__(self) -> int:
        return len(self.entries)


# --------------------------------------------------------------------------
# Single-interaction updates. Pure: they return a fresh profile and leave
# inputs untouched. These are the reference semantics for the kernels.
# --------------------------------------------------------------------------

def fj_step(state: np.ndarray, baseline: np.ndarray, network: SocialNetwork,
            xi: float, agent: int) -> np.ndarray:
    """Blend one agent's neighborhood mean with its frozen baseline opinion.

    With uniform row-normalized weights the social term reduces to the
    plain mean of neighbor opinions. Isolated agents keep their opinion.
    """
    x = state.copy()
    nbrs = network.neighbors(agent)
    if len(nbrs) == 0:
        return x
    acc = 0.0
    for v in nbrs:
        acc += state[v]
    x[agent] = xi * (acc / len(nbrs)) + (1.0 - xi) * baseline[agent]
    return x


def dw_step(state: np.ndarray, network: SocialNetwork, mu: float, eps: float,
            pair: tuple[int, int]) -> np.ndarray:
    """Symmetric bounded-confidence update of a connected pair.

    Both endpoints move toward each other by mu times the gap iff the gap
    is strictly below eps; both updates use pre-update values.
    """
    i, j = pair
    x = state.copy()
    if abs(state[i] - state[j]) < eps:
        x[i] = state[i] + mu * (state[j] - state[i])
        x[j] = state[j] + mu * (state[i] - state[j])
    return x


def atbcr_step(state: np.ndarray, network: SocialNetwork, mu: float, eps: float,
               theta: float, pair: tuple[int, int]) -> np.ndarray:
    """Bounded-confidence attraction plus over-threshold repulsion.

    Gaps strictly below eps attract as in `dw_step`; gaps strictly above
    theta repel symmetrically, with results truncated to [0, 1]. Gaps in
    the closed band [eps, theta] leave both opinions unchanged.
    """
    i, j = pair
    x = state.copy()
    gap = abs(state[i] - state[j])
    if gap < eps:
        x[i] = state[i] + mu * (state[j] - state[i])
        x[j] = state[j] + mu * (state[i] - state[j])
    elif gap > theta:
        x[i] = min(1.0, max(0.0, state[i] - mu * (state[j] - state[i])))
        x[j] = min(1.0, max(0.0, state[j] - mu * (state[i] - state[j])))
    return x


# --------------------------------------------------------------------------
# Compiled kernels. Same arithmetic as the step functions, applied in place
# over a pre-drawn batch of interaction indices.
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _dw_kernel(x, edges, edge_idx, mu, eps):
    for s in range(edge_idx.shape[0]):
        e = edge_idx[s]
        i = edges[e, 0]
        j = edges[e, 1]
        if abs(x[i] - x[j]) < eps:
            xi = x[i] + mu * (x[j] - x[i])
            xj = x[j] + mu * (x[i] - x[j])
            x[i] = xi
            x[j] = xj


@njit(cache=True, nogil=True)
def _atbcr_kernel(x, edges, edge_idx, mu, eps, theta):
    for s in range(edge_idx.shape[0]):
        e = edge_idx[s]
        i = edges[e, 0]
        j = edges[e, 1]
        gap = abs(x[i] - x[j])
        if gap < eps:
            xi = x[i] + mu * (x[j] - x[i])
            xj = x[j] + mu * (x[i] - x[j])
            x[i] = xi
            x[j] = xj
        elif gap > theta:
            xi = min(1.0, max(0.0, x[i] - mu * (x[j] - x[i])))
            xj = min(1.0, max(0.0, x[j] - mu * (x[i] - x[j])))
            x[i] = xi
            x[j] = xj


@njit(cache=True, nogil=True)
def _fj_kernel(x, baseline, agent_idx, csr_ptr, csr_idx, xi):
    for s in range(agent_idx.shape[0]):
        a = agent_idx[s]
        lo = csr_ptr[a]
        hi = csr_ptr[a + 1]
        if hi == lo:
            continue
        acc = 0.0
        for p in range(lo, hi):
            acc += x[csr_idx[p]]
        x[a] = xi * (acc / (hi - lo)) + (1.0 - xi) * baseline[a]


def _fj_sweep(x: np.ndarray, baseline: np.ndarray, network: SocialNetwork,
              xi: float) -> np.ndarray:
    """One synchronous full-population update (comparison mode)."""
    sums = np.add.reduceat(x[network.csr_idx], network.csr_ptr[:-1])
    deg = network.degrees
    means = np.where(deg > 0, sums / np.maximum(deg, 1), x)
    return xi * means + (1.0 - xi) * baseline


def simulate_period(model: str, state: np.ndarray, baseline: np.ndarray | None,
                    network: SocialNetwork, params: PeriodParams, steps: int,
                    rng: np.random.Generator, *,
                    fj_daily_sweeps: bool = False) -> np.ndarray:
    """Run `steps` sequential micro-updates and return the final profile.

    Draw discipline: a single batch of `steps` uniform indices is taken
    from `rng` up front -- edge indices for the pair models, agent indices
    for the averaging model -- and consumed in order. Replaying the same
    batch through the single-step functions reproduces the trajectory
    exactly.

    `fj_daily_sweeps` switches the averaging model to synchronous
    whole-population sweeps, one per 450 steps (no randomness consumed).
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if params_model(params) != model:
        raise ValueError(f"params {params!r} do not match model {model!r}")
    x = np.array(state, dtype=np.float64)
    if steps == 0:
        return x

    if model == MODEL_FJ:
        base = np.ascontiguousarray(baseline, dtype=np.float64)
        if fj_daily_sweeps:
            for _ in range(steps // STEPS_PER_DAY):
                x = _fj_sweep(x, base, network, params.xi)
            return x
        agents = rng.integers(0, network.n, size=steps)
        _fj_kernel(x, base, agents, network.csr_ptr, network.csr_idx, params.xi)
        return x

    edge_idx = rng.integers(0, network.n_edges, size=steps)
    if model == MODEL_DW:
        _dw_kernel(x, network.edges, edge_idx, params.mu, params.eps)
    else:
        _atbcr_kernel(x, network.edges, edge_idx, params.mu, params.eps, params.theta)
    return x


def concern_proportion(state: np.ndarray, c_th: float) -> float:
    """Fraction of agents at or above the concern threshold."""
    return float(np.count_nonzero(state >= c_th)) / len(state)


def simulate_horizon(model: str, schedule: ParameterSchedule, initial: np.ndarray,
                     network: SocialNetwork, c_th: float, rng: np.random.Generator,
                     *, snapshot: bool = False, fj_daily_sweeps: bool = False):
    """Run all periods in sequence; record concern at each period end.

    The averaging model's baseline is the horizon's initial profile for
    every period. Returns the concern series, plus the per-period final
    profiles when `snapshot` is set.
    """
    if schedule.model != model:
        raise ValueError(f"schedule is for {schedule.model!r}, not {model!r}")
    x = np.array(initial, dtype=np.float64)
    baseline = x.copy() if model == MODEL_FJ else None
    concern = np.empty(len(schedule), dtype=np.float64)
    snaps: list[np.ndarray] = []
    for p, params in enumerate(schedule.entries):
        x = simulate_period(model, x, baseline, network, params,
                            schedule.steps_per_period, rng,
                            fj_daily_sweeps=fj_daily_sweeps)
        concern[p] = concern_proportion(x, c_th)
        if snapshot:
            snaps.append(x.copy())
    if snapshot:
        return concern, snaps
    return concern


def save_snapshots(snapshots: Sequence[np.ndarray], path,
                   labels: Sequence[str] | None = None) -> None:
    """Write per-period opinion profiles as 'period,agent,opinion' rows."""
    if labels is None:
        labels = [str(p + 1) for p in range(len(snapshots))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "agent", "opinion"])
        for label, profile in zip(labels, snapshots):
            for agent, value in enumerate(profile):
                writer.writerow([label, agent, repr(float(value))])
