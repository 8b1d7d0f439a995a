"""Survey ingestion and opinion initialization.

A survey snapshot gives, per respondent, whether the topic was mentioned
among their top problems and at which importance rank (1 = most important,
0 = not mentioned). Opinions are real values in [0, 1]; a concern
threshold c_th splits the range into a non-concerned region [0, c_th) and
a concerned region [c_th, 1] that is further divided into three equal
intervals, one per mention rank. Each respondent's initial opinion is
drawn from a Gaussian centered in their interval and truncated to it by
resampling, so the initial concern proportion equals the mentioned
fraction exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .rng import make_rng

VALID_RANKS = (0, 1, 2, 3)


@dataclass(frozen=True)
class SurveyDataset:
    """Per-respondent mention ranks for one survey month."""

    ranks: np.ndarray    # int64, values in {0, 1, 2, 3}
    label: str = ""

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64)
        if ranks.size == 0:
            raise ValueError("no respondents")
        if not np.isin(ranks, VALID_RANKS).all():
            raise ValueError("ranks must be in {0, 1, 2, 3}")
        object.__setattr__(self, "ranks", ranks)
        ranks.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.ranks)

    def mentioned_fraction(self) -> float:
        """Fraction of respondents with rank >= 1."""
        return float(np.count_nonzero(self.ranks > 0)) / self.n


@dataclass(frozen=True)
class TargetSeries:
    """Observed concern proportion per period; NaN marks a missing month.

    Missing periods keep the horizon length but never enter the fitness.
    Period labels are opaque strings ordered by file position.
    """

    labels: tuple[str, ...]
    values: np.ndarray   # float64, NaN = missing

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if len(values) != len(self.labels):
            raise ValueError("labels and values length mismatch")
        present = values[~np.isnan(values)]
        if present.size == 0:
            raise ValueError("target series has no present values")
        if ((present <= 0.0) | (present > 1.0)).any():
            raise ValueError("present proportions must lie in (0, 1]")
        object.__setattr__(self, "values", values)
        values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)


def _check_threshold(c_th: float) -> float:
    if not 0.0 < c_th < 1.0:
        raise ValueError(f"concern threshold must lie in (0, 1), got {c_th}")
    return float(c_th)


def category_mean_sd(rank: int, c_th: float) -> tuple[float, float]:
    """Gaussian parameters for one mention-rank category."""
    c_th = _check_threshold(c_th)
    if rank == 0:
        return c_th / 2.0, c_th / 6.0
    return c_th + (7 - 2 * rank) / 6.0 * (1.0 - c_th), (1.0 - c_th) / 18.0


def category_interval(rank: int, c_th: float) -> tuple[float, float, bool]:
    """(low, high, closed_top) interval owned by a rank.

    Intervals are lower-closed and upper-open, except rank 1 which is
    closed at 1. Rank 0 owns [0, c_th); ranks 3, 2, 1 own the ascending
    thirds of [c_th, 1].
    """
    c_th = _check_threshold(c_th)
    if rank == 0:
        return 0.0, c_th, False
    third = (1.0 - c_th) / 3.0
    low = c_th + (3 - rank) * third
    if rank == 1:
        return low, 1.0, True
    return low, low + third, False


def initialize_opinions(dataset: SurveyDataset, c_th: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Draw one opinion per respondent, in file order.

    Truncation uses rejection resampling (not clipping) so each category
    keeps its Gaussian shape; intervals span +-3 sigma, so rejections are
    rare. Deterministic for a fixed (dataset, c_th, stream).
    """
    c_th = _check_threshold(c_th)
    ranks = dataset.ranks
    k = ranks.astype(np.float64)
    third = (1.0 - c_th) / 3.0

    means = np.where(ranks == 0, c_th / 2.0, c_th + (7.0 - 2.0 * k) / 6.0 * (1.0 - c_th))
    sds = np.where(ranks == 0, c_th / 6.0, (1.0 - c_th) / 18.0)
    lows = np.where(ranks == 0, 0.0, c_th + (3.0 - k) * third)
    highs = np.where(ranks == 0, c_th, np.where(ranks == 1, 1.0, lows + third))
    closed_top = ranks == 1

    x = rng.normal(means, sds)
    bad = (x < lows) | np.where(closed_top, x > highs, x >= highs)
    while bad.any():
        x[bad] = rng.normal(means[bad], sds[bad])
        bad = (x < lows) | np.where(closed_top, x > highs, x >= highs)
    return x


def parse_survey(path) -> SurveyDataset:
    """Read a 'respondent_id,rank' CSV into a dataset, order preserved."""
    ranks: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["respondent_id", "rank"]:
            raise ParseError(f"{path}: expected header 'respondent_id,rank'")
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}: line {reader.line_num}: expected 2 fields")
            try:
                rank = int(row[1])
            except ValueError:
                raise ParseError(
                    f"{path}: line {reader.line_num}: rank {row[1]!r} is not an integer"
                ) from None
            if rank not in VALID_RANKS:
                raise ParseError(
                    f"{path}: line {reader.line_num}: rank must be in 0..3, got {rank}"
                )
            ranks.append(rank)
    if not ranks:
        raise ParseError(f"{path}: no respondents")
    return SurveyDataset(ranks=np.array(ranks, dtype=np.int64), label=str(path))


def parse_targets(path) -> TargetSeries:
    """Read a 'period,proportion' CSV; empty proportions become missing."""
    labels: list[str] = []
    values: list[float] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["period", "proportion"]:
            raise ParseError(f"{path}: expected header 'period,proportion'")
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}: line {reader.line_num}: expected 2 fields")
            labels.append(row[0].strip())
            raw = row[1].strip()
            if raw == "":
                values.append(np.nan)
                continue
            try:
                v = float(raw)
            except ValueError:
                raise ParseError(
                    f"{path}: line {reader.line_num}: proportion {raw!r} is not a number"
                ) from None
            if not 0.0 < v <= 1.0:
                raise ParseError(
                    f"{path}: line {reader.line_num}: proportion must lie in (0, 1], got {v}"
                )
            values.append(v)
    if not labels:
        raise ParseError(f"{path}: no periods")
    try:
        return TargetSeries(labels=tuple(labels), values=np.array(values))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def synth_dataset(n: int, p1: float, p2: float, p3: float, seed: int) -> SurveyDataset:
    """Synthetic survey with i.i.d. mention ranks.

    P(rank=k) = pk for k in {1, 2, 3}; the remainder is rank 0. Stands in
    for the proprietary barometer data at matching scale.
    """
    probs = (float(p1), float(p2), float(p3))
    if any(p < 0 for p in probs) or sum(probs) > 1.0:
        raise ValueError(f"rank proportions must be >= 0 and sum to <= 1, got {probs}")
    if n <= 0:
        raise ValueError(f"need n > 0, got {n}")
    rng = make_rng(seed)
    full = np.array([1.0 - sum(probs), *probs])
    ranks = rng.choice(4, size=n, p=full)
    return SurveyDataset(ranks=ranks.astype(np.int64), label=f"synthetic-{seed}")
