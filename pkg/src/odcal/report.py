"""Figure rendering for result directories.

Turns the delimited outputs (concern series, convergence traces,
parameter tables, opinion snapshots) into PNG files written next to the
CSVs they come from. Rendering is read-only with respect to the data:
figures can be regenerated at any time without touching the CSVs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ParseError


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file")
        return header, [row for row in reader if row]


def plot_concern(csv_path, out_path) -> Path:
    """Simulated (and, if present, observed) concern per period."""
    header, rows = _read_rows(csv_path)
    labels = [r[0] for r in rows]
    x = np.arange(len(rows))

    fig, ax = plt.subplots(figsize=(8, 4.5))
    if header[:3] == ["period", "simulated", "target"]:
        sim = [float(r[1]) for r in rows]
        ax.plot(x, sim, marker="o", label="simulated")
        tgt = [(float(r[2]) if r[2] != "" else np.nan) for r in rows]
        if not all(np.isnan(tgt)):
            ax.plot(x, tgt, marker="s", linestyle="--", label="observed")
    else:
        # simulate output: period, mean, rep_1..rep_R
        mean = [float(r[1]) for r in rows]
        reps = np.array([[float(v) for v in r[2:]] for r in rows])
        for k in range(reps.shape[1]):
            ax.plot(x, reps[:, k], color="gray", alpha=0.25, linewidth=0.8)
        ax.plot(x, mean, marker="o", color="C0", label="replicate mean")
    ax.set_xticks(x, labels, rotation=45, ha="right")
    ax.set_xlabel("period")
    ax.set_ylabel("concern proportion")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_convergence(csv_path, out_path) -> Path:
    """Best and mean objective value against evaluations used."""
    _, rows = _read_rows(csv_path)
    evals = [int(r[0]) for r in rows]
    best = [float(r[1]) for r in rows]
    mean = [float(r[2]) for r in rows]

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(evals, best, label="best")
    ax.plot(evals, mean, label="population mean", alpha=0.6)
    if min(best) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("evaluations")
    ax.set_ylabel("fitness (MAPE)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_params(csv_path, out_path) -> Path:
    """Per-period trajectory of each calibrated parameter."""
    _, rows = _read_rows(csv_path)
    labels: list[str] = []
    series: dict[str, list[float]] = {}
    for period, name, value in rows:
        if period not in labels:
            labels.append(period)
        series.setdefault(name, []).append(float(value))

    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name, values in series.items():
        ax.plot(x, values, marker="o", label=name)
    ax.set_xticks(x, labels, rotation=45, ha="right")
    ax.set_xlabel("period")
    ax.set_ylabel("parameter value")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_opinions(csv_path, out_path, bins: int = 50) -> Path:
    """Opinion distribution per period as a heatmap (period,agent,opinion)."""
    _, rows = _read_rows(csv_path)
    labels: list[str] = []
    per_period: dict[str, list[float]] = {}
    for period, _agent, opinion in rows:
        if period not in labels:
            labels.append(period)
        per_period.setdefault(period, []).append(float(opinion))

    grid = np.zeros((bins, len(labels)))
    edges = np.linspace(0.0, 1.0, bins + 1)
    for k, label in enumerate(labels):
        hist, _ = np.histogram(per_period[label], bins=edges)
        grid[:, k] = hist

    fig, ax = plt.subplots(figsize=(8, 4.5))
    im = ax.imshow(grid, origin="lower", aspect="auto",
                   extent=(-0.5, len(labels) - 0.5, 0.0, 1.0), cmap="viridis")
    ax.set_xticks(np.arange(len(labels)), labels, rotation=45, ha="right")
    ax.set_xlabel("period")
    ax.set_ylabel("opinion")
    fig.colorbar(im, ax=ax, label="agents")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def render_report(directory) -> list[Path]:
    """Render figures for every known CSV found in a result directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    written: list[Path] = []

    concern = directory / "concern.csv"
    if concern.exists():
        written.append(plot_concern(concern, directory / "concern.png"))
    convergence = directory / "convergence.csv"
    if convergence.exists():
        written.append(plot_convergence(convergence, directory / "convergence.png"))
    params = directory / "best_params.csv"
    if params.exists():
        written.append(plot_params(params, directory / "params.png"))
    for snap in sorted(directory.glob("snapshots*.csv")):
        written.append(plot_opinions(snap, snap.with_suffix(".png")))

    if not written:
        raise FileNotFoundError(f"{directory}: no known CSV outputs to render")
    return written
