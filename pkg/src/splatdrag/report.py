"""Report rendering: delimited summaries plus matplotlib figures.

Every CLI report path emits three artifacts side by side: the JSON document,
a CSV with the same numbers, and a PNG figure.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import DAIReport


def write_dai_csv(report: DAIReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma", "score_sum", "score_per_pair",
                         "view_0", "view_1", "view_2", "view_3"])
        for gamma, score in report.scores.items():
            writer.writerow(
                [gamma, f"{score:.8f}", f"{report.per_pair_mean[gamma]:.8f}"]
                + [f"{v:.8f}" for v in report.per_view[gamma]]
            )


def save_dai_figure(report: DAIReport, path: str | Path) -> None:
    gammas = list(report.scores.keys())
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    x = range(len(gammas))
    ax.bar([i - 0.2 for i in x], [report.scores[g] for g in gammas],
           width=0.4, label="sum over pairs")
    ax.bar([i + 0.2 for i in x], [report.per_pair_mean[g] for g in gammas],
           width=0.4, label="per-pair mean")
    ax.set_xticks(list(x), [str(g) for g in gammas])
    ax.set_xlabel("patch radius")
    ax.set_ylabel("drag accuracy (lower is better)")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_curve_csv(rows: list[dict], path: str | Path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)


def save_curve_figure(
    series: dict[str, list[float]], path: str | Path, xlabel: str, ylabel: str, logy: bool = False
) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for label, values in series.items():
        ax.plot(range(len(values)), values, label=label, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
