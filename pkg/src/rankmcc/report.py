"""Experiment reports: delimited output, markdown tables, and figures.

A report is a list of (dataset, loss, interaction) rows with three metric
columns, each already scaled by 100. CSV output is header plus rows with two
decimals and parses back exactly; markdown bolds and stars the best cell per
metric column (lowest error, highest ndcg, ties included, judged on the
displayed two-decimal values). Writing a report to disk also renders one
heatmap panel per metric next to the delimited file.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "ReportRow",
    "ExperimentReport",
    "METRIC_COLUMNS",
    "best_flags",
    "to_csv",
    "parse_csv",
    "to_markdown",
    "write_report",
    "render_figure",
]

METRIC_COLUMNS = ("top1_error", "top5_error", "ndcg5")
_HEADER = ("dataset", "loss", "interaction") + METRIC_COLUMNS


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    loss: str
    interaction: str
    top1_error: float
    top5_error: float
    ndcg5: float

    def __post_init__(self):
        for column in METRIC_COLUMNS:
            value = getattr(self, column)
            if not 0.0 <= value <= 100.0 + 1e-9:
                raise ValueError(f"{column}={value} outside [0, 100]")


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    config: dict[str, Any] = field(default_factory=dict)
    seed: int = 0


def _display(value: float) -> str:
    return f"{value:.2f}"


def best_flags(report: ExperimentReport) -> dict[str, set[int]]:
    """Row indices holding the best displayed value per metric column."""
    flags: dict[str, set[int]] = {}
    for column in METRIC_COLUMNS:
        if not report.rows:
            flags[column] = set()
            continue
        shown = [float(_display(getattr(row, column))) for row in report.rows]
        target = max(shown) if column == "ndcg5" else min(shown)
        flags[column] = {i for i, v in enumerate(shown) if v == target}
    return flags


def to_csv(report: ExperimentReport) -> str:
    out = io.StringIO()
    out.write(",".join(_HEADER) + "\n")
    for row in report.rows:
        out.write(
            f"{row.dataset},{row.loss},{row.interaction},"
            f"{_display(row.top1_error)},{_display(row.top5_error)},"
            f"{_display(row.ndcg5)}\n"
        )
    return out.getvalue()


def parse_csv(text: str) -> ExperimentReport:
    lines = [line for line in text.splitlines() if line]
    if not lines or lines[0] != ",".join(_HEADER):
        raise ValueError("not a report csv: bad header")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(_HEADER):
            raise ValueError(f"bad report row: {line!r}")
        rows.append(ReportRow(parts[0], parts[1], parts[2],
                              float(parts[3]), float(parts[4]), float(parts[5])))
    return ExperimentReport(rows=rows)


def to_markdown(report: ExperimentReport) -> str:
    flags = best_flags(report)
    out = io.StringIO()
    out.write("| " + " | ".join(_HEADER) + " |\n")
    out.write("|" + "|".join(["---"] * len(_HEADER)) + "|\n")
    for i, row in enumerate(report.rows):
        cells = [row.dataset, row.loss, row.interaction]
        for column in METRIC_COLUMNS:
            shown = _display(getattr(row, column))
            cells.append(f"**{shown}\\***" if i in flags[column] else shown)
        out.write("| " + " | ".join(cells) + " |\n")
    if report.config:
        import json

        out.write(f"\nseed: {report.seed}; config: "
                  f"{json.dumps(report.config, sort_keys=True)}\n")
    return out.getvalue()


def render_figure(report: ExperimentReport, path) -> None:
    """One heatmap per metric over the loss x interaction cells of the report.

    Deterministic output: fixed layout, no timestamps or library metadata in
    the PNG, so identical reports render identical bytes.
    """
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    losses = sorted({row.loss for row in report.rows})
    heads = sorted({row.interaction for row in report.rows})
    flags = best_flags(report)

    fig, axes = plt.subplots(1, len(METRIC_COLUMNS),
                             figsize=(4.2 * len(METRIC_COLUMNS),
                                      0.9 + 0.62 * len(losses)))
    for ax, column in zip(np.atleast_1d(axes), METRIC_COLUMNS):
        grid = np.full((len(losses), len(heads)), np.nan)
        starred = np.zeros_like(grid, dtype=bool)
        for i, row in enumerate(report.rows):
            r, c = losses.index(row.loss), heads.index(row.interaction)
            grid[r, c] = getattr(row, column)
            starred[r, c] = i in flags[column]
        cmap = "viridis" if column == "ndcg5" else "viridis_r"
        ax.imshow(np.where(np.isnan(grid), 0.0, grid), cmap=cmap, aspect="auto")
        for r in range(len(losses)):
            for c in range(len(heads)):
                if not np.isnan(grid[r, c]):
                    mark = "*" if starred[r, c] else ""
                    ax.text(c, r, f"{grid[r, c]:.2f}{mark}", ha="center",
                            va="center", color="white", fontsize=9)
        ax.set_xticks(range(len(heads)), heads, fontsize=8)
        ax.set_yticks(range(len(losses)), losses, fontsize=8)
        ax.set_title(column, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def write_report(report: ExperimentReport, path, fmt: str = "csv",
                 figures: bool = True) -> list[str]:
    """Write the delimited report and its figure; returns the written paths."""
    import os

    if fmt not in ("csv", "md"):
        raise ValueError(f"unknown report format {fmt!r}; valid: csv, md")
    text = to_csv(report) if fmt == "csv" else to_markdown(report)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    written = [str(path)]
    if figures and report.rows:
        stem, _ = os.path.splitext(str(path))
        figure_path = stem + ".png"
        render_figure(report, figure_path)
        written.append(figure_path)
    return written
