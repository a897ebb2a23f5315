"""Matplotlib figures written next to the delimited report outputs.

Every renderer draws straight onto a ``Figure`` object (no pyplot state), so
repeated renders of the same data produce byte-identical PNG files and the
CLI's rerun-determinism guarantee extends to the figures.

The network figure lays the graph out as hub-and-spoke: the best-connected
node sits in the centre and the remaining nodes go around a circle in sorted
order, with edge line width growing with edge weight.  Layout is pure
trigonometry, no randomness.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure

from .evaluation import EvaluationReport, format_precision
from .graph import TripleGraph

EDGE_COLOR = "#4878a8"
NODE_COLOR = "#d9822b"
BAR_COLOR = "#4878a8"
AVERAGE_COLOR = "#d9822b"


def save_frequency_figure(
    frequencies: Sequence[tuple[str, int]],
    path: str | Path,
    top_n: int = 20,
) -> None:
    """Horizontal bar chart of the most frequent place names."""
    rows = [(place, count) for place, count in frequencies[:top_n]]
    fig = Figure(figsize=(8, max(2.5, 0.35 * len(rows) + 1)), dpi=120)
    ax = fig.add_subplot(111)
    if rows:
        labels = [place for place, _ in rows][::-1]
        counts = [count for _, count in rows][::-1]
        ax.barh(range(len(rows)), counts, color=BAR_COLOR)
        ax.set_yticks(range(len(rows)))
        ax.set_yticklabels(labels, fontsize=8)
    ax.set_xlabel("occurrences")
    ax.set_title("Place name frequency")
    fig.tight_layout()
    fig.savefig(str(path), format="png")


def save_precision_figure(
    report: EvaluationReport,
    path: str | Path,
    place: str,
) -> None:
    """Per-iteration precision bars with the average drawn as a line."""
    fig = Figure(figsize=(6, 4), dpi=120)
    ax = fig.add_subplot(111)
    values = [float(p) if p is not None else 0.0 for p in report.iteration_precisions]
    labels = [f"iteration {i + 1}" for i in range(len(values))]
    ax.bar(range(len(values)), values, color=BAR_COLOR, width=0.6)
    for i, p in enumerate(report.iteration_precisions):
        ax.text(
            i,
            values[i] + 0.02,
            format_precision(p),
            ha="center",
            fontsize=9,
        )
    if report.average_precision is not None:
        average = float(report.average_precision)
        ax.axhline(average, color=AVERAGE_COLOR, linestyle="--", linewidth=1.2)
        ax.text(
            len(values) - 0.4,
            average + 0.02,
            f"avg {format_precision(report.average_precision)}",
            color=AVERAGE_COLOR,
            fontsize=9,
            ha="right",
        )
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("precision")
    ax.set_title(f"Extraction precision for {place} ({report.denominator_policy})")
    fig.tight_layout()
    fig.savefig(str(path), format="png")


def _hub_and_spoke_layout(graph: TripleGraph) -> dict[str, tuple[float, float]]:
    degree: dict[str, int] = {node: 0 for node in graph.nodes}
    for (subject, obj, _), weight in graph.edges.items():
        degree[subject] += weight
        degree[obj] += weight
    ordered = sorted(graph.nodes, key=lambda node: (-degree[node], node))
    positions: dict[str, tuple[float, float]] = {}
    if not ordered:
        return positions
    hub, spokes = ordered[0], sorted(ordered[1:])
    positions[hub] = (0.0, 0.0)
    for i, node in enumerate(spokes):
        angle = 2.0 * math.pi * i / max(1, len(spokes))
        positions[node] = (math.cos(angle), math.sin(angle))
    return positions


def save_graph_figure(graph: TripleGraph, path: str | Path) -> None:
    """Draw the triple network with weight-scaled edges and labelled nodes."""
    positions = _hub_and_spoke_layout(graph)
    fig = Figure(figsize=(8, 8), dpi=120)
    ax = fig.add_subplot(111)
    ax.set_axis_off()
    for (subject, obj, relation), weight in graph.sorted_edges():
        x1, y1 = positions[subject]
        x2, y2 = positions[obj]
        ax.annotate(
            "",
            xy=(x2, y2),
            xytext=(x1, y1),
            arrowprops={
                "arrowstyle": "-|>",
                "color": EDGE_COLOR,
                "linewidth": 0.6 + 0.5 * weight,
                "shrinkA": 12,
                "shrinkB": 12,
            },
        )
        ax.text(
            (x1 + x2) / 2,
            (y1 + y2) / 2,
            relation,
            fontsize=6,
            color=EDGE_COLOR,
            ha="center",
        )
    for node, (x, y) in sorted(positions.items()):
        ax.plot([x], [y], marker="o", markersize=9, color=NODE_COLOR)
        ax.text(x, y + 0.06, node, fontsize=8, ha="center")
    margin = 1.25
    ax.set_xlim(-margin, margin)
    ax.set_ylim(-margin, margin)
    ax.set_title("Spatial relation network")
    fig.savefig(str(path), format="png")
