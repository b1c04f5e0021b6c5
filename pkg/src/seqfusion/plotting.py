"""Report figures. Rendered with the Agg canvas directly (no pyplot state)
so they are safe to produce from library code and byte-stable across runs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

RC = {
    "font.size": 10,
    "axes.titlesize": 11,
    "axes.labelsize": 10,
}
COLORS = ("#4C72B0", "#DD8452", "#55A868", "#C44E52")


def _new_figure(width: float = 6.0, height: float = 3.6) -> Figure:
    fig = Figure(figsize=(width, height), dpi=100)
    FigureCanvasAgg(fig)
    return fig


def _style(ax) -> None:
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    ax.tick_params(direction="out", length=3)
    ax.title.set_size(RC["axes.titlesize"])


def _save(fig: Figure, path: "str | Path") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no Software/date chunks: keeps the PNG byte-identical between runs
    fig.savefig(path, format="png", metadata={"Software": None})
    return path


def plot_f1_table(columns: Mapping[str, float], path: "str | Path") -> Path:
    """Bars for the four exact/partial x positive/any F1 columns (percent)."""
    fig = _new_figure()
    ax = fig.add_subplot(111)
    labels = list(columns)
    values = [columns[k] for k in labels]
    bars = ax.bar(range(len(values)), values, color=COLORS[: len(values)])
    for bar, v in zip(bars, values):
        ax.text(bar.get_x() + bar.get_width() / 2, v + 1, f"{v:.1f}", ha="center", fontsize=8)
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels([k.replace(" ", "\n", 1) for k in labels], fontsize=8)
    ax.set_ylim(0, 110)
    ax.set_ylabel("F1 (%)")
    ax.set_title("Relation extraction")
    _style(ax)
    fig.tight_layout()
    return _save(fig, path)


def plot_sample_scores(scores: Sequence[float], accuracy_percent: float, path: "str | Path") -> Path:
    """Histogram of per-sample D with the corpus accuracy in the title."""
    fig = _new_figure()
    ax = fig.add_subplot(111)
    bins = [i / 10 for i in range(11)]
    ax.hist(list(scores), bins=bins, range=(0, 1), color=COLORS[0], edgecolor="white")
    ax.set_xlim(0, 1)
    ax.set_xlabel("sample score D")
    ax.set_ylabel("samples")
    ax.set_title(f"QA accuracy {accuracy_percent:.1f}%")
    _style(ax)
    fig.tight_layout()
    return _save(fig, path)


def plot_error_distribution(percentages: Mapping[str, float], path: "str | Path") -> Path:
    fig = _new_figure(5.0, 3.2)
    ax = fig.add_subplot(111)
    labels = list(percentages)
    values = [percentages[k] for k in labels]
    ax.barh(range(len(values)), values, color=COLORS[3])
    ax.set_yticks(range(len(values)))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlim(0, 100)
    ax.set_xlabel("% of samples")
    ax.set_title("Error types")
    _style(ax)
    fig.tight_layout()
    return _save(fig, path)
