"""Deterministic SVG figures for experiment reports.

Every element that tests look for carries a gid, so the SVG can be checked structurally:
series lines are ``series-<k>``, reference lines ``ref-<k>``, bar ``j`` of group ``k`` is ``bars-<k>-<j>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "svg.hashsalt": "advtransfer",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
_METADATA = {"Date": None, "Creator": None}


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    marker: str = "o"


@dataclass
class ReferenceLine:
    label: str
    y: float
    style: str = ":"



def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_METADATA)
    plt.close(fig)
    return path


def emit_plot(series: Sequence[Series], references: Sequence[ReferenceLine], path: str | Path,
              title: str = "", xlabel: str = "", ylabel: str = "") -> Path:
    """Line plot with one marker per point and horizontal reference lines."""
    if not series:
        raise ValueError("emit_plot needs at least one series")
    path = Path(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        for k, s in enumerate(series):
            if len(s.x) != len(s.y):
                raise ValueError(f"series {s.label!r}: x and y lengths differ")
            (line,) = ax.plot(list(s.x), list(s.y), marker=s.marker, label=s.label)
            line.set_gid(f"series-{k}")
        for k, ref in enumerate(references):
            line = ax.axhline(ref.y, linestyle=ref.style, color=f"C{len(series) + k}", label=ref.label)
            line.set_gid(f"ref-{k}")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        return _save(fig, path)


def emit_bars(categories: Sequence[str], groups: dict[str, Sequence[float]], path: str | Path,
              title: str = "", ylabel: str = "") -> Path:
    """Grouped bar chart, one group of bars per key of ``groups``."""
    if not categories or not groups:
        raise ValueError("emit_bars needs categories and at least one group")
    path = Path(path)
    width = 0.8 / len(groups)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        for k, (name, values) in enumerate(groups.items()):
            xs = [i + (k - (len(groups) - 1) / 2) * width for i in range(len(categories))]
            bars = ax.bar(xs, list(values), width=width, label=name)
            for j, patch in enumerate(bars.patches):
                patch.set_gid(f"bars-{k}-{j}")
        ax.set_xticks(range(len(categories)))
        ax.set_xticklabels(categories)
        ax.set_title(title)
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        return _save(fig, path)
