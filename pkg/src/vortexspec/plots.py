"""Deterministic SVG line plots with the plotted data embedded as a comment."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


@dataclass(frozen=True)
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class PlotStyle:
    title: str = ""
    xlabel: str = "r"
    ylabel: str = ""
    logy: bool = False
    hline: float | None = None


def _data_comment(series: Sequence[Series]) -> str:
    lines = ["<!-- vortexspec-data"]
    for s in series:
        lines.append(f"series: {s.label.replace('--', '- -')}")
        lines.append("x,y")
        lines.extend(f"{float(a)!r},{float(b)!r}" for a, b in zip(s.x, s.y))
    lines.append("-->")
    return "\n".join(lines) + "\n"


def export_plot(series: Sequence[Series], path, style: PlotStyle = PlotStyle()) -> Path:
    """Write an SVG line plot.  Identical input gives a byte-identical file."""
    if not series:
        raise ValueError("need at least one series")
    path = Path(path)
    with plt.rc_context({"svg.hashsalt": "vortexspec", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for k, s in enumerate(series):
            x, y = np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)
            marker = "o" if x.size == 1 else None
            ax.plot(x, y, label=s.label, marker=marker, linewidth=1.2, gid=f"series_{k}")
        if style.hline is not None:
            ax.axhline(style.hline, color="0.5", linewidth=0.8)
        if style.logy:
            ax.set_yscale("log")
        ax.set_title(style.title)
        ax.set_xlabel(style.xlabel)
        ax.set_ylabel(style.ylabel)
        if any(s.label for s in series):
            ax.legend(loc="best")
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    svg = buf.getvalue()
    head, sep, body = svg.partition("?>\n")
    text = head + sep + _data_comment(series) + body if sep else _data_comment(series) + svg
    path.write_text(text)
    return path


def read_plot_data(path) -> dict:
    """Recover the embedded series as ``{label: (x, y)}``."""
    text = Path(path).read_text()
    start = text.index("<!-- vortexspec-data")
    block = text[start:text.index("-->", start)].splitlines()[1:]
    out, label, xs, ys = {}, None, [], []
    for line in block:
        if line.startswith("series: "):
            if label is not None:
                out[label] = (np.array(xs), np.array(ys))
            label, xs, ys = line[8:], [], []
        elif line and line != "x,y":
            a, b = line.split(",")
            xs.append(float(a))
            ys.append(float(b))
    if label is not None:
        out[label] = (np.array(xs), np.array(ys))
    return out
