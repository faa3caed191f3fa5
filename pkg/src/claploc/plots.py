"""Static SVG plots for experiment output: trajectory overlays and robustness
bar charts. Rendering is headless (Agg backend), no display server needed.
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import RunRecord  # noqa: E402


def overlay_figure(record: RunRecord, title: str):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(record.gt[:, 0], record.gt[:, 1], color="red", lw=1.2, label="ground truth")
    ax.plot(record.est[:, 0], record.est[:, 1], color="tab:blue", lw=0.9, label="estimate")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title)
    ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def bar_figure(values: Dict[str, Dict[float, float]], ylabel: str, title: str):
    """Grouped bars: one group per outlier ratio, one bar per method."""
    methods = sorted(values)
    ratios = sorted({r for per in values.values() for r in per})
    fig, ax = plt.subplots(figsize=(5, 4))
    width = 0.8 / max(len(methods), 1)
    for k, method in enumerate(methods):
        xs = [i + k * width for i in range(len(ratios))]
        ys = [values[method].get(r, 0.0) for r in ratios]
        ax.bar(xs, ys, width=width, label=method)
    ax.set_xticks([i + width * (len(methods) - 1) / 2 for i in range(len(ratios))])
    ax.set_xticklabels([f"{r:g}" for r in ratios])
    ax.set_xlabel("outlier ratio")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _parse_cell_name(name: str) -> Tuple[str, int, float]:
    stem = name[:-4] if name.endswith(".csv") else name
    parts = stem.split("_")
    method = []
    seed = 0
    ratio = 0.0
    for p in parts:
        if p.startswith("seed"):
            seed = int(p[4:])
        elif p.startswith("ratio"):
            ratio = float(p[5:])
        else:
            method.append(p)
    return "_".join(method), seed, ratio


def plot_directory(in_dir: str | Path, out_dir: str | Path) -> List[Path]:
    """Overlay per run CSV plus jump/divergence bar charts across all runs."""
    in_path = Path(in_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    jumps: Dict[str, Dict[float, float]] = {}
    diverged: Dict[str, Dict[float, float]] = {}
    counts: Dict[str, Dict[float, int]] = {}

    for csv_path in sorted(in_path.glob("*.csv")):
        record = RunRecord.from_csv(csv_path.read_text())
        method, seed, ratio = _parse_cell_name(csv_path.name)
        fig = overlay_figure(record, f"{method} seed={seed} ratio={ratio:g}")
        target = out / (csv_path.stem + "_overlay.svg")
        fig.savefig(target, format="svg")
        plt.close(fig)
        written.append(target)

        jumps.setdefault(method, {}).setdefault(ratio, 0.0)
        diverged.setdefault(method, {}).setdefault(ratio, 0.0)
        counts.setdefault(method, {}).setdefault(ratio, 0)
        jumps[method][ratio] += float(record.jump.sum())
        diverged[method][ratio] += float(record.diverged.mean()) if len(record) else 0.0
        counts[method][ratio] += 1

    if counts:
        for method, per in counts.items():
            for ratio, c in per.items():
                jumps[method][ratio] /= c
                diverged[method][ratio] /= c
        fig = bar_figure(jumps, "velocity jumps (mean over seeds)", "Velocity jumps")
        target = out / "velocity_jumps.svg"
        fig.savefig(target, format="svg")
        plt.close(fig)
        written.append(target)
        fig = bar_figure(diverged, "diverged fraction (mean over seeds)", "Divergence")
        target = out / "diverged_fraction.svg"
        fig.savefig(target, format="svg")
        plt.close(fig)
        written.append(target)
    return written
