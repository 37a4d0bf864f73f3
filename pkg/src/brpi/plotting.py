"""Optional PNG rendering of the emitted plot CSVs (needs matplotlib)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _rows(path):
    from .experiment import read_csv_body
    return read_csv_body(path)


def render(csv_path, kind: str) -> Path:
    """Render one emitted CSV next to itself as PNG; returns the image path."""
    plt = _pyplot()
    csv_path = Path(csv_path)
    rows = _rows(csv_path)
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    if kind == "convergence":
        series = defaultdict(list)
        for r in rows:
            if r["metric"] in ("nashconv", "ccedist"):
                series[r["metric"]].append((int(r["iteration"]), float(r["value"])))
        for metric, pts in series.items():
            x, y = zip(*pts)
            ax.plot(x, y, label=metric, lw=1)
        ax.set_xscale("log")
        ax.set_yscale("symlog", linthresh=1e-3)
        ax.set_xlabel("iteration")
        ax.legend(frameon=False)
    elif kind == "heatmap":
        labels = list(dict.fromkeys(r["row"] for r in rows))
        k = len(labels)
        m = np.array([float(r["value"]) for r in rows]).reshape(k, k)
        lim = max(np.abs(m).max(), 1e-12)
        im = ax.imshow(m, cmap="RdBu", vmin=-lim, vmax=lim)
        ax.set_xticks(range(k), labels)
        ax.set_yticks(range(k), labels)
        ax.set_xlabel("opponents' checkpoint")
        ax.set_ylabel("seated checkpoint")
        fig.colorbar(im, ax=ax)
    elif kind == "league":
        labels = list(dict.fromkeys(r["checkpoint"] for r in rows))
        k = len(labels)
        m = np.full((k, k), np.nan)
        for r in rows:
            m[int(r["prefix"]) - 1, labels.index(r["checkpoint"])] = float(r["mass"])
        im = ax.imshow(m, cmap="viridis", vmin=0, vmax=1)
        ax.set_xticks(range(k), labels)
        ax.set_yticks(range(k), [str(i + 1) for i in range(k)])
        ax.set_xlabel("checkpoint")
        ax.set_ylabel("league prefix")
        fig.colorbar(im, ax=ax)
    elif kind == "bars":
        games = list(dict.fromkeys(r["game"] for r in rows))
        schemes = list(dict.fromkeys(r["scheme"] for r in rows))
        width = 0.8 / max(len(schemes), 1)
        for j, s in enumerate(schemes):
            vals = [next((float(r["plateau_ccedist"]) for r in rows
                          if r["game"] == g and r["scheme"] == s), np.nan) for g in games]
            ax.bar(np.arange(len(games)) + j * width, vals, width, label=s)
        ax.set_xticks(np.arange(len(games)) + 0.4 - width / 2, games)
        ax.set_ylabel("plateau CCEDist")
        ax.legend(frameon=False, fontsize=7)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    fig.tight_layout()
    out = csv_path.with_suffix(".png")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
