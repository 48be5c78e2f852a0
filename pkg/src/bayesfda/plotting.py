"""Deterministic SVG heatmaps with a dendrogram alongside.

Files are rendered with the Agg-free SVG backend using a fixed hash salt
and no creation date, so identical inputs produce identical bytes.  The
colour scale is global per figure (one normalisation for the whole
matrix) and is recorded in the SVG description.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.cluster.hierarchy import dendrogram as _scipy_dendrogram  # noqa: E402

from .clustering import Dendrogram, leaf_order  # noqa: E402

__all__ = ["heatmap_with_dendrogram"]

_RC = {
    "svg.hashsalt": "bayesfda",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.size": 7,
}


def heatmap_with_dendrogram(path, matrix: np.ndarray, dend: Dendrogram,
                            columns: Sequence[str] | None = None, title: str = "",
                            cmap: str = "viridis", symmetric: bool = False,
                            meta: dict | None = None) -> Path:
    """Rows of ``matrix`` reordered by the dendrogram's leaf order.

    ``symmetric`` centres the colour scale at zero (for anomaly levels).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    M = np.asarray(matrix, dtype=float)
    order = leaf_order(dend)
    if symmetric:
        vmax = float(np.max(np.abs(M))) or 1.0
        vmin = -vmax
    else:
        vmin, vmax = float(np.min(M)), float(np.max(M))
        if vmax == vmin:
            vmax = vmin + 1.0
    description = {"colour_scale": "global", "vmin": vmin, "vmax": vmax,
                   "leaf_order": [dend.labels[i] for i in order], **(meta or {})}

    with plt.rc_context(_RC):
        fig = plt.figure(figsize=(8, 0.25 * len(order) + 1.5))
        ax_d = fig.add_axes([0.02, 0.1, 0.18, 0.8])
        ax_h = fig.add_axes([0.22, 0.1, 0.66, 0.8])
        ax_c = fig.add_axes([0.90, 0.1, 0.02, 0.8])
        if dend.n > 1 and dend.heights.max() > 0:
            _scipy_dendrogram(dend.linkage_matrix(), orientation="left", ax=ax_d,
                              no_labels=True, color_threshold=0, above_threshold_color="k",
                              link_color_func=lambda _: "k")
            # scipy draws leaves bottom-up; our rows go top-down
            ax_d.invert_yaxis()
        ax_d.axis("off")
        im = ax_h.imshow(M[order], aspect="auto", cmap=cmap, vmin=vmin, vmax=vmax,
                         interpolation="nearest")
        ax_h.set_yticks(range(len(order)))
        ax_h.set_yticklabels([dend.labels[i] for i in order])
        ax_h.yaxis.tick_right()
        if columns is not None and len(columns) <= 40:
            ax_h.set_xticks(range(len(columns)))
            ax_h.set_xticklabels(list(columns), rotation=90)
        else:
            ax_h.set_xticks([])
        if title:
            ax_h.set_title(title)
        fig.colorbar(im, cax=ax_c)
        fig.savefig(path, format="svg",
                    metadata={"Date": None, "Creator": None,
                              "Description": json.dumps(description, sort_keys=True)})
        plt.close(fig)
    return path
