"""The three figure families: surface heatmaps, region maps, probe curves.

Rendering is presentation only: numbers are drawn exactly as read, no metric
is ever recomputed.  Output is PNG via the Agg backend with the software tag
stripped, so byte-identical inputs give byte-identical files at fixed dpi.
"""

from __future__ import annotations

import math
import warnings

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap
from matplotlib.lines import Line2D

from .io import METRICS, ProbeTable, SurfaceTable, read_dataset_csv, read_probe_csv, read_surface_csv

UNCERTAINTY_CMAP = "Purples"  # perceptually uniform purple family
GRADIENT_CMAP = "Greens"  # perceptually uniform green family

LN2 = math.log(2.0)

# Published value ranges per metric.
DEFAULT_RANGES: dict[str, tuple[float, float]] = {
    "max_prob": (0.0, 0.5),
    "class_variance": (0.0, 0.25),
    "predictive_entropy": (0.0, LN2),
    "mutual_information": (0.0, LN2),
    # "mutual_information": (4.0, 5.0),  # range as published; inconsistent
    # with the ln(2) ceiling for two classes, kept for reference only
}

# Gradient-norm curves are drawn on a log axis; exact zeros (saturated
# regions) are clamped to this floor so the curve stays visible.
GRAD_NORM_FLOOR = 1e-18

_RC = {
    "figure.facecolor": "white",
    "savefig.facecolor": "white",
    "font.size": 9.0,
    "axes.titlesize": 10.0,
}

_SAVE = {"metadata": {"Software": None}}


class RangeClippedWarning(UserWarning):
    """Data falls outside the requested color range and will be clipped."""


def _check_range(metric: str, data: np.ndarray, lo: float, hi: float) -> bool:
    clipped = bool(data.min() < lo - 1e-12 or data.max() > hi + 1e-12)
    if clipped:
        warnings.warn(
            f"{metric} values span [{data.min():.6g}, {data.max():.6g}], "
            f"outside the color range [{lo:.6g}, {hi:.6g}]; display clips",
            RangeClippedWarning,
            stacklevel=3,
        )
    return clipped


def _overlay(ax, data_csv: str) -> None:
    features, labels = read_dataset_csv(data_csv)
    for label, marker, color in ((0, "o", "#1f3b70"), (1, "^", "#b5451f")):
        mask = labels == label
        ax.scatter(
            features[mask, 0],
            features[mask, 1],
            s=8,
            marker=marker,
            c=color,
            linewidths=0.3,
            edgecolors="white",
            label=f"class {label}",
        )
    ax.legend(loc="upper right", framealpha=0.9)


def render_surface(
    surface_csv: str,
    out_path: str,
    metric: str = "predictive_entropy",
    which: str = "value",
    value_range: tuple[float, float] | None = None,
    data_csv: str | None = None,
    dpi: int = 150,
) -> dict:
    """Heat map of one metric column (``which='value'``) or its gradient
    norm column (``which='grad'``).  Values use the purple family and the
    published default ranges; gradients use the green family and an
    auto range unless overridden."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if which not in ("value", "grad"):
        raise ValueError("which must be 'value' or 'grad'")
    surface = read_surface_csv(surface_csv)
    column = metric if which == "value" else f"grad_{metric}"
    grid = surface.grid(column)
    if which == "value":
        lo, hi = value_range if value_range else DEFAULT_RANGES[metric]
        cmap = UNCERTAINTY_CMAP
    else:
        lo, hi = value_range if value_range else (0.0, max(float(grid.max()), 1e-12))
        cmap = GRADIENT_CMAP
    if not lo < hi:
        raise ValueError(f"range must satisfy lo < hi, got ({lo}, {hi})")
    clipped = _check_range(column, grid, lo, hi)

    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.2, 4.2), dpi=dpi)
        image = ax.imshow(
            grid,
            origin="lower",
            extent=surface.extent,
            cmap=cmap,
            vmin=lo,
            vmax=hi,
            aspect="auto",
            interpolation="nearest",
        )
        fig.colorbar(image, ax=ax, label=column)
        if data_csv:
            _overlay(ax, data_csv)
        ax.set_xlabel("x0")
        ax.set_ylabel("x1")
        ax.set_title(column)
        fig.tight_layout()
        fig.savefig(out_path, dpi=dpi, **_SAVE)
        plt.close(fig)
    return {
        "column": column,
        "range": (lo, hi),
        "clipped": clipped,
        "resolution": surface.resolution,
    }


def _region_indices(surface: SurfaceTable) -> tuple[np.ndarray, int]:
    """Cells mapped to first-appearance region indices (deterministic)."""
    flat = surface.columns["sig_hash"]
    order: dict[int, int] = {}
    indices = np.empty(flat.shape[0], dtype=np.int64)
    for i, h in enumerate(flat):
        key = int(h)
        if key not in order:
            order[key] = len(order)
        indices[i] = order[key]
    return indices.reshape(surface.resolution, surface.resolution), len(order)


def render_regions(surface_csv: str, out_path: str, dpi: int = 150) -> dict:
    """Categorical map of the signature-hash column; boundaries emerge where
    the hash changes.  The legend states the distinct-region count."""
    surface = read_surface_csv(surface_csv)
    indices, n_regions = _region_indices(surface)
    base = plt.get_cmap("tab20").colors
    cmap = ListedColormap([base[i % len(base)] for i in range(max(n_regions, 1))])

    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.2, 4.2), dpi=dpi)
        ax.imshow(
            indices,
            origin="lower",
            extent=surface.extent,
            cmap=cmap,
            vmin=-0.5,
            vmax=max(n_regions, 1) - 0.5,
            aspect="auto",
            interpolation="nearest",
        )
        handle = Line2D([], [], marker="s", linestyle="", color=base[0])
        ax.legend([handle], [f"{n_regions} regions"], loc="upper right", framealpha=0.9)
        ax.set_xlabel("x0")
        ax.set_ylabel("x1")
        ax.set_title("linear regions by activation signature")
        fig.tight_layout()
        fig.savefig(out_path, dpi=dpi, **_SAVE)
        plt.close(fig)
    return {"n_regions": n_regions, "resolution": surface.resolution}


def render_probe(trace_csv: str, out_path: str, dpi: int = 150) -> dict:
    """Metric values (top) and gradient norms (bottom, log-y) against the
    scaling factor on a log-x axis, with each instance's stabilization step
    marked as a vertical line."""
    trace: ProbeTable = read_probe_csv(trace_csv)
    betas = {k: trace.beta(k) for k in trace.sig_hash}

    with plt.rc_context(_RC):
        fig, (ax_v, ax_g) = plt.subplots(
            2, 1, figsize=(6.0, 5.6), dpi=dpi, sharex=True
        )
        for metric in METRICS:
            ax_v.plot(trace.alphas, trace.values[metric], label=metric, linewidth=1.2)
            clamped = np.maximum(trace.grad_norms[metric], GRAD_NORM_FLOOR)
            ax_g.plot(trace.alphas, clamped, label=metric, linewidth=1.2)
        for k, beta in betas.items():
            if beta is None:
                continue
            for ax in (ax_v, ax_g):
                ax.axvline(
                    trace.alphas[beta],
                    color="gray",
                    linestyle=":",
                    linewidth=0.9,
                )
            ax_v.annotate(
                f"beta[{k}]",
                (trace.alphas[beta], ax_v.get_ylim()[1]),
                fontsize=7,
                ha="left",
                va="top",
                color="gray",
            )
        ax_v.set_xscale("log")
        ax_g.set_yscale("log")
        ax_v.set_ylabel("metric value")
        ax_g.set_ylabel(f"gradient norm (floor {GRAD_NORM_FLOOR:g})")
        ax_g.set_xlabel("scaling factor")
        ax_v.legend(loc="upper right", fontsize=7)
        ax_v.set_title("probe trace")
        fig.tight_layout()
        fig.savefig(out_path, dpi=dpi, **_SAVE)
        plt.close(fig)
    return {"betas": betas, "steps": int(trace.alphas.shape[0])}
