"""Uncertainty surfaces: metric values and gradients over a 2-D grid.

Cells are evaluated at their centers; the grid is stored flat in row-major
order (x1 rows outer, x0 columns inner), matching the CSV layout.  Values
come from exactly the same per-point code paths as the uncertainty module,
so spot recomputation reproduces cells bit for bit.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np

from ._jsonio import atomic_write_text, format_float
from .affine import fnv1a64
from .nn import InstanceSet
from .uncertainty import METRICS, BoundaryContactWarning, evaluate_point

DEFAULT_WINDOW = ((-2.0, 3.0), (-1.5, 2.0))

SURFACE_CSV_HEADER = (
    "x0,x1,max_prob,class_variance,predictive_entropy,mutual_information,"
    "grad_max_prob,grad_class_variance,grad_predictive_entropy,"
    "grad_mutual_information,sig_hash,zero_entry,saturated"
)


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned evaluation window with ``resolution`` cells per axis."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    resolution: int

    def __post_init__(self) -> None:
        x_range = (float(self.x_range[0]), float(self.x_range[1]))
        y_range = (float(self.y_range[0]), float(self.y_range[1]))
        if not (x_range[0] < x_range[1] and y_range[0] < y_range[1]):
            raise ValueError("window bounds must satisfy lo < hi")
        if self.resolution < 1:
            raise ValueError("resolution must be at least 1")
        object.__setattr__(self, "x_range", x_range)
        object.__setattr__(self, "y_range", y_range)
        object.__setattr__(self, "resolution", int(self.resolution))

    @property
    def n_cells(self) -> int:
        return self.resolution * self.resolution

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates along x0 and x1."""
        res = self.resolution
        xs = self.x_range[0] + (np.arange(res) + 0.5) * (
            self.x_range[1] - self.x_range[0]
        ) / res
        ys = self.y_range[0] + (np.arange(res) + 0.5) * (
            self.y_range[1] - self.y_range[0]
        ) / res
        return xs, ys

    def cell_points(self) -> np.ndarray:
        """All cell centers, shape (resolution**2, 2), row-major (x1 outer)."""
        xs, ys = self.centers()
        grid_x, grid_y = np.meshgrid(xs, ys)
        return np.column_stack([grid_x.ravel(), grid_y.ravel()])


@dataclass(frozen=True)
class GridSurface:
    """Flat per-cell arrays in the grid's row-major order."""

    spec: GridSpec
    k: int
    values: dict[str, np.ndarray]
    grad_norms: dict[str, np.ndarray]
    gradients: dict[str, np.ndarray]
    sig_hash: np.ndarray
    per_instance_hashes: np.ndarray
    zero_entry: np.ndarray
    boundary: np.ndarray
    saturated: np.ndarray

    def cell_index(self, ix: int, iy: int) -> int:
        return iy * self.spec.resolution + ix


def _combined_hash(instance_hashes: tuple[int, ...]) -> int:
    """Single region id per cell: FNV-1a over the per-instance signature
    hashes rendered in order (equals the instance hash when K = 1)."""
    if len(instance_hashes) == 1:
        return instance_hashes[0]
    return fnv1a64(",".join(str(h) for h in instance_hashes))


def evaluate_grid(
    instance_set: InstanceSet, spec: GridSpec, threads: int = 1
) -> GridSurface:
    """Evaluate metrics, gradients, and region diagnostics on every cell.

    ``threads`` > 1 splits cells across a thread pool; results are assembled
    by index so the output is identical regardless of thread count.
    Boundary-contact cells are flagged rather than warned about.
    """
    if instance_set.input_dim != 2:
        raise ValueError("grid evaluation is defined for 2-D inputs")
    if threads < 1:
        raise ValueError("threads must be at least 1")
    points = spec.cell_points()
    n = points.shape[0]
    values = {m: np.empty(n, dtype=np.float64) for m in METRICS}
    grad_norms = {m: np.empty(n, dtype=np.float64) for m in METRICS}
    gradients = {m: np.empty((n, 2), dtype=np.float64) for m in METRICS}
    sig_hash = np.empty(n, dtype=np.uint64)
    per_instance = np.empty((n, instance_set.k), dtype=np.uint64)
    zero_entry = np.empty(n, dtype=bool)
    boundary = np.empty(n, dtype=bool)
    saturated = np.empty(n, dtype=bool)

    def eval_cell(i: int) -> None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryContactWarning)
            ev = evaluate_point(instance_set, points[i])
        for m in METRICS:
            values[m][i] = ev.values[m]
            gradients[m][i] = ev.gradients[m]
            grad_norms[m][i] = float(np.linalg.norm(ev.gradients[m]))
        sig_hash[i] = _combined_hash(ev.signature_hashes)
        per_instance[i] = ev.signature_hashes
        zero_entry[i] = ev.zero_entry
        boundary[i] = ev.boundary_contact
        saturated[i] = ev.saturated

    if threads == 1:
        for i in range(n):
            eval_cell(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(eval_cell, range(n)))

    return GridSurface(
        spec=spec,
        k=instance_set.k,
        values=values,
        grad_norms=grad_norms,
        gradients=gradients,
        sig_hash=sig_hash,
        per_instance_hashes=per_instance,
        zero_entry=zero_entry,
        boundary=boundary,
        saturated=saturated,
    )


def zero_entry_fraction(surface: GridSurface) -> float:
    """Fraction of cells where some instance's local matrix has an exact
    zero entry."""
    return float(np.mean(surface.zero_entry))


def region_count(surface: GridSurface) -> int:
    """Number of distinct cell region ids (distinct signatures for K = 1)."""
    return int(np.unique(surface.sig_hash).size)


def export_surface_csv(surface: GridSurface, path: str) -> None:
    """Write the pinned per-cell CSV in the grid's row-major order."""
    points = surface.spec.cell_points()
    lines = [SURFACE_CSV_HEADER]
    for i in range(points.shape[0]):
        fields = [format_float(points[i, 0]), format_float(points[i, 1])]
        fields += [format_float(surface.values[m][i]) for m in METRICS]
        fields += [format_float(surface.grad_norms[m][i]) for m in METRICS]
        fields.append(str(int(surface.sig_hash[i])))
        fields.append(str(int(surface.zero_entry[i])))
        fields.append(str(int(surface.saturated[i])))
        lines.append(",".join(fields))
    atomic_write_text(path, "\n".join(lines) + "\n")


def surface_summary(surface: GridSurface) -> dict[str, Any]:
    return {
        "resolution": surface.spec.resolution,
        "window": [list(surface.spec.x_range), list(surface.spec.y_range)],
        "k": surface.k,
        "zero_entry_fraction": zero_entry_fraction(surface),
        "region_count": region_count(surface),
        "boundary_cells": int(np.count_nonzero(surface.boundary)),
        "saturated_cells": int(np.count_nonzero(surface.saturated)),
    }
