"""Deterministic figure rendering for published CSV exports.

Three figure families: metric/gradient heat maps over a 2-D grid, categorical
linear-region maps from signature hashes, and metric-vs-scaling-factor probe
curves.  Pure presentation: no metric is ever recomputed here.
"""

from .io import (
    METRICS,
    EmptyTraceError,
    MissingColumnError,
    ProbeTable,
    SurfaceTable,
    read_dataset_csv,
    read_probe_csv,
    read_surface_csv,
)
from .render import (
    DEFAULT_RANGES,
    GRAD_NORM_FLOOR,
    GRADIENT_CMAP,
    UNCERTAINTY_CMAP,
    RangeClippedWarning,
    render_probe,
    render_regions,
    render_surface,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RANGES",
    "EmptyTraceError",
    "GRAD_NORM_FLOOR",
    "GRADIENT_CMAP",
    "METRICS",
    "MissingColumnError",
    "ProbeTable",
    "RangeClippedWarning",
    "SurfaceTable",
    "UNCERTAINTY_CMAP",
    "read_dataset_csv",
    "read_probe_csv",
    "read_surface_csv",
    "render_probe",
    "render_regions",
    "render_surface",
]
