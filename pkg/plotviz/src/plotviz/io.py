"""Readers for the published CSV formats.

All numeric arrays are returned write-protected: this package presents the
numbers, it never edits them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

METRICS = (
    "max_prob",
    "class_variance",
    "predictive_entropy",
    "mutual_information",
)

SURFACE_COLUMNS = (
    "x0",
    "x1",
    *METRICS,
    *(f"grad_{m}" for m in METRICS),
    "sig_hash",
    "zero_entry",
    "saturated",
)


class MissingColumnError(ValueError):
    """An expected CSV column is absent."""


class EmptyTraceError(ValueError):
    """A probe trace file contains no data rows."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SurfaceTable:
    """One surface CSV: flat row-major cells (x1 outer) plus the 2-D views."""

    resolution: int
    x0_centers: np.ndarray
    x1_centers: np.ndarray
    columns: dict[str, np.ndarray]

    def grid(self, column: str) -> np.ndarray:
        """Column reshaped to (resolution, resolution), rows indexed by x1."""
        if column not in self.columns:
            raise MissingColumnError(f"surface has no column {column!r}")
        return self.columns[column].reshape(self.resolution, self.resolution)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """Cell-edge bounding box for image plotting."""
        dx = float(self.x0_centers[1] - self.x0_centers[0]) if self.resolution > 1 else 1.0
        dy = float(self.x1_centers[1] - self.x1_centers[0]) if self.resolution > 1 else 1.0
        return (
            float(self.x0_centers[0]) - dx / 2,
            float(self.x0_centers[-1]) + dx / 2,
            float(self.x1_centers[0]) - dy / 2,
            float(self.x1_centers[-1]) + dy / 2,
        )


def read_surface_csv(path: str) -> SurfaceTable:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"{path} is empty")
    header = lines[0].split(",")
    for needed in SURFACE_COLUMNS:
        if needed not in header:
            raise MissingColumnError(f"{path} lacks column {needed!r}")
    index = {name: header.index(name) for name in header}
    rows = [line.split(",") for line in lines[1:]]
    if not rows:
        raise ValueError(f"{path} has a header but no cells")
    n = len(rows)
    res = math.isqrt(n)
    if res * res != n:
        raise ValueError(f"{path} has {n} cells, not a square grid")

    def column(name: str, dtype) -> np.ndarray:
        return _frozen(np.array([r[index[name]] for r in rows], dtype=dtype))

    columns: dict[str, np.ndarray] = {}
    for name in SURFACE_COLUMNS:
        if name == "sig_hash":
            columns[name] = column(name, np.uint64)
        elif name in ("zero_entry", "saturated"):
            columns[name] = _frozen(column(name, np.int64).astype(bool))
        else:
            columns[name] = column(name, np.float64)
    x0 = columns["x0"][: res]
    x1 = columns["x1"][:: res]
    return SurfaceTable(
        resolution=res,
        x0_centers=_frozen(x0.copy()),
        x1_centers=_frozen(x1.copy()),
        columns=columns,
    )


@dataclass(frozen=True)
class ProbeTable:
    """One probe trace CSV.

    ``alphas`` is the schedule; per-instance arrays are keyed by instance
    index; the metric section carries one value and gradient-norm series per
    metric.
    """

    alphas: np.ndarray
    n_instances: int
    logits: dict[int, np.ndarray]  # (steps, C)
    sig_hash: dict[int, np.ndarray]
    zero_entry: dict[int, np.ndarray]
    values: dict[str, np.ndarray]
    grad_norms: dict[str, np.ndarray]

    def beta(self, instance: int) -> int | None:
        """First step from which the instance's hash column never changes;
        a final-step-only tail is not evidence (None), except for a
        single-step trace."""
        hashes = self.sig_hash[instance]
        n = hashes.shape[0]
        if n == 1:
            return 0
        beta = n - 1
        while beta > 0 and hashes[beta - 1] == hashes[-1]:
            beta -= 1
        return None if beta == n - 1 else beta


def read_probe_csv(path: str) -> ProbeTable:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise EmptyTraceError(f"{path} is empty")
    header = lines[0].split(",")
    if header[:2] != ["alpha", "instance"] or header[-2:] != ["sig_hash", "zero_entry"]:
        raise MissingColumnError(
            f"{path} first section must be alpha,instance,logit*,sig_hash,zero_entry"
        )
    n_logits = len(header) - 4
    if n_logits < 1:
        raise MissingColumnError(f"{path} has no logit columns")
    try:
        second = lines.index("alpha,metric,value,grad_norm")
    except ValueError:
        raise MissingColumnError(f"{path} lacks the metric section header") from None
    inst_rows = [line.split(",") for line in lines[1:second]]
    metric_rows = [line.split(",") for line in lines[second + 1 :]]
    if not inst_rows or not metric_rows:
        raise EmptyTraceError(f"{path} has headers but no steps")

    instances = sorted({int(r[1]) for r in inst_rows})
    alphas = sorted({float(r[0]) for r in inst_rows})
    step_of = {a: i for i, a in enumerate(alphas)}
    steps = len(alphas)
    logits = {k: np.empty((steps, n_logits)) for k in instances}
    sig_hash = {k: np.empty(steps, dtype=np.uint64) for k in instances}
    zero_entry = {k: np.empty(steps, dtype=bool) for k in instances}
    for r in inst_rows:
        i, k = step_of[float(r[0])], int(r[1])
        logits[k][i] = [float(v) for v in r[2 : 2 + n_logits]]
        sig_hash[k][i] = int(r[2 + n_logits])
        zero_entry[k][i] = bool(int(r[3 + n_logits]))

    values = {m: np.empty(steps) for m in METRICS}
    grad_norms = {m: np.empty(steps) for m in METRICS}
    for r in metric_rows:
        alpha, metric = float(r[0]), r[1]
        if metric not in values:
            raise ValueError(f"{path} has unknown metric {metric!r}")
        values[metric][step_of[alpha]] = float(r[2])
        grad_norms[metric][step_of[alpha]] = float(r[3])

    return ProbeTable(
        alphas=_frozen(np.array(alphas)),
        n_instances=len(instances),
        logits={k: _frozen(v) for k, v in logits.items()},
        sig_hash={k: _frozen(v) for k, v in sig_hash.items()},
        zero_entry={k: _frozen(v) for k, v in zero_entry.items()},
        values={m: _frozen(v) for m, v in values.items()},
        grad_norms={m: _frozen(v) for m, v in grad_norms.items()},
    )


def read_dataset_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """``x0,x1,label`` rows -> (features (n, 2), labels (n,))."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != "x0,x1,label":
        raise MissingColumnError(f"{path} must start with header x0,x1,label")
    rows = [line.split(",") for line in lines[1:]]
    features = _frozen(np.array([[float(r[0]), float(r[1])] for r in rows]))
    labels = _frozen(np.array([int(r[2]) for r in rows], dtype=np.int64))
    return features, labels
