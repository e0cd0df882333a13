"""Two-moons dataset synthesis, deterministic splitting, and CSV round-trips.

Geometry: the upper arc is ``(cos t, sin t)`` and the lower arc is
``(1 - cos t, 0.5 - sin t)`` with ``t`` evenly spaced over [0, pi] inclusive
per arc.  Labels are 0 for the upper arc, 1 for the lower.  Gaussian noise of
a configurable standard deviation is added to both coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ._jsonio import atomic_write_text, format_float
from ._rng import SplitMix64


class DegenerateSplitError(ValueError):
    """A requested non-empty split would not contain every class."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (N, D) with integer labels (N,) in [0, num_classes)."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValueError(
                f"labels shape {labels.shape} does not match {features.shape[0]} rows"
            )
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]


def make_half_moons(n: int, noise: float, seed: int) -> Dataset:
    """Generate ``n`` two-moons points, ceil(n/2) upper and floor(n/2) lower.

    Identical ``(n, noise, seed)`` produce bit-identical datasets.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    n_upper = (n + 1) // 2
    n_lower = n // 2
    t_upper = np.linspace(0.0, np.pi, n_upper)
    t_lower = np.linspace(0.0, np.pi, n_lower)
    features = np.empty((n, 2), dtype=np.float64)
    features[:n_upper, 0] = np.cos(t_upper)
    features[:n_upper, 1] = np.sin(t_upper)
    features[n_upper:, 0] = 1.0 - np.cos(t_lower)
    features[n_upper:, 1] = 0.5 - np.sin(t_lower)
    labels = np.concatenate(
        [np.zeros(n_upper, dtype=np.int64), np.ones(n_lower, dtype=np.int64)]
    )
    rng = SplitMix64(seed)
    features += noise * rng.normal(2 * n).reshape(n, 2)
    meta = {"generator": "half_moons", "n": n, "noise": noise, "seed": seed}
    return Dataset(features, labels, num_classes=2, meta=meta)


def split(
    dataset: Dataset, n_train: int, n_val: int, seed: int
) -> tuple[Dataset, Dataset]:
    """Disjoint shuffled train/val split by a seeded permutation.

    Every non-empty side must receive at least one point of each class;
    an empty side is allowed only when zero points were requested for it.
    """
    if n_train < 0 or n_val < 0:
        raise ValueError("split sizes must be non-negative")
    if n_train + n_val > len(dataset):
        raise ValueError(
            f"requested {n_train}+{n_val} points from a dataset of {len(dataset)}"
        )
    perm = SplitMix64(seed).permutation(len(dataset))
    idx_train = perm[:n_train]
    idx_val = perm[n_train : n_train + n_val]
    parts = []
    for name, idx in (("train", idx_train), ("val", idx_val)):
        labels = dataset.labels[idx]
        if idx.size and len(np.unique(labels)) < dataset.num_classes:
            raise DegenerateSplitError(
                f"{name} split of size {idx.size} does not contain every class"
            )
        meta = dict(dataset.meta)
        meta.update({"split": name, "split_seed": seed})
        parts.append(
            Dataset(dataset.features[idx], labels, dataset.num_classes, meta)
        )
    return parts[0], parts[1]


def save_csv(dataset: Dataset, path: str) -> None:
    """Write ``x0,x1,label`` rows with 17-significant-digit coordinates."""
    if dataset.input_dim != 2:
        raise ValueError("CSV export is defined for 2-D features")
    lines = ["x0,x1,label"]
    for (x0, x1), label in zip(dataset.features, dataset.labels):
        lines.append(f"{format_float(x0)},{format_float(x1)},{int(label)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_csv(path: str) -> Dataset:
    """Read a dataset written by :func:`save_csv`.  Round-trips are bit-exact."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "x0,x1,label":
            raise ValueError(f"unexpected dataset CSV header: {header!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"malformed dataset row at line {lineno}: {line!r}")
            try:
                rows.append((float(parts[0]), float(parts[1]), int(parts[2])))
            except ValueError as exc:
                raise ValueError(f"malformed dataset row at line {lineno}") from exc
    if not rows:
        raise ValueError("dataset CSV contains no rows")
    features = np.array([[r[0], r[1]] for r in rows], dtype=np.float64)
    labels = np.array([r[2] for r in rows], dtype=np.int64)
    num_classes = max(2, int(labels.max()) + 1)
    meta = {"generator": "csv", "path": str(path), "n": len(rows)}
    return Dataset(features, labels, num_classes, meta)


def arc_means(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free per-class means of the parametric arcs for ``n`` points."""
    n_upper = (n + 1) // 2
    n_lower = n // 2
    t_u = np.linspace(0.0, math.pi, n_upper)
    t_l = np.linspace(0.0, math.pi, n_lower)
    upper = np.array([np.mean(np.cos(t_u)), np.mean(np.sin(t_u))])
    lower = np.array([np.mean(1.0 - np.cos(t_l)), np.mean(0.5 - np.sin(t_l))])
    return upper, lower
