"""Uncertainty metrics over instance sets and their analytic input gradients.

Predictions of an instance set aggregate by averaging the per-instance
softmax outputs.  Four scalar metrics are computed from a summary of those
probabilities (all entropies in nats):

* ``max_prob``             1 - max_c mean_c
* ``class_variance``       mean over classes of the population variance of
                           the per-instance probabilities
* ``predictive_entropy``   entropy of the mean distribution
* ``mutual_information``   predictive entropy minus mean instance entropy

Gradients with respect to the input use the local affine form of each
instance (logits = V x + a on the containing region) and the softmax
Jacobian d p_c / d f_c' = p_c (1{c=c'} - p_c'), so instance k contributes
``softmax_jacobian(p_k) @ V_k`` to the gradient of its probabilities.  When
a probability underflows to exactly 0 its gradient rows are exactly zero as
well, which makes the entropy gradient terms with ``log 0`` factors exact
zeros in the saturated limit; the code drops those terms explicitly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .affine import AffinePiece, linearize
from .nn import InstanceSet, forward_logits, softmax

METRICS = ("max_prob", "class_variance", "predictive_entropy", "mutual_information")
MI_ANOMALY_TOL = -1e-9


class BoundaryContactWarning(UserWarning):
    """An evaluation point touches an activation boundary; values are the
    one-sided limits under the strictly-positive activation convention."""


@dataclass(frozen=True)
class MetricValue:
    metric: str
    value: float
    gradient: np.ndarray | None = None
    boundary_contact: bool = False
    anomaly: bool = False

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.gradient is not None:
            grad = np.ascontiguousarray(self.gradient, dtype=np.float64)
            grad.setflags(write=False)
            object.__setattr__(self, "gradient", grad)


@dataclass(frozen=True)
class PredictiveSummary:
    """Per-instance probabilities (K, C) with their logits and mean."""

    logits: np.ndarray
    per_instance_probs: np.ndarray
    mean_probs: np.ndarray

    def __post_init__(self) -> None:
        logits = np.ascontiguousarray(self.logits, dtype=np.float64)
        probs = np.ascontiguousarray(self.per_instance_probs, dtype=np.float64)
        mean = np.ascontiguousarray(self.mean_probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[1] < 2:
            raise ValueError("per-instance probabilities must be (K, C) with C >= 2")
        if logits.shape != probs.shape or mean.shape != (probs.shape[1],):
            raise ValueError("summary shapes are inconsistent")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("probability rows must sum to 1 within 1e-9")
        for arr in (logits, probs, mean):
            arr.setflags(write=False)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "per_instance_probs", probs)
        object.__setattr__(self, "mean_probs", mean)

    @property
    def k(self) -> int:
        return self.per_instance_probs.shape[0]

    @property
    def num_classes(self) -> int:
        return self.per_instance_probs.shape[1]

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "PredictiveSummary":
        logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
        probs = softmax(logits)
        return cls(logits, probs, probs.mean(axis=0))

    @classmethod
    def from_probs(cls, probs: np.ndarray, logits: np.ndarray | None = None) -> "PredictiveSummary":
        probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
        if logits is None:
            logits = np.zeros_like(probs)
        return cls(logits, probs, probs.mean(axis=0))


def summarize(instance_set: InstanceSet, x: np.ndarray) -> PredictiveSummary:
    """Forward every effective instance at ``x`` and collect probabilities."""
    logits = np.stack(
        [forward_logits(inst, x) for inst in instance_set.effective_instances()]
    )
    return PredictiveSummary.from_logits(logits)


def _xlogx_sum(p: np.ndarray) -> float:
    """sum p log p with the 0 log 0 := 0 convention."""
    positive = p[p > 0.0]
    return float(np.sum(positive * np.log(positive)))


def _entropy(p: np.ndarray) -> float:
    return -_xlogx_sum(p)


def max_prob_uncertainty(summary: PredictiveSummary) -> MetricValue:
    """1 minus the largest mean class probability."""
    return MetricValue("max_prob", 1.0 - float(summary.mean_probs.max()))


def class_variance(summary: PredictiveSummary) -> MetricValue:
    """Mean over classes of the population variance across instances."""
    probs = summary.per_instance_probs
    var = np.mean(probs * probs, axis=0) - summary.mean_probs**2
    return MetricValue("class_variance", float(np.mean(var)))


def predictive_entropy(summary: PredictiveSummary) -> MetricValue:
    """Entropy (nats) of the mean distribution."""
    return MetricValue("predictive_entropy", _entropy(summary.mean_probs))


def mutual_information(summary: PredictiveSummary) -> MetricValue:
    """Predictive entropy minus the mean per-instance entropy.

    Mathematically non-negative; tiny negative float residue is reported
    raw, with values below -1e-9 flagged as a numerical anomaly.
    """
    mean_instance_entropy = float(
        np.mean([_entropy(row) for row in summary.per_instance_probs])
    )
    value = _entropy(summary.mean_probs) - mean_instance_entropy
    return MetricValue("mutual_information", value, anomaly=value < MI_ANOMALY_TOL)


_METRIC_FNS = {
    "max_prob": max_prob_uncertainty,
    "class_variance": class_variance,
    "predictive_entropy": predictive_entropy,
    "mutual_information": mutual_information,
}


def metric_value(summary: PredictiveSummary, metric: str) -> MetricValue:
    try:
        fn = _METRIC_FNS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}") from None
    return fn(summary)


def all_metric_values(summary: PredictiveSummary) -> dict[str, MetricValue]:
    return {name: fn(summary) for name, fn in _METRIC_FNS.items()}


def softmax_jacobian(probs: np.ndarray) -> np.ndarray:
    """d softmax_c / d logit_c' = p_c (1{c=c'} - p_c'), shape (C, C).

    Saturated inputs (entries exactly 0 or 1) give exactly zero rows and
    columns, so downstream gradients vanish exactly in the saturated limit.
    """
    probs = np.asarray(probs, dtype=np.float64)
    return np.diag(probs) - np.outer(probs, probs)


def gradients_from_pieces(
    probs: np.ndarray, matrices: list[np.ndarray] | tuple[np.ndarray, ...]
) -> dict[str, np.ndarray]:
    """Input gradients of all four metrics from per-instance local pieces.

    ``probs`` is (K, C); ``matrices[k]`` is instance k's local V of shape
    (C, D).  Entropy-style terms skip classes with exactly zero probability:
    their probability gradients are exactly zero (zero softmax-Jacobian
    rows), so the skipped products are the exact limits.
    """
    probs = np.asarray(probs, dtype=np.float64)
    k, c = probs.shape
    d = matrices[0].shape[1]
    grads = np.empty((k, c, d), dtype=np.float64)
    for i in range(k):
        grads[i] = softmax_jacobian(probs[i]) @ matrices[i]
    grad_mean = grads.mean(axis=0)
    mean = probs.mean(axis=0)

    out: dict[str, np.ndarray] = {}
    out["max_prob"] = -grad_mean[int(np.argmax(mean))]

    weighted = np.einsum("kc,kcd->cd", probs, grads) * (2.0 / k)
    out["class_variance"] = (weighted - 2.0 * mean[:, None] * grad_mean).sum(axis=0) / c

    log_terms = np.zeros(c, dtype=np.float64)
    positive = mean > 0.0
    log_terms[positive] = 1.0 + np.log(mean[positive])
    grad_entropy = -(log_terms[:, None] * grad_mean).sum(axis=0)
    out["predictive_entropy"] = grad_entropy

    instance_terms = np.zeros((k, c), dtype=np.float64)
    pos = probs > 0.0
    instance_terms[pos] = 1.0 + np.log(probs[pos])
    mean_instance_grad = -np.einsum("kc,kcd->d", instance_terms, grads) / k
    out["mutual_information"] = grad_entropy - mean_instance_grad
    return out


def _pieces_at(instance_set: InstanceSet, x: np.ndarray) -> list[AffinePiece]:
    return [linearize(inst, x) for inst in instance_set.effective_instances()]


def metric_gradient(instance_set: InstanceSet, metric: str, x: np.ndarray) -> np.ndarray:
    """Analytic input gradient of one metric at ``x``.

    Boundary contact of any instance raises :class:`BoundaryContactWarning`;
    the returned gradient is then the one-sided value at the exact input.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    evaluation = evaluate_point(instance_set, x)
    return evaluation.gradients[metric]


@dataclass(frozen=True)
class PointEvaluation:
    """Everything the metrics know about one input point."""

    summary: PredictiveSummary
    values: dict[str, float]
    gradients: dict[str, np.ndarray]
    boundary_contact: bool
    saturated: bool
    signature_hashes: tuple[int, ...]
    zero_entry: bool
    mi_anomaly: bool


def evaluate_point(instance_set: InstanceSet, x: np.ndarray) -> PointEvaluation:
    """Metric values and gradients plus region diagnostics at one point."""
    x = np.asarray(x, dtype=np.float64)
    pieces = _pieces_at(instance_set, x)
    summary = summarize(instance_set, x)
    boundary = any(piece.boundary_contact for piece in pieces)
    if boundary:
        warnings.warn(
            "evaluation point touches an activation boundary; reporting "
            "one-sided values",
            BoundaryContactWarning,
            stacklevel=2,
        )
    values_all = all_metric_values(summary)
    gradients = gradients_from_pieces(
        summary.per_instance_probs, [piece.matrix for piece in pieces]
    )
    probs = summary.per_instance_probs
    saturated = bool(np.any(probs.max(axis=1) == 1.0))
    zero_entry = any(bool(np.any(piece.matrix == 0.0)) for piece in pieces)
    return PointEvaluation(
        summary=summary,
        values={name: mv.value for name, mv in values_all.items()},
        gradients=gradients,
        boundary_contact=boundary,
        saturated=saturated,
        signature_hashes=tuple(piece.signature.hash64() for piece in pieces),
        zero_entry=zero_entry,
        mi_anomaly=values_all["mutual_information"].anomaly,
    )
