"""Self-tests behind ``relulimits check``.

Each check returns a dict with ``name``, ``passed``, and a short ``detail``
string (empty when passing).  They are deliberately cheap: a loaded
checkpoint plus a few hundred random points.
"""

from __future__ import annotations

import warnings
from typing import Any

import numpy as np

from ._rng import SplitMix64
from .affine import fd_jacobian, linearize
from .nn import InstanceSet, forward_logits, softmax
from .uncertainty import (
    METRICS,
    MI_ANOMALY_TOL,
    PredictiveSummary,
    class_variance,
    mutual_information,
    predictive_entropy,
)


def _sample_points(rng: SplitMix64, n: int, dim: int, lo: float = -3.0, hi: float = 3.0) -> np.ndarray:
    return lo + (hi - lo) * rng.uniform(n * dim).reshape(n, dim)


def check_linearization_exact(instance_set: InstanceSet, seed: int, n: int = 200) -> dict[str, Any]:
    """Piece evaluation must match the forward pass to 1e-9 everywhere."""
    rng = SplitMix64(seed).fork("lin")
    points = _sample_points(rng, n, instance_set.input_dim)
    worst = 0.0
    for params in instance_set.effective_instances():
        for x in points:
            piece = linearize(params, x)
            gap = float(np.max(np.abs(piece(x) - forward_logits(params, x))))
            worst = max(worst, gap)
    passed = worst <= 1e-9
    return {
        "name": "linearization_exact",
        "passed": passed,
        "detail": "" if passed else f"max |piece - forward| = {worst:.3e}",
    }


def check_jacobian_fd(instance_set: InstanceSet, seed: int, n: int = 25) -> dict[str, Any]:
    """The piece matrix must agree with a finite-difference Jacobian."""
    rng = SplitMix64(seed).fork("fd")
    points = _sample_points(rng, n, instance_set.input_dim)
    worst = 0.0
    for params in instance_set.effective_instances():
        for x in points:
            piece = linearize(params, x)
            fd = fd_jacobian(params, x)
            scale = max(1.0, float(np.max(np.abs(piece.matrix))))
            gap = float(np.max(np.abs(piece.matrix - fd))) / scale
            worst = max(worst, gap)
    passed = worst <= 1e-4
    return {
        "name": "jacobian_matches_fd",
        "passed": passed,
        "detail": "" if passed else f"max relative gap = {worst:.3e}",
    }


def check_softmax_shift_invariance(seed: int, n: int = 500) -> dict[str, Any]:
    rng = SplitMix64(seed).fork("shift")
    logits = 10.0 * rng.normal(n * 2).reshape(n, 2)
    shifts = 100.0 * rng.normal(n)
    worst = 0.0
    for z, c in zip(logits, shifts):
        gap = float(np.max(np.abs(softmax(z + c) - softmax(z))))
        worst = max(worst, gap)
    passed = worst <= 1e-12
    return {
        "name": "softmax_shift_invariance",
        "passed": passed,
        "detail": "" if passed else f"max shift gap = {worst:.3e}",
    }


def check_sigmoid_equivalence(seed: int, n: int = 500) -> dict[str, Any]:
    """Two-class softmax must equal the sigmoid of the logit difference."""
    rng = SplitMix64(seed).fork("sigm")
    logits = 20.0 * rng.normal(n * 2).reshape(n, 2)
    worst = 0.0
    for z in logits:
        p1 = softmax(z)[1]
        d = z[1] - z[0]
        sig = 1.0 / (1.0 + np.exp(-d)) if d >= 0 else np.exp(d) / (1.0 + np.exp(d))
        worst = max(worst, abs(p1 - float(sig)))
    passed = worst <= 1e-12
    return {
        "name": "sigmoid_equivalence",
        "passed": passed,
        "detail": "" if passed else f"max |softmax - sigmoid| = {worst:.3e}",
    }


def check_metric_identities(seed: int) -> dict[str, Any]:
    """Closed-form values on hand-built prob tables."""
    failures = []
    half = np.array([0.5, 0.5])
    ent = predictive_entropy(PredictiveSummary.from_probs(np.stack([half, half]))).value
    if abs(ent - np.log(2.0)) > 1e-12:
        failures.append(f"uniform entropy {ent!r} != ln 2")
    mi_same = mutual_information(
        PredictiveSummary.from_probs(np.tile([0.3, 0.7], (5, 1)))
    ).value
    if abs(mi_same) > 1e-12:
        failures.append(f"identical-instance MI {mi_same!r} != 0")
    polar = np.array([[1.0, 0.0], [0.0, 1.0]])
    var = class_variance(PredictiveSummary.from_probs(polar)).value
    if abs(var - 0.25) > 1e-12:
        failures.append(f"polarized variance {var!r} != 0.25")
    rng = SplitMix64(seed).fork("mi")
    for _ in range(200):
        raw = rng.uniform(8 * 2).reshape(8, 2) + 1e-6
        probs = raw / raw.sum(axis=1, keepdims=True)
        mi = mutual_information(PredictiveSummary.from_probs(probs)).value
        if mi < MI_ANOMALY_TOL:
            failures.append(f"MI anomaly {mi!r}")
            break
    passed = not failures
    return {
        "name": "metric_identities",
        "passed": passed,
        "detail": "; ".join(failures),
    }


def check_metrics_finite(instance_set: InstanceSet, seed: int, n: int = 50) -> dict[str, Any]:
    """All four metrics evaluate finite on random in-window points."""
    from .uncertainty import BoundaryContactWarning, evaluate_point

    rng = SplitMix64(seed).fork("fin")
    points = _sample_points(rng, n, instance_set.input_dim)
    bad = ""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryContactWarning)
        for x in points:
            ev = evaluate_point(instance_set, x)
            for m in METRICS:
                v = ev.values[m]
                if not np.isfinite(v):
                    bad = f"{m} at {x.tolist()} is {v!r}"
                    break
            if bad:
                break
    return {"name": "metrics_finite", "passed": not bad, "detail": bad}


def run_self_checks(instance_set: InstanceSet, seed: int = 0) -> list[dict[str, Any]]:
    return [
        check_linearization_exact(instance_set, seed),
        check_jacobian_fd(instance_set, seed),
        check_softmax_shift_invariance(seed),
        check_sigmoid_equivalence(seed),
        check_metric_identities(seed),
        check_metrics_finite(instance_set, seed),
    ]
