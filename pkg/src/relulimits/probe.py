"""Axis-aligned scaling probes and empirical limit verification.

A probe multiplies one coordinate of a base point by a growing factor
``alpha`` (optionally with flipped sign) while holding the others fixed, and
records per step: each instance's local affine piece, signature hash, logits
computed through that piece (``V x + a``), probabilities, the four
uncertainty metrics of the set, and the analytic gradient norms.

Far enough out, every instance's activation signature stops changing -- the
ray has entered an unbounded activation region -- after which the logits are
exactly affine in ``alpha``.  If the limiting piece's matrix has no zero
entries, the per-class logit growth rates are generically distinct, the
softmax saturates to a one-hot vector, and every metric converges with its
gradient decaying to zero.  The verifiers below check those statements
empirically at pinned tolerances and report when a probe is outside the
hypotheses (zero entries in the limiting matrix, no stabilization within the
schedule, duplicate entries in the scaled column).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ._jsonio import atomic_write_text, dumps, format_float
from ._rng import SplitMix64
from .affine import AffinePiece, duplicate_column_audit, linearize, zero_entry_audit
from .nn import InstanceSet, forward_logits, softmax
from .uncertainty import (
    METRICS,
    PredictiveSummary,
    all_metric_values,
    gradients_from_pieces,
)

DEFAULT_GRAD_TOL = 1e-8
DEFAULT_DRIFT_TOL = 1e-9
DEFAULT_TAIL_WINDOW = 4
ONE_HOT_TOL = 1e-9
MIN_VERDICT_STEPS = 8
# piece logits are cross-checked against direct forward up to this factor
FORWARD_CHECK_MAX_ALPHA = 16.0


def geometric_schedule(base: float = 2.0, count: int = 21) -> np.ndarray:
    """base**0 .. base**(count-1); the default covers 2^0 through 2^20."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if not (math.isfinite(base) and base > 1.0):
        raise ValueError("base must be a finite float above 1")
    return base ** np.arange(count, dtype=np.float64)


@dataclass(frozen=True)
class ScalingProbe:
    """One scaling experiment: which point, which coordinate, which way.

    ``direction`` is +1 or -1: step ``alpha`` evaluates the base point with
    coordinate ``dim`` replaced by ``direction * alpha * base_x[dim]``.
    Convergence verdicts need at least 8 schedule steps; shorter schedules
    still trace (useful for inspection) but cannot be verified.
    """

    base_x: np.ndarray
    dim: int
    direction: int
    schedule: np.ndarray

    def __post_init__(self) -> None:
        base = np.ascontiguousarray(self.base_x, dtype=np.float64)
        sched = np.ascontiguousarray(self.schedule, dtype=np.float64)
        if base.ndim != 1:
            raise ValueError("base_x must be a vector")
        if not (0 <= self.dim < base.shape[0]):
            raise ValueError(f"dim {self.dim} out of range for {base.shape[0]} coords")
        if base[self.dim] == 0.0:
            raise ValueError("base_x[dim] must be nonzero")
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")
        if sched.ndim != 1 or sched.size < 1:
            raise ValueError("schedule must be a non-empty vector")
        if np.any(~np.isfinite(sched)) or np.any(sched <= 0):
            raise ValueError("schedule entries must be positive finite")
        if sched.size > 1 and np.any(np.diff(sched) <= 0):
            raise ValueError("schedule must be strictly increasing")
        base.setflags(write=False)
        sched.setflags(write=False)
        object.__setattr__(self, "base_x", base)
        object.__setattr__(self, "schedule", sched)
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "direction", int(self.direction))

    def point_at(self, alpha: float) -> np.ndarray:
        x = self.base_x.copy()
        x[self.dim] = self.direction * alpha * self.base_x[self.dim]
        return x

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "base_x": [float(v) for v in self.base_x],
            "dim": self.dim,
            "direction": self.direction,
            "schedule": [float(a) for a in self.schedule],
        }


@dataclass(frozen=True)
class ProbeStep:
    """Everything recorded at one schedule step."""

    alpha: float
    x: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    pieces: tuple[AffinePiece, ...]
    signature_hashes: tuple[int, ...]
    zero_entry: tuple[bool, ...]
    boundary: tuple[bool, ...]
    metrics: dict[str, float]
    grad_norms: dict[str, float]
    saturated: bool
    overflowed: bool
    forward_gap: float | None


@dataclass(frozen=True)
class ProbeTrace:
    probe: ScalingProbe
    steps: tuple[ProbeStep, ...]
    k: int

    def hashes_of(self, instance: int) -> list[int]:
        return [step.signature_hashes[instance] for step in self.steps]


def _saturated_probs_from_rates(
    piece: AffinePiece, probe: ScalingProbe
) -> np.ndarray:
    """One-hot fallback for non-finite logits: the class whose logit grows
    fastest along the ray wins (ties broken by lowest index)."""
    rates = probe.direction * probe.base_x[probe.dim] * piece.matrix[:, probe.dim]
    probs = np.zeros(piece.matrix.shape[0], dtype=np.float64)
    probs[int(np.argmax(rates))] = 1.0
    return probs


def run_probe(instance_set: InstanceSet, probe: ScalingProbe) -> ProbeTrace:
    """Evaluate the probe at every schedule step.

    Logits go through each instance's local affine piece (and are checked
    against direct forward evaluation at small alpha, where the network
    arithmetic cannot have drifted); a step whose piece produces non-finite
    logits is marked overflowed and scored from its limiting one-hot
    pattern.
    """
    if probe.base_x.shape[0] != instance_set.input_dim:
        raise ValueError("probe dimensionality does not match the instance set")
    instances = instance_set.effective_instances()
    steps: list[ProbeStep] = []
    for alpha in probe.schedule:
        x = probe.point_at(float(alpha))
        pieces = tuple(linearize(inst, x) for inst in instances)
        # overflow to inf is detected and routed to the fallback, so the
        # intermediate warning carries no information
        with np.errstate(over="ignore"):
            logits = np.stack([piece(x) for piece in pieces])
            overflowed = not bool(np.all(np.isfinite(logits)))
            if overflowed:
                probs = np.stack(
                    [
                        softmax(piece(x))
                        if np.all(np.isfinite(piece(x)))
                        else _saturated_probs_from_rates(piece, probe)
                        for piece in pieces
                    ]
                )
            else:
                probs = softmax(logits)
        summary = PredictiveSummary.from_probs(
            probs, np.where(np.isfinite(logits), logits, 0.0)
        )
        metric_values = {name: mv.value for name, mv in all_metric_values(summary).items()}
        gradients = gradients_from_pieces(probs, [piece.matrix for piece in pieces])
        grad_norms = {
            name: float(np.linalg.norm(gradients[name])) for name in METRICS
        }
        forward_gap = None
        if alpha <= FORWARD_CHECK_MAX_ALPHA and not overflowed:
            direct = np.stack([forward_logits(inst, x) for inst in instances])
            forward_gap = float(np.max(np.abs(direct - logits)))
        steps.append(
            ProbeStep(
                alpha=float(alpha),
                x=x,
                logits=logits,
                probs=probs,
                pieces=pieces,
                signature_hashes=tuple(p.signature.hash64() for p in pieces),
                zero_entry=tuple(
                    zero_entry_audit(p).has_zero for p in pieces
                ),
                boundary=tuple(p.boundary_contact for p in pieces),
                metrics=metric_values,
                grad_norms=grad_norms,
                saturated=bool(np.any(probs.max(axis=1) == 1.0)),
                overflowed=overflowed,
                forward_gap=forward_gap,
            )
        )
    return ProbeTrace(probe=probe, steps=tuple(steps), k=len(instances))


def detect_stabilization_step(trace: ProbeTrace, instance: int) -> int | None:
    """Smallest step index from which the instance's signature hash never
    changes.  A constant tail of length one (the last step alone) does not
    demonstrate stabilization and returns None, except for the degenerate
    single-step trace where index 0 is returned."""
    hashes = trace.hashes_of(instance)
    n = len(hashes)
    if n == 1:
        return 0
    beta = n - 1
    while beta > 0 and hashes[beta - 1] == hashes[-1]:
        beta -= 1
    if beta == n - 1:
        return None
    return beta


@dataclass(frozen=True)
class InstanceVerdict:
    instance: int
    beta: int | None
    zero_entry: bool
    dup_column: bool

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "beta": self.beta,
            "zero_entry": self.zero_entry,
            "dup_col": self.dup_column,
        }


@dataclass(frozen=True)
class MetricVerdict:
    metric: str
    covered: bool
    converged: bool | None
    tail_grad: float
    final_grad: float
    tail_drift: float

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "converged": self.converged,
            "tail_grad": self.tail_grad,
            "final_grad": self.final_grad,
            "tail_drift": self.tail_drift,
        }


@dataclass(frozen=True)
class OneHotVerdict:
    """Single-instance one-hot limit check (serialized under ``prop2``)."""

    covered: bool
    reason: str | None
    winner_predicted: int | None
    winner_observed: int | None
    max_prob: float | None
    reached_one_hot: bool | None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "covered": self.covered,
            "reason": self.reason,
            "winner": self.winner_observed,
            "winner_predicted": self.winner_predicted,
            "max_prob": self.max_prob,
            "reached_one_hot": self.reached_one_hot,
        }


@dataclass(frozen=True)
class ProbeVerdict:
    probe: ScalingProbe
    per_instance: tuple[InstanceVerdict, ...]
    hypothesis_met: bool
    per_metric: dict[str, MetricVerdict]
    one_hot: OneHotVerdict
    grad_tol: float
    drift_tol: float
    tail_window: int

    @property
    def all_metrics_converged(self) -> bool | None:
        if not self.hypothesis_met:
            return None
        return all(v.converged for v in self.per_metric.values())

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "probe": self.probe.to_json_dict(),
            "covered": self.hypothesis_met,
            "per_instance": [iv.to_json_dict() for iv in self.per_instance],
            "per_metric": {m: v.to_json_dict() for m, v in self.per_metric.items()},
            "prop2": self.one_hot.to_json_dict(),
            "grad_tol": self.grad_tol,
            "drift_tol": self.drift_tol,
            "tail_window": self.tail_window,
        }


def predicted_winner(piece: AffinePiece, probe: ScalingProbe) -> int:
    """Class whose logit growth rate along the ray is largest.

    The rate of class c is ``direction * base_x[dim] * V[c, dim]``; the
    direction-signed comparison reduces to comparing ``V[:, dim]`` when the
    scaled coordinate heads to +infinity.
    """
    sign = probe.direction * (1.0 if probe.base_x[probe.dim] > 0 else -1.0)
    return int(np.argmax(sign * piece.matrix[:, probe.dim]))


def _one_hot_verdict(
    trace: ProbeTrace, verdicts: Sequence[InstanceVerdict]
) -> OneHotVerdict:
    if trace.k != 1:
        return OneHotVerdict(False, "requires a single-instance set", None, None, None, None)
    iv = verdicts[0]
    if iv.beta is None:
        return OneHotVerdict(False, "signature did not stabilize", None, None, None, None)
    if iv.zero_entry:
        return OneHotVerdict(False, "limiting matrix has zero entries", None, None, None, None)
    if iv.dup_column:
        return OneHotVerdict(
            False, "duplicate entries in the scaled column", None, None, None, None
        )
    final = trace.steps[-1]
    piece = final.pieces[0]
    predicted = predicted_winner(piece, trace.probe)
    observed = int(np.argmax(final.probs.mean(axis=0)))
    max_prob = float(final.probs.mean(axis=0).max())
    return OneHotVerdict(
        covered=True,
        reason=None,
        winner_predicted=predicted,
        winner_observed=observed,
        max_prob=max_prob,
        reached_one_hot=max_prob >= 1.0 - ONE_HOT_TOL,
    )


def verify_metric_convergence(
    trace: ProbeTrace,
    grad_tol: float = DEFAULT_GRAD_TOL,
    drift_tol: float = DEFAULT_DRIFT_TOL,
    tail_window: int = DEFAULT_TAIL_WINDOW,
) -> ProbeVerdict:
    """Convergence verdict over the trace tail.

    Coverage (the hypotheses): every instance's signature stabilizes within
    the schedule and its limiting matrix has no exactly-zero entries.  A
    covered metric converged iff every tail-step gradient norm is <=
    ``grad_tol`` and the tail value spread is <= ``drift_tol``.  Uncovered
    probes report ``converged=None``.
    """
    if len(trace.steps) < MIN_VERDICT_STEPS:
        raise ValueError(
            f"convergence verdicts need >= {MIN_VERDICT_STEPS} steps, "
            f"got {len(trace.steps)}"
        )
    final = trace.steps[-1]
    per_instance = []
    for k in range(trace.k):
        piece = final.pieces[k]
        per_instance.append(
            InstanceVerdict(
                instance=k,
                beta=detect_stabilization_step(trace, k),
                zero_entry=zero_entry_audit(piece).has_zero,
                dup_column=duplicate_column_audit(piece, trace.probe.dim),
            )
        )
    hypothesis = all(iv.beta is not None and not iv.zero_entry for iv in per_instance)
    tail = trace.steps[-tail_window:]
    per_metric: dict[str, MetricVerdict] = {}
    for metric in METRICS:
        tail_grad = max(step.grad_norms[metric] for step in tail)
        final_grad = final.grad_norms[metric]
        values = [step.metrics[metric] for step in tail]
        drift = max(values) - min(values)
        per_metric[metric] = MetricVerdict(
            metric=metric,
            covered=hypothesis,
            converged=(tail_grad <= grad_tol and drift <= drift_tol) if hypothesis else None,
            tail_grad=tail_grad,
            final_grad=final_grad,
            tail_drift=drift,
        )
    return ProbeVerdict(
        probe=trace.probe,
        per_instance=tuple(per_instance),
        hypothesis_met=hypothesis,
        per_metric=per_metric,
        one_hot=_one_hot_verdict(trace, per_instance),
        grad_tol=grad_tol,
        drift_tol=drift_tol,
        tail_window=tail_window,
    )


def verify_one_hot_limit(trace: ProbeTrace) -> OneHotVerdict:
    """Standalone one-hot limit check for single-instance traces."""
    verdict = verify_metric_convergence(trace)
    return verdict.one_hot


@dataclass(frozen=True)
class MeanGradientDecay:
    """Tail gradient norms of each mean class probability."""

    covered: bool
    tail_norms: np.ndarray  # (tail, C)
    max_tail_norm: float
    within_tol: bool | None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "covered": self.covered,
            "tail_norms": [[float(v) for v in row] for row in self.tail_norms],
            "max_tail_norm": self.max_tail_norm,
            "within_tol": self.within_tol,
        }


def verify_mean_gradient_decay(
    trace: ProbeTrace,
    grad_tol: float = DEFAULT_GRAD_TOL,
    tail_window: int = DEFAULT_TAIL_WINDOW,
) -> MeanGradientDecay:
    """Check that every mean class probability's input gradient decays.

    The gradient of mean probability c is the instance average of
    ``softmax_jacobian(p_k) @ V_k`` row c.
    """
    verdict = verify_metric_convergence(trace, grad_tol=grad_tol, tail_window=tail_window)
    tail = trace.steps[-tail_window:]
    norms = np.empty((len(tail), trace.steps[0].probs.shape[1]), dtype=np.float64)
    for t, step in enumerate(tail):
        acc = np.zeros((step.probs.shape[1], step.x.shape[0]), dtype=np.float64)
        for k in range(trace.k):
            jac = np.diag(step.probs[k]) - np.outer(step.probs[k], step.probs[k])
            acc += jac @ step.pieces[k].matrix
        acc /= trace.k
        norms[t] = np.linalg.norm(acc, axis=1)
    max_norm = float(norms.max())
    return MeanGradientDecay(
        covered=verdict.hypothesis_met,
        tail_norms=norms,
        max_tail_norm=max_norm,
        within_tol=(max_norm <= grad_tol) if verdict.hypothesis_met else None,
    )


@dataclass(frozen=True)
class LogitLinearity:
    """Post-stabilization logits must be affine in alpha with slope
    ``direction * base_x[dim] * V[c, dim]``."""

    checked: bool
    max_residual: float | None
    max_slope_error: float | None
    ok: bool | None


def verify_logit_linearity(trace: ProbeTrace, rel_tol: float = 1e-6) -> LogitLinearity:
    betas = [detect_stabilization_step(trace, k) for k in range(trace.k)]
    if any(b is None for b in betas):
        return LogitLinearity(False, None, None, None)
    start = max(b for b in betas if b is not None)
    steps = trace.steps[start:]
    if len(steps) < 3:
        return LogitLinearity(False, None, None, None)
    alphas = np.array([s.alpha for s in steps])
    max_residual = 0.0
    max_slope_err = 0.0
    for k in range(trace.k):
        logits = np.stack([s.logits[k] for s in steps])  # (T, C)
        if not np.all(np.isfinite(logits)):
            return LogitLinearity(False, None, None, None)
        slope_fit = (logits[-1] - logits[0]) / (alphas[-1] - alphas[0])
        intercept = logits[0] - slope_fit * alphas[0]
        predicted = intercept[None, :] + slope_fit[None, :] * alphas[:, None]
        scale = np.maximum(1.0, np.abs(logits))
        max_residual = max(max_residual, float(np.max(np.abs(predicted - logits) / scale)))
        piece = trace.steps[-1].pieces[k]
        expected = (
            trace.probe.direction
            * trace.probe.base_x[trace.probe.dim]
            * piece.matrix[:, trace.probe.dim]
        )
        denom = np.maximum(1.0, np.abs(expected))
        max_slope_err = max(max_slope_err, float(np.max(np.abs(slope_fit - expected) / denom)))
    ok = max_residual <= rel_tol and max_slope_err <= rel_tol
    return LogitLinearity(True, max_residual, max_slope_err, ok)


# ---------------------------------------------------------------------------
# batch probing


@dataclass(frozen=True)
class BatchProbeReport:
    n_probes: int
    seed: int
    box: tuple[tuple[float, float], ...]
    stabilized: int
    covered: int
    converged_all_metrics: int
    per_metric_converged: dict[str, int]
    one_hot_checked: int
    one_hot_reached: int
    winner_matches: int
    verdicts: tuple[ProbeVerdict, ...]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "n_probes": self.n_probes,
            "seed": self.seed,
            "box": [[float(lo), float(hi)] for lo, hi in self.box],
            "stabilized": self.stabilized,
            "covered": self.covered,
            "converged_all_metrics": self.converged_all_metrics,
            "per_metric_converged": dict(self.per_metric_converged),
            "one_hot_checked": self.one_hot_checked,
            "one_hot_reached": self.one_hot_reached,
            "winner_matches": self.winner_matches,
            "verdicts": [v.to_json_dict() for v in self.verdicts],
        }


def sample_probes(
    input_dim: int,
    n_probes: int,
    seed: int,
    box: Sequence[tuple[float, float]],
    schedule: np.ndarray | None = None,
    direction: int = 1,
) -> list[ScalingProbe]:
    """Deterministically sample probe base points uniformly in ``box`` with a
    uniformly chosen scaled coordinate.  Points with an exactly zero scaled
    coordinate are redrawn (measure zero, but guarded)."""
    if n_probes < 0:
        raise ValueError("n_probes must be non-negative")
    if len(box) != input_dim:
        raise ValueError("box must provide one (lo, hi) pair per coordinate")
    for lo, hi in box:
        if not (lo < hi):
            raise ValueError("box bounds must satisfy lo < hi")
    if schedule is None:
        schedule = geometric_schedule()
    rng = SplitMix64(seed)
    probes = []
    while len(probes) < n_probes:
        coords = rng.uniform(input_dim)
        x = np.array([lo + u * (hi - lo) for u, (lo, hi) in zip(coords, box)])
        dim = rng.integer(input_dim)
        if x[dim] == 0.0:
            continue
        probes.append(ScalingProbe(x, dim, direction, schedule))
    return probes


def batch_probe(
    instance_set: InstanceSet,
    n_probes: int,
    seed: int,
    box: Sequence[tuple[float, float]] | None = None,
    schedule: np.ndarray | None = None,
    direction: int = 1,
    grad_tol: float = DEFAULT_GRAD_TOL,
    drift_tol: float = DEFAULT_DRIFT_TOL,
    tail_window: int = DEFAULT_TAIL_WINDOW,
) -> BatchProbeReport:
    """Run ``n_probes`` sampled probes and aggregate their verdicts."""
    if box is None:
        box = tuple((-3.0, 3.0) for _ in range(instance_set.input_dim))
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    probes = sample_probes(
        instance_set.input_dim, n_probes, seed, box, schedule, direction
    )
    verdicts = []
    for probe in probes:
        trace = run_probe(instance_set, probe)
        verdicts.append(
            verify_metric_convergence(
                trace, grad_tol=grad_tol, drift_tol=drift_tol, tail_window=tail_window
            )
        )
    stabilized = sum(
        1 for v in verdicts if all(iv.beta is not None for iv in v.per_instance)
    )
    covered = sum(1 for v in verdicts if v.hypothesis_met)
    converged_all = sum(1 for v in verdicts if v.all_metrics_converged)
    per_metric = {
        m: sum(
            1 for v in verdicts if v.hypothesis_met and v.per_metric[m].converged
        )
        for m in METRICS
    }
    one_hot_checked = sum(1 for v in verdicts if v.one_hot.covered)
    one_hot_reached = sum(1 for v in verdicts if v.one_hot.covered and v.one_hot.reached_one_hot)
    winner_matches = sum(
        1
        for v in verdicts
        if v.one_hot.covered and v.one_hot.winner_observed == v.one_hot.winner_predicted
    )
    return BatchProbeReport(
        n_probes=n_probes,
        seed=seed,
        box=box,
        stabilized=stabilized,
        covered=covered,
        converged_all_metrics=converged_all,
        per_metric_converged=per_metric,
        one_hot_checked=one_hot_checked,
        one_hot_reached=one_hot_reached,
        winner_matches=winner_matches,
        verdicts=tuple(verdicts),
    )


# ---------------------------------------------------------------------------
# trace/verdict files


def export_trace_csv(trace: ProbeTrace, path: str) -> None:
    """Two-section CSV: per-instance logit rows, then aggregate metric rows.

    Section one: ``alpha,instance,logit0..logit{C-1},sig_hash,zero_entry``.
    Section two (second header line): ``alpha,metric,value,grad_norm``.
    """
    c = trace.steps[0].logits.shape[1]
    logit_cols = ",".join(f"logit{i}" for i in range(c))
    lines = [f"alpha,instance,{logit_cols},sig_hash,zero_entry"]
    for step in trace.steps:
        for k in range(trace.k):
            logit_text = ",".join(format_float(v) for v in step.logits[k])
            lines.append(
                f"{format_float(step.alpha)},{k},{logit_text},"
                f"{step.signature_hashes[k]},{int(step.zero_entry[k])}"
            )
    lines.append("alpha,metric,value,grad_norm")
    for step in trace.steps:
        for metric in METRICS:
            lines.append(
                f"{format_float(step.alpha)},{metric},"
                f"{format_float(step.metrics[metric])},"
                f"{format_float(step.grad_norms[metric])}"
            )
    atomic_write_text(path, "\n".join(lines) + "\n")


def export_verdict_json(verdict: ProbeVerdict, path: str) -> None:
    atomic_write_text(path, dumps(verdict.to_json_dict(), indent=2))
