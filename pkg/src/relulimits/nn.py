"""Small fully connected ReLU classifiers in float64.

Covers parameter containers, forward evaluation, a hand-rolled Adam trainer
with early stopping (plus optional inverted dropout and anchoring penalties),
ensemble builders, frozen-mask dropout instances, temperature scaling,
accuracy/AUC evaluation, and JSON checkpoints.

Everything runs in float64 and is deterministic given the config seed; no
autodiff framework is involved, gradients are the explicit backprop formulas
(validated against finite differences in the test suite).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from ._jsonio import atomic_write_text, dumps, load_json
from ._rng import SplitMix64
from .data import Dataset

CHECKPOINT_VERSION = 1
INSTANCE_KINDS = ("single", "ensemble", "anchored-ensemble", "mc-dropout")
_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, message: str, epoch: int, member: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.member = member


class CheckpointVersionError(ValueError):
    """Checkpoint declares an unsupported format version."""


class MalformedCheckpointError(ValueError):
    """Checkpoint file is not parseable as the expected document."""


class CheckpointShapeError(ValueError):
    """Checkpoint arrays are inconsistent with their declared shapes."""


class AucUndefinedError(ValueError):
    """AUC-ROC is undefined (fewer than two classes present)."""


# ---------------------------------------------------------------------------
# parameters and forward evaluation


@dataclass(frozen=True)
class MLPParams:
    """Weights/biases of a fully connected ReLU net, shapes (n_l, n_{l-1})."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.weights or len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must be equally many, at least one")
        ws, bs = [], []
        prev = None
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.ascontiguousarray(w, dtype=np.float64)
            b = np.ascontiguousarray(b, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if prev is not None and w.shape[1] != prev:
                raise ValueError(f"layer {i}: input width {w.shape[1]} != {prev}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameter values")
            w.setflags(write=False)
            b.setflags(write=False)
            ws.append(w)
            bs.append(b)
            prev = w.shape[0]
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights[:-1])

    @property
    def depth(self) -> int:
        return len(self.weights)


def forward_logits(params: MLPParams, x: np.ndarray) -> np.ndarray:
    """Logits f(x) for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ValueError(f"expected input of shape ({params.input_dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(w @ h + b, 0.0)
    return params.weights[-1] @ h + params.biases[-1]


def forward_logits_batch(params: MLPParams, xs: np.ndarray) -> np.ndarray:
    """Logits for a batch of inputs, shape (N, D) -> (N, C)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != params.input_dim:
        raise ValueError(f"expected inputs of shape (N, {params.input_dim})")
    h = xs
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(h @ w.T + b, 0.0)
    return h @ params.weights[-1].T + params.biases[-1]


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis.

    The maximum logit is subtracted before exponentiation, so arbitrarily
    large gaps cannot overflow; a gap beyond ~745 underflows the losing
    class to exactly 0.0, which downstream metric code treats exactly.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax requires finite logits")
    # a gap between finite logits can exceed the float range; the shifted
    # value then becomes -inf and exp gives the correct limit 0.0
    with np.errstate(over="ignore"):
        shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# training configuration


@dataclass(frozen=True)
class AnchorConfig:
    """Gaussian anchoring: prior standard deviation of the weight prior."""

    prior_std: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.prior_std) and self.prior_std > 0):
            raise ValueError("prior_std must be a positive finite float")


@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: tuple[int, ...]
    lr: float
    dropout_rate: float = 0.0
    batch_size: int = 64
    max_epochs: int = 20
    patience: int = 5
    seed: int = 0
    init_scheme: str = "kaiming_uniform"
    anchored: AnchorConfig | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise ValueError("lr must be positive")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")
        if not (0 <= self.patience <= max(self.max_epochs, 0)):
            raise ValueError("patience must lie in [0, max_epochs]")
        if self.init_scheme != "kaiming_uniform":
            raise ValueError(f"unknown init scheme {self.init_scheme!r}")

    def to_json_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "hidden_sizes": list(self.hidden_sizes),
            "lr": self.lr,
            "dropout_rate": self.dropout_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "init_scheme": self.init_scheme,
            "anchored": None if self.anchored is None else {"prior_std": self.anchored.prior_std},
        }
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict[str, Any]) -> "TrainConfig":
        if not isinstance(doc, dict):
            raise ValueError("train config must be a JSON object")
        known = {
            "hidden_sizes", "lr", "dropout_rate", "batch_size", "max_epochs",
            "patience", "seed", "init_scheme", "anchored",
        }
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        if "hidden_sizes" not in doc or "lr" not in doc:
            raise ValueError("train config requires hidden_sizes and lr")
        anchored = doc.get("anchored")
        if anchored is not None:
            if not isinstance(anchored, dict) or set(anchored) != {"prior_std"}:
                raise ValueError("anchored config must be {'prior_std': float}")
            anchored = AnchorConfig(prior_std=float(anchored["prior_std"]))
        return cls(
            hidden_sizes=tuple(doc["hidden_sizes"]),
            lr=float(doc["lr"]),
            dropout_rate=float(doc.get("dropout_rate", 0.0)),
            batch_size=int(doc.get("batch_size", 64)),
            max_epochs=int(doc.get("max_epochs", 20)),
            patience=int(doc.get("patience", 5)),
            seed=int(doc.get("seed", 0)),
            init_scheme=str(doc.get("init_scheme", "kaiming_uniform")),
            anchored=anchored,
        )


def load_train_config(path: str) -> TrainConfig:
    try:
        doc = load_json(path)
    except json.JSONDecodeError as exc:
        raise ValueError(f"train config {path} is not valid JSON: {exc}") from exc
    return TrainConfig.from_json_dict(doc)


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    best_val_loss: float | None
    val_accuracy: float | None
    val_auc: float | None
    seed: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "epochs_run": self.epochs_run,
            "best_val_loss": self.best_val_loss,
            "val_accuracy": self.val_accuracy,
            "val_auc": self.val_auc,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# initialization and the optimizer


def _init_layers(
    hidden_sizes: Sequence[int], input_dim: int, output_dim: int, rng: SplitMix64
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Kaiming-uniform fan-in weights on hidden layers, uniform
    +-1/sqrt(fan_in) weights on the output layer, uniform +-1/sqrt(fan_in)
    biases everywhere (nonzero bias init diversifies the ReLU hinge offsets,
    which the short training budgets here rely on).  Draw order: layer by
    layer, weight entries row-major, then the bias vector."""
    sizes = [input_dim, *hidden_sizes, output_dim]
    ws: list[np.ndarray] = []
    bs: list[np.ndarray] = []
    for layer in range(len(sizes) - 1):
        fan_in = sizes[layer]
        fan_out = sizes[layer + 1]
        last = layer == len(sizes) - 2
        bound = (1.0 / math.sqrt(fan_in)) if last else math.sqrt(6.0 / fan_in)
        u = rng.uniform(fan_out * fan_in).reshape(fan_out, fan_in)
        ws.append((2.0 * u - 1.0) * bound)
        bs.append((2.0 * rng.uniform(fan_out) - 1.0) / math.sqrt(fan_in))
    return ws, bs


def draw_anchor(
    config: TrainConfig, input_dim: int, output_dim: int, seed: int
) -> MLPParams:
    """Anchor weights drawn from the init distribution on a labeled substream."""
    rng = SplitMix64(seed).fork("anchor")
    ws, bs = _init_layers(config.hidden_sizes, input_dim, output_dim, rng)
    return MLPParams(tuple(ws), tuple(bs))


def _batch_loss_and_grads(
    ws: list[np.ndarray],
    bs: list[np.ndarray],
    xs: np.ndarray,
    ys: np.ndarray,
    masks: list[np.ndarray] | None,
    anchor: MLPParams | None,
    anchor_scale: float,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy (plus anchoring penalty) and its parameter gradients.

    ``masks`` holds one inverted-dropout vector per hidden layer (already
    scaled by 1/(1-rate)); ``anchor_scale`` is 1/(prior_std^2 * n_train).
    """
    depth = len(ws)
    batch = xs.shape[0]
    acts = [xs]
    pres = []
    # runaway weights overflow to inf and then to nan in the subtraction;
    # the caller detects the non-finite loss and raises, so the intermediate
    # warnings are silenced rather than surfaced
    with np.errstate(invalid="ignore", over="ignore"):
        for l in range(depth - 1):
            z = acts[-1] @ ws[l].T + bs[l]
            h = np.maximum(z, 0.0)
            if masks is not None:
                h = h * masks[l]
            pres.append(z)
            acts.append(h)
        logits = acts[-1] @ ws[-1].T + bs[-1]
        zmax = logits.max(axis=1, keepdims=True)
        lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
        rows = np.arange(batch)
        loss = float(np.mean(lse - logits[rows, ys]))
        probs = np.exp(logits - zmax)
        probs /= probs.sum(axis=1, keepdims=True)
    dz = probs
    dz[rows, ys] -= 1.0
    dz /= batch
    grad_ws: list[np.ndarray | None] = [None] * depth
    grad_bs: list[np.ndarray | None] = [None] * depth
    grad_ws[-1] = dz.T @ acts[-1]
    grad_bs[-1] = dz.sum(axis=0)
    da = dz @ ws[-1]
    for l in range(depth - 2, -1, -1):
        dh = da * masks[l] if masks is not None else da
        dzl = dh * (pres[l] > 0)
        grad_ws[l] = dzl.T @ acts[l]
        grad_bs[l] = dzl.sum(axis=0)
        if l > 0:
            da = dzl @ ws[l]
    if anchor is not None and anchor_scale > 0.0:
        penalty = 0.0
        for l in range(depth):
            dw = ws[l] - anchor.weights[l]
            db = bs[l] - anchor.biases[l]
            penalty += float(np.sum(dw * dw) + np.sum(db * db))
            grad_ws[l] += anchor_scale * dw
            grad_bs[l] += anchor_scale * db
        loss += 0.5 * anchor_scale * penalty
    return loss, grad_ws, grad_bs  # type: ignore[return-value]


def _mean_cross_entropy(ws, bs, xs, ys) -> float:
    with np.errstate(invalid="ignore", over="ignore"):
        h = xs
        for l in range(len(ws) - 1):
            h = np.maximum(h @ ws[l].T + bs[l], 0.0)
        logits = h @ ws[-1].T + bs[-1]
        zmax = logits.max(axis=1, keepdims=True)
        lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
        return float(np.mean(lse - logits[np.arange(xs.shape[0]), ys]))


def train(
    config: TrainConfig,
    train_ds: Dataset,
    val_ds: Dataset,
    seed: int | None = None,
    *,
    anchor: MLPParams | None = None,
) -> tuple[MLPParams, TrainReport]:
    """Minimize mean cross-entropy with Adam, early-stopping on val loss.

    Early stopping restores the best-validation-loss weights; with an empty
    validation set the final weights win and val metrics are None.  Raises
    :class:`TrainingDivergedError` with the epoch index if any loss goes
    non-finite.  Fully deterministic given ``(config, seed)``.
    """
    if len(train_ds) == 0:
        raise ValueError("training set is empty")
    seed = config.seed if seed is None else int(seed)
    input_dim = train_ds.input_dim
    output_dim = train_ds.num_classes
    rng = SplitMix64(seed)
    ws, bs = _init_layers(config.hidden_sizes, input_dim, output_dim, rng.fork("init"))
    shuffle_rng = rng.fork("shuffle")
    dropout_rng = rng.fork("dropout")

    anchor_scale = 0.0
    if config.anchored is not None:
        if anchor is None:
            anchor = draw_anchor(config, input_dim, output_dim, seed)
        anchor_scale = 1.0 / (config.anchored.prior_std**2 * len(train_ds))
    elif anchor is not None:
        raise ValueError("anchor weights supplied without anchored config")

    adam_m = [np.zeros_like(w) for w in ws] + [np.zeros_like(b) for b in bs]
    adam_v = [np.zeros_like(w) for w in ws] + [np.zeros_like(b) for b in bs]
    step = 0

    xs_train = train_ds.features
    ys_train = train_ds.labels
    has_val = len(val_ds) > 0
    best_ws = [w.copy() for w in ws]
    best_bs = [b.copy() for b in bs]
    best_val = math.inf
    bad_epochs = 0
    epochs_run = 0
    keep_prob = 1.0 - config.dropout_rate

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_ds))
        for start in range(0, len(train_ds), config.batch_size):
            idx = order[start : start + config.batch_size]
            masks = None
            if config.dropout_rate > 0.0:
                masks = [
                    (dropout_rng.uniform(h) >= config.dropout_rate) / keep_prob
                    for h in config.hidden_sizes
                ]
            loss, gws, gbs = _batch_loss_and_grads(
                ws, bs, xs_train[idx], ys_train[idx], masks, anchor, anchor_scale
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"training loss became non-finite at epoch {epoch}", epoch=epoch
                )
            step += 1
            c1 = 1.0 - _ADAM_BETA1**step
            c2 = 1.0 - _ADAM_BETA2**step
            params_flat = ws + bs
            grads_flat = gws + gbs
            for i, (p, g) in enumerate(zip(params_flat, grads_flat)):
                adam_m[i] = _ADAM_BETA1 * adam_m[i] + (1.0 - _ADAM_BETA1) * g
                adam_v[i] = _ADAM_BETA2 * adam_v[i] + (1.0 - _ADAM_BETA2) * (g * g)
                p -= config.lr * (adam_m[i] / c1) / (np.sqrt(adam_v[i] / c2) + _ADAM_EPS)
        epochs_run = epoch
        if has_val:
            val_loss = _mean_cross_entropy(ws, bs, val_ds.features, val_ds.labels)
            if not math.isfinite(val_loss):
                raise TrainingDivergedError(
                    f"validation loss became non-finite at epoch {epoch}", epoch=epoch
                )
            if val_loss < best_val:
                best_val = val_loss
                best_ws = [w.copy() for w in ws]
                best_bs = [b.copy() for b in bs]
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= config.patience:
                    break
        else:
            best_ws = [w.copy() for w in ws]
            best_bs = [b.copy() for b in bs]

    params = MLPParams(tuple(best_ws), tuple(best_bs))
    if has_val:
        report_set = InstanceSet(kind="single", instances=(params,), seeds=(seed,))
        ev = evaluate(report_set, val_ds)
        report = TrainReport(
            epochs_run=epochs_run,
            best_val_loss=best_val if math.isfinite(best_val) else None,
            val_accuracy=ev.accuracy,
            val_auc=ev.auc,
            seed=seed,
        )
    else:
        report = TrainReport(
            epochs_run=epochs_run,
            best_val_loss=None,
            val_accuracy=None,
            val_auc=None,
            seed=seed,
        )
    return params, report


# ---------------------------------------------------------------------------
# instance sets


@dataclass(frozen=True)
class InstanceSet:
    """A list of same-shaped networks treated as one predictive model.

    Predictions aggregate by averaging instance softmax outputs.  ``kind``
    records how the instances were produced; ``temperature`` (if set) divides
    the logits of every instance, implemented by scaling the output layer.
    """

    kind: str
    instances: tuple[MLPParams, ...]
    seeds: tuple[int, ...]
    temperature: float | None = None
    anchors: tuple[MLPParams, ...] | None = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in INSTANCE_KINDS:
            raise ValueError(f"kind must be one of {INSTANCE_KINDS}, got {self.kind!r}")
        if not self.instances:
            raise ValueError("instance set must hold at least one network")
        if len(self.seeds) != len(self.instances):
            raise ValueError("one seed per instance required")
        first = self.instances[0]
        for inst in self.instances[1:]:
            if (
                inst.input_dim != first.input_dim
                or inst.output_dim != first.output_dim
                or inst.hidden_sizes != first.hidden_sizes
            ):
                raise ValueError("instances must share layer shapes")
        if self.kind == "single" and len(self.instances) != 1:
            raise ValueError("kind 'single' requires exactly one instance")
        if self.temperature is not None and not (
            math.isfinite(self.temperature) and self.temperature > 0
        ):
            raise ValueError("temperature must be positive and finite")
        if self.anchors is not None and len(self.anchors) != len(self.instances):
            raise ValueError("one anchor per instance required")

    @property
    def k(self) -> int:
        return len(self.instances)

    @property
    def input_dim(self) -> int:
        return self.instances[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.instances[0].output_dim

    def effective_instances(self) -> tuple[MLPParams, ...]:
        """Instances with any temperature folded into the output layer."""
        if self.temperature is None or self.temperature == 1.0:
            return self.instances
        t = self.temperature
        scaled = []
        for inst in self.instances:
            ws = list(inst.weights)
            bs = list(inst.biases)
            ws[-1] = ws[-1] / t
            bs[-1] = bs[-1] / t
            scaled.append(MLPParams(tuple(ws), tuple(bs)))
        return tuple(scaled)


def single_instance_set(params: MLPParams, seed: int = 0) -> InstanceSet:
    return InstanceSet(kind="single", instances=(params,), seeds=(seed,))


def build_ensemble(
    config: TrainConfig,
    train_ds: Dataset,
    val_ds: Dataset,
    k: int,
    base_seed: int,
) -> tuple[InstanceSet, list[TrainReport]]:
    """Train ``k`` members from seeds ``base_seed..base_seed+k-1``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if config.anchored is not None:
        raise ValueError("use build_anchored_ensemble for anchored configs")
    members, reports = [], []
    for member in range(k):
        try:
            params, report = train(config, train_ds, val_ds, seed=base_seed + member)
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(
                f"ensemble member {member}: {exc}", epoch=exc.epoch, member=member
            ) from exc
        members.append(params)
        reports.append(report)
    seeds = tuple(base_seed + m for m in range(k))
    return (
        InstanceSet(kind="ensemble", instances=tuple(members), seeds=seeds),
        reports,
    )


def build_anchored_ensemble(
    config: TrainConfig,
    train_ds: Dataset,
    val_ds: Dataset,
    k: int,
    base_seed: int,
) -> tuple[InstanceSet, list[TrainReport]]:
    """Anchored ensemble: each member regularized toward its own fresh anchor
    draw, penalty ||theta - theta_anchor||^2 / (2 * prior_std^2 * n_train)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if config.anchored is None:
        raise ValueError("anchored ensembles require config.anchored.prior_std")
    members, reports, anchors = [], [], []
    for member in range(k):
        seed = base_seed + member
        anchor = draw_anchor(config, train_ds.input_dim, train_ds.num_classes, seed)
        try:
            params, report = train(config, train_ds, val_ds, seed=seed, anchor=anchor)
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(
                f"anchored member {member}: {exc}", epoch=exc.epoch, member=member
            ) from exc
        members.append(params)
        reports.append(report)
        anchors.append(anchor)
    seeds = tuple(base_seed + m for m in range(k))
    return (
        InstanceSet(
            kind="anchored-ensemble",
            instances=tuple(members),
            seeds=seeds,
            anchors=tuple(anchors),
        ),
        reports,
    )


def mc_dropout_instances(
    base: MLPParams, rate: float, k: int, seed: int
) -> InstanceSet:
    """Freeze ``k`` dropout masks of ``base`` into standalone networks.

    Instance ``i`` uses mask seed ``seed + i``: each hidden unit is dropped
    independently with probability ``rate`` by zeroing its weight row and
    bias entry; surviving units are scaled by 1/(1-rate), reproducing
    inverted dropout exactly.  ``rate=0`` yields ``k`` copies of ``base``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not (0.0 <= rate < 1.0):
        raise ValueError("rate must lie in [0, 1)")
    keep_scale = 1.0 / (1.0 - rate)
    instances = []
    for i in range(k):
        rng = SplitMix64(seed + i)
        ws = [w.copy() for w in base.weights]
        bs = [b.copy() for b in base.biases]
        for l, width in enumerate(base.hidden_sizes):
            keep = rng.uniform(width) >= rate
            ws[l][~keep, :] = 0.0
            bs[l][~keep] = 0.0
            ws[l][keep, :] *= keep_scale
            bs[l][keep] *= keep_scale
        instances.append(MLPParams(tuple(ws), tuple(bs)))
    return InstanceSet(
        kind="mc-dropout",
        instances=tuple(instances),
        seeds=tuple(seed + i for i in range(k)),
        provenance={"mask_rate": rate, "mask_seed": seed},
    )


def with_temperature(instance_set: InstanceSet, temperature: float) -> InstanceSet:
    if not (math.isfinite(temperature) and temperature > 0):
        raise ValueError("temperature must be positive and finite")
    return replace(instance_set, temperature=temperature)


def fit_temperature(params: MLPParams, val_ds: Dataset, tol: float = 1e-4) -> float:
    """Temperature minimizing val NLL, golden-section on log T in [-3, 3]."""
    if len(val_ds) == 0:
        raise ValueError("temperature fitting requires a non-empty validation set")
    logits = forward_logits_batch(params, val_ds.features)
    rows = np.arange(len(val_ds))
    ys = val_ds.labels

    def nll(log_t: float) -> float:
        z = logits / math.exp(log_t)
        zmax = z.max(axis=1, keepdims=True)
        lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
        return float(np.mean(lse - z[rows, ys]))

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = -3.0, 3.0
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = nll(c), nll(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = nll(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = nll(d)
    return math.exp((lo + hi) / 2.0)


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    auc: float | None
    auc_undefined_reason: str | None = None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "auc_undefined_reason": self.auc_undefined_reason,
        }


def mean_probs_batch(instance_set: InstanceSet, xs: np.ndarray) -> np.ndarray:
    """Average instance softmax outputs, shape (N, C)."""
    instances = instance_set.effective_instances()
    total = np.zeros((xs.shape[0], instance_set.output_dim), dtype=np.float64)
    for inst in instances:
        total += softmax(forward_logits_batch(inst, xs))
    return total / len(instances)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_roc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Binary AUC-ROC via the rank-sum statistic, ties at midranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise AucUndefinedError("AUC-ROC requires both classes present")
    ranks = _midranks(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(instance_set: InstanceSet, dataset: Dataset) -> EvalReport:
    """Accuracy of the mean prediction plus AUC-ROC for the binary case."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    probs = mean_probs_batch(instance_set, dataset.features)
    accuracy = float(np.mean(np.argmax(probs, axis=1) == dataset.labels))
    if instance_set.output_dim != 2:
        return EvalReport(accuracy, None, "AUC-ROC implemented for binary outputs only")
    try:
        auc = auc_roc(probs[:, 1], dataset.labels)
    except AucUndefinedError as exc:
        return EvalReport(accuracy, None, str(exc))
    return EvalReport(accuracy, auc)


# ---------------------------------------------------------------------------
# checkpoints


def _layers_to_json(params: MLPParams) -> list[dict[str, Any]]:
    layers = []
    for w, b in zip(params.weights, params.biases):
        layers.append(
            {
                "rows": w.shape[0],
                "cols": w.shape[1],
                "w": [float(v) for v in w.ravel(order="C")],
                "b": [float(v) for v in b],
            }
        )
    return layers


def _layers_from_json(layers: Any, where: str) -> MLPParams:
    if not isinstance(layers, list) or not layers:
        raise MalformedCheckpointError(f"{where}: layers must be a non-empty list")
    ws, bs = [], []
    for i, layer in enumerate(layers):
        if not isinstance(layer, dict) or set(layer) != {"rows", "cols", "w", "b"}:
            raise MalformedCheckpointError(f"{where} layer {i}: expected rows/cols/w/b")
        rows, cols = layer["rows"], layer["cols"]
        w, b = layer["w"], layer["b"]
        if not (isinstance(rows, int) and isinstance(cols, int) and rows > 0 and cols > 0):
            raise MalformedCheckpointError(f"{where} layer {i}: bad rows/cols")
        if not isinstance(w, list) or not isinstance(b, list):
            raise MalformedCheckpointError(f"{where} layer {i}: w and b must be arrays")
        if len(w) != rows * cols:
            raise CheckpointShapeError(
                f"{where} layer {i}: w has {len(w)} entries, expected {rows * cols}"
            )
        if len(b) != rows:
            raise CheckpointShapeError(
                f"{where} layer {i}: b has {len(b)} entries, expected {rows}"
            )
        ws.append(np.array(w, dtype=np.float64).reshape(rows, cols))
        bs.append(np.array(b, dtype=np.float64))
    try:
        return MLPParams(tuple(ws), tuple(bs))
    except ValueError as exc:
        raise CheckpointShapeError(f"{where}: {exc}") from exc


def save_checkpoint(instance_set: InstanceSet, path: str) -> None:
    """Write the JSON checkpoint document (17-significant-digit floats)."""
    first = instance_set.instances[0]
    doc: dict[str, Any] = {
        "version": CHECKPOINT_VERSION,
        "kind": instance_set.kind,
        "K": instance_set.k,
        "input_dim": first.input_dim,
        "output_dim": first.output_dim,
        "hidden_sizes": list(first.hidden_sizes),
    }
    if instance_set.temperature is not None:
        doc["temperature"] = instance_set.temperature
    entries = []
    for i, inst in enumerate(instance_set.instances):
        entry: dict[str, Any] = {
            "seed": instance_set.seeds[i],
            "layers": _layers_to_json(inst),
        }
        if instance_set.anchors is not None:
            entry["anchor"] = _layers_to_json(instance_set.anchors[i])
        entries.append(entry)
    doc["instances"] = entries
    atomic_write_text(path, dumps(doc))


def load_checkpoint(path: str) -> InstanceSet:
    try:
        doc = load_json(path)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedCheckpointError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedCheckpointError("checkpoint must be a JSON object")
    version = doc.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {version!r} unsupported (expected {CHECKPOINT_VERSION})"
        )
    required = {"version", "kind", "K", "input_dim", "output_dim", "hidden_sizes", "instances"}
    missing = required - set(doc)
    if missing:
        raise MalformedCheckpointError(f"checkpoint missing keys: {sorted(missing)}")
    kind = doc["kind"]
    if kind not in INSTANCE_KINDS:
        raise MalformedCheckpointError(f"unknown instance kind {kind!r}")
    entries = doc["instances"]
    if not isinstance(entries, list) or len(entries) != doc["K"]:
        raise CheckpointShapeError("instances list does not match declared K")
    instances, seeds, anchors = [], [], []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "layers" not in entry or "seed" not in entry:
            raise MalformedCheckpointError(f"instance {i}: expected seed and layers")
        params = _layers_from_json(entry["layers"], f"instance {i}")
        if (
            params.input_dim != doc["input_dim"]
            or params.output_dim != doc["output_dim"]
            or list(params.hidden_sizes) != list(doc["hidden_sizes"])
        ):
            raise CheckpointShapeError(f"instance {i}: shape differs from declared dims")
        instances.append(params)
        seeds.append(int(entry["seed"]))
        if "anchor" in entry:
            anchors.append(_layers_from_json(entry["anchor"], f"instance {i} anchor"))
    if anchors and len(anchors) != len(instances):
        raise MalformedCheckpointError("either every instance carries an anchor or none")
    temperature = doc.get("temperature")
    return InstanceSet(
        kind=kind,
        instances=tuple(instances),
        seeds=tuple(seeds),
        temperature=None if temperature is None else float(temperature),
        anchors=tuple(anchors) if anchors else None,
        provenance={"checkpoint_path": str(path)},
    )
