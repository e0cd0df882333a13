"""relulimits: exact piecewise-affine analysis of small ReLU classifiers.

Train single nets, deep ensembles, anchored ensembles, and frozen-mask MC
dropout sets on two-moons data; extract the exact affine piece (V, a) and
activation polytope at any input; evaluate four predictive-uncertainty
metrics with analytic input gradients; and verify their behavior under
axis-aligned feature scaling.
"""

from ._rng import SplitMix64
from .affine import (
    ActivationSignature,
    AffinePiece,
    HalfSpace,
    PolytopeDescription,
    duplicate_column_audit,
    fd_jacobian,
    fnv1a64,
    linearize,
    monotonicity_audit,
    polytope_of,
    signature_at,
    zero_entry_audit,
)
from .data import (
    Dataset,
    DegenerateSplitError,
    load_csv,
    make_half_moons,
    save_csv,
    split,
)
from .nn import (
    AnchorConfig,
    AucUndefinedError,
    CheckpointShapeError,
    CheckpointVersionError,
    EvalReport,
    InstanceSet,
    MalformedCheckpointError,
    MLPParams,
    TrainConfig,
    TrainingDivergedError,
    TrainReport,
    auc_roc,
    build_anchored_ensemble,
    build_ensemble,
    evaluate,
    fit_temperature,
    forward_logits,
    forward_logits_batch,
    load_checkpoint,
    load_train_config,
    mc_dropout_instances,
    mean_probs_batch,
    save_checkpoint,
    single_instance_set,
    softmax,
    train,
    with_temperature,
)
from .probe import (
    BatchProbeReport,
    ProbeTrace,
    ProbeVerdict,
    ScalingProbe,
    batch_probe,
    detect_stabilization_step,
    export_trace_csv,
    export_verdict_json,
    geometric_schedule,
    run_probe,
    sample_probes,
    verify_logit_linearity,
    verify_mean_gradient_decay,
    verify_metric_convergence,
    verify_one_hot_limit,
)
from .surface import (
    DEFAULT_WINDOW,
    GridSpec,
    GridSurface,
    evaluate_grid,
    export_surface_csv,
    region_count,
    surface_summary,
    zero_entry_fraction,
)
from .uncertainty import (
    METRICS,
    BoundaryContactWarning,
    MetricValue,
    PointEvaluation,
    PredictiveSummary,
    all_metric_values,
    class_variance,
    evaluate_point,
    gradients_from_pieces,
    max_prob_uncertainty,
    metric_gradient,
    metric_value,
    mutual_information,
    predictive_entropy,
    softmax_jacobian,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationSignature",
    "AffinePiece",
    "AnchorConfig",
    "AucUndefinedError",
    "BatchProbeReport",
    "BoundaryContactWarning",
    "CheckpointShapeError",
    "CheckpointVersionError",
    "DEFAULT_WINDOW",
    "Dataset",
    "DegenerateSplitError",
    "EvalReport",
    "GridSpec",
    "GridSurface",
    "HalfSpace",
    "InstanceSet",
    "METRICS",
    "MLPParams",
    "MalformedCheckpointError",
    "MetricValue",
    "PointEvaluation",
    "PolytopeDescription",
    "PredictiveSummary",
    "ProbeTrace",
    "ProbeVerdict",
    "ScalingProbe",
    "SplitMix64",
    "TrainConfig",
    "TrainReport",
    "TrainingDivergedError",
    "all_metric_values",
    "auc_roc",
    "batch_probe",
    "build_anchored_ensemble",
    "build_ensemble",
    "class_variance",
    "detect_stabilization_step",
    "duplicate_column_audit",
    "evaluate",
    "evaluate_grid",
    "evaluate_point",
    "export_surface_csv",
    "export_trace_csv",
    "export_verdict_json",
    "fd_jacobian",
    "fit_temperature",
    "fnv1a64",
    "forward_logits",
    "forward_logits_batch",
    "geometric_schedule",
    "gradients_from_pieces",
    "linearize",
    "load_checkpoint",
    "load_csv",
    "load_train_config",
    "make_half_moons",
    "max_prob_uncertainty",
    "mc_dropout_instances",
    "mean_probs_batch",
    "metric_gradient",
    "metric_value",
    "monotonicity_audit",
    "mutual_information",
    "polytope_of",
    "predictive_entropy",
    "region_count",
    "run_probe",
    "sample_probes",
    "save_checkpoint",
    "save_csv",
    "signature_at",
    "single_instance_set",
    "softmax",
    "softmax_jacobian",
    "split",
    "summarize",
    "surface_summary",
    "train",
    "verify_logit_linearity",
    "verify_mean_gradient_decay",
    "verify_metric_convergence",
    "verify_one_hot_limit",
    "with_temperature",
    "zero_entry_audit",
    "zero_entry_fraction",
]
