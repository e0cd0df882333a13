"""Command-line interface.

Subcommands: generate, train, grid, probe, check, batch-probe.  Exit codes:
0 success, 1 failed checks or diverged training, 2 usage/config errors.
Reports are JSON with the fully resolved configuration and seeds embedded;
bulk numeric data goes to CSV.  All file writes are atomic.

``--threads`` defaults to the hardware thread count; the ``RLL_THREADS``
environment variable, when set, overrides the flag.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__
from ._jsonio import atomic_write_text, dumps
from .data import load_csv, make_half_moons, save_csv, split
from .nn import (
    InstanceSet,
    TrainingDivergedError,
    build_anchored_ensemble,
    build_ensemble,
    evaluate,
    load_checkpoint,
    load_train_config,
    mc_dropout_instances,
    save_checkpoint,
    single_instance_set,
    train,
)
from .probe import (
    ScalingProbe,
    batch_probe,
    export_trace_csv,
    export_verdict_json,
    geometric_schedule,
    run_probe,
    verify_metric_convergence,
)
from .surface import DEFAULT_WINDOW, GridSpec, evaluate_grid, export_surface_csv, surface_summary

USAGE_ERROR = 2
CHECK_FAILURE = 1


class UsageError(ValueError):
    """Bad flags, bad config files, missing inputs."""


def _resolve_threads(flag_value: int | None) -> int:
    env = os.environ.get("RLL_THREADS")
    if env is not None:
        try:
            threads = int(env)
        except ValueError:
            raise UsageError(f"RLL_THREADS must be an integer, got {env!r}") from None
    elif flag_value is not None:
        threads = flag_value
    else:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise UsageError("thread count must be at least 1")
    return threads


def _parse_schedule(text: str) -> np.ndarray:
    """``geom:BASE:COUNT`` (default geom:2:21) or a comma list of factors."""
    if text.startswith("geom:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"schedule {text!r} must look like geom:BASE:COUNT")
        try:
            base, count = float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"schedule {text!r} has non-numeric fields") from None
        try:
            return geometric_schedule(base, count)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        values = np.array([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError:
        raise UsageError(f"schedule {text!r} is not a comma list of floats") from None
    return values


def _parse_window(text: str) -> tuple[tuple[float, float], tuple[float, float]]:
    """``x0lo:x0hi,x1lo:x1hi``."""
    try:
        parts = text.split(",")
        if len(parts) != 2:
            raise ValueError
        (x0lo, x0hi), (x1lo, x1hi) = (tuple(map(float, p.split(":"))) for p in parts)
    except ValueError:
        raise UsageError(
            f"window {text!r} must look like x0lo:x0hi,x1lo:x1hi"
        ) from None
    return ((x0lo, x0hi), (x1lo, x1hi))


def _parse_point(text: str, dim: int = 2) -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError:
        raise UsageError(f"point {text!r} is not a comma list of floats") from None
    if values.shape != (dim,):
        raise UsageError(f"point {text!r} must have {dim} coordinates")
    return values


def _load_checkpoint_or_usage(path: str) -> InstanceSet:
    if not os.path.exists(path):
        raise UsageError(f"checkpoint {path} does not exist")
    try:
        return load_checkpoint(path)
    except ValueError as exc:
        raise UsageError(f"cannot load checkpoint {path}: {exc}") from exc


def _write_report(path: str | None, doc: dict[str, Any]) -> None:
    if path:
        atomic_write_text(path, dumps(doc, indent=2))


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    dataset = make_half_moons(args.n, args.noise, args.seed)
    save_csv(dataset, args.out)
    print(f"wrote {len(dataset)} points to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    if not os.path.exists(args.config):
        raise UsageError(f"config {args.config} does not exist")
    try:
        config = load_train_config(args.config)
    except ValueError as exc:
        raise UsageError(f"bad train config: {exc}") from exc
    if not os.path.exists(args.data):
        raise UsageError(f"data file {args.data} does not exist")
    dataset = load_csv(args.data)
    if args.val is not None:
        train_ds = dataset
        val_ds = load_csv(args.val)
    elif args.val_frac is not None:
        if not (0.0 <= args.val_frac < 1.0):
            raise UsageError("--val-frac must lie in [0, 1)")
        n_val = int(round(args.val_frac * len(dataset)))
        train_ds, val_ds = split(dataset, len(dataset) - n_val, n_val, config.seed)
    else:
        raise UsageError("provide --val FILE or --val-frac FRACTION")

    k = args.k
    kind = args.kind
    if kind == "single" and k != 1:
        raise UsageError("--kind single requires --k 1")
    if kind != "single" and k < 1:
        raise UsageError("--k must be at least 1")

    try:
        if kind == "single":
            params, report = train(config, train_ds, val_ds)
            instance_set = single_instance_set(params, seed=config.seed)
            reports = [report]
        elif kind == "ensemble":
            instance_set, reports = build_ensemble(config, train_ds, val_ds, k, config.seed)
        elif kind == "anchored":
            if config.anchored is None:
                raise UsageError("--kind anchored requires config.anchored.prior_std")
            instance_set, reports = build_anchored_ensemble(
                config, train_ds, val_ds, k, config.seed
            )
        elif kind == "mcdropout":
            if config.dropout_rate <= 0.0:
                raise UsageError("--kind mcdropout requires config.dropout_rate > 0")
            params, report = train(config, train_ds, val_ds)
            instance_set = mc_dropout_instances(
                params, config.dropout_rate, k, seed=config.seed
            )
            reports = [report]
        else:  # pragma: no cover - argparse restricts choices
            raise UsageError(f"unknown kind {kind!r}")
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return CHECK_FAILURE

    save_checkpoint(instance_set, args.out)
    ev = evaluate(instance_set, val_ds) if len(val_ds) else None
    doc = {
        "command": "train",
        "config": config.to_json_dict(),
        "data": os.path.abspath(args.data),
        "val": os.path.abspath(args.val) if args.val else None,
        "val_frac": args.val_frac,
        "kind": kind,
        "k": instance_set.k,
        "checkpoint": os.path.abspath(args.out),
        "member_reports": [r.to_json_dict() for r in reports],
        "set_evaluation": ev.to_json_dict() if ev else None,
    }
    _write_report(args.report, doc)
    if ev is not None:
        auc_text = "n/a" if ev.auc is None else f"{ev.auc:.4f}"
        print(
            f"trained {kind} (K={instance_set.k}): val acc {ev.accuracy:.4f}, "
            f"AUC {auc_text}; checkpoint {args.out}"
        )
    else:
        print(f"trained {kind} (K={instance_set.k}); checkpoint {args.out}")
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    instance_set = _load_checkpoint_or_usage(args.checkpoint)
    window = _parse_window(args.window) if args.window else DEFAULT_WINDOW
    try:
        spec = GridSpec(window[0], window[1], args.res)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    threads = _resolve_threads(args.threads)
    surface = evaluate_grid(instance_set, spec, threads=threads)
    export_surface_csv(surface, args.out)
    summary = surface_summary(surface)
    doc = {
        "command": "grid",
        "checkpoint": os.path.abspath(args.checkpoint),
        "threads": threads,
        "out": os.path.abspath(args.out),
        **summary,
    }
    _write_report(args.summary, doc)
    print(
        f"evaluated {spec.n_cells} cells: zero-entry fraction "
        f"{summary['zero_entry_fraction']:.4f}, {summary['region_count']} regions"
    )
    return 0


def cmd_probe(args: argparse.Namespace) -> int:
    instance_set = _load_checkpoint_or_usage(args.checkpoint)
    schedule = _parse_schedule(args.schedule)
    direction = {"+" : 1, "-": -1}[args.direction]
    base_x = _parse_point(args.x, instance_set.input_dim)
    try:
        probe = ScalingProbe(base_x, args.dim, direction, schedule)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    trace = run_probe(instance_set, probe)
    export_trace_csv(trace, args.out)
    if len(trace.steps) >= 8:
        verdict = verify_metric_convergence(trace)
        if args.verdict:
            export_verdict_json(verdict, args.verdict)
        converged = verdict.all_metrics_converged
        print(
            f"probe dim {args.dim} direction {args.direction}: covered="
            f"{verdict.hypothesis_met} converged={converged}; trace {args.out}"
        )
    else:
        if args.verdict:
            raise UsageError("verdicts need a schedule of at least 8 steps")
        print(f"probe traced {len(trace.steps)} steps (too few for a verdict)")
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    from . import checks

    instance_set = None
    results = []
    try:
        instance_set = load_checkpoint(args.checkpoint)
        results.append({"name": "checkpoint_loads", "passed": True, "detail": ""})
    except (ValueError, OSError) as exc:
        results.append({"name": "checkpoint_loads", "passed": False, "detail": str(exc)})
    if instance_set is not None:
        results.extend(checks.run_self_checks(instance_set, seed=args.seed))
    passed = all(r["passed"] for r in results)
    doc = {
        "command": "check",
        "checkpoint": os.path.abspath(args.checkpoint),
        "seed": args.seed,
        "passed": passed,
        "checks": results,
    }
    _write_report(args.report, doc)
    for r in results:
        mark = "ok" if r["passed"] else "FAIL"
        detail = f" ({r['detail']})" if r["detail"] and not r["passed"] else ""
        print(f"[{mark}] {r['name']}{detail}")
    return 0 if passed else CHECK_FAILURE


def cmd_batch_probe(args: argparse.Namespace) -> int:
    instance_set = _load_checkpoint_or_usage(args.checkpoint)
    box = _parse_window(args.box) if args.box else ((-3.0, 3.0), (-3.0, 3.0))
    schedule = _parse_schedule(args.schedule)
    if schedule.size < 8:
        raise UsageError("batch probes need a schedule of at least 8 steps")
    report = batch_probe(
        instance_set,
        n_probes=args.n,
        seed=args.seed,
        box=box,
        schedule=schedule,
    )
    doc = {"command": "batch-probe", "checkpoint": os.path.abspath(args.checkpoint)}
    doc.update(report.to_json_dict())
    atomic_write_text(args.out, dumps(doc, indent=2))
    print(
        f"{report.n_probes} probes: {report.stabilized} stabilized, "
        f"{report.covered} covered, {report.converged_all_metrics} converged; "
        f"report {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relulimits",
        description="Piecewise-affine analysis and uncertainty probes for ReLU nets",
    )
    parser.add_argument("--version", action="version", version=f"relulimits {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a two-moons dataset CSV")
    p.add_argument("--n", type=int, default=750)
    p.add_argument("--noise", type=float, default=0.125)
    p.add_argument("--seed", type=int, default=101)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train networks and write a checkpoint")
    p.add_argument("--config", required=True, help="TrainConfig JSON file")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--val", help="validation CSV (alternative to --val-frac)")
    p.add_argument("--val-frac", type=float, dest="val_frac")
    p.add_argument(
        "--kind",
        choices=("single", "ensemble", "anchored", "mcdropout"),
        default="single",
    )
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out", required=True, help="checkpoint JSON path")
    p.add_argument("--report", help="train report JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="evaluate the uncertainty surface on a grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--window", help="x0lo:x0hi,x1lo:x1hi (default -2:3,-1.5:2)")
    p.add_argument("--res", type=int, default=200)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True, help="surface CSV path")
    p.add_argument("--summary", help="summary JSON path")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("probe", help="run one scaling probe")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--x", required=True, help="base point, e.g. '1.0,0.5'")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--direction", choices=("+", "-"), default="+")
    p.add_argument("--schedule", default="geom:2:21")
    p.add_argument("--out", required=True, help="trace CSV path")
    p.add_argument("--verdict", help="verdict JSON path")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("check", help="self-test a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="check report JSON path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("batch-probe", help="run many sampled probes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--box", help="x0lo:x0hi,x1lo:x1hi (default -3:3,-3:3)")
    p.add_argument("--schedule", default="geom:2:21")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_batch_probe)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
