"""plotviz command line: surface, regions, probe."""

from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence

from .io import METRICS
from .render import render_probe, render_regions, render_surface

USAGE_ERROR = 2


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo_text, hi_text = text.split(":")
        lo, hi = float(lo_text), float(hi_text)
    except ValueError:
        raise ValueError(f"range {text!r} must look like lo:hi") from None
    if not lo < hi:
        raise ValueError(f"range must satisfy lo < hi, got {text!r}")
    return lo, hi


def _require_file(path: str) -> str:
    if not os.path.exists(path):
        raise ValueError(f"input file {path} does not exist")
    return path


def cmd_surface(args: argparse.Namespace) -> int:
    value_range = _parse_range(args.range) if args.range else None
    info = render_surface(
        _require_file(args.input),
        args.out,
        metric=args.metric,
        which=args.which,
        value_range=value_range,
        data_csv=_require_file(args.data) if args.data else None,
        dpi=args.dpi,
    )
    lo, hi = info["range"]
    print(
        f"rendered {info['column']} at {info['resolution']}x{info['resolution']} "
        f"(range {lo:g}:{hi:g}) to {args.out}"
    )
    return 0


def cmd_regions(args: argparse.Namespace) -> int:
    info = render_regions(_require_file(args.input), args.out, dpi=args.dpi)
    print(f"rendered {info['n_regions']} regions to {args.out}")
    return 0


def cmd_probe(args: argparse.Namespace) -> int:
    info = render_probe(_require_file(args.input), args.out, dpi=args.dpi)
    marked = sum(1 for b in info["betas"].values() if b is not None)
    print(
        f"rendered {info['steps']}-step trace ({marked}/{len(info['betas'])} "
        f"instances stabilized) to {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotviz",
        description="Render uncertainty surfaces, region maps, and probe traces from CSV exports",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("surface", help="metric or gradient-norm heat map")
    p.add_argument("--in", dest="input", required=True, help="surface CSV")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--metric", choices=METRICS, default="predictive_entropy")
    p.add_argument("--which", choices=("value", "grad"), default="value")
    p.add_argument("--range", help="color range lo:hi (defaults per metric)")
    p.add_argument("--data", help="dataset CSV scatter overlay")
    p.add_argument("--dpi", type=int, default=150)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("regions", help="categorical linear-region map")
    p.add_argument("--in", dest="input", required=True, help="surface CSV")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--dpi", type=int, default=150)
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("probe", help="metric and gradient curves along a probe")
    p.add_argument("--in", dest="input", required=True, help="trace CSV")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--dpi", type=int, default=150)
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
