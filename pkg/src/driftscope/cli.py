"""Command-line entry points: simulate, analyze, rsp, report.

Exit codes: 0 success, 1 data error, 2 usage/config error. Every number the
CLI prints comes from a library call on the same inputs.
"""

from __future__ import annotations

import argparse
import os
import sys

from .drift import DriftCurve, detect_rsp, median_threshold
from .errors import ConfigInvalid, DriftscopeError
from .metrics import DEFAULT_EPSILON, SimilarityKind
from .store import analyze_dump, format_report, write_report_bundle
from .toylab.experiment import (
    TrainSettings,
    clean_task_config,
    run_experiment,
    shortcut_task_config,
)
from .version import __version__


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise ConfigInvalid(f"seeds must be comma-separated integers, got {text!r}") from None


def _max_workers(n_seeds: int) -> int:
    cap = os.environ.get("DRIFTSCOPE_THREADS")
    if cap is not None:
        try:
            cap_n = int(cap)
        except ValueError:
            raise ConfigInvalid(f"DRIFTSCOPE_THREADS must be an integer, got {cap!r}") from None
        if cap_n < 1:
            raise ConfigInvalid(f"DRIFTSCOPE_THREADS must be >= 1, got {cap_n}")
        return min(cap_n, n_seeds)
    return 1


def cmd_simulate(args: argparse.Namespace) -> int:
    seeds = _parse_seeds(args.seeds)
    if args.preset == "clean":
        task = clean_task_config(probe_size=args.probe_size)
    else:
        task = shortcut_task_config(injection_prob=args.spur_prob, probe_size=args.probe_size)
    train = TrainSettings(
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        pooling=args.pooling,
    )
    result = run_experiment(
        task,
        epochs=args.epochs,
        seeds=seeds,
        window=args.window,
        kind=SimilarityKind(args.similarity),
        train=train,
        epsilon=args.epsilon,
        median_variant=args.median,
        run_prefix=args.preset,
        out_dir=args.out,
        max_workers=_max_workers(len(seeds)),
    )
    sys.stdout.write(result.format_summary())
    print(f"wrote run dumps and reports under {args.out}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    bundle = analyze_dump(
        args.records,
        args.manifest,
        similarity=args.similarity,
        window=args.window,
        epsilon=args.epsilon,
        median_variant=args.median,
        tau_override=args.tau,
    )
    paths = write_report_bundle(bundle, args.out)
    s = bundle.summary
    rsp = s.rsp_epoch if s.rsp_epoch is not None else "not stabilized"
    print(f"run {bundle.run_id}: RSP={rsp} tau={s.tau:.6g}")
    print(f"wrote {paths['report']}, {paths['json']}, {paths['series']}")
    return 0


def _rsp_table(curve: DriftCurve, window: int, tau: float | None, median_variant: str) -> int:
    tau_value = tau if tau is not None else median_threshold(curve, median_variant)
    result = detect_rsp(curve, window, tau_value)
    print(f"tau: {tau_value:.6g}    window: {result.window}")
    print("epoch  window_mean  stable")
    start = curve.epochs[0]
    for i, mean in enumerate(result.window_means):
        stable = "yes" if mean <= tau_value else "no"
        print(f"{start + i:<6d} {mean:<12.6g} {stable}")
    if result.stabilized:
        print(f"rsp_epoch: {result.rsp_epoch}")
    else:
        print("rsp_epoch: not stabilized")
    return 0


def cmd_rsp(args: argparse.Namespace) -> int:
    if args.curve is not None:
        try:
            values = [float(v) for v in args.curve.split(",") if v.strip() != ""]
        except ValueError:
            raise ConfigInvalid(f"curve must be comma-separated numbers, got {args.curve!r}") from None
        if not values:
            raise ConfigInvalid("curve must contain at least one value")
        curve = DriftCurve(
            run_id="manual",
            epochs=tuple(range(2, len(values) + 2)),
            values=tuple(values),
            probe_size=0,
        )
        window = args.window if args.window is not None else 2
        return _rsp_table(curve, window, args.tau, args.median or "interpolated")
    if not (args.records and args.manifest):
        raise ConfigInvalid("rsp needs either --curve or both --records and --manifest")
    bundle = analyze_dump(
        args.records,
        args.manifest,
        window=args.window,
        median_variant=args.median,
        tau_override=args.tau,
    )
    return _rsp_table(bundle.drift, bundle.rsp.window, bundle.rsp.tau, args.median or "interpolated")


def cmd_report(args: argparse.Namespace) -> int:
    bundle = analyze_dump(
        args.records,
        args.manifest,
        similarity=args.similarity,
        window=args.window,
        epsilon=args.epsilon,
        median_variant=args.median,
        tau_override=args.tau,
    )
    sys.stdout.write(format_report(bundle))
    return 0


def _add_analysis_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--window", type=int, default=None, help="stabilization window")
    parser.add_argument("--similarity", choices=["spearman", "cosine"], default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--median", choices=["interpolated", "lower"], default=None)
    parser.add_argument("--tau", type=float, default=None, help="threshold override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftscope",
        description="Attribution drift curves, stabilization detection, and spur-mass diagnostics",
    )
    parser.add_argument("--version", action="version", version=f"driftscope {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the synthetic training rig and dump records")
    sim.add_argument("--preset", choices=["clean", "shortcut"], default="clean")
    sim.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    sim.add_argument("--epochs", type=int, default=5)
    sim.add_argument("--window", type=int, default=2)
    sim.add_argument("--similarity", choices=["spearman", "cosine"], default="spearman")
    sim.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sim.add_argument("--median", choices=["interpolated", "lower"], default="interpolated")
    sim.add_argument("--spur-prob", type=float, default=0.8)
    sim.add_argument("--probe-size", type=int, default=100)
    sim.add_argument("--batch-size", type=int, default=32)
    sim.add_argument("--lr", type=float, default=TrainSettings().learning_rate)
    sim.add_argument("--pooling", choices=["mean", "attention"], default="mean")
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="analyze a dumped run and write its report")
    ana.add_argument("--records", required=True)
    ana.add_argument("--manifest", required=True)
    ana.add_argument("--out", required=True)
    _add_analysis_flags(ana)
    ana.set_defaults(func=cmd_analyze)

    rsp = sub.add_parser("rsp", help="print the stabilization scan as a table")
    rsp.add_argument("--records")
    rsp.add_argument("--manifest")
    rsp.add_argument("--curve", help="comma-separated drift values (epochs 2..T)")
    _add_analysis_flags(rsp)
    rsp.set_defaults(func=cmd_rsp)

    rep = sub.add_parser("report", help="print the full text report for a dumped run")
    rep.add_argument("--records", required=True)
    rep.add_argument("--manifest", required=True)
    _add_analysis_flags(rep)
    rep.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DriftscopeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
