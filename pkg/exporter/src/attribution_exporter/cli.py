"""CLI: export --checkpoints DIR --probe FILE --max-len 128 --out DIR"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ExporterError
from .export import export
from .job import ExportJob
from .version import __version__


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attribution-export",
        description="Export gradient-times-input token attributions from saved "
        "transformer checkpoints into drift-analysis interchange files",
    )
    parser.add_argument("--version", action="version", version=f"attribution-export {__version__}")
    parser.add_argument("--checkpoints", required=True, help="directory with one subdir per epoch")
    parser.add_argument("--probe", required=True, help="probe-set file (JSON lines)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--tokenizer", default=None,
                        help="tokenizer path or id; default: load from each epoch directory")
    parser.add_argument("--max-len", type=int, default=128)
    parser.add_argument("--run-id", default="export")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--exclude-special-tokens", action="store_true",
                        help="mask out classification/separator markers")
    parser.add_argument("--spur-pos-token", default=None)
    parser.add_argument("--spur-neg-token", default=None)
    parser.add_argument("--positive-label", default=None)
    parser.add_argument("--window", type=int, default=2)
    parser.add_argument("--similarity", choices=["spearman", "cosine"], default="spearman")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        checkpoints_dir=Path(args.checkpoints),
        probe_file=Path(args.probe),
        out_dir=Path(args.out),
        tokenizer=args.tokenizer,
        max_length=args.max_len,
        run_id=args.run_id,
        include_special_tokens=not args.exclude_special_tokens,
        batch_size=args.batch_size,
        device=args.device,
        spur_pos_token=args.spur_pos_token,
        spur_neg_token=args.spur_neg_token,
        positive_label=args.positive_label,
        analysis={
            "similarity": args.similarity,
            "window": args.window,
            "epsilon": 1e-12,
            "median_variant": "interpolated",
        },
    )
    try:
        records, manifest = export(job)
    except ExporterError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {records} and {manifest}")
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
