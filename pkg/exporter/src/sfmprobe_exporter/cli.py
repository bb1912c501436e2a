"""Command line: export real-checkpoint features or the synthetic set.

    sfmprobe-export --sfm whisper --input-csv clips.csv --out feats/
    sfmprobe-export --synthetic --out feats/ [--seed N]
"""
from __future__ import annotations

import argparse
import sys

from sfmprobe_exporter.export import export, export_synthetic, load_job_csv
from sfmprobe_exporter.registry import known_sfms
from sfmprobe_exporter.wire import ExportError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfmprobe-export")
    parser.add_argument("--sfm", choices=known_sfms(), help="model to export from")
    parser.add_argument("--input-csv", dest="input_csv",
                        help="clip listing (sample_id, per-ear audio, listener, "
                             "score, audiogram)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--synthetic", action="store_true",
                        help="write a synthetic feature set (no checkpoints)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--samples", type=int, default=8,
                        help="synthetic mode: number of samples")
    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        if args.synthetic:
            manifest = export_synthetic(args.out, n_samples=args.samples, seed=args.seed)
        else:
            if not args.sfm or not args.input_csv:
                print("usage error: --sfm and --input-csv are required "
                      "unless --synthetic", file=sys.stderr)
                return 2
            job = load_job_csv(args.sfm, args.input_csv, args.out)
            manifest = export(job)
        print(manifest)
        return 0
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
