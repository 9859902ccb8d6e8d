"""Command-line front end for stream extraction."""
from __future__ import annotations

import argparse
import sys

from .errors import ExtractError
from .extract import EncodeSettings, ExtractJob, extract_stream


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mv-extract",
        description="decode motion-vector side data to sidecar CSV + frames")
    p.add_argument("input", help="video file with an MV-exporting codec")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=("stream", "per-triplet"),
                   default="stream")
    p.add_argument("--preset", default="medium",
                   help="x264 preset for per-triplet re-encoding")
    p.add_argument("--crf", type=int, default=18,
                   help="x264 quality for per-triplet re-encoding")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = EncodeSettings(preset=args.preset, crf=args.crf)
        job = ExtractJob(input_path=args.input, out_dir=args.out,
                         mode=args.mode, settings=settings)
        result = extract_stream(job)
    except (ExtractError, EnvironmentError, OSError) as exc:
        print(f"mv-extract: error: {exc}", file=sys.stderr)
        return 1
    total = sum(result.mv_counts)
    print(f"{result.frame_count} frames, {total} vectors -> {result.sidecar_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
