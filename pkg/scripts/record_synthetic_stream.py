#!/usr/bin/env python3
"""Record a synthetic landmark stream for a model (demo/replay input).

The stream projects one synthetic person: a wandering head pose with a
neutral face during the first frames (for calibration), then oscillating
expressions. Usage:

    python scripts/record_synthetic_stream.py models/global.mod3dmm out.jsonl \
        --frames 600 --seed 4 --neutral-frames 30
"""

import argparse
import json
from pathlib import Path

from facemirror.model import load_model
from facemirror.streams import synthetic_stream, write_landmark_jsonl


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("model")
    parser.add_argument("out")
    parser.add_argument("--frames", type=int, default=600)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--neutral-frames", type=int, default=30)
    parser.add_argument("--static", action="store_true", help="hold the head still")
    parser.add_argument("--identity-out", metavar="PATH",
                        help="dump the ground-truth identity coefficients as JSON")
    args = parser.parse_args()

    model = load_model(args.model)
    frames, identity = synthetic_stream(
        model, args.frames, seed=args.seed, moving=not args.static,
        neutral_frames=args.neutral_frames,
    )
    write_landmark_jsonl(frames, args.out)
    if args.identity_out:
        Path(args.identity_out).write_text(
            json.dumps([float(v) for v in identity]) + "\n", encoding="utf-8")
    print(f"wrote {args.frames} frames to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
