#!/usr/bin/env python3
"""Build a demo model directory: one global model plus six demographic targets.

Usage: python scripts/make_demo_models.py [out_dir] [--n-vertices N] [--seed S]
"""

import argparse
from pathlib import Path

from facemirror.model import generate_bespoke_model, generate_synthetic_model, save_model

TARGET_TAGS = [
    "female-africa", "male-africa",
    "female-asia", "male-asia",
    "female-europe", "male-europe",
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", nargs="?", default="models")
    parser.add_argument("--n-vertices", type=int, default=3000)
    parser.add_argument("--n-id", type=int, default=40)
    parser.add_argument("--n-expr", type=int, default=12)
    parser.add_argument("--n-color", type=int, default=4)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = generate_synthetic_model(
        seed=args.seed, n_vertices=args.n_vertices, n_id=args.n_id,
        n_expr=args.n_expr, tag="global", n_color=args.n_color,
    )
    save_model(base, out / "global.mod3dmm")
    print(f"global: N={base.n_vertices} n_id={base.n_id} n_expr={base.n_expr}")
    for i, tag in enumerate(TARGET_TAGS):
        bespoke = generate_bespoke_model(base, seed=args.seed + 100 + i, tag=tag,
                                         n_id=max(4, args.n_id * 3 // 4))
        save_model(bespoke, out / f"{tag}.mod3dmm")
        print(f"target: {tag} (n_id={bespoke.n_id})")
    print(f"wrote {1 + len(TARGET_TAGS)} containers to {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
