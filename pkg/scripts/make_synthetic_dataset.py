#!/usr/bin/env python3
"""Write a random dataset file plus one PNG per diagram.

The images are white canvases with each entity box filled by colour noise,
enough to exercise augment, render and decode end to end without real data.

    python3 scripts/make_synthetic_dataset.py --out data/synth --num 50
"""

import argparse
from pathlib import Path

import numpy as np

from rxnseq import dataset_io
from rxnseq.synthetic import random_dataset, render


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--num", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-reactions", type=int, default=6)
    ap.add_argument("--max-entities", type=int, default=10)
    ap.add_argument("--min-side", type=float, default=16, help="smallest box side in pixels")
    ap.add_argument("--size", type=int, nargs=2, default=(200, 800), metavar=("MIN", "MAX"))
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    data = random_dataset(
        rng,
        args.num,
        max_reactions=args.max_reactions,
        max_entities=args.max_entities,
        size_range=tuple(args.size),
        integer=True,
        min_side=args.min_side,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for record in data:
        render(record, rng).save(out / record.file_name)
    dataset_io.save(data, out / "dataset.json")
    s = dataset_io.stats(data).overall
    print(f"{s.diagrams} diagrams, {s.entities} entities, {s.reactions} reactions -> {out}")


if __name__ == "__main__":
    main()
