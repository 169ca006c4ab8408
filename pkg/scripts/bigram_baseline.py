#!/usr/bin/env python3
"""Five-fold cross-validation of a token bigram model on synthetic data.

A bigram model sees no pixels. On random synthetic layouts it scores zero,
since no box position is predictable without the image. The script exists to
run the real pipeline end to end (split, encode, constrained decode,
post-process, evaluate) with a model fitted on the training folds.

    python3 scripts/bigram_baseline.py --num 200 --n-bins 64
"""

import argparse

import numpy as np

from rxnseq import dataset_io
from rxnseq.codec import encode
from rxnseq.decoder import DecodeConfig, bigram_source, greedy_decode
from rxnseq.metrics import MatchCounts, MatchMode, evaluate
from rxnseq.schema import Dataset
from rxnseq.synthetic import random_dataset
from rxnseq.vocab import Vocabulary


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dataset", help="dataset file (default: generate synthetic data)")
    ap.add_argument("--num", type=int, default=200)
    ap.add_argument("--folds", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-bins", type=int, default=64)
    ap.add_argument("--smoothing", type=float, default=0.1)
    ap.add_argument("--max-length", type=int, default=300)
    args = ap.parse_args()

    if args.dataset:
        data = dataset_io.load(args.dataset)
    else:
        data = random_dataset(np.random.default_rng(args.seed), args.num, max_reactions=4, min_side=16, size_range=(200, 800))
    vocab = Vocabulary(args.n_bins)
    folds = dataset_io.split_folds(data, args.folds, args.seed)
    by_id = data.by_id()
    totals = {mode: MatchCounts() for mode in MatchMode}

    print(f"{'fold':>4} {'train':>6} {'test':>5} {'hard P/R/F1':>20} {'soft P/R/F1':>20}")
    for k in range(args.folds):
        test_ids = set(folds.members(k))
        train = [encode(r, vocab) for r in data if r.image_id not in test_ids]
        test = Dataset(tuple(by_id[i] for i in folds.members(k)))
        source = bigram_source(train, vocab, args.smoothing)
        config = DecodeConfig(vocab, max_length=args.max_length)
        pred = {r.image_id: greedy_decode(source, config, r.width, r.height).structure for r in test}
        cells = []
        for mode in MatchMode:
            rep = evaluate(test, pred, mode)
            totals[mode] = totals[mode] + rep.counts
            cells.append(f"{rep.precision:.3f}/{rep.recall:.3f}/{rep.f1:.3f}")
        print(f"{k:>4} {len(train):>6} {len(test):>5} {cells[0]:>20} {cells[1]:>20}")
    cells = [f"{c.precision:.3f}/{c.recall:.3f}/{c.f1:.3f}" for c in totals.values()]
    print(f"{'all':>4} {'':>6} {len(data):>5} {cells[0]:>20} {cells[1]:>20}")


if __name__ == "__main__":
    main()
