#!/usr/bin/env python3
"""Drive the masked decoder with random scores and tabulate what comes out.

For each bin count and each tilt toward the special tokens, decode many
seeds and report how often decoding finishes before the length cap, the mean
length, the mean number of reactions kept and whether every finished output
was grammatical (it must be).

    python3 scripts/fsm_safety_sweep.py --seeds 2000
"""

import argparse
import time

import numpy as np

from rxnseq.decoder import DecodeConfig, greedy_decode
from rxnseq.fsm import accepts
from rxnseq.vocab import Vocabulary


class TiltedNoise:
    def __init__(self, vocab, seed, tilt):
        self.rng = np.random.default_rng(seed)
        self.size, self.n_bins, self.tilt = vocab.size, vocab.n_bins, tilt

    def __call__(self, prefix):
        s = self.rng.normal(size=self.size)
        s[self.n_bins :] += self.tilt
        return s


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=1000)
    ap.add_argument("--bins", type=int, nargs="+", default=[8, 64, 2000])
    ap.add_argument("--tilts", type=float, nargs="+", default=[0.0, 1.0, 2.0, 3.0])
    ap.add_argument("--max-length", type=int, default=200)
    args = ap.parse_args()

    print(f"{'bins':>6} {'tilt':>5} {'finished':>9} {'mean len':>9} {'reactions':>10} {'grammatical':>12} {'s':>6}")
    for n_bins in args.bins:
        vocab = Vocabulary(n_bins)
        config = DecodeConfig(vocab, max_length=args.max_length)
        for tilt in args.tilts:
            t0 = time.perf_counter()
            finished, lengths, reactions, ok = 0, [], [], True
            for seed in range(args.seeds):
                res = greedy_decode(TiltedNoise(vocab, seed, tilt), config)
                lengths.append(len(res.sequence))
                reactions.append(len(res.structure))
                if not res.truncated:
                    finished += 1
                    ok &= accepts(res.sequence, vocab)
            print(
                f"{n_bins:>6} {tilt:>5.1f} {finished / args.seeds:>9.1%} {np.mean(lengths):>9.1f} "
                f"{np.mean(reactions):>10.2f} {str(ok):>12} {time.perf_counter() - t0:>6.1f}"
            )


if __name__ == "__main__":
    main()
