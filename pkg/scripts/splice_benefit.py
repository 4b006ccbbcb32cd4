#!/usr/bin/env python3
"""BLEU of a length-degrading simulated translator with and without splicing."""
import argparse

from s2sfe.simulate import splice_benefit
from s2sfe.splice import SpliceConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--window", type=int, default=25)
    ap.add_argument("--overlap", type=int, default=10)
    args = ap.parse_args()
    res = splice_benefit(args.n, args.seed, SpliceConfig(args.window, args.overlap))
    print(f"unspliced BLEU {res.bleu_unspliced:.2f}")
    print(f"spliced   BLEU {res.bleu_spliced:.2f}")
    print(f"gain      {res.gain:+.2f}")


if __name__ == "__main__":
    main()
