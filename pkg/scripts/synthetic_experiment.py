#!/usr/bin/env python3
"""Train single and dual frontends on the toy locale and print the evaluation report.

    python3 scripts/synthetic_experiment.py [--out DIR] [--n-train N] [--max-steps N]
"""
import argparse
import dataclasses
import logging
import time
from pathlib import Path

from s2sfe import experiment as E
from s2sfe.corpus import Stage


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", help="directory for checkpoints, codecs and the report")
    ap.add_argument("--n-train", type=int, default=E.SyntheticSetup.n_train)
    ap.add_argument("--merges", type=int, default=E.SyntheticSetup.merges)
    ap.add_argument("--max-steps", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    setup = E.SyntheticSetup(n_train=args.n_train, merges=args.merges)
    if args.max_steps:
        setup.train = dataclasses.replace(setup.train, max_steps=args.max_steps)
    t0 = time.perf_counter()
    result = E.run(setup, log_fn=lambda m: logging.info("%6.0fs %s", time.perf_counter() - t0, m))
    lines = result.lines()
    print("\n".join(lines))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for stage in Stage:
            result.bundles[stage].save(out / f"{stage.value}.ckpt", out / f"{stage.value}.bpe")
        (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
