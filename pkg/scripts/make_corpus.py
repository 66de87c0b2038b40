#!/usr/bin/env python3
"""Generate a synthetic corpus file for pipeline and evaluation experiments."""

import argparse
from pathlib import Path

from textground.corpus import write_corpus
from textground.synth import make_synthetic_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=2000, help="number of samples")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, required=True)
    args = parser.parse_args()

    manifest = write_corpus(args.out, make_synthetic_corpus(args.n, seed=args.seed))
    print(f"wrote {manifest.count} samples to {args.out} (sha256 {manifest.sha256[:12]}...)")


if __name__ == "__main__":
    main()
