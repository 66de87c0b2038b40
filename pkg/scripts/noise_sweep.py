#!/usr/bin/env python3
"""Sweep mock-OCR noise levels and report how each metric degrades.

A sanity experiment for the metric suite: character substitutions should
drive Acc/F1/PC down and CER up, while box jitter should mostly erode the
layout IoU.
"""

import argparse

from textground.clients import OcrNoise, mock_ocr
from textground.metrics import evaluate_sample
from textground.synth import make_synthetic_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    samples = make_synthetic_corpus(args.n, seed=args.seed)
    grid = [
        OcrNoise(0.0, 0.0),
        OcrNoise(0.05, 0.0),
        OcrNoise(0.15, 0.0),
        OcrNoise(0.0, 20.0),
        OcrNoise(0.0, 60.0),
        OcrNoise(0.15, 60.0),
    ]
    print(f"{'sub_rate':>8} {'jitter':>7} {'Acc':>7} {'F1':>7} {'CER':>7} {'IOU':>7} {'PC':>7}")
    for noise in grid:
        evals = [
            evaluate_sample(s, mock_ocr(s, noise, seed=args.seed)) for s in samples
        ]
        mean = lambda xs: sum(xs) / len(xs)
        print(
            f"{noise.char_sub_rate:>8.2f} {noise.box_jitter_px:>7.1f} "
            f"{100 * mean([e.acc for e in evals]):>7.2f} "
            f"{100 * mean([e.f1 for e in evals]):>7.2f} "
            f"{100 * mean([e.cer for e in evals]):>7.2f} "
            f"{100 * mean([e.layout_iou for e in evals]):>7.2f} "
            f"{100 * mean([e.pc for e in evals if e.pc is not None]):>7.2f}"
        )


if __name__ == "__main__":
    main()
