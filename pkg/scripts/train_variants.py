#!/usr/bin/env python3
"""Train the toy model under all four supervision configurations and compare
how the image and text loss segments evolve."""

import argparse

from textground.targets import BuildConfig, Order, Variant
from textground.toy_model import ToyModel, make_glyph_task, toy_vocab, train


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=64)
    parser.add_argument("--steps", type=int, default=300)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--alpha", type=float, default=1.0)
    args = parser.parse_args()

    vocab = toy_vocab()
    print(f"{'variant':<8} {'order':<6} {'initial':>9} {'final':>9} {'ratio':>7} "
          f"{'l_img':>9} {'l_text':>9}")
    for variant in Variant:
        for order in Order:
            cfg = BuildConfig(variant=variant, order=order, alpha=args.alpha)
            task = make_glyph_task(seed=args.seed, n_samples=args.samples, cfg=cfg)
            model = ToyModel.create(vocab.vocab_size, seed=args.seed)
            result = train(model, task, steps=args.steps, cfg=cfg)
            print(
                f"{variant.value:<8} {order.value:<6} "
                f"{result.initial.total:>9.2f} {result.final.total:>9.2f} "
                f"{result.final.total / result.initial.total:>7.3f} "
                f"{result.final.l_img:>9.2f} {result.final.l_text:>9.2f}"
            )


if __name__ == "__main__":
    main()
