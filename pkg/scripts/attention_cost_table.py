"""Print the attention cost schedule: stripe windows vs. full attention.

Tabulates score/value multiply-adds per block at the transformer branch's
working resolution for each stripe width, alongside the full-attention
cost, plus the generator parameter count at the default and desk sizes.
"""

import argparse

from stripepaint.attention import BlockConfig, StripeSpec, flop_count
from stripepaint.model import Generator, ModelConfig, count_parameters, \
    desk_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--side", type=int, default=32, help="feature map side")
    ap.add_argument("--channels", type=int, default=128)
    args = ap.parse_args()

    side, c = args.side, args.channels
    full = flop_count(BlockConfig(heads=16, sw=side, channels=c,
                                  is_full_attention=True), side, side)
    print(f"feature map {side}x{side}, {c} channels")
    print(f"{'sw':>4}  {'tokens/stripe':>13}  {'mult-adds':>14}  {'vs full':>8}")
    sw = 1
    while sw <= side:
        if side % sw == 0:
            flops = flop_count(BlockConfig(heads=2, sw=sw, channels=c),
                               side, side)
            tokens = StripeSpec(sw, "horizontal", side, side).tokens_per_stripe
            print(f"{sw:>4}  {tokens:>13}  {flops:>14,}  1/{full // flops}")
        sw *= 2
    print(f"full  {side * side:>13}  {full:>14,}  1/1")

    for label, cfg in (("default", ModelConfig()), ("desk", desk_config())):
        n = count_parameters(Generator(cfg, seed=0).tensors)
        print(f"\n{label} generator ({cfg.input_size}x{cfg.input_size} input): "
              f"{n / 1e6:.2f}M parameters")


if __name__ == "__main__":
    main()
