"""Overfit the generator to a single image and report hole recovery.

Quick sanity experiment: with a pixel-dominant objective the model should
memorize one 64x64 image well enough to fill unseen holes above 20 dB.
"""

import argparse
import os
import time

import numpy as np

from stripepaint.config import RunConfig
from stripepaint.imageops import (Image, apply_mask, canny, composite,
                                  gen_irregular_mask, load_image,
                                  make_edge_mask, save_image)
from stripepaint.losses import LossWeights
from stripepaint.model import generator_forward
from stripepaint.rng import derive_key
from stripepaint.training import TrainData, fresh_state, train_step


def block_image(seed, size):
    rng = np.random.default_rng(seed)
    base = rng.uniform(0, 1, (8, 8, 3))
    img = np.kron(base, np.ones((size // 8, size // 8, 1)))[:size, :size]
    img = img + rng.uniform(-0.05, 0.05, img.shape)
    return np.clip(img, 0, 1).astype(np.float32)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--image", help="64x64 PNG to memorize (default: generated blocks)")
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--lr", type=float, default=2e-3)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", default="runs/overfit", help="where to write result PNGs")
    args = ap.parse_args()

    img = load_image(args.image).data if args.image else block_image(0, 64)
    size = img.shape[0]
    edge = make_edge_mask(canny(Image(img))).data[None]
    data = TrainData(["target.png"], img.transpose(2, 0, 1)[None],
                     edge[None].astype(np.float32))

    cfg = RunConfig(train_dir="unused", out_dir=args.out, image_size=size,
                    batch_size=1, steps=args.steps, seed=args.seed,
                    lr_g=args.lr, lr_d=args.lr / 2, use_hsv_loss=False,
                    loss=LossWeights(style=0.0, adv=0.0, total_hsv=0.0))
    state = fresh_state(cfg)

    t0 = time.time()
    first = None
    for step in range(1, cfg.steps + 1):
        report = train_step(state, data, step)
        if step == 1:
            first = report.l1
        if step % 50 == 0 or step == 1:
            print(f"step {step:4d}  l1={report.l1:.4f}  total={report.total:.2f}")

    gt = Image(img)
    mask = gen_irregular_mask(size, size, (0.3, 0.4), derive_key(cfg.seed, "eval"))
    raw, _ = generator_forward(state.gen, apply_mask(gt, mask), mask)
    out = composite(raw, gt, mask)
    hole = mask.data.astype(bool)
    mse = float(np.mean((out.data[hole].astype(np.float64) - gt.data[hole]) ** 2))
    print(f"\nl1 ratio {report.l1 / first:.3f}, hole psnr "
          f"{10 * np.log10(1 / mse):.2f} dB, {time.time() - t0:.0f}s")

    os.makedirs(args.out, exist_ok=True)
    save_image(gt, os.path.join(args.out, "target.png"))
    save_image(Image(apply_mask(gt, mask).data), os.path.join(args.out, "masked.png"))
    save_image(out, os.path.join(args.out, "filled.png"))
    print(f"wrote target/masked/filled PNGs to {args.out}")


if __name__ == "__main__":
    main()
