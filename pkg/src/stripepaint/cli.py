"""Command-line entry point: train, inpaint, genmasks, eval, ablate.

Every failure path prints a single machine-parsable line
``error: <kind>: <detail>`` to stderr and exits nonzero; success prints
``key=value`` result lines to stdout and exits 0.
"""

from __future__ import annotations

import argparse
import os
import sys

from .checkpoint import load_checkpoint
from .config import ABLATION_VARIANTS, load_run_config
from .errors import ConfigError, ShapeError
from .imageops import (apply_mask, composite, gen_irregular_mask, load_image,
                       load_mask, save_image, save_mask)
from .metrics import evaluate_pairs, psnr
from .model import generator_forward
from .rng import derive_key
from .training import ablation_table, run_ablation, train


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad arguments on one line instead of exiting."""

    def error(self, message):
        raise _ArgError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="stripepaint",
                     description="stripe-window transformer inpainting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--resume", default=None,
                   help="checkpoint to continue from (optional)")

    p = sub.add_parser("inpaint", help="fill the masked region of one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gt", default=None,
                   help="ground truth to report PSNR against (optional)")

    p = sub.add_parser("genmasks", help="generate irregular hole masks")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--bucket", required=True,
                   help="coverage band LO-HI, e.g. 30-40 or 0.3-0.4")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score outputs against ground truth")
    p.add_argument("--out", required=True, help="directory of model outputs")
    p.add_argument("--gt", required=True)
    p.add_argument("--masks", required=True)

    p = sub.add_parser("ablate", help="train and compare flag variants")
    p.add_argument("--config", required=True)
    p.add_argument("--variants", required=True,
                   help="comma list from: " + ", ".join(ABLATION_VARIANTS))
    return parser


def parse_bucket(spec: str) -> tuple[float, float]:
    """Parse LO-HI coverage bands; values above 1 are read as percentages."""
    parts = spec.split("-")
    if len(parts) != 2:
        raise ConfigError(f"bucket must look like LO-HI, got {spec!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"bucket bounds must be numbers, got {spec!r}")
    if hi > 1.0:
        lo, hi = lo / 100.0, hi / 100.0
    if not 0.0 < lo < hi < 1.0:
        raise ConfigError(f"bucket must satisfy 0 < lo < hi < 1, got {spec!r}")
    return lo, hi


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if not os.path.isdir(cfg.train_dir):
        raise ConfigError(f"train_dir does not exist: {cfg.train_dir}")
    train(cfg, resume=args.resume, log_fn=print)
    print(f"checkpoint={os.path.join(cfg.out_dir, 'latest.ckpt')}")
    return 0


def cmd_inpaint(args) -> int:
    bundle = load_checkpoint(args.ckpt)
    gen = bundle.gen
    img = load_image(args.image)
    mask = load_mask(args.mask)
    size = gen.cfg.input_size
    if img.data.shape[:2] != (size, size):
        raise ShapeError(
            f"model expects {size}x{size} images, got "
            f"{img.data.shape[1]}x{img.data.shape[0]}")
    if mask.data.shape != (size, size):
        raise ShapeError(
            f"model expects a {size}x{size} mask, got "
            f"{mask.data.shape[1]}x{mask.data.shape[0]}")
    raw, _ = generator_forward(gen, apply_mask(img, mask), mask)
    result = composite(raw, img, mask)
    save_image(result, args.out)
    print(f"out={args.out}")
    if args.gt is not None:
        gt = load_image(args.gt)
        print(f"psnr={psnr(result, gt):.4f}")
    return 0


def cmd_genmasks(args) -> int:
    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    bucket = parse_bucket(args.bucket)
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.n):
        m = gen_irregular_mask(args.size, args.size, bucket,
                               derive_key(args.seed, i))
        name = f"mask_seed{args.seed}_{i:03d}_f{m.hole_fraction:.6f}.png"
        save_mask(m, os.path.join(args.out, name))
        print(f"wrote={name}")
    return 0


def cmd_eval(args) -> int:
    report = evaluate_pairs(args.out, args.gt, args.masks)
    table = report.table()
    print(table)
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    with open(os.path.join(args.out, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.csv() + "\n")
    return 0


def cmd_ablate(args) -> int:
    cfg = load_run_config(args.config)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    rows = run_ablation(cfg, variants)
    table = ablation_table(rows)
    print(table)
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "ablation.csv"), "w",
              encoding="utf-8") as fh:
        fh.write("variant,psnr,ssim,hue_mae\n")
        for r in rows:
            fh.write(f"{r.variant},{r.psnr:.6f},{r.ssim:.6f},{r.hue_mae:.6f}\n")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "inpaint": cmd_inpaint,
    "genmasks": cmd_genmasks,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _ArgError as exc:
        print(f"error: arguments: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # contract: one line on stderr, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
