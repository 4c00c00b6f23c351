"""Training loop: cached corpus, deterministic sampling, alternating updates.

Each optimization step runs the generator once, updates it on the full
objective against the discriminator's current weights, then updates the
discriminator on its own objective plus the gradient penalty.  Mask and
batch draws come from substreams keyed by (seed, purpose, step) so a resumed
run replays the exact sequence and loss-configuration toggles cannot shift
the data the model sees.
"""

from __future__ import annotations

import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ABLATION_VARIANTS, RunConfig, apply_variant
from .errors import ConfigError, ParameterError, ShapeError
from .imageops import (MASK_BUCKETS, Image, apply_mask, canny, composite,
                       gen_irregular_mask, load_image, make_edge_mask)
from .losses import (FeatureExtractor, LossReport, adversarial_losses,
                     edge_loss, hsv_losses, l1_loss, perceptual_loss,
                     style_loss, total_loss)
from .metrics import hue_mae, psnr, ssim
from .model import (Discriminator, Generator, generator_apply,
                    generator_forward)
from .rng import Stream, derive_key
from .tensor import OptimState, Tensor, adam_step, zero_grads

WORKERS_ENV = "STRIPEPAINT_WORKERS"


# ---------------------------------------------------------------------------
# corpus

@dataclass
class TrainData:
    """In-memory training corpus with per-image edge weights precomputed."""

    names: list[str]
    images: np.ndarray        # (n, 3, s, s) float32 in [0, 1]
    edge_weights: np.ndarray  # (n, 1, s, s) float32 in {1, 10}


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
        return n
    return min(8, os.cpu_count() or 1)


def load_training_data(image_dir: str, size: int) -> TrainData:
    """Load every PNG under image_dir and precompute its edge-weight raster.

    Edge maps depend only on the ground-truth image, so they are computed
    once here rather than per step.  Decoding fans out over a worker pool
    (capped by the STRIPEPAINT_WORKERS env var) with deterministic order.
    """
    try:
        names = sorted(n for n in os.listdir(image_dir)
                       if n.lower().endswith(".png"))
    except OSError as exc:
        raise ParameterError(f"cannot list training directory {image_dir}: {exc}")
    if not names:
        raise ParameterError(f"no PNG images found in {image_dir}")

    def prepare(name: str):
        img = load_image(os.path.join(image_dir, name))
        if img.data.shape != (size, size, 3):
            raise ShapeError(
                f"{name}: expected a {size}x{size} RGB image, got "
                f"{img.data.shape[1]}x{img.data.shape[0]}")
        chw = img.data.transpose(2, 0, 1)
        weights = make_edge_mask(canny(img)).data[None]
        return chw, weights

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        rows = list(pool.map(prepare, names))
    images = np.stack([r[0] for r in rows]).astype(np.float32)
    edges = np.stack([r[1] for r in rows]).astype(np.float32)
    return TrainData(names, images, edges)


# ---------------------------------------------------------------------------
# state

@dataclass
class TrainState:
    cfg: RunConfig
    gen: Generator
    disc: Discriminator
    opt_g: OptimState
    opt_d: OptimState
    fx: FeatureExtractor
    step: int = 0                                  # completed steps
    history: list[LossReport] = field(default_factory=list)


def fresh_state(cfg: RunConfig) -> TrainState:
    return TrainState(cfg, Generator(cfg.model, cfg.seed),
                      Discriminator(cfg.model, cfg.seed),
                      OptimState(), OptimState(), FeatureExtractor())


def resume_state(cfg: RunConfig, ckpt_path: str) -> TrainState:
    bundle = load_checkpoint(ckpt_path)
    if bundle.gen.cfg != cfg.model:
        raise ConfigError(
            f"checkpoint {ckpt_path} was trained with a different model config")
    if bundle.gen.seed != cfg.seed:
        raise ConfigError(
            f"checkpoint {ckpt_path} used seed {bundle.gen.seed}, "
            f"run config says {cfg.seed}")
    return TrainState(cfg, bundle.gen, bundle.disc, bundle.opt_g,
                      bundle.opt_d, FeatureExtractor(), step=bundle.step)


# ---------------------------------------------------------------------------
# deterministic sampling

def batch_indices(seed: int, step: int, n_images: int, batch: int) -> np.ndarray:
    """Image indices for one step; a pure function of (seed, step)."""
    s = Stream(derive_key(derive_key(seed, "batch"), step))
    return s.randint(0, n_images, batch)


def batch_masks(seed: int, step: int, size: int, batch: int) -> np.ndarray:
    """(batch, 1, size, size) hole masks, bucket sampled uniformly per item."""
    key = derive_key(derive_key(seed, "masks"), step)
    s = Stream(key)
    bucket_ids = s.randint(0, len(MASK_BUCKETS), batch)
    rows = [gen_irregular_mask(size, size, MASK_BUCKETS[int(b)],
                               derive_key(key, i)).data[None]
            for i, b in enumerate(bucket_ids)]
    return np.stack(rows).astype(np.float32)


# ---------------------------------------------------------------------------
# one step

def train_step(state: TrainState, data: TrainData, step: int) -> LossReport:
    """Run optimization step `step` (1-based) and return its loss report.

    The generator update runs first, against the discriminator's pre-update
    weights; the discriminator objective lives on a separate graph (its
    terms enter the generator total as constants), so neither backward pass
    sees grads left over from the other.
    """
    cfg = state.cfg
    idx = batch_indices(cfg.seed, step, len(data.names), cfg.batch_size)
    gt_np = data.images[idx]
    ew_np = data.edge_weights[idx]
    m_np = batch_masks(cfg.seed, step, cfg.image_size, cfg.batch_size)
    x_in = np.concatenate([gt_np * (1.0 - m_np), m_np], axis=1)

    gt = Tensor(gt_np)
    out, _ = generator_apply(state.gen, Tensor(x_in))

    terms: dict = {
        "l1": l1_loss(out, gt),
        "edge": edge_loss(out, gt, ew_np),
        "perc": perceptual_loss(out, gt, m_np, state.fx),
        "style": style_loss(out, gt, state.fx),
    }
    if cfg.use_hsv_loss:
        l_hsv, l_hsv_edge, l_total_hsv = hsv_losses(
            out, gt, ew_np, cfg.loss, include_v=cfg.hsv_include_v)
        terms["hsv"], terms["hsv_edge"] = l_hsv, l_hsv_edge
        terms["total_hsv"] = l_total_hsv

    l_d, l_g, l_gp, _ = adversarial_losses(out, gt, m_np, state.disc, cfg.loss)
    # for the generator total, the discriminator-only pieces are constants
    adv_const = float(l_d.data) + cfg.loss.gp * float(l_gp.data)
    terms["adv"] = T.add(l_g, Tensor(np.float32(adv_const)))
    terms["d"], terms["g"], terms["gp"] = l_d, l_g, l_gp

    total, report = total_loss(terms, cfg.loss)

    T.backward(total)
    adam_step(state.gen.tensors, state.opt_g, lr=cfg.lr_g,
              beta1=cfg.beta1, beta2=cfg.beta2)
    zero_grads(state.gen.tensors)
    zero_grads(state.disc.tensors)

    d_obj = T.add(l_d, T.scale(l_gp, cfg.loss.gp))
    T.backward(d_obj)
    adam_step(state.disc.tensors, state.opt_d, lr=cfg.lr_d,
              beta1=cfg.beta1, beta2=cfg.beta2)
    zero_grads(state.disc.tensors)
    zero_grads(state.gen.tensors)

    state.step = step
    state.history.append(report)
    return report


# ---------------------------------------------------------------------------
# checkpoint plumbing

def checkpoint_path(out_dir: str, step: int) -> str:
    return os.path.join(out_dir, f"step{step:06d}.ckpt")


def write_checkpoint(state: TrainState) -> str:
    """Write a step-stamped checkpoint plus a latest.ckpt alias, atomically.

    Data lands in a temp file first and is moved into place, so a failed
    write (e.g. full disk) can never clobber the previous checkpoint.
    """
    os.makedirs(state.cfg.out_dir, exist_ok=True)
    path = checkpoint_path(state.cfg.out_dir, state.step)
    tmp = path + ".tmp"
    try:
        save_checkpoint(tmp, state.gen, state.disc,
                        state.opt_g, state.opt_d, state.step)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    latest = os.path.join(state.cfg.out_dir, "latest.ckpt")
    tmp = latest + ".tmp"
    shutil.copyfile(path, tmp)
    os.replace(tmp, latest)
    return path


# ---------------------------------------------------------------------------
# loop

def train(cfg: RunConfig, resume: str | None = None,
          data: TrainData | None = None, log_fn=None) -> TrainState:
    """Run cfg.steps optimization steps with per-step logging.

    Appends one machine-parsable line per step to out_dir/train.log,
    checkpoints every cfg.checkpoint_every steps and at the end, and
    returns the final state.  `resume` continues from a checkpoint written
    by the same config and replays the exact step sequence a straight run
    would have produced.
    """
    if data is None:
        data = load_training_data(cfg.train_dir, cfg.image_size)
    state = resume_state(cfg, resume) if resume else fresh_state(cfg)
    if state.step >= cfg.steps:
        raise ConfigError(
            f"checkpoint is already at step {state.step}, config wants {cfg.steps}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    log_path = os.path.join(cfg.out_dir, "train.log")
    with open(log_path, "a" if state.step else "w", encoding="utf-8") as log:
        for step in range(state.step + 1, cfg.steps + 1):
            report = train_step(state, data, step)
            line = f"step={step}," + report.line()
            log.write(line + "\n")
            log.flush()
            if log_fn is not None:
                log_fn(line)
            if step % cfg.checkpoint_every == 0 or step == cfg.steps:
                write_checkpoint(state)
    return state


# ---------------------------------------------------------------------------
# ablation experiments

@dataclass
class AblationRow:
    variant: str
    psnr: float
    ssim: float
    hue_mae: float


def evaluate_generator(gen: Generator, data: TrainData,
                       seed: int) -> tuple[float, float, float]:
    """Mean PSNR/SSIM/hue-MAE of composited outputs over the corpus.

    Masks come from an evaluation substream of `seed` that cycles through
    the coverage buckets, so two models scored with the same seed and data
    see exactly the same holes.
    """
    size = gen.cfg.input_size
    key = derive_key(seed, "eval-masks")
    ps, ss, hs = [], [], []
    for i in range(data.images.shape[0]):
        bucket = MASK_BUCKETS[i % len(MASK_BUCKETS)]
        m = gen_irregular_mask(size, size, bucket, derive_key(key, i))
        gt = Image(data.images[i].transpose(1, 2, 0))
        raw, _ = generator_forward(gen, apply_mask(gt, m), m)
        out = composite(raw, gt, m)
        ps.append(psnr(out, gt))
        ss.append(ssim(out, gt))
        hs.append(hue_mae(out, gt, m))
    return float(np.mean(ps)), float(np.mean(ss)), float(np.mean(hs))


def run_ablation(cfg: RunConfig, variants: list[str]) -> list[AblationRow]:
    """Train the named flag variants on identical data and score each one.

    Every variant gets the same seed, corpus, masks, and step budget; only
    the four ablation flags differ.  Rows come back in the canonical
    comparison order regardless of how `variants` was spelled.
    """
    for name in variants:
        if name not in ABLATION_VARIANTS:
            known = ", ".join(ABLATION_VARIANTS)
            raise ConfigError(f"unknown ablation variant {name!r} (known: {known})")
    if not variants:
        raise ConfigError("no ablation variants requested")
    order = [v for v in ABLATION_VARIANTS if v in set(variants)]
    data = load_training_data(cfg.train_dir, cfg.image_size)
    rows = []
    for name in order:
        vcfg = apply_variant(
            replace(cfg, out_dir=os.path.join(cfg.out_dir, name)), name)
        state = train(vcfg, data=data)
        p, s, h = evaluate_generator(state.gen, data, cfg.seed)
        rows.append(AblationRow(name, p, s, h))
    return rows


def ablation_table(rows: list[AblationRow]) -> str:
    lines = [f"{'variant':<12} {'psnr':>9} {'ssim':>7} {'hue_mae':>8}"]
    for r in rows:
        lines.append(f"{r.variant:<12} {r.psnr:>9.4f} {r.ssim:>7.4f} "
                     f"{r.hue_mae:>8.4f}")
    return "\n".join(lines)
