"""Training objectives: reconstruction, edge, perceptual, style, HSV, adversarial.

All losses take NCHW float32 tensors in [0,1] and reduce to scalar graph
nodes.  The HSV terms run a differentiable RGB→HSV conversion that mirrors
the array converter in imageops branch for branch, so both agree bitwise
on the forward values.  The perceptual/style feature basis is a fixed,
seeded conv stack rather than a pretrained network; the loss formulas
around it are unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ParameterError, ShapeError, TrainingAbortError
from .model import Discriminator, discriminator_forward, discriminator_input_gradient
from .rng import derive_key
from .tensor import Tensor, seeded_normal


@dataclass
class LossWeights:
    l1: float = 10.0
    edge: float = 10.0
    perc: float = 0.1
    style: float = 250.0
    total_hsv: float = 1.0
    adv: float = 10.0
    hsv: float = 10.0
    hsv_edge: float = 100.0
    gp: float = 1e-3

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ParameterError(f"loss weight {name} must be >= 0, got {value}")


@dataclass
class LossReport:
    """Per-step scalar values of every term plus the weighted total."""

    l1: float = 0.0
    edge: float = 0.0
    perc: float = 0.0
    style: float = 0.0
    hsv: float = 0.0
    hsv_edge: float = 0.0
    total_hsv: float = 0.0
    d: float = 0.0
    g: float = 0.0
    gp: float = 0.0
    adv: float = 0.0
    total: float = 0.0

    def line(self) -> str:
        return ",".join(f"{k}={v:.6f}" for k, v in vars(self).items())


def _check_pair(out: Tensor, gt: Tensor) -> None:
    if out.shape != gt.shape:
        raise ShapeError(f"image pair shapes differ: {out.shape} vs {gt.shape}")
    if out.ndim != 4 or out.shape[1] != 3:
        raise ShapeError(f"expected (N,3,H,W) images, got {out.shape}")


# ---------------------------------------------------------------------------
# pixel-space terms

def l1_loss(out: Tensor, gt: Tensor) -> Tensor:
    """Mean absolute error over all pixels and channels."""
    _check_pair(out, gt)
    return T.tmean(T.absolute(T.sub(out, gt)))


def _edge_weight(m_edge: np.ndarray, like: Tensor) -> Tensor:
    m = np.asarray(m_edge, dtype=like.data.dtype)
    if m.ndim == 2:
        m = m[None, None]
    if m.ndim != 4 or m.shape[1] != 1 or m.shape[0] != like.shape[0] \
            or m.shape[2:] != like.shape[2:]:
        raise ShapeError(f"edge weights {m.shape} do not match images {like.shape}")
    if not np.all((m == 1.0) | (m == 10.0)):
        raise ParameterError("edge weight map must contain only 1 and 10")
    return Tensor(m)


def edge_loss(out: Tensor, gt: Tensor, m_edge: np.ndarray) -> Tensor:
    """Mean over pixels of the squared edge-weighted difference.

    The weight map holds 10 on edge pixels and 1 elsewhere, so an error on
    an edge costs 100× the same error off it.
    """
    _check_pair(out, gt)
    m = _edge_weight(m_edge, out)
    d = T.mul(T.sub(out, gt), m)
    return T.tmean(T.tsum(T.square(d), axis=1))


# ---------------------------------------------------------------------------
# differentiable HSV

def rgb_to_hsv_tensor(x: Tensor) -> Tensor:
    """Hexcone RGB→HSV on (N,3,H,W), hue in [0,1); matches rgb_to_hsv_array.

    Max/min run through ReLU compositions so they stay in the graph; the
    branch choices (which channel is largest, hue wrap, zero guards) are
    constants read off the forward values — the standard almost-everywhere
    subgradient treatment of the piecewise definition.
    """
    if x.ndim != 4 or x.shape[1] != 3:
        raise ShapeError(f"expected (N,3,H,W), got {x.shape}")
    r = T.narrow(x, 1, 0, 1)
    g = T.narrow(x, 1, 1, 1)
    b = T.narrow(x, 1, 2, 1)

    rg = T.add(r, T.relu(T.sub(g, r)))           # max(r, g)
    v = T.add(rg, T.relu(T.sub(b, rg)))          # max(r, g, b)
    rg_min = T.sub(r, T.relu(T.sub(r, g)))       # min(r, g)
    mn = T.sub(rg_min, T.relu(T.sub(rg_min, b)))
    delta = T.sub(v, mn)

    rd, gd, bd = r.data, g.data, b.data
    vd, dd = v.data, delta.data
    # branch on the raw channels: the ReLU-composed max can land 1 ulp off
    # its argument, so equality against it would misroute near-tie pixels
    rmax = (rd >= gd) & (rd >= bd) & (dd > 0)
    gmax = (gd >= rd) & (gd >= bd) & (dd > 0) & ~rmax
    bmax = (dd > 0) & ~rmax & ~gmax
    f32 = x.data.dtype

    safe_delta = T.add(delta, Tensor((dd == 0).astype(f32)))
    h_r = T.div(T.sub(g, b), safe_delta)
    h_r = T.add(h_r, Tensor((6.0 * ((gd - bd) < 0)).astype(f32)))  # the %6 wrap
    h_g = T.add(T.div(T.sub(b, r), safe_delta), Tensor(np.asarray(2.0, f32)))
    h_b = T.add(T.div(T.sub(r, g), safe_delta), Tensor(np.asarray(4.0, f32)))
    h = T.add(T.add(T.mul(Tensor(rmax.astype(f32)), h_r),
                    T.mul(Tensor(gmax.astype(f32)), h_g)),
              T.mul(Tensor(bmax.astype(f32)), h_b))
    h = T.scale(h, 1.0 / 6.0)
    h = T.sub(h, Tensor((h.data >= 1.0).astype(f32)))  # guard the rounding wrap

    s = T.div(delta, T.add(v, Tensor((vd == 0).astype(f32))))
    return T.concat([h, s, v], 1)


def hsv_losses(out: Tensor, gt: Tensor, m_edge: np.ndarray, w: LossWeights,
               include_v: bool = False):
    """Color losses in HSV space: plain, edge-weighted, and their combination.

    The value channel is excluded by default — brightness is already covered
    by the other objectives — so only hue and saturation differences count.
    """
    _check_pair(out, gt)
    m = _edge_weight(m_edge, out)
    span = 3 if include_v else 2
    hsv_out = T.narrow(rgb_to_hsv_tensor(out), 1, 0, span)
    hsv_gt = T.narrow(rgb_to_hsv_tensor(gt), 1, 0, span)
    diff = T.sub(hsv_out, hsv_gt)
    l_hsv = T.tmean(T.tsum(T.square(diff), axis=1))
    l_edge = T.tmean(T.tsum(T.square(T.mul(diff, m)), axis=1))
    l_total = T.add(T.scale(l_hsv, w.hsv), T.scale(l_edge, w.hsv_edge))
    return l_hsv, l_edge, l_total


# ---------------------------------------------------------------------------
# feature-space terms

class FeatureExtractor:
    """Fixed seeded conv stack standing in for a pretrained feature basis.

    Three stride-2 conv+ReLU stages (3→16→32→64 channels); weights are
    drawn once from the seed, flagged non-trainable, and frozen.
    """

    CHANNELS = (16, 32, 64)

    def __init__(self, seed: int = 0x5EED_FEA7):
        self.seed = seed
        self.weights = []
        c_in = 3
        for i, c_out in enumerate(self.CHANNELS):
            std = math.sqrt(2.0 / (c_in * 9))
            wt = seeded_normal((c_out, c_in, 3, 3), derive_key(seed, f"fx{i}"), std)
            wt.requires_grad = False
            wt.data.flags.writeable = False
            self.weights.append(wt)
            c_in = c_out

    def __call__(self, x: Tensor) -> list[Tensor]:
        feats = []
        for wt in self.weights:
            x = T.relu(T.conv2d(x, wt, stride=2, padding=1))
            feats.append(x)
        return feats


def _pool2(a: np.ndarray) -> np.ndarray:
    n, c, h, w = a.shape
    return a.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def perceptual_loss(out: Tensor, gt: Tensor, mask: np.ndarray,
                    fx: FeatureExtractor) -> Tensor:
    """Feature-space L1 restricted to visible (unmasked) regions.

    The visibility map 1−M is area-averaged down to each stage's resolution
    and weights the per-stage mean absolute feature difference.
    """
    _check_pair(out, gt)
    mask = np.asarray(mask, dtype=out.data.dtype)
    if mask.ndim == 2:
        mask = mask[None, None]
    if mask.shape != (out.shape[0], 1) + out.shape[2:]:
        raise ShapeError(f"mask {mask.shape} does not match images {out.shape}")
    vis = 1.0 - mask
    total = None
    for fo, fg in zip(fx(out), fx(gt)):
        vis = _pool2(vis)
        term = T.tmean(T.mul(T.absolute(T.sub(fo, fg)), Tensor(vis)))
        total = term if total is None else T.add(total, term)
    return total


def gram_matrix(f: Tensor) -> Tensor:
    """(N,C,H,W) → (N,C,C): G = F·Fᵀ over flattened positions, / (C·H·W)."""
    n, c, h, w = f.shape
    flat = T.reshape(f, (n, c, h * w))
    return T.scale(flat @ T.permute(flat, (0, 2, 1)), 1.0 / (c * h * w))


def style_loss(out: Tensor, gt: Tensor, fx: FeatureExtractor) -> Tensor:
    """Mean absolute difference of per-stage Gram matrices, summed."""
    _check_pair(out, gt)
    total = None
    for fo, fg in zip(fx(out), fx(gt)):
        term = T.tmean(T.absolute(T.sub(gram_matrix(fo), gram_matrix(fg))))
        total = term if total is None else T.add(total, term)
    return total


# ---------------------------------------------------------------------------
# adversarial suite

def _patch_mask(mask: np.ndarray, patches: tuple[int, int],
                dtype) -> np.ndarray:
    """Area-average the pixel mask onto the patch grid, threshold at 0.5."""
    n = mask.shape[0]
    ph, pw = patches
    fh = mask.shape[2] // ph
    fw = mask.shape[3] // pw
    pooled = mask.reshape(n, 1, ph, fh, pw, fw).mean(axis=(3, 5))
    return (pooled >= 0.5).astype(dtype)


def _log_sigmoid(logits: Tensor, flipped: bool) -> Tensor:
    p = T.sigmoid(logits)
    if flipped:
        p = T.sub(Tensor(np.asarray(1.0, p.data.dtype)), p)
    return T.log(T.clamp_min(p, 1e-7))


def adversarial_losses(out: Tensor, gt: Tensor, mask: np.ndarray,
                       disc: Discriminator, w: LossWeights):
    """Patch-level hinge-free GAN terms plus a real-image gradient penalty.

    The discriminator loss sees the generator output detached; visible
    patches of the output count as real and hole patches as fake.  The
    generator loss asks for every output patch to look real.  The penalty
    is the squared input gradient of the patch-logit sum at ground truth,
    expressed as a graph so it trains the discriminator weights.
    """
    if not isinstance(gt, Tensor):
        gt = Tensor(gt)
    _check_pair(out, gt)
    mask = np.asarray(mask, dtype=out.data.dtype)
    if mask.ndim == 2:
        mask = mask[None, None]
    if mask.shape != (out.shape[0], 1) + out.shape[2:]:
        raise ShapeError(f"mask {mask.shape} does not match images {out.shape}")

    logits_real = discriminator_forward(disc, gt)
    out_detached = Tensor(out.data)
    logits_fake_d = discriminator_forward(disc, out_detached)
    mp = _patch_mask(mask, logits_real.shape[2:], out.data.dtype)

    l_d = T.scale(T.tmean(_log_sigmoid(logits_real, False)), -1.0)
    l_d = T.sub(l_d, T.tmean(T.mul(_log_sigmoid(logits_fake_d, False), Tensor(1.0 - mp))))
    l_d = T.sub(l_d, T.tmean(T.mul(_log_sigmoid(logits_fake_d, True), Tensor(mp))))

    logits_fake = discriminator_forward(disc, out)
    l_g = T.scale(T.tmean(_log_sigmoid(logits_fake, False)), -1.0)

    u = discriminator_input_gradient(disc, gt.data)
    l_gp = T.scale(T.tsum(T.square(u)), 1.0 / u.shape[0])

    l_adv = T.add(T.add(l_d, l_g), T.scale(l_gp, w.gp))
    return l_d, l_g, l_gp, l_adv


# ---------------------------------------------------------------------------
# combination

_WEIGHTED = (("l1", "l1"), ("edge", "edge"), ("perc", "perc"),
             ("style", "style"), ("total_hsv", "total_hsv"), ("adv", "adv"))
_EXTRAS = ("hsv", "hsv_edge", "d", "g", "gp")


def _scalar(term) -> Tensor:
    if isinstance(term, Tensor):
        return term
    return Tensor(np.asarray(term, dtype=np.float32))


def total_loss(terms: dict, w: LossWeights):
    """Weighted sum per the default objective; returns (graph node, report).

    `terms` maps term names to scalars or graph nodes; the six weighted
    terms default to 0 when absent, extra entries (hsv, d, g, gp, …) are
    carried into the report unweighted.  A non-finite term aborts training
    by name.
    """
    for name, term in terms.items():
        value = float(term.data) if isinstance(term, Tensor) else float(term)
        if not math.isfinite(value):
            raise TrainingAbortError(f"loss term {name!r} is non-finite ({value})")

    total = None
    report = LossReport()
    for key, wname in _WEIGHTED:
        term = _scalar(terms.get(key, 0.0))
        setattr(report, key, float(term.data))
        piece = T.scale(term, getattr(w, wname))
        total = piece if total is None else T.add(total, piece)
    for key in _EXTRAS:
        if key in terms:
            t = terms[key]
            setattr(report, key, float(t.data) if isinstance(t, Tensor) else float(t))
    report.total = float(total.data)
    return total, report
