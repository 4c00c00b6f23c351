"""PSNR and SSIM plus directory-level evaluation bucketed by hole fraction."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .imageops import (MASK_BUCKETS, Image, composite, load_image, load_mask,
                       luminance, rgb_to_hsv_array)


def psnr(a: Image, b: Image) -> float:
    """10·log10(1/MSE) with peak 1.0; identical images return +inf."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    mse = float(np.mean((a.data.astype(np.float64) - b.data) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    w = np.outer(k, k)
    return w / w.sum()


def _windowed(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted window means at every valid (un-padded) position."""
    views = np.lib.stride_tricks.sliding_window_view(x, w.shape)
    return np.tensordot(views, w, axes=([2, 3], [0, 1]))


def ssim(a: Image, b: Image) -> float:
    """Single-scale SSIM on Rec. 601 luminance, valid-window mean.

    Gaussian window 11×11 with σ=1.5, K1=0.01, K2=0.03, dynamic range 1.
    """
    if a.data.shape != b.data.shape:
        raise ShapeError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    h, w_ = a.data.shape[:2]
    if min(h, w_) < 11:
        raise ParameterError(f"SSIM needs min side >= 11, got {h}x{w_}")
    x = luminance(a)
    y = luminance(b)
    w = _gaussian_window()
    c1 = 0.01 ** 2
    c2 = 0.03 ** 2
    mu_x = _windowed(x, w)
    mu_y = _windowed(y, w)
    var_x = _windowed(x * x, w) - mu_x * mu_x
    var_y = _windowed(y * y, w) - mu_y * mu_y
    cov = _windowed(x * y, w) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def hue_mae(out: Image, gt: Image, mask) -> float:
    """Mean absolute hue deviation over hole pixels, wrap-around aware.

    Hue lives on a circle, so the per-pixel distance is min(|Δh|, 1−|Δh|);
    the maximum possible deviation is therefore 0.5.
    """
    if out.data.shape != gt.data.shape:
        raise ShapeError(f"image shapes differ: {out.data.shape} vs {gt.data.shape}")
    m = np.asarray(mask.data, dtype=np.float64)
    if m.shape != out.data.shape[:2]:
        raise ShapeError(f"mask shape {m.shape} does not match image")
    weight = m.sum()
    if weight == 0.0:
        raise ParameterError("mask has no hole pixels to measure over")
    h_out = rgb_to_hsv_array(out.data)[..., 0].astype(np.float64)
    h_gt = rgb_to_hsv_array(gt.data)[..., 0].astype(np.float64)
    d = np.abs(h_out - h_gt)
    d = np.minimum(d, 1.0 - d)
    return float((d * m).sum() / weight)


# ---------------------------------------------------------------------------
# corpus evaluation

def bucket_label(lo: float, hi: float) -> str:
    return f"{int(round(lo * 100))}%~{int(round(hi * 100))}%"


def bucket_of(fraction: float) -> str:
    for lo, hi in MASK_BUCKETS:
        if lo <= fraction < hi:
            return bucket_label(lo, hi)
    return "other"


@dataclass
class PairResult:
    name: str
    psnr: float
    ssim: float
    hole_fraction: float
    bucket: str


@dataclass
class BucketStats:
    count: int = 0
    psnr_mean: float = float("nan")
    ssim_mean: float = float("nan")
    psnr_inf_count: int = 0  # identical pairs excluded from the PSNR mean


@dataclass
class MetricReport:
    pairs: list = field(default_factory=list)
    buckets: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def table(self) -> str:
        lines = [f"{'bucket':<10} {'n':>4} {'psnr':>9} {'ssim':>7} {'inf':>4}"]
        for label, st in self.buckets.items():
            p = "---" if np.isnan(st.psnr_mean) else f"{st.psnr_mean:9.4f}"
            s = "---" if np.isnan(st.ssim_mean) else f"{st.ssim_mean:7.4f}"
            lines.append(f"{label:<10} {st.count:>4} {p:>9} {s:>7} {st.psnr_inf_count:>4}")
        if self.skipped:
            lines.append(f"skipped: {', '.join(self.skipped)}")
        return "\n".join(lines)

    def csv(self) -> str:
        lines = ["name,bucket,hole_fraction,psnr,ssim"]
        for p in self.pairs:
            lines.append(f"{p.name},{p.bucket},{p.hole_fraction:.6f},"
                         f"{p.psnr:.6f},{p.ssim:.6f}")
        return "\n".join(lines)


def _aggregate(pairs: list) -> dict:
    order = [bucket_label(lo, hi) for lo, hi in MASK_BUCKETS] + ["other"]
    buckets = {}
    for label in order:
        members = [p for p in pairs if p.bucket == label]
        if not members:
            continue
        st = BucketStats(count=len(members))
        finite = [p.psnr for p in members if np.isfinite(p.psnr)]
        st.psnr_inf_count = len(members) - len(finite)
        if finite:
            st.psnr_mean = float(np.mean(finite))
        st.ssim_mean = float(np.mean([p.ssim for p in members]))
        buckets[label] = st
    return buckets


def evaluate_pairs(dir_out: str, dir_gt: str, dir_masks: str,
                   use_composite: bool = True) -> MetricReport:
    """Score filename-aligned (output, ground-truth, mask) PNG triples.

    Outputs are composited against ground truth over the mask before
    scoring unless use_composite is off; missing counterparts are skipped
    and listed in the report.
    """
    report = MetricReport()
    names = sorted(n for n in os.listdir(dir_gt) if n.lower().endswith(".png"))
    if not names:
        raise ParameterError(f"no PNG images found in {dir_gt}")
    for name in names:
        out_path = os.path.join(dir_out, name)
        mask_path = os.path.join(dir_masks, name)
        if not os.path.exists(out_path) or not os.path.exists(mask_path):
            report.skipped.append(name)
            continue
        gt = load_image(os.path.join(dir_gt, name))
        out = load_image(out_path)
        mask = load_mask(mask_path)
        scored = composite(out, gt, mask) if use_composite else out
        frac = mask.hole_fraction
        report.pairs.append(PairResult(
            name=name,
            psnr=psnr(scored, gt),
            ssim=ssim(scored, gt),
            hole_fraction=frac,
            bucket=bucket_of(frac),
        ))
    report.buckets = _aggregate(report.pairs)
    return report
