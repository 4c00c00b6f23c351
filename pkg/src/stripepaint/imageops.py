"""Image I/O, color conversion, edge detection, and mask machinery.

Everything here is plain numpy on small wrapper dataclasses; operations are
pure and safe to call concurrently.  Pixel conventions: images are float32
RGB in [0,1]; masks are float32 {0,1} with 1 marking the missing (hole)
region; PNG mask files store 0 = known, 255 = hole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import ImageIOError, MaskGenerationError, ParameterError, ShapeError
from .rng import Stream, derive_key

# Hole-coverage bands used for evaluation sweeps, lowest to highest.
MASK_BUCKETS = (
    (0.05, 0.10),
    (0.10, 0.20),
    (0.20, 0.30),
    (0.30, 0.40),
    (0.40, 0.50),
    (0.50, 0.60),
)


@dataclass
class Image:
    """Float32 RGB raster with components in [0,1], shape (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ShapeError(f"Image expects (H, W, 3), got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ShapeError("Image contains non-finite components")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise ShapeError("Image components must lie in [0,1]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class Mask:
    """Binary hole mask, shape (H, W); 1 = missing pixel."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ShapeError(f"Mask expects (H, W), got {self.data.shape}")
        if not np.all((self.data == 0.0) | (self.data == 1.0)):
            raise ShapeError("Mask must be strictly binary")

    @property
    def hole_fraction(self) -> float:
        return float(self.data.mean())


@dataclass
class EdgeMap:
    """Binary edge raster, shape (H, W); 1 = edge pixel."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ShapeError(f"EdgeMap expects (H, W), got {self.data.shape}")
        if not np.all((self.data == 0.0) | (self.data == 1.0)):
            raise ShapeError("EdgeMap must be strictly binary")


@dataclass
class EdgeMask:
    """Edge weighting raster with values in {1, 10}: 10 on edges, 1 elsewhere."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ShapeError(f"EdgeMask expects (H, W), got {self.data.shape}")
        if not np.all((self.data == 1.0) | (self.data == 10.0)):
            raise ShapeError("EdgeMask values must be exactly {1, 10}")


@dataclass
class HsvImage:
    """Hue/saturation/value raster; H in [0,1) with hue 0 at zero saturation."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ShapeError(f"HsvImage expects (H, W, 3), got {self.data.shape}")
        h, s, v = self.data[..., 0], self.data[..., 1], self.data[..., 2]
        if h.min() < 0.0 or h.max() >= 1.0:
            raise ShapeError("hue must lie in [0,1)")
        if s.min() < 0.0 or s.max() > 1.0 or v.min() < 0.0 or v.max() > 1.0:
            raise ShapeError("saturation/value must lie in [0,1]")


# ---------------------------------------------------------------------------
# PNG I/O

def _open_png(path: str) -> PILImage.Image:
    try:
        img = PILImage.open(path)
        img.load()
    except FileNotFoundError:
        raise ImageIOError(f"no such file: {path}") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from None
    return img


def load_image(path: str) -> Image:
    """Read an 8-bit RGB PNG; components map to float by v/255."""
    img = _open_png(path)
    if img.mode in ("I", "I;16", "I;16B", "I;16L"):
        raise ImageIOError(f"{path}: 16-bit PNG unsupported; expected 8-bit RGB")
    if img.mode != "RGB":
        raise ImageIOError(f"{path}: mode {img.mode} unsupported; expected 8-bit RGB")
    return Image(np.asarray(img, dtype=np.float32) / 255.0)


def save_image(image: Image, path: str) -> None:
    """Write an 8-bit RGB PNG, rounding components to nearest."""
    u8 = np.clip(np.rint(image.data * 255.0), 0, 255).astype(np.uint8)
    try:
        PILImage.fromarray(u8, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write image {path}: {exc}") from None


def load_mask(path: str) -> Mask:
    """Read an 8-bit grayscale PNG mask: 0 = known, 255 = hole."""
    img = _open_png(path)
    if img.mode != "L":
        raise ImageIOError(f"{path}: mode {img.mode} unsupported; expected 8-bit grayscale")
    arr = np.asarray(img, dtype=np.uint8)
    if not np.all((arr == 0) | (arr == 255)):
        raise ImageIOError(f"{path}: mask pixels must be 0 or 255")
    return Mask((arr == 255).astype(np.float32))


def save_mask(mask: Mask, path: str) -> None:
    u8 = (mask.data * 255.0).astype(np.uint8)
    try:
        PILImage.fromarray(u8, mode="L").save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write mask {path}: {exc}") from None


def save_edge_map(edge: EdgeMap, path: str) -> None:
    u8 = (edge.data * 255.0).astype(np.uint8)
    try:
        PILImage.fromarray(u8, mode="L").save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write edge map {path}: {exc}") from None


# ---------------------------------------------------------------------------
# color conversion (hexcone model)

def rgb_to_hsv_array(rgb: np.ndarray) -> np.ndarray:
    """Vectorized hexcone RGB→HSV on (..., 3) float arrays, hue in [0,1)."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = v - mn
    safe_delta = np.where(delta == 0.0, 1.0, delta)

    h = np.zeros_like(v)
    rmax = (v == r) & (delta > 0)
    gmax = (v == g) & (delta > 0) & ~rmax
    bmax = (delta > 0) & ~rmax & ~gmax
    h = np.where(rmax, ((g - b) / safe_delta) % 6.0, h)
    h = np.where(gmax, (b - r) / safe_delta + 2.0, h)
    h = np.where(bmax, (r - g) / safe_delta + 4.0, h)
    h = h / 6.0
    h = np.where(h >= 1.0, h - 1.0, h)  # guard the wrap from rounding

    s = np.where(v == 0.0, 0.0, delta / np.where(v == 0.0, 1.0, v))
    return np.stack([h, s, v], axis=-1).astype(rgb.dtype)


def hsv_to_rgb_array(hsv: np.ndarray) -> np.ndarray:
    """Vectorized hexcone HSV→RGB on (..., 3) float arrays."""
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    h6 = h * 6.0
    i = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))

    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1).astype(hsv.dtype)


def rgb_to_hsv(img: Image) -> HsvImage:
    return HsvImage(rgb_to_hsv_array(img.data))


def hsv_to_rgb(h: HsvImage) -> Image:
    return Image(np.clip(hsv_to_rgb_array(h.data), 0.0, 1.0))


# ---------------------------------------------------------------------------
# edge detection

def _gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolve1d(img: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    radius = len(k) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(img, pad, mode="reflect")
    out = np.zeros_like(img)
    for i, kv in enumerate(k):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + img.shape[axis])
        out += kv * padded[tuple(sl)]
    return out


def luminance(img: Image) -> np.ndarray:
    """Rec. 601 luma of an RGB image."""
    d = img.data.astype(np.float64)
    return 0.299 * d[..., 0] + 0.587 * d[..., 1] + 0.114 * d[..., 2]


def canny(img: Image, sigma: float = 1.4, low: float = 0.1, high: float = 0.2) -> EdgeMap:
    """Classic edge detector: blur, Sobel, non-max suppression, hysteresis.

    Thresholds apply to gradient magnitude normalized by its maximum.
    """
    if not (0.0 <= low < high <= 1.0):
        raise ParameterError(f"need 0 <= low < high <= 1, got low={low} high={high}")

    gray = luminance(img)
    k = _gaussian_kernel1d(sigma)
    smooth = _convolve1d(_convolve1d(gray, k, 0), k, 1)

    sx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
    sy = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)
    pad = np.pad(smooth, 1, mode="reflect")
    gx = np.zeros_like(smooth)
    gy = np.zeros_like(smooth)
    hgt, wid = smooth.shape
    for ki in range(3):
        for kj in range(3):
            win = pad[ki:ki + hgt, kj:kj + wid]
            gx += sx[ki, kj] * win
            gy += sy[ki, kj] * win

    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak < 1e-10:  # flat image: all gradient is accumulation noise
        return EdgeMap(np.zeros_like(mag, dtype=np.float32))
    mag = mag / peak

    # non-maximum suppression along the quantized gradient direction
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    mpad = np.pad(mag, 1, mode="constant")
    center = mpad[1:-1, 1:-1]
    east = mpad[1:-1, 2:]
    west = mpad[1:-1, :-2]
    north = mpad[:-2, 1:-1]
    south = mpad[2:, 1:-1]
    ne = mpad[:-2, 2:]
    sw = mpad[2:, :-2]
    nw = mpad[:-2, :-2]
    se = mpad[2:, 2:]

    d0 = (angle < 22.5) | (angle >= 157.5)          # horizontal gradient
    d45 = (angle >= 22.5) & (angle < 67.5)
    d90 = (angle >= 67.5) & (angle < 112.5)          # vertical gradient
    d135 = (angle >= 112.5) & (angle < 157.5)
    # asymmetric tie-break (>= one side, > the other) so a symmetric step
    # yields a single 1-pixel line instead of two or zero
    keep = np.zeros_like(mag, dtype=bool)
    keep |= d0 & (center >= east) & (center > west)
    keep |= d45 & (center >= ne) & (center > sw)
    keep |= d90 & (center >= north) & (center > south)
    keep |= d135 & (center >= nw) & (center > se)
    keep[0, :] = keep[-1, :] = False  # suppression window is undefined at the
    keep[:, 0] = keep[:, -1] = False  # border; drop the outermost ring
    thin = np.where(keep, mag, 0.0)

    strong = thin >= high
    weak = (thin >= low) & ~strong

    # hysteresis: grow strong edges through 8-connected weak pixels
    result = strong.copy()
    while True:
        rp = np.pad(result, 1, mode="constant")
        neighbor = (rp[:-2, :-2] | rp[:-2, 1:-1] | rp[:-2, 2:]
                    | rp[1:-1, :-2] | rp[1:-1, 2:]
                    | rp[2:, :-2] | rp[2:, 1:-1] | rp[2:, 2:])
        grown = result | (weak & neighbor)
        if np.array_equal(grown, result):
            break
        result = grown
    return EdgeMap(result.astype(np.float32))


def make_edge_mask(edge: EdgeMap) -> EdgeMask:
    """Weighting raster (1 − e) + 10·e: 10 on edge pixels, 1 elsewhere."""
    return EdgeMask((1.0 - edge.data) + 10.0 * edge.data)


# ---------------------------------------------------------------------------
# mask generation

def _stamp_stroke(canvas: np.ndarray, stream: Stream, thickness_frac: float) -> None:
    """Union one random-walk stroke (thick polyline) into the boolean canvas."""
    h, w = canvas.shape
    min_dim = min(h, w)
    radius = max(1.0, thickness_frac * min_dim / 2.0)
    n_vertices = int(stream.randint(4, 13, 1)[0])

    ys, xs = np.mgrid[0:h, 0:w]
    y = float(stream.uniform(1)[0] * h)
    x = float(stream.uniform(1)[0] * w)
    for _ in range(n_vertices - 1):
        ang = float(stream.uniform(1)[0] * 2.0 * math.pi)
        step = float(stream.uniform(1)[0] * 0.4 + 0.1) * min_dim
        y2 = min(max(y + step * math.sin(ang), 0.0), h - 1.0)
        x2 = min(max(x + step * math.cos(ang), 0.0), w - 1.0)
        # distance from every pixel to the segment (y,x)-(y2,x2)
        dy, dx = y2 - y, x2 - x
        seg_len2 = dy * dy + dx * dx
        if seg_len2 == 0.0:
            dist2 = (ys - y) ** 2 + (xs - x) ** 2
        else:
            t = ((ys - y) * dy + (xs - x) * dx) / seg_len2
            t = np.clip(t, 0.0, 1.0)
            dist2 = (ys - (y + t * dy)) ** 2 + (xs - (x + t * dx)) ** 2
        canvas |= dist2 <= radius * radius
        y, x = y2, x2


def gen_irregular_mask(h: int, w: int, bucket, seed: int) -> Mask:
    """Free-form stroke mask whose hole fraction lands inside `bucket`.

    Deterministic in (h, w, bucket, seed).  Strokes are accumulated while
    coverage is below the bucket; a stroke that overshoots is discarded and
    retried thinner.  Bounded retries guard unreachable buckets.
    """
    lo, hi = float(bucket[0]), float(bucket[1])
    if not (0.0 < lo < hi < 1.0):
        raise ParameterError(f"bucket must satisfy 0 < lo < hi < 1, got ({lo}, {hi})")
    if h < 1 or w < 1:
        raise ShapeError(f"mask size must be positive, got {h}x{w}")

    stream = Stream(derive_key(seed, f"mask:{h}x{w}:{lo:.6f}:{hi:.6f}"))
    canvas = np.zeros((h, w), dtype=bool)
    thickness = 0.10
    for _ in range(200):
        frac = canvas.mean()
        if lo <= frac < hi:
            return Mask(canvas.astype(np.float32))
        trial = canvas.copy()
        _stamp_stroke(trial, stream, float(stream.uniform(1)[0] * (thickness - 0.02) + 0.02))
        if trial.mean() < hi:
            canvas = trial
        else:
            thickness = max(0.02, thickness * 0.7)  # overshot: retry thinner
    raise MaskGenerationError(
        f"could not reach coverage [{lo}, {hi}) on {h}x{w} after bounded retries")


# ---------------------------------------------------------------------------
# masking / compositing

def apply_mask(img: Image, m: Mask) -> Image:
    """Zero out hole pixels; known pixels pass through untouched."""
    if img.data.shape[:2] != m.data.shape:
        raise ShapeError(f"image {img.data.shape[:2]} vs mask {m.data.shape}")
    return Image(img.data * (1.0 - m.data)[..., None])


def composite(out: Image, inp: Image, m: Mask) -> Image:
    """Blend: hole region from `out`, known region bit-identical to `inp`."""
    if out.data.shape != inp.data.shape:
        raise ShapeError(f"image shapes differ: {out.data.shape} vs {inp.data.shape}")
    if out.data.shape[:2] != m.data.shape:
        raise ShapeError(f"image {out.data.shape[:2]} vs mask {m.data.shape}")
    m3 = m.data[..., None]
    return Image(np.clip(out.data * m3 + inp.data * (1.0 - m3), 0.0, 1.0))
