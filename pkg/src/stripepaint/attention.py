"""Stripe-window multi-head self-attention and the transformer block around it.

A feature map is cut into horizontal or vertical stripes of width `sw`;
self-attention runs inside each stripe, so the attended set per token is
sw×W (or sw×H) instead of H×W.  Half the channels attend horizontally and
half vertically in parallel.  When sw equals the spatial side there is a
single stripe and the computation coincides with full attention, which is
how the final block and the equivalence tests work.

Token order inside a stripe is row-major over its 2-D layout — (sw, W) for
horizontal stripes, (H, sw) for vertical ones — so at sw = side both
orientations see the same (H, W) row-major token sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import tensor as T
from .errors import ConfigError, ShapeError
from .tensor import Tensor


@dataclass(frozen=True)
class StripeSpec:
    """One stripe family: width, orientation, and the feature dims it cuts."""

    sw: int
    orientation: str  # "horizontal" | "vertical"
    h: int
    w: int

    def __post_init__(self):
        if self.orientation not in ("horizontal", "vertical"):
            raise ConfigError(f"unknown orientation {self.orientation!r}")
        if self.sw < 1:
            raise ConfigError(f"stripe width must be >= 1, got {self.sw}")
        striped = self.h if self.orientation == "horizontal" else self.w
        if striped % self.sw != 0:
            raise ShapeError(
                f"sw={self.sw} does not divide the striped dimension {striped}")

    @property
    def n_stripes(self) -> int:
        striped = self.h if self.orientation == "horizontal" else self.w
        return striped // self.sw

    @property
    def tokens_per_stripe(self) -> int:
        other = self.w if self.orientation == "horizontal" else self.h
        return self.sw * other

    @property
    def layout(self) -> tuple[int, int]:
        """2-D (rows, cols) shape of one stripe's token grid."""
        if self.orientation == "horizontal":
            return (self.sw, self.w)
        return (self.h, self.sw)


@dataclass
class BlockConfig:
    heads: int
    sw: int
    channels: int
    repeats: int = 2
    is_full_attention: bool = False

    def __post_init__(self):
        if self.channels % self.heads != 0:
            raise ConfigError(
                f"channels {self.channels} not divisible by heads {self.heads}")
        if not self.is_full_attention and self.heads % 2 != 0:
            raise ConfigError(
                f"stripe blocks need an even head count for the orientation split, got {self.heads}")
        if not self.is_full_attention and (self.channels // 2) % (self.heads // 2) != 0:
            raise ConfigError("half channels not divisible by half heads")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")


@dataclass
class AttnRecord:
    """Attention probabilities of one block, with the layout to reuse them.

    Stripe blocks fill probs_h/probs_v, each shaped
    (N, stripes, heads_per_half, T, T); the full block fills probs_full
    shaped (N, 1, heads, T, T).  Probabilities stay in the autodiff graph so
    downstream consumers backpropagate into the attention weights.
    """

    probs_h: Tensor | None = None
    spec_h: StripeSpec | None = None
    probs_v: Tensor | None = None
    spec_v: StripeSpec | None = None
    probs_full: Tensor | None = None
    spec_full: StripeSpec | None = None


@dataclass
class AttentionParams:
    """One learned qkv projection plus depthwise position-encoding weights."""

    wqkv: Tensor  # (C, 3C)
    bqkv: Tensor  # (3C,)
    lepe: Tensor  # (C, 1, 3, 3) depthwise


@dataclass
class RepeatParams:
    ln1_g: Tensor
    ln1_b: Tensor
    attn: AttentionParams
    ln2_g: Tensor
    ln2_b: Tensor
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor
    dual: AttentionParams | None = None


@dataclass
class BlockParams:
    repeats: list = field(default_factory=list)


def init_attention_params(store, prefix: str, channels: int) -> AttentionParams:
    std = math.sqrt(2.0 / (channels + 3 * channels))
    return AttentionParams(
        wqkv=store.normal(f"{prefix}.wqkv", (channels, 3 * channels), std),
        bqkv=store.zeros(f"{prefix}.bqkv", (3 * channels,)),
        lepe=store.normal(f"{prefix}.lepe", (channels, 1, 3, 3),
                          math.sqrt(2.0 / 9.0)),
    )


def init_block_params(store, prefix: str, cfg: BlockConfig,
                      dual_attention: bool = False) -> BlockParams:
    c = cfg.channels
    ffn_std = math.sqrt(2.0 / (c + 4 * c))
    reps = []
    for r in range(cfg.repeats):
        p = f"{prefix}.r{r}"
        reps.append(RepeatParams(
            ln1_g=store.ones(f"{p}.ln1.g", (c,)),
            ln1_b=store.zeros(f"{p}.ln1.b", (c,)),
            attn=init_attention_params(store, f"{p}.attn", c),
            ln2_g=store.ones(f"{p}.ln2.g", (c,)),
            ln2_b=store.zeros(f"{p}.ln2.b", (c,)),
            ffn_w1=store.normal(f"{p}.ffn.w1", (c, 4 * c), ffn_std),
            ffn_b1=store.zeros(f"{p}.ffn.b1", (4 * c,)),
            ffn_w2=store.normal(f"{p}.ffn.w2", (4 * c, c), ffn_std),
            ffn_b2=store.zeros(f"{p}.ffn.b2", (c,)),
            dual=init_attention_params(store, f"{p}.dualattn", c)
            if dual_attention else None,
        ))
    return BlockParams(repeats=reps)


# ---------------------------------------------------------------------------
# stripe bookkeeping

def stripe_partition(x: Tensor, spec: StripeSpec) -> list[Tensor]:
    """Cut NCHW into per-stripe token blocks (N, tokens, C), row-major."""
    n, c, h, w = x.shape
    if (h, w) != (spec.h, spec.w):
        raise ShapeError(f"feature {h}x{w} does not match spec {spec.h}x{spec.w}")
    nhwc = T.permute(x, (0, 2, 3, 1))
    blocks = []
    for s in range(spec.n_stripes):
        if spec.orientation == "horizontal":
            piece = T.narrow(nhwc, 1, s * spec.sw, spec.sw)      # (N, sw, W, C)
        else:
            piece = T.narrow(nhwc, 2, s * spec.sw, spec.sw)      # (N, H, sw, C)
        blocks.append(T.reshape(piece, (n, spec.tokens_per_stripe, c)))
    return blocks


def stripe_merge(blocks: list[Tensor], spec: StripeSpec) -> Tensor:
    """Exact inverse of stripe_partition, back to NCHW."""
    if len(blocks) != spec.n_stripes:
        raise ShapeError(f"expected {spec.n_stripes} blocks, got {len(blocks)}")
    n = blocks[0].shape[0]
    c = blocks[0].shape[2]
    pieces = []
    for b in blocks:
        if spec.orientation == "horizontal":
            pieces.append(T.reshape(b, (n, spec.sw, spec.w, c)))
        else:
            pieces.append(T.reshape(b, (n, spec.h, spec.sw, c)))
    axis = 1 if spec.orientation == "horizontal" else 2
    nhwc = pieces[0] if len(pieces) == 1 else T.concat(pieces, axis)
    return T.permute(nhwc, (0, 3, 1, 2))


def lepe(v: Tensor, layout: StripeSpec, weights: Tensor) -> Tensor:
    """Locally-enhanced position encoding: depthwise 3×3 over V's 2-D layout.

    v: (N, tokens, C) token block; returns the same shape.
    """
    n, tokens, c = v.shape
    rows, cols = layout.layout
    if tokens != rows * cols:
        raise ShapeError(f"{tokens} tokens do not fill a {rows}x{cols} layout")
    if weights.shape != (c, 1, 3, 3):
        raise ShapeError(f"lepe weights must be ({c},1,3,3), got {weights.shape}")
    grid = T.permute(T.reshape(v, (n, rows, cols, c)), (0, 3, 1, 2))
    out = T.conv2d(grid, weights, stride=1, padding=1, groups=c)
    return T.reshape(T.permute(out, (0, 2, 3, 1)), (n, tokens, c))


# ---------------------------------------------------------------------------
# attention cores

def _attend(tokens: Tensor, wqkv: Tensor, bqkv: Tensor, lepe_w: Tensor,
            ch_lo: int, ch_span: int, heads: int, layout: StripeSpec):
    """Attention over one stripe's tokens for one channel span.

    tokens: (N, T, C_total); returns ((N, T, ch_span), probs (N, heads, T, T)).
    """
    n, t, _ = tokens.shape
    d = ch_span // heads
    c_total = wqkv.shape[0]
    qkv = T.add(tokens @ wqkv, T.reshape(bqkv, (1, 1, 3 * c_total)))
    q = T.narrow(qkv, 2, ch_lo, ch_span)
    k = T.narrow(qkv, 2, c_total + ch_lo, ch_span)
    v = T.narrow(qkv, 2, 2 * c_total + ch_lo, ch_span)

    def heads_first(z):  # (N, T, span) -> (N, heads, T, d)
        return T.permute(T.reshape(z, (n, t, heads, d)), (0, 2, 1, 3))

    qh, kh, vh = heads_first(q), heads_first(k), heads_first(v)
    scores = T.scale(qh @ T.permute(kh, (0, 1, 3, 2)), 1.0 / math.sqrt(d))
    probs = T.softmax(scores, axis=-1)
    mixed = probs @ vh                                   # (N, heads, T, d)
    out = T.reshape(T.permute(mixed, (0, 2, 1, 3)), (n, t, ch_span))
    out = T.add(out, lepe(v, layout, lepe_w))
    return out, probs


def sw_mhsa(x: Tensor, cfg: BlockConfig, params: AttentionParams):
    """Stripe-window attention: horizontal half ∥ vertical half.

    Returns (NCHW output, AttnRecord).  With sw equal to the spatial side
    both halves collapse to one stripe over all tokens, matching full_mhsa.
    """
    n, c, h, w = x.shape
    if c != cfg.channels:
        raise ConfigError(f"input has {c} channels, config says {cfg.channels}")
    if cfg.is_full_attention and cfg.sw != h:
        raise ConfigError("full-attention blocks require sw == spatial side")
    half = c // 2
    h2 = cfg.heads // 2
    spec_h = StripeSpec(cfg.sw, "horizontal", h, w)
    spec_v = StripeSpec(cfg.sw, "vertical", h, w)
    lepe_h = T.narrow(params.lepe, 0, 0, half)
    lepe_v = T.narrow(params.lepe, 0, half, half)

    outs_h, probs_h = [], []
    for block in stripe_partition(x, spec_h):
        o, p = _attend(block, params.wqkv, params.bqkv, lepe_h, 0, half, h2, spec_h)
        outs_h.append(o)
        probs_h.append(T.reshape(p, (n, 1, h2) + p.shape[2:]))
    out_h = stripe_merge(outs_h, spec_h)                 # (N, half, H, W)

    outs_v, probs_v = [], []
    for block in stripe_partition(x, spec_v):
        o, p = _attend(block, params.wqkv, params.bqkv, lepe_v, half, half, h2, spec_v)
        outs_v.append(o)
        probs_v.append(T.reshape(p, (n, 1, h2) + p.shape[2:]))
    out_v = stripe_merge(outs_v, spec_v)

    record = AttnRecord(
        probs_h=probs_h[0] if len(probs_h) == 1 else T.concat(probs_h, 1),
        spec_h=spec_h,
        probs_v=probs_v[0] if len(probs_v) == 1 else T.concat(probs_v, 1),
        spec_v=spec_v,
    )
    return T.concat([out_h, out_v], 1), record


def full_mhsa(x: Tensor, cfg: BlockConfig, params: AttentionParams):
    """Plain multi-head attention over all H·W tokens (single stripe)."""
    n, c, h, w = x.shape
    if not cfg.is_full_attention:
        raise ConfigError("full_mhsa requires cfg.is_full_attention")
    if c != cfg.channels:
        raise ConfigError(f"input has {c} channels, config says {cfg.channels}")
    spec = StripeSpec(h, "horizontal", h, w)             # one stripe = whole map
    block = stripe_partition(x, spec)[0]
    out, probs = _attend(block, params.wqkv, params.bqkv, params.lepe,
                         0, c, cfg.heads, spec)
    record = AttnRecord(
        probs_full=T.reshape(probs, (n, 1, cfg.heads) + probs.shape[2:]),
        spec_full=spec,
    )
    return stripe_merge([out], spec), record


# ---------------------------------------------------------------------------
# transformer block

def _ln_nchw(x: Tensor, gamma: Tensor, beta: Tensor) -> Tensor:
    """Channel-wise layer norm on NCHW via the NHWC layout."""
    y = T.permute(x, (0, 2, 3, 1))
    y = T.layer_norm(y, gamma, beta)
    return T.permute(y, (0, 3, 1, 2))


def _ffn_nchw(x: Tensor, rp: RepeatParams) -> Tensor:
    n, c, h, w = x.shape
    y = T.reshape(T.permute(x, (0, 2, 3, 1)), (n, h * w, c))
    y = T.add(y @ rp.ffn_w1, T.reshape(rp.ffn_b1, (1, 1, rp.ffn_b1.shape[0])))
    y = T.gelu(y)
    y = T.add(y @ rp.ffn_w2, T.reshape(rp.ffn_b2, (1, 1, rp.ffn_b2.shape[0])))
    return T.permute(T.reshape(y, (n, h, w, c)), (0, 3, 1, 2))


def cswin_block(x: Tensor, cfg: BlockConfig, params: BlockParams,
                redesigned: bool = True):
    """N_i pre-norm attention+FFN repeats with independent parameters.

    The redesigned wiring runs attention before the feed-forward inside each
    repeat; the original wiring runs the feed-forward first.  Returns the
    output and the final repeat's AttnRecord.
    """
    if len(params.repeats) != cfg.repeats:
        raise ConfigError(
            f"config says {cfg.repeats} repeats, params carry {len(params.repeats)}")
    attend = full_mhsa if cfg.is_full_attention else sw_mhsa
    record = None
    for rp in params.repeats:
        def attn_sublayer(z):
            a_in = _ln_nchw(z, rp.ln1_g, rp.ln1_b)
            a_out, rec = attend(a_in, cfg, rp.attn)
            if rp.dual is not None and not cfg.is_full_attention:
                full_cfg = BlockConfig(cfg.heads, z.shape[2], cfg.channels,
                                       cfg.repeats, is_full_attention=True)
                extra, _ = full_mhsa(a_in, full_cfg, rp.dual)
                a_out = T.add(a_out, extra)
            return T.add(z, a_out), rec

        def ffn_sublayer(z):
            return T.add(z, _ffn_nchw(_ln_nchw(z, rp.ln2_g, rp.ln2_b), rp))

        if redesigned:
            x, record = attn_sublayer(x)
            x = ffn_sublayer(x)
        else:
            x = ffn_sublayer(x)
            x, record = attn_sublayer(x)
    return x, record


# ---------------------------------------------------------------------------
# cost accounting

def flop_count(cfg: BlockConfig, h: int, w: int) -> int:
    """Multiply-adds spent on attention scores and attention application.

    Horizontal stripes: H/sw stripes of sw·W tokens; each token attends to
    sw·W others across d channels per head, so score MACs per half are
    (C/2)·H·sw·W² (and the same again with H/W swapped for the vertical
    half).  Full attention costs C·(H·W)².  Application costs mirror the
    score costs, doubling both sides.
    """
    c = cfg.channels
    if cfg.is_full_attention:
        score = c * (h * w) ** 2
    else:
        score = (c // 2) * h * cfg.sw * w * w + (c // 2) * w * cfg.sw * h * h
    return 2 * score
