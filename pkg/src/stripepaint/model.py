"""Inpainting generator and patch discriminator.

Generator layout: a masked RGB image concatenated with its mask (4
channels) passes three stride-2 encoder stages; the bottleneck channels
split in half between a transformer branch (four stripe-window blocks, the
last one full attention) and a convolutional branch (residual-in-residual
dense blocks).  Attention probabilities recorded at two tap points mix the
convolutional features and are injected back into each branch's last
stage, then the branches re-concatenate and three nearest-neighbor+conv
stages decode back to RGB through a sigmoid.

The discriminator is a 4-stage stride-2 conv stack with LeakyReLU ending
in a 1-channel patch logit map.  Because it is piecewise linear, its
gradient with respect to the input image can be expressed as an explicit
graph of transposed convolutions and constant activation masks, which is
what the gradient-penalty loss differentiates through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import attention as A
from . import tensor as T
from .errors import ConfigError, ShapeError
from .imageops import Image, Mask
from .rng import derive_key
from .tensor import ParamStore, Tensor, count_parameters  # noqa: F401  (re-export)


@dataclass
class ModelConfig:
    input_size: int = 256
    encoder_channels: tuple = (64, 128, 256)
    branch_channels: int = 128
    heads: tuple = (2, 4, 8, 16)
    sw: tuple = (4, 8, 16, 32)
    repeats: tuple = (2, 2, 2, 2)
    rrdb_units: int = 2
    rdb_growth: int = 64
    residual_beta: float = 0.2
    joint_attention_taps: tuple = (2, 4)
    joint_attention_on: bool = True
    redesigned_block: bool = True
    dual_attention: bool = False
    disc_channels: tuple = (64, 128, 256, 512)

    def __post_init__(self):
        self.encoder_channels = tuple(self.encoder_channels)
        self.heads = tuple(self.heads)
        self.sw = tuple(self.sw)
        self.repeats = tuple(self.repeats)
        self.joint_attention_taps = tuple(self.joint_attention_taps)
        self.disc_channels = tuple(self.disc_channels)
        # parameters are float32, so keep the config float32-representable;
        # checkpoints can then restore a config that compares equal
        self.residual_beta = float(np.float32(self.residual_beta))

        stages = len(self.encoder_channels)
        if self.input_size % (1 << stages) != 0:
            raise ConfigError(
                f"input_size {self.input_size} not divisible by 2^{stages}")
        if self.encoder_channels[-1] != 2 * self.branch_channels:
            raise ConfigError("bottleneck channels must equal twice the branch width")
        if not (len(self.heads) == len(self.sw) == len(self.repeats)):
            raise ConfigError("heads/sw/repeats schedules must have equal length")
        side = self.feature_side
        if self.sw[-1] != side:
            raise ConfigError(
                f"last block must span the whole {side}-pixel side, got sw={self.sw[-1]}")
        for i, swi in enumerate(self.sw):
            if side % swi != 0:
                raise ConfigError(f"sw[{i}]={swi} does not divide feature side {side}")
        n = len(self.sw)
        for tap in self.joint_attention_taps:
            if not 1 <= tap <= n:
                raise ConfigError(f"tap {tap} outside blocks 1..{n}")
        if self.joint_attention_taps:
            if len(self.joint_attention_taps) != 2:
                raise ConfigError("taps must name (global-mix source, local-mix source)")
            if self.joint_attention_taps[0] >= n:
                raise ConfigError("the global-side tap must precede the last block")
        block_cfgs = self.block_configs()
        for tap in self.joint_attention_taps:
            cfg = block_cfgs[tap - 1]
            tap_groups = cfg.heads if cfg.is_full_attention else cfg.heads // 2
            if self.branch_channels % tap_groups != 0:
                raise ConfigError(
                    f"branch channels {self.branch_channels} not divisible by "
                    f"block {tap}'s attention head groups ({tap_groups})")
        if self.rrdb_units < 1 or self.rdb_growth < 1:
            raise ConfigError("rrdb_units and rdb_growth must be >= 1")

    @property
    def feature_side(self) -> int:
        return self.input_size >> len(self.encoder_channels)

    def block_configs(self) -> list[A.BlockConfig]:
        return [
            A.BlockConfig(heads=h, sw=s, channels=self.branch_channels,
                          repeats=r, is_full_attention=(i == len(self.sw) - 1))
            for i, (h, s, r) in enumerate(zip(self.heads, self.sw, self.repeats))
        ]


def desk_config(**overrides) -> ModelConfig:
    """Reduced 64×64 model (~1M generator parameters) for fast experiments."""
    base = dict(
        input_size=64,
        encoder_channels=(32, 64, 128),
        branch_channels=64,
        heads=(2, 4, 8, 16),
        sw=(1, 2, 4, 8),
        repeats=(1, 1, 1, 1),
        rrdb_units=1,
        rdb_growth=16,
        disc_channels=(32, 64, 128, 256),
    )
    base.update(overrides)
    return ModelConfig(**base)


def tiny_config(**overrides) -> ModelConfig:
    """Minimal 16×16 model for end-to-end gradient checks."""
    base = dict(
        input_size=16,
        encoder_channels=(8, 12, 16),
        branch_channels=8,
        heads=(2, 2, 2, 2),
        sw=(1, 1, 1, 2),
        repeats=(1, 1, 1, 1),
        rrdb_units=1,
        rdb_growth=4,
        disc_channels=(8, 12, 16, 24),
    )
    base.update(overrides)
    return ModelConfig(**base)


# ---------------------------------------------------------------------------
# parameter construction

def _conv_std(c_in: int, k: int) -> float:
    return math.sqrt(2.0 / (c_in * k * k))


@dataclass
class ConvStage:
    w: Tensor
    b: Tensor | None = None
    in_g: Tensor | None = None
    in_b: Tensor | None = None


def _init_conv(store: ParamStore, name: str, c_in: int, c_out: int, k: int,
               norm: bool = False) -> ConvStage:
    st = ConvStage(
        w=store.normal(f"{name}.w", (c_out, c_in, k, k), _conv_std(c_in, k)),
    )
    if norm:
        # the norm's mean subtraction cancels a conv bias exactly, so the
        # bias would be gradient-dead; the norm's own shift replaces it
        st.in_g = store.ones(f"{name}.in.g", (c_out,))
        st.in_b = store.zeros(f"{name}.in.b", (c_out,))
    else:
        st.b = store.zeros(f"{name}.b", (c_out,))
    return st


@dataclass
class RdbParams:
    convs: list      # four k3 dense convs
    fuse: ConvStage  # 1×1 back to the trunk width


@dataclass
class GeneratorParams:
    encoder: list = field(default_factory=list)
    blocks: list = field(default_factory=list)     # BlockParams per global block
    rrdbs: list = field(default_factory=list)      # list of [RdbParams × 3]
    decoder: list = field(default_factory=list)
    head: ConvStage | None = None


class Generator:
    """Bundles config, the named parameter registry, and structured handles."""

    def __init__(self, cfg: ModelConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.store = ParamStore(derive_key(seed, "generator"))
        p = GeneratorParams()

        c_in = 4
        for i, c_out in enumerate(cfg.encoder_channels):
            p.encoder.append(_init_conv(self.store, f"enc{i}", c_in, c_out, 4, norm=True))
            c_in = c_out

        for i, bc in enumerate(cfg.block_configs()):
            p.blocks.append(A.init_block_params(
                self.store, f"glob{i}", bc, dual_attention=cfg.dual_attention))

        b = cfg.branch_channels
        g = cfg.rdb_growth
        for u in range(cfg.rrdb_units):
            rdbs = []
            for r in range(3):
                prefix = f"rrdb{u}.rdb{r}"
                convs = [
                    _init_conv(self.store, f"{prefix}.c{i}", b + i * g, g, 3)
                    for i in range(4)
                ]
                fuse = _init_conv(self.store, f"{prefix}.fuse", b + 4 * g, b, 1)
                rdbs.append(RdbParams(convs=convs, fuse=fuse))
            p.rrdbs.append(rdbs)

        c_in = cfg.encoder_channels[-1]
        for i in range(len(cfg.encoder_channels)):
            c_out = max(4, c_in // 2)
            p.decoder.append(_init_conv(self.store, f"dec{i}", c_in, c_out, 3, norm=True))
            c_in = c_out
        p.head = _init_conv(self.store, "head", c_in, 3, 3)

        self.params = p

    @property
    def tensors(self) -> dict[str, Tensor]:
        return self.store.tensors


# ---------------------------------------------------------------------------
# forward pieces

def encoder_forward(gen: Generator, x: Tensor) -> Tensor:
    """Three stride-2 conv+norm+ReLU stages: (N,4,S,S) → (N,2B,S/8,S/8)."""
    n, c, h, w = x.shape
    if c != 4 or h != gen.cfg.input_size or w != gen.cfg.input_size:
        raise ShapeError(
            f"encoder expects (N,4,{gen.cfg.input_size},{gen.cfg.input_size}), "
            f"got {x.shape}")
    for st in gen.params.encoder:
        x = T.conv2d(x, st.w, st.b, stride=2, padding=1)
        x = T.instance_norm(x, st.in_g, st.in_b)
        x = T.relu(x)
    return x


def rdb_forward(x: Tensor, rp: RdbParams, beta: float) -> Tensor:
    """Four dense Conv-ReLU layers, 1×1 fusion, local residual scaled by β."""
    feats = [x]
    for st in rp.convs:
        inp = feats[0] if len(feats) == 1 else T.concat(feats, 1)
        feats.append(T.relu(T.conv2d(inp, st.w, st.b, stride=1, padding=1)))
    fused = T.conv2d(T.concat(feats, 1), rp.fuse.w, rp.fuse.b)
    return T.add(x, T.scale(fused, beta))


def rrdb_forward(x: Tensor, rdbs: list, beta: float) -> Tensor:
    """Three chained RDBs with an outer residual scaled by β.

    The outer residual applies to the chain's increment, so zeroed weights
    make the whole unit an exact identity.
    """
    y = x
    for rp in rdbs:
        y = rdb_forward(y, rp, beta)
    return T.add(x, T.scale(T.sub(y, x), beta))


def joint_attention_mix(record: A.AttnRecord, local_feat: Tensor) -> Tensor:
    """Aggregate conv-branch features with recorded attention probabilities.

    The local channels split into as many groups as the record has heads;
    each group is attention-averaged exactly the way V is inside MHSA, then
    everything reassembles to the input layout.
    """
    if record.probs_full is not None:
        probs, spec = record.probs_full, record.spec_full
    elif record.probs_h is not None:
        probs, spec = record.probs_h, record.spec_h
    else:
        raise ShapeError("attention record carries no probabilities")
    n, c, h, w = local_feat.shape
    n_stripes, groups, tokens = probs.shape[1], probs.shape[2], probs.shape[3]
    if (h, w) != (spec.h, spec.w):
        raise ShapeError(
            f"local features {h}x{w} incompatible with record layout "
            f"{spec.h}x{spec.w}")
    if c % groups != 0:
        raise ShapeError(f"{c} local channels not divisible into {groups} head groups")
    cg = c // groups

    blocks = A.stripe_partition(local_feat, spec)
    mixed_blocks = []
    for s, block in enumerate(blocks):
        ps = T.reshape(T.narrow(probs, 1, s, 1), (n, groups, tokens, tokens))
        grouped = T.permute(T.reshape(block, (n, tokens, groups, cg)), (0, 2, 1, 3))
        mixed = ps @ grouped
        mixed_blocks.append(
            T.reshape(T.permute(mixed, (0, 2, 1, 3)), (n, tokens, c)))
    return A.stripe_merge(mixed_blocks, spec)


def generator_apply(gen: Generator, x: Tensor):
    """Full forward on a (N,4,S,S) batch → ((N,3,S,S) in [0,1], records)."""
    cfg = gen.cfg
    feat = encoder_forward(gen, x)
    b = cfg.branch_channels
    g_feat = T.narrow(feat, 1, 0, b)
    l_feat = T.narrow(feat, 1, b, b)

    # conv branch up to (but not including) its last unit
    l_pre = l_feat
    for rdbs in gen.params.rrdbs[:-1]:
        l_pre = rrdb_forward(l_pre, rdbs, cfg.residual_beta)

    block_cfgs = cfg.block_configs()
    records: list[A.AttnRecord] = []
    mixing = cfg.joint_attention_on and len(cfg.joint_attention_taps) == 2
    z = g_feat
    for i, (bc, bp) in enumerate(zip(block_cfgs, gen.params.blocks)):
        if mixing and i == len(block_cfgs) - 1:
            src = records[cfg.joint_attention_taps[0] - 1]
            z = T.add(z, joint_attention_mix(src, l_pre))
        z, rec = A.cswin_block(z, bc, bp, redesigned=cfg.redesigned_block)
        records.append(rec)

    l_last_in = l_pre
    if mixing:
        src = records[cfg.joint_attention_taps[1] - 1]
        l_last_in = T.add(l_last_in, joint_attention_mix(src, l_pre))
    l_out = rrdb_forward(l_last_in, gen.params.rrdbs[-1], cfg.residual_beta)

    y = T.concat([z, l_out], 1)
    for st in gen.params.decoder:
        y = T.upsample_nearest2x(y)
        y = T.conv2d(y, st.w, st.b, stride=1, padding=1)
        y = T.instance_norm(y, st.in_g, st.in_b)
        y = T.relu(y)
    y = T.conv2d(y, gen.params.head.w, gen.params.head.b, stride=1, padding=1)
    return T.sigmoid(y), records


def generator_forward(gen: Generator, im: Image, m: Mask):
    """Single-image convenience wrapper over generator_apply."""
    if im.data.shape[:2] != m.data.shape:
        raise ShapeError(f"image {im.data.shape[:2]} vs mask {m.data.shape}")
    x = np.concatenate([im.data.transpose(2, 0, 1), m.data[None]], axis=0)[None]
    out, records = generator_apply(gen, Tensor(x))
    rgb = np.clip(out.data[0].transpose(1, 2, 0), 0.0, 1.0)
    return Image(rgb), records


# ---------------------------------------------------------------------------
# discriminator

class Discriminator:
    """Patch discriminator: stride-2 LeakyReLU convs, then a 1-channel map."""

    def __init__(self, cfg: ModelConfig, seed: int):
        self.cfg = cfg
        self.store = ParamStore(derive_key(seed, "discriminator"))
        self.stages: list[ConvStage] = []
        c_in = 3
        for i, c_out in enumerate(cfg.disc_channels):
            self.stages.append(_init_conv(self.store, f"d{i}", c_in, c_out, 4))
            c_in = c_out
        self.head = _init_conv(self.store, "dhead", c_in, 1, 3)

    @property
    def tensors(self) -> dict[str, Tensor]:
        return self.store.tensors


def discriminator_forward(disc: Discriminator, x: Tensor) -> Tensor:
    """(N,3,S,S) → patch logit map (N,1,S/16,S/16); sigmoid lives in the loss."""
    n, c, h, w = x.shape
    if c != 3 or h != disc.cfg.input_size or w != disc.cfg.input_size:
        raise ShapeError(
            f"discriminator expects (N,3,{disc.cfg.input_size},"
            f"{disc.cfg.input_size}), got {x.shape}")
    for st in disc.stages:
        x = T.conv2d(x, st.w, st.b, stride=2, padding=1)
        x = T.leaky_relu(x, 0.2)
    return T.conv2d(x, disc.head.w, disc.head.b, stride=1, padding=1)


def discriminator_input_gradient(disc: Discriminator, x_data: np.ndarray) -> Tensor:
    """∇_x Σ_patches D(x) as a differentiable graph over D's weights.

    The discriminator is piecewise linear, so its input gradient is a chain
    of transposed convolutions interleaved with the (constant) LeakyReLU
    slope masks observed in the forward pass.  Building that chain out of
    conv2d_input_vjp nodes makes the gradient-penalty term itself
    differentiable with respect to the conv weights — exact almost
    everywhere, no smoothing involved.
    """
    sizes = []
    z = np.asarray(x_data)
    masks = []
    for st in disc.stages:
        sizes.append(z.shape[2:])
        z = T._conv_fwd(z, st.w.data, 2, 1) + st.b.data[None, :, None, None]
        masks.append(np.where(z > 0, 1.0, 0.2).astype(z.dtype))
        z = np.where(z > 0, z, 0.2 * z)
    head_in_hw = z.shape[2:]
    logits_shape = (z.shape[0], 1) + z.shape[2:]

    u = Tensor(np.ones(logits_shape, dtype=np.float32))
    u = T.conv2d_input_vjp(u, disc.head.w, 1, 1, head_in_hw)
    for st, mask, hw in zip(reversed(disc.stages), reversed(masks), reversed(sizes)):
        u = T.mul(u, Tensor(mask))
        u = T.conv2d_input_vjp(u, st.w, 2, 1, hw)
    return u
