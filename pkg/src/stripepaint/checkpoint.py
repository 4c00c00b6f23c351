"""Flat binary checkpoint container.

Layout: 8 magic bytes, then a u64 format version, then a u64 entry count,
then one record per named array — u64 name length, UTF-8 name, u64 rank,
u64 dims, raw little-endian float32 data.  Everything is float32 on disk;
integers that must survive exactly (seed, step counters) are split into
16-bit chunks, which float32 represents without loss.

On top of the raw container sit save_checkpoint/load_checkpoint, which
pack a generator, a discriminator, both Adam states, the model config, and
the step counter, and reconstruct all of them bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError
from .model import Discriminator, Generator, ModelConfig
from .tensor import OptimState, Tensor

MAGIC = b"STRWINIP"
VERSION = 1

_CFG_INTS = ("input_size", "branch_channels", "rrdb_units", "rdb_growth")
_CFG_INT_TUPLES = ("encoder_channels", "heads", "sw", "repeats",
                   "joint_attention_taps", "disc_channels")
_CFG_BOOLS = ("joint_attention_on", "redesigned_block", "dual_attention")
_CFG_FLOATS = ("residual_beta",)


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    """Write named float32 arrays; insertion order is preserved on disk."""
    chunks = [MAGIC, struct.pack("<QQ", VERSION, len(arrays))]
    for name, arr in arrays.items():
        if arr.dtype != np.float32:
            raise CheckpointError(
                f"entry {name!r} has dtype {arr.dtype}, expected float32")
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<Q", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<Q", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def load_arrays(path) -> dict[str, np.ndarray]:
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise CheckpointError(f"truncated checkpoint {path}")
        piece = buf[pos:pos + n]
        pos += n
        return piece

    pos = 0
    if take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    version, count = struct.unpack("<QQ", take(16))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<Q", take(8))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<Q", take(8))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank)) if rank else ()
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        data = np.frombuffer(take(4 * size), dtype="<f4", count=size)
        out[name] = data.reshape(dims).astype(np.float32, copy=True)
    if pos != len(buf):
        raise CheckpointError(f"{path} has {len(buf) - pos} trailing bytes")
    return out


# ---------------------------------------------------------------------------
# exact integer encoding inside a float32 container

def _u64_to_arr(x: int) -> np.ndarray:
    if not 0 <= x < (1 << 64):
        raise CheckpointError(f"integer {x} out of u64 range")
    return np.array([(x >> (16 * i)) & 0xFFFF for i in range(4)], dtype=np.float32)


def _arr_to_u64(a: np.ndarray) -> int:
    if a.shape != (4,):
        raise CheckpointError(f"expected 4 integer chunks, got shape {a.shape}")
    return sum(int(round(float(v))) << (16 * i) for i, v in enumerate(a))


def config_to_arrays(cfg: ModelConfig) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for k in _CFG_INTS:
        out[f"meta.cfg.{k}"] = np.array([getattr(cfg, k)], dtype=np.float32)
    for k in _CFG_INT_TUPLES:
        out[f"meta.cfg.{k}"] = np.array(list(getattr(cfg, k)), dtype=np.float32)
    for k in _CFG_BOOLS:
        out[f"meta.cfg.{k}"] = np.array([1.0 if getattr(cfg, k) else 0.0],
                                        dtype=np.float32)
    for k in _CFG_FLOATS:
        out[f"meta.cfg.{k}"] = np.array([getattr(cfg, k)], dtype=np.float32)
    return out


def config_from_arrays(arrays: dict[str, np.ndarray]) -> ModelConfig:
    kwargs = {}
    for k in _CFG_INTS:
        kwargs[k] = int(round(float(arrays[f"meta.cfg.{k}"][0])))
    for k in _CFG_INT_TUPLES:
        kwargs[k] = tuple(int(round(float(v))) for v in arrays[f"meta.cfg.{k}"])
    for k in _CFG_BOOLS:
        kwargs[k] = bool(arrays[f"meta.cfg.{k}"][0] != 0.0)
    for k in _CFG_FLOATS:
        kwargs[k] = float(arrays[f"meta.cfg.{k}"][0])
    return ModelConfig(**kwargs)


# ---------------------------------------------------------------------------
# full training state

@dataclass
class TrainBundle:
    gen: Generator
    disc: Discriminator
    opt_g: OptimState
    opt_d: OptimState
    step: int


def _pack_optim(prefix: str, opt: OptimState, out: dict) -> None:
    out[f"{prefix}.step"] = _u64_to_arr(opt.step)
    for name, arr in opt.m.items():
        out[f"{prefix}.m.{name}"] = arr
    for name, arr in opt.v.items():
        out[f"{prefix}.v.{name}"] = arr


def _unpack_optim(prefix: str, arrays: dict) -> OptimState:
    opt = OptimState(step=_arr_to_u64(arrays[f"{prefix}.step"]))
    for key, arr in arrays.items():
        if key.startswith(f"{prefix}.m."):
            opt.m[key[len(prefix) + 3:]] = arr
        elif key.startswith(f"{prefix}.v."):
            opt.v[key[len(prefix) + 3:]] = arr
    return opt


def save_checkpoint(path, gen: Generator, disc: Discriminator,
                    opt_g: OptimState, opt_d: OptimState, step: int) -> None:
    arrays: dict[str, np.ndarray] = {}
    arrays["meta.step"] = _u64_to_arr(step)
    arrays["meta.seed"] = _u64_to_arr(gen.seed)
    arrays.update(config_to_arrays(gen.cfg))
    for name, p in gen.tensors.items():
        arrays[f"g.{name}"] = p.data
    for name, p in disc.tensors.items():
        arrays[f"d.{name}"] = p.data
    _pack_optim("og", opt_g, arrays)
    _pack_optim("od", opt_d, arrays)
    save_arrays(path, arrays)


def _restore(params: dict[str, Tensor], arrays: dict, prefix: str, path) -> None:
    seen = set()
    for key, arr in arrays.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        if name not in params:
            raise CheckpointError(f"{path}: unknown parameter {key!r}")
        p = params[name]
        if p.data.shape != arr.shape:
            raise CheckpointError(
                f"{path}: {key!r} has shape {arr.shape}, model expects {p.data.shape}")
        p.data = arr.copy()
        seen.add(name)
    missing = set(params) - seen
    if missing:
        raise CheckpointError(f"{path}: missing parameters {sorted(missing)[:4]}")


def load_checkpoint(path) -> TrainBundle:
    arrays = load_arrays(path)
    cfg = config_from_arrays(arrays)
    seed = _arr_to_u64(arrays["meta.seed"])
    step = _arr_to_u64(arrays["meta.step"])
    gen = Generator(cfg, seed)
    disc = Discriminator(cfg, seed)
    _restore(gen.tensors, arrays, "g.", path)
    _restore(disc.tensors, arrays, "d.", path)
    return TrainBundle(gen=gen, disc=disc,
                       opt_g=_unpack_optim("og", arrays),
                       opt_d=_unpack_optim("od", arrays),
                       step=step)
