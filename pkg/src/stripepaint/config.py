"""Run configuration: dataclass, flat key=value file format, ablation variants.

The file format is deliberately plain: one ``key = value`` assignment per
line, ``#`` starts a comment, and nested fields use dotted keys
(``model.heads = 2,4,8,16``).  Unknown or duplicated keys are hard errors so
a typo can't silently train the wrong thing.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .losses import LossWeights
from .model import ModelConfig, desk_config


@dataclass
class RunConfig:
    """Everything one training run needs, including the ablation switches.

    ``redesigned_block`` and ``joint_attention_on`` are authoritative here and
    are pushed into ``model`` on construction, so a variant toggle is a single
    field flip.  ``use_hsv_loss``/``hsv_include_v`` are consumed by the
    trainer when assembling the loss.
    """

    train_dir: str = "data/train"
    val_dir: str = ""
    out_dir: str = "runs/run"
    image_size: int = 64
    batch_size: int = 4
    steps: int = 200
    seed: int = 0
    checkpoint_every: int = 100
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    use_hsv_loss: bool = True
    hsv_include_v: bool = False
    redesigned_block: bool = True
    joint_attention_on: bool = True
    model: ModelConfig = field(default_factory=desk_config)
    loss: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        for name in ("image_size", "batch_size", "steps", "seed",
                     "checkpoint_every"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        for name in ("batch_size", "steps", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        for name in ("lr_g", "lr_d"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if self.image_size != self.model.input_size:
            raise ConfigError(
                f"image_size {self.image_size} does not match the model's "
                f"input_size {self.model.input_size}")
        if (self.model.redesigned_block != self.redesigned_block
                or self.model.joint_attention_on != self.joint_attention_on):
            self.model = replace(self.model,
                                 redesigned_block=self.redesigned_block,
                                 joint_attention_on=self.joint_attention_on)


# ---------------------------------------------------------------------------
# key schema

_BOOL, _INT, _FLOAT, _STR, _INTS = "bool", "int", "float", "str", "ints"

_TOP_KEYS = {
    "train_dir": _STR, "val_dir": _STR, "out_dir": _STR,
    "image_size": _INT, "batch_size": _INT, "steps": _INT, "seed": _INT,
    "checkpoint_every": _INT,
    "use_hsv_loss": _BOOL, "hsv_include_v": _BOOL,
    "redesigned_block": _BOOL, "joint_attention_on": _BOOL,
}
_OPTIM_KEYS = {"lr_g": _FLOAT, "lr_d": _FLOAT,
               "beta1": _FLOAT, "beta2": _FLOAT}
_MODEL_KEYS = {
    "encoder_channels": _INTS, "branch_channels": _INT, "heads": _INTS,
    "sw": _INTS, "repeats": _INTS, "rrdb_units": _INT, "rdb_growth": _INT,
    "residual_beta": _FLOAT, "joint_attention_taps": _INTS,
    "disc_channels": _INTS, "dual_attention": _BOOL,
}
_LOSS_KEYS = {f.name: _FLOAT for f in dataclasses.fields(LossWeights)}


def _parse_value(kind: str, raw: str, key: str):
    try:
        if kind == _STR:
            return raw
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _INTS:
            return tuple(int(p.strip()) for p in raw.split(",") if p.strip())
        if kind == _BOOL:
            low = raw.lower()
            if low in ("true", "false"):
                return low == "true"
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} (expected {kind})")
    raise ConfigError(f"unhandled value kind {kind}")  # pragma: no cover


def parse_assignments(text: str) -> dict[str, str]:
    """Split config text into a key->raw-value map, rejecting malformed lines."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = body.partition("=")
        key, raw = key.strip(), raw.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = raw
    return out


def config_from_text(text: str) -> RunConfig:
    assigns = parse_assignments(text)
    top: dict = {}
    optim: dict = {}
    model_over: dict = {}
    loss_over: dict = {}
    for key, raw in assigns.items():
        if key in _TOP_KEYS:
            top[key] = _parse_value(_TOP_KEYS[key], raw, key)
        elif key.startswith("optim."):
            name = key[len("optim."):]
            if name not in _OPTIM_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            optim[name] = _parse_value(_OPTIM_KEYS[name], raw, key)
        elif key.startswith("model."):
            name = key[len("model."):]
            if name not in _MODEL_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            model_over[name] = _parse_value(_MODEL_KEYS[name], raw, key)
        elif key.startswith("loss."):
            name = key[len("loss."):]
            if name not in _LOSS_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            loss_over[name] = _parse_value(_LOSS_KEYS[name], raw, key)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    image_size = top.get("image_size", RunConfig.image_size)
    base = desk_config()
    model_fields = {f.name: getattr(base, f.name)
                    for f in dataclasses.fields(ModelConfig)}
    model_fields["input_size"] = image_size
    model_fields.update(model_over)
    model_fields["redesigned_block"] = top.get(
        "redesigned_block", RunConfig.redesigned_block)
    model_fields["joint_attention_on"] = top.get(
        "joint_attention_on", RunConfig.joint_attention_on)
    model = ModelConfig(**model_fields)
    loss = LossWeights(**loss_over)
    return RunConfig(model=model, loss=loss, **top, **optim)


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return config_from_text(text)


def run_config_to_text(cfg: RunConfig) -> str:
    """Serialize a RunConfig so that config_from_text round-trips it."""
    lines = []
    for key in _TOP_KEYS:
        v = getattr(cfg, key)
        lines.append(f"{key} = {_fmt(v)}")
    for key in _OPTIM_KEYS:
        lines.append(f"optim.{key} = {_fmt(getattr(cfg, key))}")
    for key in _MODEL_KEYS:
        lines.append(f"model.{key} = {_fmt(getattr(cfg.model, key))}")
    for key in _LOSS_KEYS:
        lines.append(f"loss.{key} = {_fmt(getattr(cfg.loss, key))}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# ablation variants

# Named flag bundles for the ablation study, in the order the comparison
# table reports them.  "original" is the plain pre-redesign wiring without
# the attention share; "ours" is the shipped default.
ABLATION_VARIANTS: dict[str, dict[str, bool]] = {
    "original": dict(use_hsv_loss=True, hsv_include_v=False,
                     redesigned_block=False, joint_attention_on=False),
    "no-redesign": dict(use_hsv_loss=True, hsv_include_v=False,
                        redesigned_block=False, joint_attention_on=True),
    "no-hsv": dict(use_hsv_loss=False, hsv_include_v=False,
                   redesigned_block=True, joint_attention_on=True),
    "full-hsv": dict(use_hsv_loss=True, hsv_include_v=True,
                     redesigned_block=True, joint_attention_on=True),
    "ours": dict(use_hsv_loss=True, hsv_include_v=False,
                 redesigned_block=True, joint_attention_on=True),
}


def apply_variant(cfg: RunConfig, name: str) -> RunConfig:
    """Return a copy of cfg with one named ablation flag bundle applied."""
    if name not in ABLATION_VARIANTS:
        known = ", ".join(ABLATION_VARIANTS)
        raise ConfigError(f"unknown ablation variant {name!r} (known: {known})")
    return replace(cfg, **ABLATION_VARIANTS[name])
