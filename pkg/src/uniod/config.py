"""Training / architecture configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .graph import DEFAULT_BETAS_SQUARED, DEFAULT_D_STAR


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    k: int = 5
    betas_squared: tuple[float, ...] = DEFAULT_BETAS_SQUARED
    d_star: int = DEFAULT_D_STAR
    gin_widths: tuple[int, ...] = (1024, 1024, 1024, 64)
    gt_layers: int = 6
    gt_ffn_width: int = 1024
    gt_heads: int = 4
    head_widths: tuple[int, ...] = (128, 64, 2)
    gin_aggregation: str = "normalized"
    learning_rate: float = 5e-5
    weight_decay: float = 1e-6
    epochs: int = 50
    subsample_copies: int = 5
    subsample_ratio: float = 0.6
    include_original: bool = False
    loss_reduction: str = "mean"
    max_samples: int = 3000
    standardize: bool = False
    grad_clip: float = 0.0  # 0 disables clipping
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "betas_squared", tuple(float(b) for b in self.betas_squared))
        object.__setattr__(self, "gin_widths", tuple(int(w) for w in self.gin_widths))
        object.__setattr__(self, "head_widths", tuple(int(w) for w in self.head_widths))
        self.validate()

    def validate(self) -> None:
        if not 1 <= self.k <= len(self.betas_squared):
            raise ConfigError(f"k must be between 1 and {len(self.betas_squared)}, got {self.k}")
        if min(self.betas_squared) <= 0:
            raise ConfigError("betas_squared must be positive")
        if self.d_star < 2:
            raise ConfigError("d_star must be at least 2")
        if self.gt_heads < 1 or self.d_star % self.gt_heads:
            raise ConfigError(f"gt_heads ({self.gt_heads}) must divide d_star ({self.d_star})")
        if not self.gin_widths or min(self.gin_widths) < 1:
            raise ConfigError("gin_widths must be non-empty and positive")
        if self.gin_aggregation not in ("normalized", "sum"):
            raise ConfigError(f"gin_aggregation must be 'normalized' or 'sum', got {self.gin_aggregation!r}")
        if self.gt_layers < 0 or self.gt_ffn_width < 1:
            raise ConfigError("invalid graph-transformer size")
        if not self.head_widths or self.head_widths[-1] != 2 or min(self.head_widths) < 1:
            raise ConfigError("head_widths must end with 2 output classes")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate must be > 0 and weight_decay >= 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.subsample_copies < 0 or (self.subsample_copies == 0 and not self.include_original):
            raise ConfigError("subsample_copies must be >= 1 unless include_original is set")
        if not 0 < self.subsample_ratio <= 1:
            raise ConfigError("subsample_ratio must be in (0, 1]")
        if self.loss_reduction not in ("mean", "sum"):
            raise ConfigError(f"loss_reduction must be 'mean' or 'sum', got {self.loss_reduction!r}")
        if self.max_samples < 2:
            raise ConfigError("max_samples must be >= 2")
        if self.grad_clip < 0:
            raise ConfigError("grad_clip must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def bandwidths_squared(self) -> tuple[float, ...]:
        return self.betas_squared[: self.k]

    @property
    def head_input_width(self) -> int:
        return self.k * (self.gin_widths[-1] + self.d_star)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, tuple):
                d[key] = list(value)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def updated(self, **changes) -> TrainConfig:
        return replace(self, **changes)


# Reduced architecture for single-CPU experiments; every other setting keeps its default.
DESK_OVERRIDES = dict(
    d_star=32,
    gin_widths=(64, 64, 64, 16),
    gt_layers=1,
    gt_ffn_width=64,
    gt_heads=4,
    learning_rate=1e-3,
    epochs=10,
)


def desk_config(**changes) -> TrainConfig:
    return TrainConfig(**{**DESK_OVERRIDES, **changes})


def _parse_value(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            item = type(default[0]) if default else float
            return tuple(item(s) for s in raw.replace(" ", "").split(",") if s)
        return type(default)(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, list values are comma-separated."""
    defaults = TrainConfig()
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not hasattr(defaults, key):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, value, getattr(defaults, key))
    return out


def load_config(path, **overrides) -> TrainConfig:
    values = {}
    if path:
        try:
            values = parse_config_text(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def format_config(config: TrainConfig) -> str:
    lines = []
    for key, value in config.to_dict().items():
        if isinstance(value, list):
            value = ", ".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
