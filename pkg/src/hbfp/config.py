"""Experiment configuration: flat ``key=value`` files plus overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from hbfp.linalg import UNTILED


class ConfigError(ValueError):
    pass


_UNTILED_WORDS = {"untiled", "none", "u"}


def _parse_tile(v):
    if v is UNTILED:
        return UNTILED
    if isinstance(v, str) and v.strip().lower() in _UNTILED_WORDS:
        return UNTILED
    return int(v)


def _parse_opt_str(v):
    if v is None:
        return None
    s = str(v).strip()
    return s or None


def _parse_opt_int(v):
    if v is None or (isinstance(v, str) and v.strip().lower() in ("", "none")):
        return None
    return int(v)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "hbfp"
    w_narrow: int = 8
    w_wide: int = 16
    tile: object = 24
    rounding: str = "stochastic"
    exponent_bits: int = 16
    seed: int = 0
    train_seed: object = None
    model: str = "mlp"
    hidden: str = "64,64"
    dataset: str = "spirals"
    n_samples: int = 2000
    classes: int = 3
    dim: int = 2
    noise: float = 0.05
    spread: float = 1.0
    turns: float = 1.0
    idx_images: object = None
    idx_labels: object = None
    limit: object = None
    val_fraction: float = 0.2
    data_seed: int = 0
    epochs: int = 10
    batch_size: int = 32
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    lr_schedule: str = "constant"

    def __post_init__(self):
        errors = []
        if self.mode not in ("fp32", "hbfp"):
            errors.append(f"mode must be fp32 or hbfp, got {self.mode!r}")
        if self.rounding not in ("nearest", "stochastic"):
            errors.append(f"rounding must be nearest or stochastic, got {self.rounding!r}")
        if self.mode == "hbfp":
            if not 2 <= self.w_narrow <= 24:
                errors.append(f"w_narrow must be in [2, 24], got {self.w_narrow}")
            if not self.w_narrow <= self.w_wide <= 32:
                errors.append(f"w_wide must be in [w_narrow, 32], got {self.w_wide}")
            if self.tile is not UNTILED and not 1 <= self.tile <= 1024:
                errors.append(f"tile must be in [1, 1024] or untiled, got {self.tile}")
        if self.model not in ("mlp", "cnn", "logreg"):
            errors.append(f"model must be mlp, cnn or logreg, got {self.model!r}")
        if self.dataset not in ("spirals", "blobs", "idx", "digits"):
            errors.append(f"dataset must be spirals, blobs, idx or digits, got {self.dataset!r}")
        if self.dataset == "idx" and not (self.idx_images and self.idx_labels):
            errors.append("dataset=idx needs idx_images and idx_labels")
        if self.lr_schedule not in ("constant", "cosine"):
            errors.append(f"lr_schedule must be constant or cosine, got {self.lr_schedule!r}")
        if self.epochs < 0 or self.batch_size < 1:
            errors.append("epochs must be >= 0 and batch_size >= 1")
        if not 0 <= self.val_fraction < 1:
            errors.append(f"val_fraction must be in [0, 1), got {self.val_fraction}")
        if not 0 < self.exponent_bits <= 64:
            errors.append(f"exponent_bits must be in [1, 64], got {self.exponent_bits}")
        try:
            self.hidden_sizes
        except ValueError:
            errors.append(f"hidden must be a comma-separated list of ints, got {self.hidden!r}")
        if errors:
            raise ConfigError("; ".join(errors))

    @property
    def hidden_sizes(self) -> tuple:
        return tuple(int(h) for h in str(self.hidden).split(",") if h.strip())

    @property
    def effective_seed(self) -> int:
        return self.seed if self.train_seed is None else self.train_seed

    @property
    def config_id(self) -> str:
        if self.mode == "fp32":
            return f"fp32_s{self.seed}"
        t = "U" if self.tile is UNTILED else self.tile
        return f"hbfp{self.w_narrow}_{self.w_wide}_t{t}_s{self.seed}"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, pairs) -> "ExperimentConfig":
        """Apply ``key=value`` strings on top of this config."""
        return self.replace(**_convert(dict(_split(p, f"override {p!r}") for p in pairs)))

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, value = _split(line, f"{source}:{lineno}")
            if key in values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            values[key] = value
        return cls(**_convert(values))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text, str(path))

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None and f.name == "tile":
                v = "untiled"
            elif v is None:
                continue  # unset optional keys keep their default
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"


_CONVERTERS = {
    "tile": _parse_tile,
    "train_seed": _parse_opt_int,
    "limit": _parse_opt_int,
    "idx_images": _parse_opt_str,
    "idx_labels": _parse_opt_str,
}


def _split(line, where):
    if "=" not in line:
        raise ConfigError(f"{where}: expected key=value")
    key, value = line.split("=", 1)
    return key.strip(), value.strip()


def _convert(values: dict) -> dict:
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    for key, raw in values.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        conv = _CONVERTERS.get(key) or {"int": int, "float": float, "str": str}[types[key]]
        try:
            out[key] = conv(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return out
