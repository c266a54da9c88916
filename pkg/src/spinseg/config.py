"""Pipeline configuration: JSON file plus key=value overrides, last write wins."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class SuperpointParams:
    k: int = 16
    kf: float = 0.05
    min_size: int = 30
    w_normal: float = 1.0
    w_color: float = 0.2


@dataclass
class PipelineConfig:
    tau_iou: float = 0.9
    tau_sim: float = 0.9
    top_k_masks: int = 5
    k_fps: int = 64
    superpoint: SuperpointParams = field(default_factory=SuperpointParams)
    clustering: str = "flat"  # flat | hierarchical
    n_s: int | None = None  # hierarchical window size; default ceil(M/2)
    hilbert_bits: int = 10
    seed: int = 0
    dense_limit: int = 2000
    tau_depth: float = 0.05
    strict_iou_mode: bool = False
    threads: int = 1

    def validate(self) -> None:
        for name in ("tau_iou", "tau_sim"):
            value = getattr(self, name)
            if not (0.0 <= value < 1.0):
                raise ConfigError(f"{name} must be in [0, 1), got {value}")
        if self.top_k_masks < 1:
            raise ConfigError(f"top_k_masks must be >= 1, got {self.top_k_masks}")
        if self.k_fps < 1:
            raise ConfigError(f"k_fps must be >= 1, got {self.k_fps}")
        if self.clustering not in ("flat", "hierarchical"):
            raise ConfigError(f"clustering must be 'flat' or 'hierarchical', got {self.clustering!r}")
        if self.n_s is not None and self.n_s < 2:
            raise ConfigError(f"n_s must be >= 2, got {self.n_s}")
        if not (1 <= self.hilbert_bits <= 20):
            raise ConfigError(f"hilbert_bits must be in [1, 20], got {self.hilbert_bits}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    def to_dict(self) -> dict:
        doc = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "superpoint":
                doc[f.name] = {g.name: getattr(value, g.name) for g in fields(SuperpointParams)}
            else:
                doc[f.name] = value
        return doc


def _coerce(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _apply(config: PipelineConfig, key: str, value) -> None:
    target = config
    parts = key.split(".")
    for part in parts[:-1]:
        if not hasattr(target, part):
            raise ConfigError(f"unknown config section {part!r}")
        target = getattr(target, part)
    leaf = parts[-1]
    if not hasattr(target, leaf):
        raise ConfigError(f"unknown config key {key!r}")
    current = getattr(target, leaf)
    if current is not None and value is not None and not isinstance(value, type(current)):
        try:
            value = type(current)(value)
        except (TypeError, ValueError):
            raise ConfigError(f"cannot coerce {value!r} for config key {key!r}") from None
    setattr(target, leaf, value)


def load_config(path=None, overrides: list[str] | None = None) -> PipelineConfig:
    """Build a config from an optional JSON file and --set key=value overrides."""
    config = PipelineConfig()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        for key, value in doc.items():
            if key == "superpoint" and isinstance(value, dict):
                for sub, subval in value.items():
                    _apply(config, f"superpoint.{sub}", subval)
            else:
                _apply(config, key, value)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, raw = item.partition("=")
        _apply(config, key.strip(), _coerce(raw.strip()))
    config.validate()
    return config
