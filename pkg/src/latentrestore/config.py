"""Flat key=value run configuration with strict key checking."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_config_text", "fingerprint"]


class ConfigError(ValueError):
    """Raised for unknown keys, bad values, or missing paths."""


@dataclass
class RunConfig:
    """All pipeline hyperparameters; file keys match the field names.

    Defaults: batch 16, lr 1e-4, linear schedule over 50 steps, downsample
    factor 4 with 4 latent channels at 64 px tiles (f=8 at larger tiles is a
    supported configuration, not the desk-scale default).
    """

    t: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.02
    f: int = 4
    c: int = 4
    base_width: int = 32
    kl_weight: float = 1e-6
    lr: float = 1e-4
    batch: int = 16
    epochs: int = 20
    seed: int = 0
    tile: int = 64
    pixel_t: int = 250
    data_dir: str = ""
    vae_weights: str = ""
    denoiser_weights: str = ""
    pixel_weights: str = ""


_PATH_KEYS = ("data_dir", "vae_weights", "denoiser_weights", "pixel_weights")


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    known = {f.name: f.type for f in fields(RunConfig)}
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        current = getattr(cfg, key)
        try:
            if isinstance(current, int):
                setattr(cfg, key, int(value))
            elif isinstance(current, float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for '{key}': {value!r}") from exc
    for key in _PATH_KEYS:
        value = getattr(cfg, key)
        if value and not Path(value).exists():
            raise ConfigError(f"{source}: path for '{key}' does not exist: {value}")
    return cfg


def parse_config(path) -> RunConfig:
    return parse_config_text(Path(path).read_text(), source=str(path))


def fingerprint(cfg: RunConfig) -> str:
    """Short stable hash of the full configuration, for report provenance."""
    canon = "\n".join(f"{f.name}={getattr(cfg, f.name)}" for f in sorted(fields(RunConfig), key=lambda f: f.name))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]
