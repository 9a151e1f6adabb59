"""Pixel-space regional denoising baseline for the efficiency comparison.

Reuses the latent restore pipeline verbatim with an identity codec (f=1), so
the only differences against the latent route are resolution and step count.
"""

from __future__ import annotations

import numpy as np

from .denoiser import DenoiserModel, DenoiserTrainConfig, train_unet
from .regional import restore
from .schedule import Schedule

__all__ = ["IdentityCodec", "train_pixel_denoiser", "pixel_restore", "PIXEL_TIMESTEPS"]

PIXEL_TIMESTEPS = 250


class IdentityCodec:
    """Stand-in VAE with f=1: encode is the identity, decode clamps to [0, 1]."""

    kind = "identity"
    f = 1
    c = 3

    def encode(self, x: np.ndarray, mode: str = "mean", seed: int | None = None) -> np.ndarray:
        return np.asarray(x, dtype=np.float32)

    def decode(self, z: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(z, dtype=np.float32), 0.0, 1.0)


def train_pixel_denoiser(dataset, s: Schedule, config: DenoiserTrainConfig) -> DenoiserModel:
    """Train the same U-shaped noise predictor directly on (N, H, W, 3) images."""
    data = np.asarray(dataset, dtype=np.float32)
    if data.size == 0:
        raise ValueError("dataset is empty")
    return train_unet(data, s, config, label="pixel denoiser")


def pixel_restore(x: np.ndarray, pm: np.ndarray, m: DenoiserModel, s: Schedule,
                  seed: int = 0) -> np.ndarray:
    """Regional denoising at full image resolution (the prior, slower route)."""
    return restore(x, pm, IdentityCodec(), m, s, seed)
