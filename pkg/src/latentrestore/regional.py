"""Mask-guided regional denoising in latent space and the restore pipeline.

The latent mask stores keep=True for non-artifact cells.  At every reverse
step the diffused original supplies the keep region while the running
denoiser state supplies the artifact region; a terminal blend then overwrites
keep cells with the original latent, so non-artifact content survives
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import Schedule, forward_diffuse, posterior_step

__all__ = ["LatentMask", "encode_mask", "blend", "regional_denoise", "restore"]


@dataclass(frozen=True)
class LatentMask:
    """(h, w) booleans; True marks a KEEP (non-artifact) latent cell."""

    keep: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.keep.shape


def encode_mask(pm: np.ndarray, f: int) -> LatentMask:
    """Downsample a pixel artifact mask to latent resolution.

    A latent cell counts as artifact as soon as ANY pixel in its f x f
    footprint is an artifact pixel, so restoration always covers the full
    artifact; the returned mask stores the complement (keep cells).
    """
    pm = np.asarray(pm, dtype=bool)
    if pm.ndim != 2:
        raise ValueError(f"pixel mask must be 2-D, got shape {pm.shape}")
    h, w = pm.shape
    if f < 1 or h % f or w % f:
        raise ValueError(f"mask dims {pm.shape} not divisible by f={f}")
    artifact = pm.reshape(h // f, f, w // f, f).any(axis=(1, 3))
    return LatentMask(keep=~artifact)


def blend(sample: np.ndarray, output: np.ndarray, m: LatentMask) -> np.ndarray:
    """Per-cell select: ``sample`` where keep, ``output`` where artifact."""
    sample = np.asarray(sample)
    output = np.asarray(output)
    if sample.shape != output.shape:
        raise ValueError(f"shape mismatch: {sample.shape} vs {output.shape}")
    if sample.shape[:2] != m.keep.shape:
        raise ValueError(f"mask {m.keep.shape} does not match tensors {sample.shape[:2]}")
    keep = m.keep[..., None] if sample.ndim == 3 else m.keep
    return np.where(keep, sample, output)


def regional_denoise(z0: np.ndarray, m: LatentMask, dm, s: Schedule, seed: int = 0) -> np.ndarray:
    """Regenerate artifact cells of ``z0`` through the full reverse chain.

    Keep cells of the result equal ``z0`` exactly (terminal blend); artifact
    cells are synthesized from seeded Gaussian noise, guided at every step by
    the freshly diffused keep region.
    """
    z0 = np.asarray(z0, dtype=np.float32)
    if z0.ndim != 3:
        raise ValueError(f"latent must be (h, w, c), got shape {z0.shape}")
    rng = np.random.default_rng(seed)
    current = rng.standard_normal(z0.shape, dtype=np.float32)
    for t in reversed(range(s.T)):
        noise = rng.standard_normal(z0.shape, dtype=np.float32)
        sample_t = forward_diffuse(z0, t, noise, s)
        blended = blend(sample_t, current, m)
        eps_hat = dm.predict_noise(blended, t)
        step_noise = rng.standard_normal(z0.shape, dtype=np.float32) if t > 0 else None
        current = posterior_step(blended, eps_hat, t, s, step_noise)
    return blend(z0, current, m)


def restore(x: np.ndarray, pm: np.ndarray, vae, dm, s: Schedule, seed: int = 0) -> np.ndarray:
    """End-to-end restoration: encode, regionally denoise, decode."""
    x = np.asarray(x, dtype=np.float32)
    pm = np.asarray(pm, dtype=bool)
    if x.ndim != 3 or pm.shape != x.shape[:2]:
        raise ValueError(f"image {x.shape} and mask {pm.shape} dims do not agree")
    z0 = vae.encode(x, mode="mean")
    m = encode_mask(pm, vae.f)
    z = regional_denoise(z0, m, dm, s, seed)
    return vae.decode(z)
