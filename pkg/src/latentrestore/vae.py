"""Small convolutional VAE mapping image tiles to a compact latent space.

The encoder halves the spatial resolution ``log2(f)`` times and emits a
posterior mean and log-variance with ``c`` channels each; the decoder mirrors
it and ends in a sigmoid, so decoded pixels always land in [0, 1].  After
training, per-channel latent statistics are folded into ``encode``/``decode``
so downstream diffusion sees roughly unit-scale latents.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .nn import Adam, Conv2d, GroupNorm, Sigmoid, SiLU, Upsample2x, collect_grads, collect_state

__all__ = ["VaeModel", "VaeTrainConfig", "train_vae", "reconstruction_mse", "reconstruction_mae"]

log = logging.getLogger(__name__)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class VaeModel:
    """Encoder/decoder pair with a fixed downsample factor ``f`` and ``c`` latent channels."""

    kind = "vae"

    def __init__(self, f: int = 4, c: int = 4, base: int = 32, rng=0):
        ndown = int(round(np.log2(f)))
        if f < 2 or 2**ndown != f:
            raise ValueError(f"downsample factor must be a power of 2 >= 2, got {f}")
        rng = _as_rng(rng)
        self.f, self.c, self.base, self.ndown = f, c, base, ndown
        widths = [base] + [2 * base] * (ndown - 1)

        enc: list[tuple[str, object]] = []
        prev = 3
        for i, w in enumerate(widths):
            enc.append((f"enc{i}", Conv2d(prev, w, rng, stride=2)))
            enc.append((f"enc{i}_norm", GroupNorm(w)))
            enc.append((f"enc{i}_act", SiLU()))
            prev = w
        enc.append(("enc_trunk", Conv2d(prev, prev, rng)))
        enc.append(("enc_trunk_norm", GroupNorm(prev)))
        enc.append(("enc_trunk_act", SiLU()))
        enc.append(("enc_head", Conv2d(prev, 2 * c, rng)))
        self._enc = enc

        dec: list[tuple[str, object]] = []
        dec.append(("dec_in", Conv2d(c, widths[-1], rng)))
        dec.append(("dec_in_norm", GroupNorm(widths[-1])))
        dec.append(("dec_in_act", SiLU()))
        prev = widths[-1]
        for i in reversed(range(ndown)):
            out = widths[i - 1] if i >= 1 else base
            dec.append((f"dec{i}_up", Upsample2x()))
            dec.append((f"dec{i}", Conv2d(prev, out, rng)))
            dec.append((f"dec{i}_norm", GroupNorm(out)))
            dec.append((f"dec{i}_act", SiLU()))
            prev = out
        dec.append(("dec_out", Conv2d(prev, 3, rng)))
        dec.append(("dec_out_act", Sigmoid()))
        self._dec = dec

        self.z_shift = np.zeros(c, dtype=np.float32)
        self.z_scale = np.ones(c, dtype=np.float32)

    # -- raw (batched, pre-standardization) passes used by training ---------

    @property
    def layers(self) -> list[tuple[str, object]]:
        return self._enc + self._dec

    def _encode_raw(self, xb: np.ndarray):
        h = xb
        for _, layer in self._enc:
            h = layer.forward(h)
        return h[..., : self.c], h[..., self.c :]

    def _encode_backward(self, dmu: np.ndarray, dlogvar: np.ndarray) -> np.ndarray:
        d = np.concatenate([dmu, dlogvar], axis=-1)
        for _, layer in reversed(self._enc):
            d = layer.backward(d)
        return d

    def _decode_raw(self, zb: np.ndarray) -> np.ndarray:
        h = zb
        for _, layer in self._dec:
            h = layer.forward(h)
        return h

    def _decode_backward(self, dxhat: np.ndarray) -> np.ndarray:
        d = dxhat
        for _, layer in reversed(self._dec):
            d = layer.backward(d)
        return d

    # -- public single-image / batch API ------------------------------------

    def _check_image(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float32)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.ndim != 4 or x.shape[-1] != 3:
            raise ValueError(f"expected (H, W, 3) or (N, H, W, 3) image, got {x.shape}")
        if x.shape[1] % self.f or x.shape[2] % self.f:
            raise ValueError(f"image dims {x.shape[1:3]} not divisible by f={self.f}")
        return x, single

    def encode(self, x: np.ndarray, mode: str = "mean", seed: int | None = None) -> np.ndarray:
        """Posterior mean (mode='mean') or a seeded posterior sample (mode='sample')."""
        xb, single = self._check_image(x)
        mu, logvar = self._encode_raw(xb)
        if mode == "mean":
            z = mu
        elif mode == "sample":
            rng = np.random.default_rng(0 if seed is None else seed)
            z = mu + np.exp(0.5 * logvar) * rng.standard_normal(mu.shape, dtype=np.float32)
        else:
            raise ValueError(f"unknown encode mode '{mode}'")
        z = (z - self.z_shift) / self.z_scale
        return z[0] if single else z

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float32)
        single = z.ndim == 3
        if single:
            z = z[None]
        if z.ndim != 4 or z.shape[-1] != self.c:
            raise ValueError(f"latent shape {z.shape} does not match c={self.c}")
        x = self._decode_raw(z * self.z_scale + self.z_shift)
        return x[0] if single else x


@dataclass
class VaeTrainConfig:
    epochs: int
    batch: int = 16
    lr: float = 1e-4
    f: int = 4
    c: int = 4
    base: int = 32
    kl_weight: float = 1e-6
    seed: int = 0
    holdout_frac: float = 0.1


def _check_dataset(dataset, f: int) -> np.ndarray:
    data = np.asarray(dataset, dtype=np.float32)
    if data.size == 0:
        raise ValueError("dataset is empty")
    if data.ndim != 4 or data.shape[-1] != 3:
        raise ValueError(f"dataset must stack to (N, H, W, 3), got {data.shape}")
    if data.shape[1] % f or data.shape[2] % f:
        raise ValueError(f"tile dims {data.shape[1:3]} not divisible by f={f}")
    return data


def train_vae(dataset, config: VaeTrainConfig) -> VaeModel:
    """Train a VAE on image tiles; epochs=0 returns the seeded initialization."""
    data = _check_dataset(dataset, config.f)
    rng = np.random.default_rng(config.seed)
    model = VaeModel(f=config.f, c=config.c, base=config.base, rng=rng)
    if config.epochs == 0:
        return model

    n = len(data)
    n_hold = min(n - 1, max(1, round(config.holdout_frac * n))) if n > 1 else 0
    perm = rng.permutation(n)
    hold = data[perm[:n_hold]]
    train = data[perm[n_hold:]]

    opt = Adam(collect_state(model.layers), lr=config.lr)
    klw = config.kl_weight
    for epoch in range(config.epochs):
        order = rng.permutation(len(train))
        total, nb = 0.0, 0
        for i in range(0, len(train), config.batch):
            xb = train[order[i : i + config.batch]]
            mu, logvar = model._encode_raw(xb)
            noise = rng.standard_normal(mu.shape, dtype=np.float32)
            z = mu + np.exp(0.5 * logvar) * noise
            xhat = model._decode_raw(z)

            diff = xhat - xb
            recon = float(np.mean(diff**2))
            kl = -0.5 * float(np.mean(1.0 + logvar - mu**2 - np.exp(logvar)))
            total += recon + klw * kl
            nb += 1

            dz = model._decode_backward((2.0 / diff.size) * diff)
            nz = mu.size
            dmu = dz + klw * (mu / nz)
            dlogvar = dz * noise * 0.5 * np.exp(0.5 * logvar) + klw * (
                -0.5 * (1.0 - np.exp(logvar)) / nz
            )
            model._encode_backward(dmu, dlogvar)
            opt.step(collect_grads(model.layers))
        hold_mse = reconstruction_mse(model, hold) if n_hold else float("nan")
        log.info(
            "vae epoch %d/%d train_loss=%.6f holdout_mse=%.6f",
            epoch + 1, config.epochs, total / max(nb, 1), hold_mse,
        )

    # Fold per-channel latent statistics into the model so encode() emits
    # roughly zero-mean unit-scale latents for the diffusion stage.
    mus = _encode_means(model, train, config.batch)
    model.z_shift = mus.mean(axis=(0, 1, 2)).astype(np.float32)
    model.z_scale = np.maximum(mus.std(axis=(0, 1, 2)), 1e-6).astype(np.float32)
    return model


def _encode_means(model: VaeModel, images: np.ndarray, batch: int = 16) -> np.ndarray:
    out = []
    for i in range(0, len(images), batch):
        mu, _ = model._encode_raw(images[i : i + batch])
        out.append(mu)
    return np.concatenate(out, axis=0)


def _roundtrip(model: VaeModel, images: np.ndarray, batch: int = 16) -> np.ndarray:
    out = []
    for i in range(0, len(images), batch):
        z = model.encode(images[i : i + batch], mode="mean")
        out.append(model.decode(z))
    return np.concatenate(out, axis=0)


def reconstruction_mse(model: VaeModel, images) -> float:
    images = np.asarray(images, dtype=np.float32)
    return float(np.mean((_roundtrip(model, images) - images) ** 2))


def reconstruction_mae(model: VaeModel, images) -> float:
    images = np.asarray(images, dtype=np.float32)
    return float(np.mean(np.abs(_roundtrip(model, images) - images)))
