"""Linear-beta diffusion schedule and the two elementary steps built on it.

Timesteps are 0-indexed: arrays have length ``T`` and index ``t`` holds the
noise level of the sample at step ``t``.  All coefficients are stored in
float64; the array operations preserve the dtype of their tensor inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Schedule", "build_schedule", "forward_diffuse", "posterior_step"]


@dataclass(frozen=True)
class Schedule:
    """Immutable per-timestep noise levels of the forward Markov chain.

    ``beta[t]`` is the variance added at step ``t`` and ``alpha_bar[t]`` is
    the running product of ``1 - beta`` up to and including ``t``, so it is
    strictly decreasing and ``alpha_bar[0] == 1 - beta[0]``.
    """

    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta


def build_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> Schedule:
    """Build a linear variance schedule with ``T`` steps.

    Raises ValueError unless ``T >= 1`` and ``0 < beta_start <= beta_end < 1``.
    """
    if T < 1:
        raise ValueError(f"schedule needs at least one timestep, got T={T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"betas must satisfy 0 < start <= end < 1, got [{beta_start}, {beta_end}]"
        )
    beta = np.linspace(beta_start, beta_end, T)
    alpha_bar = np.cumprod(1.0 - beta)
    beta.setflags(write=False)
    alpha_bar.setflags(write=False)
    return Schedule(T=T, beta=beta, alpha_bar=alpha_bar)


def _check_timestep(t: int, s: Schedule) -> None:
    if not 0 <= t < s.T:
        raise ValueError(f"timestep {t} out of range [0, {s.T})")


def forward_diffuse(z0: np.ndarray, t: int, noise: np.ndarray, s: Schedule) -> np.ndarray:
    """Closed-form forward sample: sqrt(abar_t) * z0 + sqrt(1 - abar_t) * noise."""
    _check_timestep(t, s)
    z0 = np.asarray(z0)
    noise = np.asarray(noise)
    if noise.shape != z0.shape:
        raise ValueError(f"noise shape {noise.shape} != input shape {z0.shape}")
    abar = float(s.alpha_bar[t])
    return math.sqrt(abar) * z0 + math.sqrt(1.0 - abar) * noise


def posterior_step(
    z_t: np.ndarray,
    eps_hat: np.ndarray,
    t: int,
    s: Schedule,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """One reverse step with predicted noise ``eps_hat``.

    Returns ``(z_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t)``
    plus ``sqrt(beta_t) * noise``.  Pass ``noise=None`` at t=0 (no noise is
    added on the final step).
    """
    _check_timestep(t, s)
    z_t = np.asarray(z_t)
    eps_hat = np.asarray(eps_hat)
    if eps_hat.shape != z_t.shape:
        raise ValueError(f"eps_hat shape {eps_hat.shape} != input shape {z_t.shape}")
    beta = float(s.beta[t])
    abar = float(s.alpha_bar[t])
    mean = (z_t - (beta / math.sqrt(1.0 - abar)) * eps_hat) / math.sqrt(1.0 - beta)
    if noise is None:
        return mean
    noise = np.asarray(noise)
    if noise.shape != z_t.shape:
        raise ValueError(f"noise shape {noise.shape} != input shape {z_t.shape}")
    return mean + math.sqrt(beta) * noise
