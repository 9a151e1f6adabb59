"""Image quality metrics over restored/clean pairs.

Inputs are float images in [0, 1]; L2, region MSE and PSNR are computed on
the 0-255 intensity scale (the convention the reported magnitudes of this
kind of restoration work imply).  All functions are pure and deterministic.

SSIM uses the standard 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
L=255, computed per channel on valid windows and averaged.

FSIM combines phase congruency from a log-Gabor filter bank (4 scales, 4
orientations, min wavelength 6, scale factor 2, sigma_onf 0.55, angular
sigma (pi/4)/1.2, no noise compensation) with a zero-padded Scharr gradient
magnitude on the 0-255 luminance channel; the two similarity maps are pooled
weighted by the pointwise max phase congruency with T1=0.85, T2=160.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

__all__ = ["MetricReport", "l2_whole", "mse_region", "ssim", "psnr", "fsim", "evaluate_pair"]

PSNR_CAP = 100.0

_SCHARR_X = np.array([[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]]) / 16.0
_SCHARR_Y = _SCHARR_X.T


@dataclass(frozen=True)
class MetricReport:
    l2_whole: float
    mse_region: float
    ssim: float
    psnr: float
    fsim: float


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3 or a.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) images, got {a.shape}")
    return a * 255.0, b * 255.0


def l2_whole(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of squared differences over all pixels and channels (0-255 scale)."""
    a255, b255 = _check_pair(a, b)
    return float(np.sum((a255 - b255) ** 2))


def mse_region(a: np.ndarray, b: np.ndarray, pm: np.ndarray) -> float:
    """Mean squared difference restricted to mask-true pixels (0-255 scale)."""
    a255, b255 = _check_pair(a, b)
    pm = np.asarray(pm, dtype=bool)
    if pm.shape != a255.shape[:2]:
        raise ValueError(f"mask shape {pm.shape} does not match images {a255.shape[:2]}")
    if not pm.any():
        raise ValueError("mask is empty; region MSE is undefined")
    d = a255[pm] - b255[pm]
    return float(np.mean(d**2))


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity, per channel then averaged."""
    a255, b255 = _check_pair(a, b)
    if min(a255.shape[:2]) < 11:
        raise ValueError(f"images must be at least 11x11 for SSIM, got {a255.shape[:2]}")
    win = _gaussian_window()
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    vals = []
    for ch in range(3):
        x = a255[..., ch]
        y = b255[..., ch]
        mu_x = convolve2d(x, win, mode="valid")
        mu_y = convolve2d(y, win, mode="valid")
        sxx = convolve2d(x * x, win, mode="valid") - mu_x**2
        syy = convolve2d(y * y, win, mode="valid") - mu_y**2
        sxy = convolve2d(x * y, win, mode="valid") - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB (0-255 scale), capped at 100."""
    a255, b255 = _check_pair(a, b)
    mse = float(np.mean((a255 - b255) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(10.0 * math.log10(255.0**2 / mse), PSNR_CAP)


def _luminance255(img255: np.ndarray) -> np.ndarray:
    return 0.299 * img255[..., 0] + 0.587 * img255[..., 1] + 0.114 * img255[..., 2]


def _log_gabor_bank(h: int, w: int, nscale: int = 4, norient: int = 4,
                    min_wavelength: float = 6.0, mult: float = 2.0,
                    sigma_onf: float = 0.55):
    v = np.fft.fftfreq(h)[:, None]
    u = np.fft.fftfreq(w)[None, :]
    radius = np.sqrt(u**2 + v**2)
    radius[0, 0] = 1.0
    theta = np.arctan2(-v, u)
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    theta_sigma = (np.pi / norient) / 1.2

    radials = []
    for s in range(nscale):
        f0 = 1.0 / (min_wavelength * mult**s)
        r = np.exp(-(np.log(radius / f0) ** 2) / (2.0 * math.log(sigma_onf) ** 2))
        r[0, 0] = 0.0
        radials.append(r)
    spreads = []
    for o in range(norient):
        angle = o * np.pi / norient
        ds = sin_t * math.cos(angle) - cos_t * math.sin(angle)
        dc = cos_t * math.cos(angle) + sin_t * math.sin(angle)
        dtheta = np.abs(np.arctan2(ds, dc))
        spreads.append(np.exp(-(dtheta**2) / (2.0 * theta_sigma**2)))
    return radials, spreads


def _phase_congruency(img: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    h, w = img.shape
    radials, spreads = _log_gabor_bank(h, w)
    fimg = np.fft.fft2(img)
    energy_sum = np.zeros((h, w))
    amplitude_sum = np.zeros((h, w))
    for spread in spreads:
        resp_sum = np.zeros((h, w), dtype=complex)
        for radial in radials:
            resp = np.fft.ifft2(fimg * radial * spread)
            amplitude_sum += np.abs(resp)
            resp_sum += resp
        energy_sum += np.abs(resp_sum)
    return energy_sum / (eps + amplitude_sum)


def _gradient_magnitude(img: np.ndarray) -> np.ndarray:
    gx = convolve2d(img, _SCHARR_X, mode="same", boundary="fill")
    gy = convolve2d(img, _SCHARR_Y, mode="same", boundary="fill")
    return np.sqrt(gx**2 + gy**2)


def fsim(a: np.ndarray, b: np.ndarray) -> float:
    """Feature similarity from phase congruency and gradient magnitude maps."""
    a255, b255 = _check_pair(a, b)
    if min(a255.shape[:2]) < 16:
        raise ValueError(f"images must be at least 16x16 for FSIM, got {a255.shape[:2]}")
    t1, t2 = 0.85, 160.0
    ya = _luminance255(a255)
    yb = _luminance255(b255)
    pc1 = _phase_congruency(ya)
    pc2 = _phase_congruency(yb)
    g1 = _gradient_magnitude(ya)
    g2 = _gradient_magnitude(yb)
    s_pc = (2.0 * pc1 * pc2 + t1) / (pc1**2 + pc2**2 + t1)
    s_g = (2.0 * g1 * g2 + t2) / (g1**2 + g2**2 + t2)
    pcm = np.maximum(pc1, pc2)
    denom = float(pcm.sum())
    if denom == 0.0:
        return 1.0
    return float((s_pc * s_g * pcm).sum() / denom)


def evaluate_pair(restored: np.ndarray, clean: np.ndarray, pm: np.ndarray) -> MetricReport:
    """All five metrics for one (restored, clean, artifact mask) triple."""
    return MetricReport(
        l2_whole=l2_whole(restored, clean),
        mse_region=mse_region(restored, clean, pm),
        ssim=ssim(restored, clean),
        psnr=psnr(restored, clean),
        fsim=fsim(restored, clean),
    )
