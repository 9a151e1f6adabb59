"""Synthetic artifact injection and a stand-in tile generator for evaluation.

Artifacts are applied inside an ellipse or polygon region; the returned mask
is the exact set of pixels that changed, so everything outside it is
bit-for-bit untouched.  The tile generator produces small H&E-look tiles
(pink-magenta stroma field with dark purple nuclei blobs) so the whole
pipeline can be exercised without any external data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

__all__ = [
    "Ellipse",
    "Polygon",
    "ArtifactSpec",
    "ARTIFACT_KINDS",
    "synthesize_artifact",
    "generate_synthetic_histology",
    "random_spec",
]

ARTIFACT_KINDS = ("opaque_mask", "fold_darken", "bubble_brighten", "blur_region")


@dataclass(frozen=True)
class Ellipse:
    """Axis-aligned ellipse; center and radii in pixel units."""

    cy: float
    cx: float
    ry: float
    rx: float

    def rasterize(self, h: int, w: int) -> np.ndarray:
        if self.ry <= 0 or self.rx <= 0:
            raise ValueError(f"degenerate ellipse radii ({self.ry}, {self.rx})")
        if not (0 <= self.cy - self.ry and self.cy + self.ry <= h - 1
                and 0 <= self.cx - self.rx and self.cx + self.rx <= w - 1):
            raise ValueError("ellipse does not fit inside the image")
        yy, xx = np.mgrid[0:h, 0:w]
        return ((yy - self.cy) / self.ry) ** 2 + ((xx - self.cx) / self.rx) ** 2 <= 1.0


@dataclass(frozen=True)
class Polygon:
    """Simple polygon given as ((y, x), ...) vertices; even-odd fill rule."""

    vertices: tuple[tuple[float, float], ...]

    def rasterize(self, h: int, w: int) -> np.ndarray:
        pts = np.asarray(self.vertices, dtype=np.float64)
        if len(pts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if pts[:, 0].min() < 0 or pts[:, 0].max() > h - 1 or pts[:, 1].min() < 0 or pts[:, 1].max() > w - 1:
            raise ValueError("polygon does not fit inside the image")
        yy, xx = np.mgrid[0:h, 0:w]
        inside = np.zeros((h, w), dtype=bool)
        for i in range(len(pts)):
            y1, x1 = pts[i]
            y2, x2 = pts[(i + 1) % len(pts)]
            if y1 == y2:
                continue
            crosses = (y1 > yy) != (y2 > yy)
            xint = x1 + (yy - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (xx < xint)
        return inside


@dataclass(frozen=True)
class ArtifactSpec:
    """One synthetic artifact: a kind, a region, and its intensity knobs.

    ``seed`` records the draw that produced a randomly sampled spec; the four
    built-in kinds are fully deterministic given the other fields.
    """

    kind: str
    region: Ellipse | Polygon
    level: float = 0.5     # opaque_mask: gray fill value
    factor: float = 0.6    # fold_darken: multiplier on masked pixels
    amount: float = 0.3    # bubble_brighten: residual distance to white
    sigma: float = 3.0     # blur_region: Gaussian blur in pixels
    seed: int = 0


def synthesize_artifact(x: np.ndarray, spec: ArtifactSpec) -> tuple[np.ndarray, np.ndarray]:
    """Apply ``spec`` to a clean tile; returns (artifact image, pixel mask).

    The mask is recomputed as the exact set of changed pixels, so the pair
    satisfies: outside the mask the output is bitwise identical to the input.
    """
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3 or x.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {x.shape}")
    if spec.kind not in ARTIFACT_KINDS:
        raise ValueError(f"unknown artifact kind '{spec.kind}'")
    h, w = x.shape[:2]
    region = spec.region.rasterize(h, w)
    if not region.any():
        raise ValueError("artifact region rasterizes to zero pixels")

    y = x.copy()
    if spec.kind == "opaque_mask":
        if not 0.0 <= spec.level <= 1.0:
            raise ValueError(f"opaque level {spec.level} outside [0, 1]")
        y[region] = spec.level
    elif spec.kind == "fold_darken":
        y[region] *= np.float32(spec.factor)
    elif spec.kind == "bubble_brighten":
        y[region] = 1.0 - (1.0 - y[region]) * np.float32(spec.amount)
    else:  # blur_region
        blurred = ndimage.gaussian_filter(x, sigma=(spec.sigma, spec.sigma, 0.0))
        y[region] = blurred[region]
    np.clip(y, 0.0, 1.0, out=y)

    mask = np.any(y != x, axis=-1)
    if not mask.any():
        raise ValueError(f"artifact '{spec.kind}' left the image unchanged (degenerate spec)")
    return y, mask


def generate_synthetic_histology(n: int, size: int = 64, seed: int = 0) -> np.ndarray:
    """``n`` square H&E-look tiles in [0, 1], deterministic given the seed."""
    if n < 1:
        raise ValueError(f"need n >= 1 tiles, got {n}")
    if size % 8:
        raise ValueError(f"tile size must be divisible by 8, got {size}")
    rng = np.random.default_rng(seed)
    tiles = np.empty((n, size, size, 3), dtype=np.float32)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    for i in range(n):
        base = np.array([0.89, 0.62, 0.79]) + rng.uniform(-0.04, 0.04, size=3)
        coarse = rng.standard_normal((size // 8, size // 8, 3))
        fieldn = np.repeat(np.repeat(coarse, 8, axis=0), 8, axis=1)
        fieldn = ndimage.gaussian_filter(fieldn, sigma=(4.0, 4.0, 0.0))
        tile = base + fieldn * np.array([0.05, 0.08, 0.05])

        n_nuclei = rng.integers(10, 24)
        for _ in range(n_nuclei):
            ry, rx = rng.uniform(2.0, 5.0, size=2)
            cy = rng.uniform(ry, size - 1 - ry)
            cx = rng.uniform(rx, size - 1 - rx)
            d = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
            alpha = np.clip(1.6 * (1.0 - d), 0.0, 1.0)[..., None]
            color = np.array([0.36, 0.21, 0.52]) + rng.uniform(-0.05, 0.05, size=3)
            tile = tile * (1.0 - alpha) + color * alpha
        tile += rng.normal(0.0, 0.015, size=tile.shape)
        tiles[i] = np.clip(tile, 0.0, 1.0)
    return tiles


def random_spec(rng, h: int, w: int, kinds=ARTIFACT_KINDS,
                area_range: tuple[float, float] = (0.05, 0.25)) -> ArtifactSpec:
    """Sample an artifact spec whose region covers the requested area fraction."""
    seed = 0
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    kind = kinds[rng.integers(len(kinds))]
    area = rng.uniform(*area_range) * h * w
    aspect = rng.uniform(0.6, 1.6)
    ry = min(np.sqrt(area / np.pi * aspect), (h - 2) / 2)
    rx = min(area / np.pi / ry, (w - 2) / 2)
    cy = rng.uniform(ry, h - 1 - ry)
    cx = rng.uniform(rx, w - 1 - rx)
    if rng.random() < 0.25:
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=rng.integers(5, 9)))
        radii = rng.uniform(0.6, 1.0, size=len(angles))
        verts = tuple(
            (float(np.clip(cy + ry * r * np.sin(a), 0, h - 1)),
             float(np.clip(cx + rx * r * np.cos(a), 0, w - 1)))
            for a, r in zip(angles, radii)
        )
        region: Ellipse | Polygon = Polygon(verts)
    else:
        region = Ellipse(cy=cy, cx=cx, ry=ry, rx=rx)
    return ArtifactSpec(
        kind=kind,
        region=region,
        level=float(rng.uniform(0.25, 0.75)),
        factor=float(rng.uniform(0.4, 0.8)),
        amount=float(rng.uniform(0.15, 0.45)),
        sigma=float(rng.uniform(2.0, 6.0)),
        seed=seed,
    )
