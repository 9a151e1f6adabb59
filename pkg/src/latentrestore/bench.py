"""Wall-clock comparison of latent-space vs pixel-space regional restoration.

Timings wrap only the restore calls (no model loading or file I/O) and are
hardware-specific; the interesting quantity is the speedup ratio between the
two routes on identical inputs and masks.
"""

from __future__ import annotations

import platform
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .pixelspace import pixel_restore
from .regional import restore
from .schedule import Schedule

__all__ = ["BenchReport", "benchmark_restore", "report_csv", "report_table"]


@dataclass(frozen=True)
class BenchReport:
    n_images: int
    latent_steps: int
    pixel_steps: int
    latent_times: tuple[float, ...]
    pixel_times: tuple[float, ...]
    config_fingerprint: str

    @property
    def latent_mean(self) -> float:
        return statistics.fmean(self.latent_times)

    @property
    def latent_std(self) -> float:
        return statistics.pstdev(self.latent_times)

    @property
    def pixel_mean(self) -> float:
        return statistics.fmean(self.pixel_times)

    @property
    def pixel_std(self) -> float:
        return statistics.pstdev(self.pixel_times)

    @property
    def speedup(self) -> float:
        return self.pixel_mean / self.latent_mean


def benchmark_restore(images, masks, vae, dm, s_latent: Schedule,
                      pixel_dm, s_pixel: Schedule, seed: int = 0,
                      config_fingerprint: str = "") -> BenchReport:
    """Time both restoration routes per image on the same (image, mask) pairs."""
    images = np.asarray(images, dtype=np.float32)
    if len(images) == 0:
        raise ValueError("benchmark needs at least one image")
    if len(masks) != len(images):
        raise ValueError(f"got {len(images)} images but {len(masks)} masks")

    latent_times, pixel_times = [], []
    for i, (img, pm) in enumerate(zip(images, masks)):
        t0 = time.perf_counter()
        restore(img, pm, vae, dm, s_latent, seed=seed + i)
        latent_times.append(time.perf_counter() - t0)

        t0 = time.perf_counter()
        pixel_restore(img, pm, pixel_dm, s_pixel, seed=seed + i)
        pixel_times.append(time.perf_counter() - t0)

    return BenchReport(
        n_images=len(images),
        latent_steps=s_latent.T,
        pixel_steps=s_pixel.T,
        latent_times=tuple(latent_times),
        pixel_times=tuple(pixel_times),
        config_fingerprint=config_fingerprint,
    )


def report_csv(report: BenchReport) -> str:
    lines = ["route,steps,image_index,seconds"]
    for i, t in enumerate(report.latent_times):
        lines.append(f"latent,{report.latent_steps},{i},{t:.6f}")
    for i, t in enumerate(report.pixel_times):
        lines.append(f"pixel,{report.pixel_steps},{i},{t:.6f}")
    lines.append(f"# speedup,{report.speedup:.3f}")
    lines.append(f"# config_fingerprint,{report.config_fingerprint}")
    return "\n".join(lines) + "\n"


def report_table(report: BenchReport) -> str:
    rows = [
        ("route", "steps", "mean s/image", "std"),
        ("latent", str(report.latent_steps), f"{report.latent_mean:.4f}", f"{report.latent_std:.4f}"),
        ("pixel", str(report.pixel_steps), f"{report.pixel_mean:.4f}", f"{report.pixel_std:.4f}"),
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    out = [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        for row in rows
    ]
    out.append(f"speedup: {report.speedup:.2f}x over {report.n_images} image(s)")
    out.append(f"config fingerprint: {report.config_fingerprint or 'n/a'}")
    out.append(f"timings are machine-specific ({platform.machine()}, single process)")
    return "\n".join(out) + "\n"
