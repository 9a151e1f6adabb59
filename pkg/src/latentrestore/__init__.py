"""Mask-guided regional diffusion restoration of image tiles in latent space."""

from .artifacts import ArtifactSpec, Ellipse, Polygon, generate_synthetic_histology, synthesize_artifact
from .bench import BenchReport, benchmark_restore
from .config import RunConfig, parse_config
from .denoiser import DenoiserModel, DenoiserTrainConfig, embed_time, train_denoiser
from .metrics import MetricReport, evaluate_pair, fsim, l2_whole, mse_region, psnr, ssim
from .pixelspace import IdentityCodec, pixel_restore, train_pixel_denoiser
from .regional import LatentMask, blend, encode_mask, regional_denoise, restore
from .schedule import Schedule, build_schedule, forward_diffuse, posterior_step
from .storage import load_image_dir, load_weights, save_weights
from .vae import VaeModel, VaeTrainConfig, train_vae

__version__ = "0.1.0"

__all__ = [
    "ArtifactSpec", "Ellipse", "Polygon", "generate_synthetic_histology", "synthesize_artifact",
    "BenchReport", "benchmark_restore",
    "RunConfig", "parse_config",
    "DenoiserModel", "DenoiserTrainConfig", "embed_time", "train_denoiser",
    "MetricReport", "evaluate_pair", "fsim", "l2_whole", "mse_region", "psnr", "ssim",
    "IdentityCodec", "pixel_restore", "train_pixel_denoiser",
    "LatentMask", "blend", "encode_mask", "regional_denoise", "restore",
    "Schedule", "build_schedule", "forward_diffuse", "posterior_step",
    "load_image_dir", "load_weights", "save_weights",
    "VaeModel", "VaeTrainConfig", "train_vae",
]
