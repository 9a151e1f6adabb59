"""Command-line surface for the restoration pipeline.

Subcommands: gen-data, synth, train-vae, train-denoiser, restore, evaluate,
bench.  Each writes its outputs under --out and prints a one-line summary;
exit code 0 on success, 1 on runtime failure, 2 on usage errors.  The seed
is taken from --seed, else the LTAF_SEED environment variable, else the
config file.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts, bench, metrics, regional, storage
from .config import ConfigError, RunConfig, fingerprint, parse_config
from .denoiser import DenoiserTrainConfig, train_denoiser
from .pixelspace import pixel_restore, train_pixel_denoiser
from .schedule import build_schedule
from .vae import VaeTrainConfig, reconstruction_mse, train_vae

log = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentrestore",
        description="Train and run mask-guided regional diffusion restoration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="overrides LTAF_SEED and the config seed")
        p.add_argument("--out", required=True, help="output file or directory")

    p = sub.add_parser("gen-data", help="generate synthetic H&E-look tiles")
    common(p)
    p.add_argument("--n", type=int, default=64, help="number of tiles")

    p = sub.add_parser("synth", help="inject random artifacts into clean tiles")
    common(p)
    p.add_argument("--data", help="directory of clean PNG tiles (default: config data_dir)")

    p = sub.add_parser("train-vae", help="train the tile VAE")
    common(p)
    p.add_argument("--data", help="directory of training PNG tiles")

    p = sub.add_parser("train-denoiser", help="train the noise predictor")
    common(p)
    p.add_argument("--data", help="directory of training PNG tiles")
    p.add_argument("--vae", help="VAE weights (latent space only)")
    p.add_argument("--space", choices=["latent", "pixel"], default="latent")

    p = sub.add_parser("restore", help="restore one artifact image")
    common(p)
    p.add_argument("--image", required=True, help="artifact PNG")
    p.add_argument("--mask", required=True, help="artifact mask PNG (white = artifact)")
    p.add_argument("--vae", help="VAE weights (latent space only)")
    p.add_argument("--denoiser", help="denoiser weights")
    p.add_argument("--space", choices=["latent", "pixel"], default="latent")

    p = sub.add_parser("evaluate", help="metric CSV for restored-vs-clean pairs")
    common(p)
    p.add_argument("--manifest", required=True, help="clean,artifact,mask manifest")
    p.add_argument("--restored-dir", help="directory of <artifact stem>.restored.png files; "
                                          "defaults to scoring the artifact images themselves")

    p = sub.add_parser("bench", help="latent vs pixel wall-clock comparison")
    common(p)
    p.add_argument("--n", type=int, default=4, help="number of benchmark tiles")
    p.add_argument("--vae", help="VAE weights")
    p.add_argument("--denoiser", help="latent denoiser weights")
    p.add_argument("--pixel-denoiser", help="pixel denoiser weights")
    return parser


def _load_config(args) -> RunConfig:
    return parse_config(args.config) if args.config else RunConfig()


def _seed(args, cfg: RunConfig) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("LTAF_SEED")
    if env is not None:
        return int(env)
    return cfg.seed


def _weights_path(flag_value, cfg_value, what: str) -> str:
    path = flag_value or cfg_value
    if not path:
        raise ConfigError(f"no {what} given (flag or config entry required)")
    return path


def _dataset(args, cfg: RunConfig) -> np.ndarray:
    data_dir = getattr(args, "data", None) or cfg.data_dir
    if data_dir:
        return storage.load_image_dir(data_dir)
    raise ConfigError("no training data: pass --data or set data_dir in the config")


def _cmd_gen_data(args) -> str:
    cfg = _load_config(args)
    seed = _seed(args, cfg)
    tiles = artifacts.generate_synthetic_histology(args.n, size=cfg.tile, seed=seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, tile in enumerate(tiles):
        storage.save_image(out / f"tile_{i:04d}.png", tile)
    return f"gen-data: wrote {len(tiles)} tiles of {cfg.tile}x{cfg.tile} to {out}"


def _cmd_synth(args) -> str:
    cfg = _load_config(args)
    seed = _seed(args, cfg)
    data = _dataset(args, cfg)
    rng = np.random.default_rng(seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    triples = []
    for i, clean in enumerate(data):
        spec = artifacts.random_spec(rng, clean.shape[0], clean.shape[1])
        art, mask = artifacts.synthesize_artifact(clean, spec)
        paths = (out / f"t{i:04d}_clean.png", out / f"t{i:04d}_artifact.png", out / f"t{i:04d}_mask.png")
        storage.save_image(paths[0], clean)
        storage.save_image(paths[1], art)
        storage.save_image(paths[2], mask.astype(np.uint8) * 255)
        triples.append(tuple(str(p) for p in paths))
    storage.write_manifest(out / "manifest.txt", triples)
    return f"synth: wrote {len(triples)} triples and manifest.txt to {out}"


def _cmd_train_vae(args) -> str:
    cfg = _load_config(args)
    seed = _seed(args, cfg)
    data = _dataset(args, cfg)
    model = train_vae(data, VaeTrainConfig(
        epochs=cfg.epochs, batch=cfg.batch, lr=cfg.lr, f=cfg.f, c=cfg.c,
        base=cfg.base_width, kl_weight=cfg.kl_weight, seed=seed,
    ))
    storage.save_weights(model, args.out)
    mse = reconstruction_mse(model, data[: min(len(data), 64)])
    return f"train-vae: {cfg.epochs} epochs on {len(data)} tiles, recon MSE {mse:.5f}, saved {args.out}"


def _cmd_train_denoiser(args) -> str:
    cfg = _load_config(args)
    seed = _seed(args, cfg)
    data = _dataset(args, cfg)
    tcfg = DenoiserTrainConfig(epochs=cfg.epochs, batch=cfg.batch, lr=cfg.lr,
                               base=cfg.base_width, seed=seed)
    if args.space == "pixel":
        s = build_schedule(cfg.pixel_t, cfg.beta_start, cfg.beta_end)
        model = train_pixel_denoiser(data, s, tcfg)
    else:
        vae = storage.load_weights(_weights_path(args.vae, cfg.vae_weights, "VAE weights"))
        s = build_schedule(cfg.t, cfg.beta_start, cfg.beta_end)
        model = train_denoiser(vae, data, s, tcfg)
    storage.save_weights(model, args.out)
    return (f"train-denoiser: space={args.space} T={s.T} {cfg.epochs} epochs "
            f"on {len(data)} tiles, saved {args.out}")


def _cmd_restore(args) -> str:
    cfg = _load_config(args)
    seed = _seed(args, cfg)
    img = storage.load_image(args.image)
    pm = storage.load_mask(args.mask)
    if args.space == "pixel":
        dm = storage.load_weights(_weights_path(args.denoiser, cfg.pixel_weights, "pixel denoiser weights"))
        s = build_schedule(cfg.pixel_t, cfg.beta_start, cfg.beta_end)
        out_img = pixel_restore(img, pm, dm, s, seed=seed)
    else:
        vae = storage.load_weights(_weights_path(args.vae, cfg.vae_weights, "VAE weights"))
        dm = storage.load_weights(_weights_path(args.denoiser, cfg.denoiser_weights, "denoiser weights"))
        s = build_schedule(cfg.t, cfg.beta_start, cfg.beta_end)
        out_img = regional.restore(img, pm, vae, dm, s, seed=seed)
    storage.save_image(args.out, out_img)
    return f"restore: space={args.space} T={s.T} seed={seed} wrote {args.out}"


def _cmd_evaluate(args) -> str:
    triples = storage.read_manifest(args.manifest)
    rows = []
    for clean_path, artifact_path, mask_path in triples:
        clean = storage.load_image(clean_path)
        pm = storage.load_mask(mask_path)
        if args.restored_dir:
            candidate = Path(args.restored_dir) / (Path(artifact_path).stem + ".restored.png")
            if not candidate.exists():
                raise FileNotFoundError(f"no restored image {candidate}")
            scored = storage.load_image(candidate)
        else:
            scored = storage.load_image(artifact_path)
        rep = metrics.evaluate_pair(scored, clean, pm)
        rows.append((Path(artifact_path).stem, rep))

    lines = ["name,l2,mse_region,ssim,psnr,fsim"]
    for name, rep in rows:
        lines.append(f"{name},{rep.l2_whole:.4f},{rep.mse_region:.4f},"
                     f"{rep.ssim:.4f},{rep.psnr:.4f},{rep.fsim:.4f}")
    n = len(rows)
    means = [
        sum(r.l2_whole for _, r in rows) / n,
        sum(r.mse_region for _, r in rows) / n,
        sum(r.ssim for _, r in rows) / n,
        sum(r.psnr for _, r in rows) / n,
        sum(r.fsim for _, r in rows) / n,
    ]
    lines.append("mean," + ",".join(f"{m:.4f}" for m in means))
    Path(args.out).write_text("\n".join(lines) + "\n")
    return (f"evaluate: {n} pairs -> {args.out} "
            f"(mean ssim {means[2]:.4f}, psnr {means[3]:.2f}, fsim {means[4]:.4f})")


def _cmd_bench(args) -> str:
    cfg = _load_config(args)
    seed = _seed(args, cfg)
    if args.n < 1:
        raise ConfigError("bench needs --n >= 1 images")
    vae = storage.load_weights(_weights_path(args.vae, cfg.vae_weights, "VAE weights"))
    dm = storage.load_weights(_weights_path(args.denoiser, cfg.denoiser_weights, "denoiser weights"))
    pix = storage.load_weights(
        _weights_path(getattr(args, "pixel_denoiser", None), cfg.pixel_weights, "pixel denoiser weights")
    )
    tiles = artifacts.generate_synthetic_histology(args.n, size=cfg.tile, seed=seed)
    rng = np.random.default_rng(seed)
    masks = []
    for tile in tiles:
        spec = artifacts.random_spec(rng, tile.shape[0], tile.shape[1])
        _, pm = artifacts.synthesize_artifact(tile, spec)
        masks.append(pm)
    s_lat = build_schedule(cfg.t, cfg.beta_start, cfg.beta_end)
    s_pix = build_schedule(cfg.pixel_t, cfg.beta_start, cfg.beta_end)
    report = bench.benchmark_restore(tiles, masks, vae, dm, s_lat, pix, s_pix,
                                     seed=seed, config_fingerprint=fingerprint(cfg))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(bench.report_csv(report))
    table = bench.report_table(report)
    (out / "bench.txt").write_text(table)
    print(table, end="")
    return (f"bench: {report.n_images} images, latent T={report.latent_steps} "
            f"{report.latent_mean:.3f}s vs pixel T={report.pixel_steps} "
            f"{report.pixel_mean:.3f}s -> speedup {report.speedup:.2f}x")


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "synth": _cmd_synth,
    "train-vae": _cmd_train_vae,
    "train-denoiser": _cmd_train_denoiser,
    "restore": _cmd_restore,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = _build_parser().parse_args(argv)
    try:
        print(_COMMANDS[args.command](args))
    except Exception as exc:  # runtime failures map to exit 1 with a diagnostic
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
