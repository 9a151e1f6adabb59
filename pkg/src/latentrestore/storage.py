"""Persistence: versioned binary tensor container, PNG tiles, manifests.

Container layout (all integers little-endian):

    magic   4 bytes  b"LTAF"
    version u32      currently 1
    count   u32      number of entries
    entry table, one record per tensor, sorted by name:
        name_len u32, name utf-8 bytes,
        dtype    u8   (0 = float32),
        ndim     u32, shape u32 * ndim,
        offset   u64  (absolute file offset), length u64 (bytes)
    payload: concatenated tensors, float32 little-endian, C row-major

Sorting the entries and writing float32 only makes serialization
deterministic: saving the same tensors twice yields byte-identical files.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

__all__ = [
    "FormatError",
    "save_tensors",
    "load_tensors",
    "save_weights",
    "load_weights",
    "load_image",
    "save_image",
    "load_image_dir",
    "write_manifest",
    "read_manifest",
]

log = logging.getLogger(__name__)

MAGIC = b"LTAF"
VERSION = 1
_DTYPE_F32 = 0


class FormatError(ValueError):
    """Raised when a weights container fails validation."""


def save_tensors(tensors: dict[str, np.ndarray], path) -> None:
    """Write a name->float32-array map to the container format."""
    names = sorted(tensors)
    entries = []
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
        entries.append((name, arr))

    header = bytearray()
    header += MAGIC
    header += struct.pack("<II", VERSION, len(entries))
    table_size = sum(4 + len(n.encode()) + 1 + 4 + 4 * len(a.shape) + 16 for n, a in entries)
    offset = len(header) + table_size
    for name, arr in entries:
        nb = name.encode()
        length = arr.size * 4
        header += struct.pack("<I", len(nb)) + nb
        header += struct.pack("<BI", _DTYPE_F32, arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape)
        header += struct.pack("<QQ", offset, length)
        offset += length
    with open(path, "wb") as fh:
        fh.write(header)
        for _, arr in entries:
            fh.write(arr.astype("<f4", copy=False).tobytes())


def load_tensors(path) -> dict[str, np.ndarray]:
    """Read a container back, validating magic, version, and the entry table."""
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated container (only {len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, not a weights container")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported container version {version}")

    pos = 12
    tensors: dict[str, np.ndarray] = {}
    spans: list[tuple[int, int, str]] = []
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos : pos + name_len].decode()
            pos += name_len
            dtype_code, ndim = struct.unpack_from("<BI", blob, pos)
            pos += 5
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            offset, length = struct.unpack_from("<QQ", blob, pos)
            pos += 16
        except struct.error as exc:
            raise FormatError(f"{path}: truncated entry table") from exc
        if dtype_code != _DTYPE_F32:
            raise FormatError(f"{path}: tensor '{name}' has unknown dtype code {dtype_code}")
        expected = int(np.prod(shape, dtype=np.int64)) * 4
        if length != expected:
            raise FormatError(
                f"{path}: tensor '{name}' declares {length} bytes, shape implies {expected}"
            )
        if name in tensors:
            raise FormatError(f"{path}: duplicate tensor name '{name}'")
        if offset + length > len(blob):
            raise FormatError(f"{path}: tensor '{name}' payload is truncated")
        spans.append((offset, offset + length, name))
        data = np.frombuffer(blob, dtype="<f4", count=length // 4, offset=offset)
        tensors[name] = data.reshape(shape).astype(np.float32)

    spans.sort()
    for (s1, e1, n1), (s2, _, n2) in zip(spans, spans[1:]):
        if s2 < e1:
            raise FormatError(f"{path}: tensors '{n1}' and '{n2}' overlap")
    return tensors


# -- model snapshots ---------------------------------------------------------

_KIND_VAE = 1.0
_KIND_UNET = 2.0


def save_weights(model, path) -> None:
    """Snapshot a VaeModel or DenoiserModel into one container file."""
    from .denoiser import DenoiserModel
    from .nn import collect_state
    from .vae import VaeModel

    tensors = dict(collect_state(model.layers))
    if isinstance(model, VaeModel):
        tensors["meta/kind"] = np.array([_KIND_VAE], dtype=np.float32)
        tensors["meta/arch"] = np.array([model.f, model.c, model.base], dtype=np.float32)
        tensors["latent_shift"] = model.z_shift
        tensors["latent_scale"] = model.z_scale
    elif isinstance(model, DenoiserModel):
        tensors["meta/kind"] = np.array([_KIND_UNET], dtype=np.float32)
        tensors["meta/arch"] = np.array([model.c, model.base, model.tdim], dtype=np.float32)
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    save_tensors(tensors, path)


def load_weights(path):
    """Rebuild the saved model; raises FormatError / KeyError on bad containers."""
    from .denoiser import DenoiserModel
    from .nn import load_state
    from .vae import VaeModel

    tensors = load_tensors(path)
    for key in ("meta/kind", "meta/arch"):
        if key not in tensors:
            raise FormatError(f"{path}: missing tensor '{key}'")
    kind = float(tensors["meta/kind"][0])
    arch = tensors["meta/arch"]
    if kind == _KIND_VAE:
        model = VaeModel(f=int(arch[0]), c=int(arch[1]), base=int(arch[2]))
        load_state(model.layers, tensors)
        for key in ("latent_shift", "latent_scale"):
            if key not in tensors:
                raise FormatError(f"{path}: missing tensor '{key}'")
        model.z_shift = tensors["latent_shift"].copy()
        model.z_scale = tensors["latent_scale"].copy()
    elif kind == _KIND_UNET:
        model = DenoiserModel(c=int(arch[0]), base=int(arch[1]), tdim=int(arch[2]))
        load_state(model.layers, tensors)
    else:
        raise FormatError(f"{path}: unknown model kind {kind}")
    return model


# -- PNG tiles and manifests -------------------------------------------------


def load_image(path) -> np.ndarray:
    """One 8-bit RGB PNG as float (H, W, 3) in [0, 1] (value / 255)."""
    with PILImage.open(path) as im:
        if im.mode != "RGB":
            raise ValueError(f"{path}: expected RGB image, got mode {im.mode}")
        return np.asarray(im, dtype=np.float32) / 255.0


def save_image(path, img: np.ndarray) -> None:
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(np.asarray(arr, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    if arr.ndim == 2:
        PILImage.fromarray(arr, mode="L").save(path)
    else:
        PILImage.fromarray(arr, mode="RGB").save(path)


def load_mask(path) -> np.ndarray:
    with PILImage.open(path) as im:
        return np.asarray(im.convert("L")) > 127


def load_image_dir(path, strict: bool = False) -> np.ndarray:
    """All PNGs in a directory as one (N, H, W, 3) stack in [0, 1].

    Non-RGB files are skipped with a warning, or rejected when strict=True.
    Mixed sizes are always an error.
    """
    files = sorted(Path(path).glob("*.png"))
    images = []
    for f in files:
        with PILImage.open(f) as im:
            if im.mode != "RGB":
                if strict:
                    raise ValueError(f"{f}: expected RGB image, got mode {im.mode}")
                log.warning("skipping non-RGB file %s (mode %s)", f, im.mode)
                continue
            images.append(np.asarray(im, dtype=np.float32) / 255.0)
    if not images:
        raise ValueError(f"no usable RGB PNGs found in {path}")
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise ValueError(f"{path}: mixed image sizes {sorted(shapes)}")
    return np.stack(images)


def write_manifest(path, triples: list[tuple[str, str, str]]) -> None:
    """Line-oriented manifest: clean_path,artifact_path,mask_path per line."""
    with open(path, "w") as fh:
        for clean, artifact, mask in triples:
            fh.write(f"{clean},{artifact},{mask}\n")


def read_manifest(path) -> list[tuple[str, str, str]]:
    triples = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}: malformed manifest line {line!r}")
        triples.append((parts[0], parts[1], parts[2]))
    return triples
