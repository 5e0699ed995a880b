"""Image file I/O: 8-bit RGB PNG via Pillow, binary PPM (P6) as a fallback.

Both writers embed experiment metadata (config hash, seed) so every image
artifact records its provenance: PNG uses tEXt chunks, PPM uses header
comment lines.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .validation import check_array


def _to_bytes(image: np.ndarray) -> np.ndarray:
    img = check_array(image, "image", ndim=3)
    if img.shape[-1] != 3:
        raise ValueError("image must have 3 channels")
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def write_image(path, image: np.ndarray, metadata: dict | None = None) -> None:
    """Write a float image in [0, 1] as PNG or PPM depending on the suffix."""
    path = Path(path)
    data = _to_bytes(image)
    if path.suffix.lower() == ".png":
        info = PngInfo()
        for key, value in (metadata or {}).items():
            info.add_text(str(key), str(value))
        Image.fromarray(data, mode="RGB").save(path, pnginfo=info)
    elif path.suffix.lower() == ".ppm":
        comments = "".join(f"#{k}={v}\n" for k, v in (metadata or {}).items())
        with open(path, "wb") as fh:
            fh.write(b"P6\n")
            fh.write(comments.encode("ascii"))
            fh.write(f"{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii"))
            fh.write(data.tobytes())
    else:
        raise ValueError(f"unsupported image suffix {path.suffix!r} "
                         "(use .png or .ppm)")


def read_image(path) -> tuple[np.ndarray, dict]:
    """Read PNG or PPM into a float image in [0, 1] plus its metadata."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        with Image.open(path) as img:
            meta = dict(getattr(img, "text", {}) or {})
            data = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        return data, meta
    if path.suffix.lower() == ".ppm":
        return _read_ppm(path)
    raise ValueError(f"unsupported image suffix {path.suffix!r}")


def _read_ppm(path: Path) -> tuple[np.ndarray, dict]:
    raw = path.read_bytes()
    meta: dict = {}
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        if raw[pos:pos + 1] == b"#":
            end = raw.index(b"\n", pos)
            comment = raw[pos + 1:end].decode("ascii", "replace")
            if "=" in comment:
                key, value = comment.split("=", 1)
                meta[key.strip()] = value.strip()
            pos = end + 1
            continue
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        if end > pos:
            fields.append(raw[pos:end])
        pos = end + 1
    magic, width, height, maxval = fields
    if magic != b"P6" or maxval != b"255":
        raise ValueError(f"{path} is not an 8-bit binary PPM")
    w, h = int(width), int(height)
    pixels = np.frombuffer(raw[pos:pos + w * h * 3], dtype=np.uint8)
    if pixels.size != w * h * 3:
        raise ValueError(f"{path} is truncated")
    return pixels.reshape(h, w, 3).astype(np.float64) / 255.0, meta


def box_downsample(image: np.ndarray, max_side: int) -> np.ndarray:
    """Average-pool by the smallest integer factor that fits within max_side.

    Trailing rows/columns that do not fill a complete box are dropped.
    """
    img = check_array(image, "image", ndim=3)
    factor = -(-max(img.shape[0], img.shape[1]) // max_side)  # ceil division
    if factor <= 1:
        return img.copy()
    h = (img.shape[0] // factor) * factor
    w = (img.shape[1] // factor) * factor
    if h == 0 or w == 0:
        raise ValueError("image too small for the downsampling factor")
    cropped = img[:h, :w]
    return cropped.reshape(h // factor, factor, w // factor, factor, 3).mean(axis=(1, 3))
