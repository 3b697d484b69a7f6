"""Lossless PNG helpers used by the codec, the protocol and the CLI.

All images are numpy arrays: RGB images are uint8 H x W x 3, masks are
uint8 H x W with values {0, 255}, mattes are float H x W in [0, 1]
(stored as 8-bit grayscale), depth maps are uint16 H x W.
"""

import io

import numpy as np
from PIL import Image


def encode_rgb(rgb: np.ndarray) -> bytes:
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected uint8 HxWx3 array")
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_rgb(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def encode_gray(gray: np.ndarray) -> bytes:
    """Encode a uint8 or uint16 single-channel image losslessly."""
    if gray.ndim != 2:
        raise ValueError("expected HxW array")
    if gray.dtype not in (np.uint8, np.uint16):
        raise ValueError("expected uint8 or uint16 array")
    img = Image.fromarray(gray)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_gray(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    if img.mode in ("I;16", "I"):
        return np.asarray(img, dtype=np.uint16)
    return np.asarray(img.convert("L"), dtype=np.uint8)


def mask_to_u8(mask: np.ndarray) -> np.ndarray:
    """Binary bool/0-1 mask to a {0,255} uint8 image."""
    return np.where(np.asarray(mask) > 0, 255, 0).astype(np.uint8)


def u8_to_mask(gray: np.ndarray) -> np.ndarray:
    return (np.asarray(gray) > 127).astype(bool)


def alpha_to_u8(alpha: np.ndarray) -> np.ndarray:
    """Quantize a [0,1] matte to 8 bits, rounding half up."""
    a = np.clip(np.asarray(alpha, dtype=np.float64), 0.0, 1.0)
    return np.floor(a * 255.0 + 0.5).astype(np.uint8)


def u8_to_alpha(gray: np.ndarray) -> np.ndarray:
    return np.asarray(gray, dtype=np.float64) / 255.0


def read_png(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def write_png(path, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def resize_nearest(mask: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Resize a binary mask with nearest-neighbour sampling. size is (W, H)."""
    img = Image.fromarray(mask_to_u8(mask), mode="L")
    out = img.resize(size, Image.NEAREST)
    return u8_to_mask(np.asarray(out))


def resize_bilinear(gray: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Resize a [0,1] float map with bilinear sampling. size is (W, H)."""
    img = Image.fromarray(np.asarray(gray, dtype=np.float32), mode="F")
    out = img.resize(size, Image.BILINEAR)
    return np.asarray(out, dtype=np.float64)
