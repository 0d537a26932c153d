"""Grayscale image helpers: PGM and WSNMF64 I/O, noise, PSNR.

Images are float64 arrays of shape ``(height, width)`` in pixel units
(nominally [0, 255]; intermediates may leave that range).
"""

import math
import os
import struct

import numpy as np

from .exceptions import DimensionError, DomainError, WsnmError
from .rng import SplitMix64

F64_MAGIC = b"WSNMF64\0"
F64_HEADER = struct.Struct("<8sII")


class ImageFormatError(WsnmError, ValueError):
    """A file is not valid PGM / WSNMF64."""


def as_image(img):
    img = np.asarray(img, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise DimensionError(f"image must be a non-empty 2-D array, got shape {img.shape}")
    return img


def clamp(img):
    return np.clip(img, 0.0, 255.0)


def psnr(a, b, peak=255.0):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def add_gaussian_noise(img, sigma, seed=0):
    """Add i.i.d. N(0, sigma^2) noise from a seeded SplitMix64 stream.

    The result is not clamped.
    """
    img = as_image(img)
    if sigma < 0:
        raise DomainError(f"sigma must be non-negative, got {sigma!r}")
    if sigma == 0:
        return img.copy()
    noise = SplitMix64(seed).normal(img.size).reshape(img.shape)
    return img + sigma * noise


# -- PGM (binary P5, 8-bit) ---------------------------------------------------

def _pgm_tokens(data, count):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path):
    """Read a binary (P5) PGM with maxval <= 255 as a float array."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise ImageFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PGM header") from exc
    if not 0 < maxval <= 255:
        raise ImageFormatError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=offset)
    return raw.reshape(height, width).astype(float)


def write_pgm(path, img):
    """Write ``img`` as 8-bit P5 PGM after rounding and clamping to [0, 255]."""
    img = as_image(img)
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(pixels.tobytes())


# -- WSNMF64 raw float dump ------------------------------------------------------

def write_f64(path, array):
    """Write a 2-D array as WSNMF64: 16-byte header then little-endian rows."""
    array = as_image(array)
    height, width = array.shape
    with open(path, "wb") as fh:
        fh.write(F64_HEADER.pack(F64_MAGIC, width, height))
        fh.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def read_f64(path):
    with open(path, "rb") as fh:
        header = fh.read(F64_HEADER.size)
        if len(header) != F64_HEADER.size:
            raise ImageFormatError(f"{path}: truncated WSNMF64 header")
        magic, width, height = F64_HEADER.unpack(header)
        if magic != F64_MAGIC:
            raise ImageFormatError(f"{path}: bad WSNMF64 magic {magic!r}")
        body = fh.read()
    if len(body) != 8 * width * height:
        raise ImageFormatError(f"{path}: expected {8 * width * height} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(height, width).astype(float)


def read_image(path):
    """PGM or WSNMF64, chosen by file content."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == F64_MAGIC:
        return read_f64(path)
    return read_pgm(path)


def read_frames(directory):
    """All ``*.pgm`` files in ``directory`` sorted by name."""
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(".pgm"))
    if not names:
        raise ImageFormatError(f"{directory}: no .pgm frames found")
    return names, [read_pgm(os.path.join(directory, n)) for n in names]
