"""Bit-exact readers and writers for the toolkit's on-disk formats.

PFM is the float interchange format for disparity, depth and normal maps;
invalid pixels are stored as NaN (never 0, which would collide with small
legitimate values). 16-bit PNG provides an interoperable, quantized
normal encoding. 8-bit PNG carries the rendered RGB views.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import cv2
import numpy as np

from .maps import DepthMap, DisparityMap, NormalMap


@dataclass(frozen=True, eq=False)
class PfmImage:
    """Decoded PFM payload with top-to-bottom rows in memory.

    The scale's sign encodes endianness on disk (negative = little); its
    magnitude is kept verbatim.
    """

    values: np.ndarray  # (H, W) or (H, W, 3) float32
    scale: float = -1.0

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim == 3 and values.shape[2] != 3:
            raise ValueError(f"3-D PFM data must have 3 channels, got {values.shape}")
        if values.ndim not in (2, 3):
            raise ValueError(f"PFM data must be (H, W) or (H, W, 3), got {values.shape}")
        scale = float(self.scale)
        if scale == 0 or not np.isfinite(scale):
            raise ValueError(f"PFM scale must be nonzero and finite, got {self.scale}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "scale", scale)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.values.ndim == 2 else 3


class PfmParseError(ValueError):
    """Malformed PFM input; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


_MAX_DIM = 1 << 20

_TOKEN = re.compile(rb"\S+")


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    match = _TOKEN.search(data, pos)
    if match is None:
        raise PfmParseError("unexpected end of PFM header", len(data))
    return match.group(0), match.end()


def read_pfm(data: bytes) -> PfmImage:
    """Decode PFM bytes ('Pf' grayscale or 'PF' color) to top-to-bottom rows."""
    magic, pos = _next_token(data, 0)
    if magic == b"PF":
        channels = 3
    elif magic == b"Pf":
        channels = 1
    else:
        raise PfmParseError(f"bad PFM magic {magic!r}", 0)
    width_tok, pos = _next_token(data, pos)
    height_tok, pos = _next_token(data, pos)
    try:
        width, height = int(width_tok), int(height_tok)
    except ValueError:
        raise PfmParseError(
            f"invalid PFM dimensions {width_tok!r} x {height_tok!r}", pos) from None
    if not (0 < width <= _MAX_DIM and 0 < height <= _MAX_DIM):
        raise PfmParseError(f"PFM dimensions out of range: {width} x {height}", pos)
    scale_tok, pos = _next_token(data, pos)
    try:
        scale = float(scale_tok)
    except ValueError:
        raise PfmParseError(f"invalid PFM scale {scale_tok!r}", pos) from None
    if scale == 0:
        raise PfmParseError("PFM scale must be nonzero", pos)
    if pos >= len(data):
        raise PfmParseError("missing PFM payload", len(data))
    payload_start = pos + 1  # exactly one whitespace byte terminates the header
    expected = width * height * channels * 4
    payload = data[payload_start:payload_start + expected]
    if len(payload) < expected:
        raise PfmParseError(
            f"short PFM payload: expected {expected} bytes, got {len(payload)}",
            payload_start + len(payload))
    dtype = "<f4" if scale < 0 else ">f4"
    flat = np.frombuffer(payload, dtype=dtype)
    if channels == 1:
        rows = flat.reshape(height, width)
    else:
        rows = flat.reshape(height, width, 3)
    values = np.flipud(rows).astype(np.float32)  # PFM rows run bottom-to-top
    return PfmImage(values, scale=scale)


def write_pfm(img: PfmImage) -> bytes:
    """Encode to little-endian PFM (scale written with a negative sign)."""
    scale = -abs(img.scale)
    magic = b"PF" if img.channels == 3 else b"Pf"
    header = magic + b"\n" + f"{img.width} {img.height}\n{scale!r}\n".encode("ascii")
    payload = np.flipud(img.values).astype("<f4").tobytes()
    return header + payload


def read_pfm_file(path: str | os.PathLike) -> PfmImage:
    with open(path, "rb") as fh:
        return read_pfm(fh.read())


def write_pfm_file(img: PfmImage, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(write_pfm(img))


def disparity_to_pfm(dm: DisparityMap) -> PfmImage:
    """Invalid pixels become NaN on disk."""
    return PfmImage(np.where(dm.mask, dm.values, np.float32(np.nan)))


def disparity_from_pfm(img: PfmImage) -> DisparityMap:
    if img.channels != 1:
        raise ValueError("disparity PFM must be single channel")
    return DisparityMap(img.values)


def depth_to_pfm(dm: DepthMap) -> PfmImage:
    return PfmImage(np.where(dm.mask, dm.values, np.float32(np.nan)))


def depth_from_pfm(img: PfmImage) -> DepthMap:
    if img.channels != 1:
        raise ValueError("depth PFM must be single channel")
    return DepthMap(img.values)


def normal_to_pfm(nm: NormalMap) -> PfmImage:
    return PfmImage(np.where(nm.mask[:, :, None], nm.values, np.float32(np.nan)))


def normal_from_pfm(img: PfmImage) -> NormalMap:
    if img.channels != 3:
        raise ValueError("normal PFM must have 3 channels")
    return NormalMap(img.values)


def read_png_rgb8(path: str | os.PathLike) -> np.ndarray:
    """Read an 8-bit RGB PNG; rejects other bit depths and channel layouts."""
    with open(path, "rb") as fh:
        data = fh.read()
    decoded = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if decoded is None:
        raise ValueError(f"could not decode PNG data in {path}")
    if decoded.dtype != np.uint8 or decoded.ndim != 3 or decoded.shape[2] != 3:
        raise ValueError(
            f"{path}: expected 8-bit RGB PNG, got dtype {decoded.dtype} "
            f"shape {decoded.shape}")
    return np.ascontiguousarray(decoded[:, :, ::-1])  # BGR -> RGB


def write_png_rgb8(img: np.ndarray, path: str | os.PathLike) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected a uint8 (H, W, 3) image, got {img.dtype} {img.shape}")
    ok, data = cv2.imencode(".png", np.ascontiguousarray(img[:, :, ::-1]))
    if not ok:
        raise ValueError("PNG encoding failed")
    with open(path, "wb") as fh:
        fh.write(data.tobytes())


def encode_normal_png16(nm: NormalMap) -> np.ndarray:
    """Quantize a normal map to uint16 channels: round((n + 1) / 2 * 65535).

    Invalid pixels become (0, 0, 0), which no unit vector can produce.
    """
    n = np.clip((nm.values.astype(np.float64) + 1.0) / 2.0, 0.0, 1.0)
    n = np.where(nm.mask[:, :, None], n, 0.0)  # invalid pixels encode as (0, 0, 0)
    return np.rint(n * 65535.0).astype(np.uint16)


def decode_normal_png16(enc: np.ndarray) -> NormalMap:
    """Dequantize n = value / 65535 * 2 - 1 and renormalize to unit length."""
    enc = np.asarray(enc)
    if enc.dtype != np.uint16 or enc.ndim != 3 or enc.shape[2] != 3:
        raise ValueError(
            f"expected a uint16 (H, W, 3) array, got {enc.dtype} {enc.shape}")
    mask = (enc != 0).any(axis=2)
    n = enc.astype(np.float64) / 65535.0 * 2.0 - 1.0
    norm = np.sqrt((n * n).sum(axis=2))
    mask = mask & (norm > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = n / norm[:, :, None]
    values = np.where(mask[:, :, None], unit, np.nan).astype(np.float32)
    return NormalMap(values, mask)


def write_normal_png16(nm: NormalMap, path: str | os.PathLike) -> None:
    enc = encode_normal_png16(nm)
    ok, data = cv2.imencode(".png", np.ascontiguousarray(enc[:, :, ::-1]))
    if not ok:
        raise ValueError("PNG encoding failed")
    with open(path, "wb") as fh:
        fh.write(data.tobytes())


def read_normal_png16(path: str | os.PathLike) -> NormalMap:
    with open(path, "rb") as fh:
        data = fh.read()
    decoded = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if decoded is None:
        raise ValueError(f"could not decode PNG data in {path}")
    if decoded.dtype != np.uint16 or decoded.ndim != 3 or decoded.shape[2] != 3:
        raise ValueError(
            f"{path}: expected 16-bit RGB PNG, got dtype {decoded.dtype} "
            f"shape {decoded.shape}")
    return decode_normal_png16(np.ascontiguousarray(decoded[:, :, ::-1]))
