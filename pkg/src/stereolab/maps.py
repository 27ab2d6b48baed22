"""Dense per-pixel map types: disparity, depth and surface-normal maps.

All maps store values as float32 with an explicit boolean validity mask.
Maps are immutable after construction (arrays are marked read-only), so
they can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _check_2d(values: np.ndarray, name: str) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValueError(f"{name} values must be a 2-D array, got shape {values.shape}")
    if values.shape[0] < 1 or values.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {values.shape}")
    return values


def _resolve_mask(values: np.ndarray, mask: np.ndarray | None,
                  inferred: np.ndarray) -> np.ndarray:
    if mask is None:
        out = inferred
    else:
        out = np.ascontiguousarray(mask, dtype=bool)
        if out.shape != values.shape[:2]:
            raise ValueError(
                f"mask shape {out.shape} does not match values shape {values.shape[:2]}")
        # An explicit mask is trusted, but non-finite values are never valid.
        finite = np.isfinite(values) if values.ndim == 2 else np.isfinite(values).all(axis=2)
        out = out & finite
    return np.ascontiguousarray(out)


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Per-pixel horizontal disparity in pixels.

    Without an explicit mask, only finite, strictly positive disparities are
    valid. An explicit mask may additionally declare zero-disparity pixels
    valid (used for matched-baseline photometric fixtures); geometric
    conversions re-guard against near-zero disparities regardless.
    """

    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = _check_2d(self.values, "disparity")
        inferred = np.isfinite(values) & (values > 0)
        mask = _resolve_mask(values, self.mask, inferred)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel depth along the optical axis, meters. Valid depths are finite and > 0."""

    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = _check_2d(self.values, "depth")
        inferred = np.isfinite(values) & (values > 0)
        mask = _resolve_mask(values, self.mask, inferred)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class NormalMap:
    """Per-pixel surface normal (n_x, n_y, n_z), camera frame.

    Valid pixels hold unit vectors with n_z <= 0 for camera-visible
    surfaces. Construction does not renormalize; use
    :func:`stereolab.d2n.normalize_normals` for raw vectors.
    """

    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 3 or values.shape[2] != 3:
            raise ValueError(f"normal values must have shape (H, W, 3), got {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"normal map must have positive dimensions, got {values.shape}")
        finite = np.isfinite(values).all(axis=2)
        nonzero = (values != 0).any(axis=2)
        mask = _resolve_mask(values, self.mask, finite & nonzero)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())


def erode_mask(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Binary erosion with a 3x3 square element, applied ``iterations`` times.

    Pixels beyond the image border count as invalid, so each pass also
    strips the outermost ring of the image.
    """
    out = np.asarray(mask, dtype=bool)
    for _ in range(iterations):
        padded = np.zeros((out.shape[0] + 2, out.shape[1] + 2), dtype=bool)
        padded[1:-1, 1:-1] = out
        eroded = padded[1:-1, 1:-1].copy()
        for dv in (-1, 0, 1):
            for du in (-1, 0, 1):
                eroded &= padded[1 + dv:padded.shape[0] - 1 + dv,
                                 1 + du:padded.shape[1] - 1 + du]
        out = eroded
    return out
