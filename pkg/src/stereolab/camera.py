"""Pinhole stereo camera model and disparity/depth/3D conversions.

Camera frame convention: x right, y down, z forward (matching image
coordinates). A rectified stereo rig places the right camera at +baseline
along x, so disparity d, depth z, focal length f_x and baseline b relate
by z = f_x * b / d.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .maps import DepthMap, DisparityMap

# Disparities at or below this are treated as invalid (depth would be
# effectively unbounded); applied by map-level conversions.
EPSILON_DISPARITY = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        for name in ("fx", "fy", "cx", "cy"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"intrinsic {name} must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")


@dataclass(frozen=True)
class StereoRig:
    """A rectified stereo pair: shared intrinsics plus baseline in meters."""

    intrinsics: CameraIntrinsics
    baseline: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.baseline) and self.baseline > 0):
            raise ValueError(f"baseline must be positive and finite, got {self.baseline}")


@dataclass(frozen=True)
class Pixel:
    """Image location (u=column, v=row), sub-pixel values permitted."""

    u: float
    v: float


@dataclass(frozen=True)
class Point3D:
    """3D point in the camera frame, meters."""

    x: float
    y: float
    z: float


def disparity_to_depth(d: float, rig: StereoRig) -> float:
    """Depth in meters for a disparity of d pixels: f_x * b / d."""
    if not (math.isfinite(d) and d > 0):
        raise ValueError(f"disparity must be positive and finite, got {d}")
    return rig.intrinsics.fx * rig.baseline / d


def depth_to_disparity(z: float, rig: StereoRig) -> float:
    """Disparity in pixels at depth z meters: f_x * b / z."""
    if not (math.isfinite(z) and z > 0):
        raise ValueError(f"depth must be positive and finite, got {z}")
    return rig.intrinsics.fx * rig.baseline / z


def backproject(p: Pixel, z: float, k: CameraIntrinsics) -> Point3D:
    """Lift a pixel at depth z to a 3D camera-frame point."""
    if not (math.isfinite(z) and z > 0):
        raise ValueError(f"depth must be positive and finite, got {z}")
    return Point3D(
        x=(p.u - k.cx) * z / k.fx,
        y=(p.v - k.cy) * z / k.fy,
        z=z,
    )


def project(pt: Point3D, k: CameraIntrinsics) -> Pixel:
    """Project a camera-frame point to its pixel location."""
    if not (math.isfinite(pt.z) and pt.z > 0):
        raise ValueError(f"point must lie in front of the camera, got z={pt.z}")
    return Pixel(
        u=k.fx * pt.x / pt.z + k.cx,
        v=k.fy * pt.y / pt.z + k.cy,
    )


def disparity_map_to_depth_map(dm: DisparityMap, rig: StereoRig) -> DepthMap:
    """Per-pixel disparity-to-depth conversion.

    Pixels with disparity <= EPSILON_DISPARITY become invalid rather than
    producing huge depths; no pixel-level errors are raised.
    """
    d = dm.values.astype(np.float64)
    mask = dm.mask & (d > EPSILON_DISPARITY)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = rig.intrinsics.fx * rig.baseline / d
    values = np.where(mask, z, np.nan).astype(np.float32)
    return DepthMap(values, mask)


def depth_map_to_disparity_map(dm: DepthMap, rig: StereoRig) -> DisparityMap:
    """Per-pixel depth-to-disparity conversion; non-positive depths become invalid."""
    z = dm.values.astype(np.float64)
    mask = dm.mask & (z > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = rig.intrinsics.fx * rig.baseline / z
    values = np.where(mask, d, np.nan).astype(np.float32)
    return DisparityMap(values, mask)


def backproject_depth_map(dm: DepthMap, k: CameraIntrinsics) -> np.ndarray:
    """Backproject every pixel of a depth map.

    Returns an (H, W, 3) float64 array of camera-frame coordinates; invalid
    pixels are NaN. Pixel (v, u) is lifted through image location (u, v).
    """
    h, w = dm.values.shape
    z = np.where(dm.mask, dm.values.astype(np.float64), np.nan)
    u = np.arange(w, dtype=np.float64)[None, :]
    v = np.arange(h, dtype=np.float64)[:, None]
    out = np.empty((h, w, 3), dtype=np.float64)
    out[:, :, 0] = (u - k.cx) * z / k.fx
    out[:, :, 1] = (v - k.cy) * z / k.fy
    out[:, :, 2] = z
    return out


def rig_from_dict(doc: dict) -> StereoRig:
    """Build a StereoRig from a JSON document {"fx","fy","cx","cy","baseline"}."""
    required = ("fx", "fy", "cx", "cy", "baseline")
    missing = [key for key in required if key not in doc]
    if missing:
        raise ValueError(f"rig document missing required keys: {', '.join(missing)}")
    numbers = {}
    for key in required:
        value = doc[key]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValueError(f"rig key {key!r} must be a number, got {value!r}")
        numbers[key] = float(value)
    intrinsics = CameraIntrinsics(numbers["fx"], numbers["fy"], numbers["cx"], numbers["cy"])
    return StereoRig(intrinsics, numbers["baseline"])


def rig_to_dict(rig: StereoRig) -> dict:
    k = rig.intrinsics
    return {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy, "baseline": rig.baseline}


def load_rig(path: str | os.PathLike) -> StereoRig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid rig JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"rig JSON in {path} must be an object")
    return rig_from_dict(doc)


def save_rig(rig: StereoRig, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rig_to_dict(rig), fh, indent=2, sort_keys=True)
        fh.write("\n")
