"""Disparity-to-normal transform and the (alpha, beta) angle encoding.

Per-pixel surface normals are estimated from a disparity map by
backprojecting each pixel and its axis-aligned neighbors to 3D, forming
tangent-plane slope estimates (z_j - z_i) / (x_j - x_i) from horizontal
neighbors and (z_j - z_i) / (y_j - y_i) from vertical ones, averaging the
available estimates, and normalizing the raw vector (s_x, s_y, -1).

The angle encoding maps a unit normal to alpha = atan2(n_y, n_x) in
[0, 360) and beta = atan2(n_z, sqrt(n_x^2 + n_y^2)) in degrees; camera
visible surfaces have beta in [-90, 0].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import StereoRig, backproject_depth_map, disparity_map_to_depth_map
from .maps import DisparityMap, NormalMap


@dataclass(frozen=True)
class D2NConfig:
    """Neighborhood and guard settings for the disparity-to-normal transform.

    At least one horizontal (left/right) and one vertical (up/down)
    neighbor must be enabled. slope_epsilon is the minimum 3D coordinate
    difference, in meters, below which a neighbor estimate is dropped
    (not zeroed) to guard the slope division.
    """

    use_left: bool = True
    use_right: bool = True
    use_up: bool = True
    use_down: bool = True
    slope_epsilon: float = 1e-9
    aggregation: str = "mean"

    def __post_init__(self) -> None:
        if not (self.use_left or self.use_right):
            raise ValueError("at least one horizontal neighbor must be enabled")
        if not (self.use_up or self.use_down):
            raise ValueError("at least one vertical neighbor must be enabled")
        if not (math.isfinite(self.slope_epsilon) and self.slope_epsilon > 0):
            raise ValueError(f"slope_epsilon must be positive, got {self.slope_epsilon}")
        if self.aggregation != "mean":
            raise ValueError(f"unsupported aggregation {self.aggregation!r}")


def d2n_transform(dm: DisparityMap, rig: StereoRig,
                  cfg: D2NConfig = D2NConfig()) -> NormalMap:
    """Estimate unit surface normals from a disparity map.

    A pixel gets a normal only if it is valid after depth conversion and
    has at least one usable horizontal and one usable vertical neighbor
    estimate; border pixels fall back to their single available side.
    All other pixels are masked.
    """
    depth = disparity_map_to_depth_map(dm, rig)
    pos = backproject_depth_map(depth, rig.intrinsics)
    x, y, z = pos[:, :, 0], pos[:, :, 1], pos[:, :, 2]
    valid = depth.mask
    h, w = valid.shape

    sx_sum = np.zeros((h, w), dtype=np.float64)
    sx_count = np.zeros((h, w), dtype=np.int64)
    sy_sum = np.zeros((h, w), dtype=np.float64)
    sy_count = np.zeros((h, w), dtype=np.int64)

    # The pair quotient (z_j - z_i) / (x_j - x_i) is symmetric in i and j,
    # so one difference array per axis serves both neighbor directions.
    if w > 1:
        dz = z[:, 1:] - z[:, :-1]
        dx = x[:, 1:] - x[:, :-1]
        ok = valid[:, 1:] & valid[:, :-1] & (np.abs(dx) >= cfg.slope_epsilon)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(ok, dz / np.where(ok, dx, 1.0), 0.0)
        if cfg.use_right:
            sx_sum[:, :-1] += s
            sx_count[:, :-1] += ok
        if cfg.use_left:
            sx_sum[:, 1:] += s
            sx_count[:, 1:] += ok
    if h > 1:
        dz = z[1:, :] - z[:-1, :]
        dy = y[1:, :] - y[:-1, :]
        ok = valid[1:, :] & valid[:-1, :] & (np.abs(dy) >= cfg.slope_epsilon)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(ok, dz / np.where(ok, dy, 1.0), 0.0)
        if cfg.use_down:
            sy_sum[:-1, :] += s
            sy_count[:-1, :] += ok
        if cfg.use_up:
            sy_sum[1:, :] += s
            sy_count[1:, :] += ok

    out_mask = valid & (sx_count > 0) & (sy_count > 0)
    sx = sx_sum / np.maximum(sx_count, 1)
    sy = sy_sum / np.maximum(sy_count, 1)
    norm = np.sqrt(sx * sx + sy * sy + 1.0)

    values = np.empty((h, w, 3), dtype=np.float32)
    values[:, :, 0] = np.where(out_mask, sx / norm, np.nan)
    values[:, :, 1] = np.where(out_mask, sy / norm, np.nan)
    values[:, :, 2] = np.where(out_mask, -1.0 / norm, np.nan)
    return NormalMap(values, out_mask)


@dataclass(frozen=True)
class NormalAngles:
    """Angle encoding of a camera-frame normal, degrees."""

    alpha_deg: float
    beta_deg: float


def normal_to_angles(n) -> NormalAngles:
    """Encode a unit normal as (alpha, beta) degrees.

    alpha = atan2(n_y, n_x) wrapped to [0, 360); beta = atan2(n_z,
    sqrt(n_x^2 + n_y^2)). At the beta = -90 pole the encoding is
    degenerate and alpha is 0 by convention (atan2(0, 0) == 0).
    """
    nx, ny, nz = (float(c) for c in n)
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"normal must be unit length, got |n| = {norm}")
    # Dividing by pi before scaling keeps the cardinal directions exact.
    alpha = math.atan2(ny, nx) / math.pi * 180.0
    if alpha < 0.0:
        alpha += 360.0
    if alpha >= 360.0:  # -tiny + 360 can round up to exactly 360
        alpha -= 360.0
    beta = math.atan2(nz, math.hypot(nx, ny)) / math.pi * 180.0
    return NormalAngles(alpha_deg=alpha + 0.0, beta_deg=beta)


def angles_to_normal(a: NormalAngles) -> np.ndarray:
    """Decode (alpha, beta) degrees back to a unit normal vector."""
    if not (0.0 <= a.alpha_deg < 360.0):
        raise ValueError(f"alpha must be in [0, 360), got {a.alpha_deg}")
    if not (-90.0 <= a.beta_deg <= 0.0):
        raise ValueError(f"beta must be in [-90, 0], got {a.beta_deg}")
    alpha = math.radians(a.alpha_deg)
    beta = math.radians(a.beta_deg)
    cb = math.cos(beta)
    return np.array([cb * math.cos(alpha), cb * math.sin(alpha), math.sin(beta)])


def normal_map_angles(nm: NormalMap) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized angle encoding of a normal map.

    Returns (alpha_deg, beta_deg) float64 arrays; invalid pixels are NaN.
    """
    v = nm.values.astype(np.float64)
    nx, ny, nz = v[:, :, 0], v[:, :, 1], v[:, :, 2]
    alpha = np.arctan2(ny, nx) / np.pi * 180.0
    alpha = np.where(alpha < 0.0, alpha + 360.0, alpha)
    alpha = np.where(alpha >= 360.0, alpha - 360.0, alpha)
    beta = np.arctan2(nz, np.hypot(nx, ny)) / np.pi * 180.0
    alpha = np.where(nm.mask, alpha, np.nan)
    beta = np.where(nm.mask, beta, np.nan)
    return alpha, beta


def normalize_normals(nm: NormalMap) -> NormalMap:
    """Rescale every valid pixel to unit length; zero vectors become masked."""
    v = nm.values.astype(np.float64)
    norm = np.sqrt((v * v).sum(axis=2))
    mask = nm.mask & (norm > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = v / norm[:, :, None]
    values = np.where(mask[:, :, None], unit, np.nan).astype(np.float32)
    return NormalMap(values, mask)
