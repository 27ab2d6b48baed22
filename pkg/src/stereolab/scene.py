"""Analytic ray-cast renderer for stereo ground-truth fixtures.

Scenes are declarative collections of planes, spheres and axis-aligned
boxes. Rays are cast with unnormalized directions ((u-cx)/fx, (v-cy)/fy, 1)
so the ray parameter equals depth; the right view shares the left camera
frame with its origin shifted by +baseline along x. Shading is flat
Lambertian with a single headlight at the left camera center, so matched
pixels in the two views receive identical radiance; rendering is
deterministic (no sampling).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .camera import Pixel, StereoRig
from .maps import DepthMap, DisparityMap, NormalMap

# Hits closer than this are ignored (self-intersection / behind-camera guard).
T_MIN = 1e-9


def _vec3(value, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64).reshape(-1)
    if v.size != 3 or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be three finite numbers, got {value!r}")
    v.setflags(write=False)
    return v


def _albedo(value) -> np.ndarray:
    a = _vec3(value, "albedo")
    if np.any(a < 0) or np.any(a > 1):
        raise ValueError(f"albedo channels must lie in [0, 1], got {value!r}")
    return a


@dataclass(frozen=True, eq=False)
class Plane:
    """Infinite plane through `point` with the given (normalized) normal."""

    point: np.ndarray
    normal: np.ndarray
    albedo: np.ndarray = field(default_factory=lambda: np.full(3, 0.8))

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", _vec3(self.point, "plane point"))
        n = _vec3(self.normal, "plane normal").copy()
        norm = float(np.linalg.norm(n))
        if norm == 0:
            raise ValueError("plane normal must be nonzero")
        n = n / norm
        n.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "albedo", _albedo(self.albedo))


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float
    albedo: np.ndarray = field(default_factory=lambda: np.full(3, 0.8))

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vec3(self.center, "sphere center"))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"sphere radius must be positive, got {self.radius}")
        object.__setattr__(self, "albedo", _albedo(self.albedo))


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box; min_corner < max_corner componentwise."""

    min_corner: np.ndarray
    max_corner: np.ndarray
    albedo: np.ndarray = field(default_factory=lambda: np.full(3, 0.8))

    def __post_init__(self) -> None:
        mn = _vec3(self.min_corner, "box min")
        mx = _vec3(self.max_corner, "box max")
        if not np.all(mn < mx):
            raise ValueError(f"box min must be strictly below max, got {mn} / {mx}")
        object.__setattr__(self, "min_corner", mn)
        object.__setattr__(self, "max_corner", mx)
        object.__setattr__(self, "albedo", _albedo(self.albedo))


Primitive = Plane | Sphere | Box


@dataclass(frozen=True, eq=False)
class SceneSpec:
    """Primitives plus an optional global shading gain (for overexposure fixtures)."""

    primitives: tuple[Primitive, ...]
    gain: float = 1.0

    def __post_init__(self) -> None:
        primitives = tuple(self.primitives)
        for p in primitives:
            if not isinstance(p, (Plane, Sphere, Box)):
                raise ValueError(f"unsupported primitive {type(p).__name__}")
        if not (math.isfinite(self.gain) and self.gain > 0):
            raise ValueError(f"gain must be positive, got {self.gain}")
        object.__setattr__(self, "primitives", primitives)


def _plane_hit(p: Plane, origin: np.ndarray, dirs: np.ndarray):
    denom = dirs @ p.normal
    offset = float((p.point - origin) @ p.normal)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = offset / denom
    hit = (np.abs(denom) > 1e-12) & (t > T_MIN)
    return np.where(hit, t, np.inf), np.broadcast_to(p.normal, dirs.shape)


def _sphere_hit(s: Sphere, origin: np.ndarray, dirs: np.ndarray):
    oc = origin - s.center
    a = (dirs * dirs).sum(axis=2)
    b = 2.0 * (dirs @ oc)
    c = float(oc @ oc) - s.radius * s.radius
    disc = b * b - 4.0 * a * c
    sqrt_disc = np.sqrt(np.maximum(disc, 0.0))
    t_near = (-b - sqrt_disc) / (2.0 * a)
    t_far = (-b + sqrt_disc) / (2.0 * a)
    t = np.where(t_near > T_MIN, t_near, t_far)
    hit = (disc >= 0.0) & (t > T_MIN)
    t = np.where(hit, t, np.inf)
    points = origin + dirs * np.where(hit, t, 0.0)[:, :, None]
    normals = (points - s.center) / s.radius
    return t, normals


def _box_hit(box: Box, origin: np.ndarray, dirs: np.ndarray):
    h, w = dirs.shape[:2]
    slab_min = np.empty((h, w, 3))
    slab_max = np.empty((h, w, 3))
    for axis in range(3):
        d = dirs[:, :, axis]
        o = origin[axis]
        mn, mx = box.min_corner[axis], box.max_corner[axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (mn - o) / d
            t2 = (mx - o) / d
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        # Rays parallel to the slab either stay inside it forever or miss it.
        inside = (o >= mn) & (o <= mx)
        parallel = d == 0.0
        lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
        slab_min[:, :, axis] = lo
        slab_max[:, :, axis] = hi
    t_near = slab_min.max(axis=2)
    t_far = slab_max.min(axis=2)
    entering = t_near > T_MIN
    t = np.where(entering, t_near, t_far)
    hit = (t_near <= t_far) & (t > T_MIN) & np.isfinite(t)
    t = np.where(hit, t, np.inf)
    # Face axis: the slab that bounds the chosen intersection parameter.
    entry_axis = slab_min.argmax(axis=2)
    exit_axis = slab_max.argmin(axis=2)
    axis = np.where(entering, entry_axis, exit_axis)
    dir_along = np.take_along_axis(dirs, axis[:, :, None], axis=2)[:, :, 0]
    sign = np.where(entering, -np.sign(dir_along), np.sign(dir_along))
    sign = np.where(sign == 0.0, 1.0, sign)
    normals = np.zeros((h, w, 3))
    np.put_along_axis(normals, axis[:, :, None], sign[:, :, None], axis=2)
    return t, normals


def _cast(scene: SceneSpec, origin: np.ndarray, dirs: np.ndarray):
    """Nearest-hit ray cast. Returns (t, primitive ids, camera-facing normals).

    t is +inf and ids are -1 where no primitive is hit.
    """
    h, w = dirs.shape[:2]
    best_t = np.full((h, w), np.inf)
    best_id = np.full((h, w), -1, dtype=np.int32)
    best_n = np.zeros((h, w, 3))
    for index, prim in enumerate(scene.primitives):
        if isinstance(prim, Plane):
            t, n = _plane_hit(prim, origin, dirs)
        elif isinstance(prim, Sphere):
            t, n = _sphere_hit(prim, origin, dirs)
        else:
            t, n = _box_hit(prim, origin, dirs)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_id = np.where(closer, np.int32(index), best_id)
        best_n = np.where(closer[:, :, None], n, best_n)
    # Orient normals toward the camera: n . ray <= 0.
    facing_away = (best_n * dirs).sum(axis=2) > 0.0
    best_n = np.where(facing_away[:, :, None], -best_n, best_n)
    return best_t, best_id, best_n


def _pixel_dirs(rig: StereoRig, width: int, height: int) -> np.ndarray:
    k = rig.intrinsics
    u = np.arange(width, dtype=np.float64)[None, :]
    v = np.arange(height, dtype=np.float64)[:, None]
    dirs = np.empty((height, width, 3))
    dirs[:, :, 0] = (u - k.cx) / k.fx
    dirs[:, :, 1] = (v - k.cy) / k.fy
    dirs[:, :, 2] = 1.0
    return dirs


def _shade(scene: SceneSpec, origin: np.ndarray, dirs: np.ndarray,
           cast=None) -> np.ndarray:
    """Render one view to 8-bit RGB. The headlight sits at the left camera
    center (the frame origin) for both views, so a surface point shades
    identically wherever it is seen from."""
    t, ids, normals = cast if cast is not None else _cast(scene, origin, dirs)
    hit = np.isfinite(t)
    points = origin + dirs * np.where(hit, t, 0.0)[:, :, None]
    dist = np.sqrt((points * points).sum(axis=2))
    with np.errstate(divide="ignore", invalid="ignore"):
        light = points / dist[:, :, None]
    lambert = np.abs((normals * light).sum(axis=2))
    albedos = np.zeros((len(scene.primitives) + 1, 3))
    for index, prim in enumerate(scene.primitives):
        albedos[index] = prim.albedo
    rgb = albedos[ids] * lambert[:, :, None] * (scene.gain * 255.0)
    rgb = np.where(hit[:, :, None], rgb, 0.0)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class RenderOutput:
    """Stereo render with left-view ground truth.

    primitive_ids holds the nearest-hit primitive index per left pixel
    (-1 where nothing was hit); useful for interior/boundary analysis.
    """

    left_rgb: np.ndarray
    right_rgb: np.ndarray
    gt_disparity: DisparityMap
    gt_normal: NormalMap
    gt_depth: DepthMap
    primitive_ids: np.ndarray


def render_stereo(scene: SceneSpec, rig: StereoRig, width: int, height: int) -> RenderOutput:
    """Render a rectified stereo pair with exact left-view ground truth."""
    if width < 1 or height < 1:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    dirs = _pixel_dirs(rig, width, height)
    left_origin = np.zeros(3)
    right_origin = np.array([rig.baseline, 0.0, 0.0])

    left_cast = _cast(scene, left_origin, dirs)
    t, ids, normals = left_cast
    hit = np.isfinite(t)
    z = np.where(hit, t, np.nan)
    with np.errstate(invalid="ignore"):
        disparity = rig.intrinsics.fx * rig.baseline / z
    gt_depth = DepthMap(z.astype(np.float32), hit)
    gt_disparity = DisparityMap(disparity.astype(np.float32), hit)
    gt_normal = NormalMap(
        np.where(hit[:, :, None], normals, np.nan).astype(np.float32), hit)

    left_rgb = _shade(scene, left_origin, dirs, cast=left_cast)
    right_rgb = _shade(scene, right_origin, dirs)
    ids = ids.copy()
    ids.setflags(write=False)
    left_rgb.setflags(write=False)
    right_rgb.setflags(write=False)
    return RenderOutput(left_rgb, right_rgb, gt_disparity, gt_normal, gt_depth, ids)


def analytic_normal_oracle(scene: SceneSpec, rig: StereoRig, p: Pixel) -> np.ndarray | None:
    """Closed-form camera-facing unit normal along the left ray through p.

    Returns None when the ray hits nothing.
    """
    k = rig.intrinsics
    dirs = np.array([[[(p.u - k.cx) / k.fx, (p.v - k.cy) / k.fy, 1.0]]])
    t, ids, normals = _cast(scene, np.zeros(3), dirs)
    if not np.isfinite(t[0, 0]):
        return None
    n = normals[0, 0]
    return n / np.linalg.norm(n)


def analytic_normal_map(scene: SceneSpec, rig: StereoRig,
                        width: int, height: int) -> tuple[NormalMap, np.ndarray]:
    """Dense form of :func:`analytic_normal_oracle` over the pixel grid.

    Returns the exact left-view normal map plus the per-pixel nearest-hit
    primitive ids (-1 where nothing is hit).
    """
    if width < 1 or height < 1:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    dirs = _pixel_dirs(rig, width, height)
    t, ids, normals = _cast(scene, np.zeros(3), dirs)
    hit = np.isfinite(t)
    lengths = np.linalg.norm(normals, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = normals / lengths[:, :, None]
    values = np.where(hit[:, :, None], unit, np.nan).astype(np.float32)
    return NormalMap(values, hit), ids


def scene_from_dict(doc: dict) -> SceneSpec:
    """Parse the scene JSON document schema (see README for the field list)."""
    if not isinstance(doc, dict):
        raise ValueError("scene document must be a JSON object")
    raw = doc.get("primitives", [])
    if not isinstance(raw, list):
        raise ValueError("scene 'primitives' must be a list")
    primitives: list[Primitive] = []
    for index, entry in enumerate(raw):
        if not isinstance(entry, dict) or "type" not in entry:
            raise ValueError(f"primitive {index} must be an object with a 'type'")
        kind = entry["type"]
        try:
            if kind == "plane":
                primitives.append(Plane(entry["point"], entry["normal"],
                                        entry.get("albedo", (0.8, 0.8, 0.8))))
            elif kind == "sphere":
                primitives.append(Sphere(entry["center"], float(entry["radius"]),
                                         entry.get("albedo", (0.8, 0.8, 0.8))))
            elif kind == "box":
                primitives.append(Box(entry["min"], entry["max"],
                                      entry.get("albedo", (0.8, 0.8, 0.8))))
            else:
                raise ValueError(f"unknown primitive type {kind!r}")
        except KeyError as exc:
            raise ValueError(f"primitive {index} ({kind}) missing field {exc}") from exc
    return SceneSpec(tuple(primitives), gain=float(doc.get("gain", 1.0)))


def scene_to_dict(scene: SceneSpec) -> dict:
    primitives = []
    for prim in scene.primitives:
        if isinstance(prim, Plane):
            primitives.append({"type": "plane", "point": prim.point.tolist(),
                               "normal": prim.normal.tolist(),
                               "albedo": prim.albedo.tolist()})
        elif isinstance(prim, Sphere):
            primitives.append({"type": "sphere", "center": prim.center.tolist(),
                               "radius": prim.radius, "albedo": prim.albedo.tolist()})
        else:
            primitives.append({"type": "box", "min": prim.min_corner.tolist(),
                               "max": prim.max_corner.tolist(),
                               "albedo": prim.albedo.tolist()})
    return {"gain": scene.gain, "primitives": primitives}


def load_scene(path: str | os.PathLike) -> SceneSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid scene JSON in {path}: {exc}") from exc
    return scene_from_dict(doc)


def save_scene(scene: SceneSpec, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2)
        fh.write("\n")
