"""Point cloud reconstruction from disparity maps, and PLY serialization.

Clouds keep one point per valid pixel in row-major pixel order, with
optional per-point color and unit normal attributes. On disk the cloud is
a standard PLY (ascii or binary little-endian) with float32 coordinates;
internal math stays in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import StereoRig, backproject_depth_map, disparity_map_to_depth_map
from .maps import DisparityMap, NormalMap


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (N, 3) float64, camera frame
    colors: np.ndarray | None = None  # (N, 3) uint8
    normals: np.ndarray | None = None  # (N, 3) float64, unit length

    def __post_init__(self) -> None:
        points = np.ascontiguousarray(self.points, dtype=np.float64).reshape(-1, 3)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        n = points.shape[0]
        if self.colors is not None:
            colors = np.ascontiguousarray(self.colors, dtype=np.uint8)
            if colors.shape != (n, 3):
                raise ValueError(f"colors shape {colors.shape} does not match {n} points")
            colors.setflags(write=False)
            object.__setattr__(self, "colors", colors)
        if self.normals is not None:
            normals = np.ascontiguousarray(self.normals, dtype=np.float64)
            if normals.shape != (n, 3):
                raise ValueError(f"normals shape {normals.shape} does not match {n} points")
            if n:
                lengths = np.sqrt((normals * normals).sum(axis=1))
                if np.abs(lengths - 1.0).max() > 1e-4:
                    raise ValueError("point normals must be unit length")
            normals.setflags(write=False)
            object.__setattr__(self, "normals", normals)

    def __len__(self) -> int:
        return self.points.shape[0]


def reconstruct(dm: DisparityMap, rgb: np.ndarray | None = None,
                nm: NormalMap | None = None, rig: StereoRig | None = None) -> PointCloud:
    """Backproject every valid pixel to a 3D point, row-major order.

    Colors and normals are attached when their sources are supplied; a
    pixel contributes a point only if it is valid in the disparity map
    (after the depth guard) and, when given, in the normal map too.
    """
    if rig is None:
        raise ValueError("a stereo rig is required for reconstruction")
    if rgb is not None:
        rgb = np.asarray(rgb)
        if rgb.shape[:2] != dm.values.shape or rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError(
                f"rgb shape {rgb.shape} does not match disparity {dm.values.shape}")
    if nm is not None and nm.values.shape[:2] != dm.values.shape:
        raise ValueError(
            f"normal map shape {nm.values.shape[:2]} does not match "
            f"disparity {dm.values.shape}")
    depth = disparity_map_to_depth_map(dm, rig)
    mask = depth.mask if nm is None else depth.mask & nm.mask
    pos = backproject_depth_map(depth, rig.intrinsics)
    points = pos[mask]
    colors = rgb[mask].astype(np.uint8) if rgb is not None else None
    normals = nm.values[mask].astype(np.float64) if nm is not None else None
    return PointCloud(points, colors, normals)


class PlyParseError(ValueError):
    """Malformed PLY input; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


_FLOAT_NAMES = {"float", "float32"}
_UCHAR_NAMES = {"uchar", "uint8"}


def _vertex_dtype(has_colors: bool, has_normals: bool) -> np.dtype:
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    if has_colors:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    if has_normals:
        fields += [("nx", "<f4"), ("ny", "<f4"), ("nz", "<f4")]
    return np.dtype(fields)


def _pack_vertices(pc: PointCloud) -> np.ndarray:
    data = np.empty(len(pc), dtype=_vertex_dtype(pc.colors is not None,
                                                 pc.normals is not None))
    pts = pc.points.astype(np.float32)
    data["x"], data["y"], data["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
    if pc.colors is not None:
        data["red"], data["green"], data["blue"] = (
            pc.colors[:, 0], pc.colors[:, 1], pc.colors[:, 2])
    if pc.normals is not None:
        nrm = pc.normals.astype(np.float32)
        data["nx"], data["ny"], data["nz"] = nrm[:, 0], nrm[:, 1], nrm[:, 2]
    return data


def export_ply(pc: PointCloud, format: str = "binary_little_endian") -> bytes:
    """Serialize to PLY bytes; property order is x y z [rgb] [normal]."""
    if format not in ("ascii", "binary_little_endian"):
        raise ValueError(f"unsupported PLY format {format!r}")
    lines = ["ply", f"format {format} 1.0", f"element vertex {len(pc)}",
             "property float x", "property float y", "property float z"]
    if pc.colors is not None:
        lines += ["property uchar red", "property uchar green", "property uchar blue"]
    if pc.normals is not None:
        lines += ["property float nx", "property float ny", "property float nz"]
    lines.append("end_header")
    header = ("\n".join(lines) + "\n").encode("ascii")
    vertices = _pack_vertices(pc)
    if format == "binary_little_endian":
        return header + vertices.tobytes()
    rows = []
    for vertex in vertices:
        # str() of a float32 scalar is the shortest digit string that
        # round-trips exactly back to the same float32
        rows.append(" ".join(str(value) for value in vertex))
    return header + ("\n".join(rows) + ("\n" if rows else "")).encode("ascii")


def import_ply(data: bytes) -> PointCloud:
    """Parse a PLY produced by :func:`export_ply` (or an equivalent layout)."""
    offset = 0
    lines: list[tuple[str, int]] = []
    while True:
        end = data.find(b"\n", offset)
        if end < 0:
            raise PlyParseError("unterminated PLY header", len(data))
        try:
            line = data[offset:end].decode("ascii").strip()
        except UnicodeDecodeError:
            raise PlyParseError("PLY header is not ascii", offset) from None
        lines.append((line, offset))
        offset = end + 1
        if line == "end_header":
            break
        if offset > 65536:
            raise PlyParseError("PLY header too large", offset)
    body_start = offset

    if not lines or lines[0][0] != "ply":
        raise PlyParseError("missing 'ply' magic", 0)
    fmt = None
    count = None
    props: list[tuple[str, str]] = []
    for line, line_offset in lines[1:-1]:
        if line.startswith("comment") or not line:
            continue
        parts = line.split()
        if parts[0] == "format":
            if len(parts) != 3 or parts[1] not in ("ascii", "binary_little_endian"):
                raise PlyParseError(f"unsupported PLY format line {line!r}", line_offset)
            fmt = parts[1]
        elif parts[0] == "element":
            if len(parts) != 3 or parts[1] != "vertex":
                raise PlyParseError(f"unsupported element {line!r}", line_offset)
            try:
                count = int(parts[2])
            except ValueError:
                raise PlyParseError(f"bad vertex count {parts[2]!r}", line_offset) from None
            if count < 0:
                raise PlyParseError(f"negative vertex count {count}", line_offset)
        elif parts[0] == "property":
            if len(parts) != 3:
                raise PlyParseError(f"malformed property line {line!r}", line_offset)
            props.append((parts[1], parts[2]))
        else:
            raise PlyParseError(f"unsupported header line {line!r}", line_offset)
    if fmt is None:
        raise PlyParseError("missing format line", 0)
    if count is None:
        raise PlyParseError("missing vertex element", 0)

    names = [name for _, name in props]
    types = {name: ptype for ptype, name in props}
    layouts = {
        ("x", "y", "z"): (False, False),
        ("x", "y", "z", "red", "green", "blue"): (True, False),
        ("x", "y", "z", "nx", "ny", "nz"): (False, True),
        ("x", "y", "z", "red", "green", "blue", "nx", "ny", "nz"): (True, True),
    }
    key = tuple(names)
    if key not in layouts:
        raise PlyParseError(f"unsupported property layout {names}", 0)
    has_colors, has_normals = layouts[key]
    for name in ("x", "y", "z", "nx", "ny", "nz"):
        if name in types and types[name] not in _FLOAT_NAMES:
            raise PlyParseError(f"property {name} must be float, got {types[name]}", 0)
    for name in ("red", "green", "blue"):
        if name in types and types[name] not in _UCHAR_NAMES:
            raise PlyParseError(f"property {name} must be uchar, got {types[name]}", 0)

    dtype = _vertex_dtype(has_colors, has_normals)
    if fmt == "binary_little_endian":
        body = data[body_start:]
        if len(body) < count * dtype.itemsize:
            missing = len(body) // dtype.itemsize
            raise PlyParseError(
                f"truncated PLY body: vertex {missing} of {count} is incomplete",
                body_start + len(body))
        vertices = np.frombuffer(body[:count * dtype.itemsize], dtype=dtype)
    else:
        text = data[body_start:].decode("ascii", errors="replace")
        rows = text.splitlines()
        if len(rows) < count:
            raise PlyParseError(
                f"truncated PLY body: vertex {len(rows)} of {count} is missing",
                len(data))
        vertices = np.empty(count, dtype=dtype)
        for i in range(count):
            tokens = rows[i].split()
            if len(tokens) != len(names):
                raise PlyParseError(
                    f"vertex {i}: expected {len(names)} values, got {len(tokens)}",
                    body_start)
            try:
                for name, token in zip(names, tokens):
                    vertices[i][name] = float(token) if types[name] in _FLOAT_NAMES \
                        else int(token)
            except ValueError:
                raise PlyParseError(f"vertex {i}: bad value in {rows[i]!r}",
                                    body_start) from None

    points = np.stack([vertices["x"], vertices["y"], vertices["z"]], axis=1).astype(np.float64)
    colors = None
    normals = None
    if has_colors:
        colors = np.stack([vertices["red"], vertices["green"], vertices["blue"]], axis=1)
    if has_normals:
        normals = np.stack([vertices["nx"], vertices["ny"], vertices["nz"]],
                           axis=1).astype(np.float64)
    return PointCloud(points, colors, normals)


def export_ply_file(pc: PointCloud, path, format: str = "binary_little_endian") -> None:
    with open(path, "wb") as fh:
        fh.write(export_ply(pc, format=format))


def import_ply_file(path) -> PointCloud:
    with open(path, "rb") as fh:
        return import_ply(fh.read())
