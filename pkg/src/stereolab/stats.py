"""Dataset-level distribution statistics.

Covers the width-normalized disparity histogram, the per-sample-averaged
normal angle histogram, the left/right brightness joint histogram over
disparity-matched pixels, and overexposure summaries. Histograms keep raw
counts; display transforms (log1p) are recorded in metadata only.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .d2n import normal_map_angles
from .maps import DisparityMap, NormalMap

DISPARITY_HIST_MAX = 50.0
DISPARITY_SCALE = 200.0
DEFAULT_DISPARITY_BINS = 500
DEFAULT_ANGLE_BIN_DEG = 1.0
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


def _check_edges(edges: np.ndarray, name: str) -> np.ndarray:
    edges = np.ascontiguousarray(edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError(f"{name} must be a 1-D array of at least two boundaries")
    if not np.all(np.diff(edges) > 0):
        raise ValueError(f"{name} must be strictly increasing")
    edges.setflags(write=False)
    return edges


def _check_counts(counts: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    counts = np.ascontiguousarray(counts)
    if counts.dtype.kind not in "iuf":
        raise ValueError(f"counts must be numeric, got dtype {counts.dtype}")
    counts = counts.astype(np.int64 if counts.dtype.kind in "iu" else np.float64)
    if counts.shape != shape:
        raise ValueError(f"counts shape {counts.shape} does not match bins {shape}")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    counts.setflags(write=False)
    return counts


@dataclass(frozen=True, eq=False)
class Histogram1D:
    """Binned 1-D tallies with an out-of-range overflow bucket."""

    bin_edges: np.ndarray
    counts: np.ndarray
    overflow: float = 0
    kind: str = ""
    sample_count: int = 0
    transform: str = "none"

    def __post_init__(self) -> None:
        edges = _check_edges(self.bin_edges, "bin_edges")
        counts = _check_counts(self.counts, (edges.size - 1,))
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum()) + float(self.overflow)

    @property
    def normalized(self) -> np.ndarray:
        """Per-bin fraction of all tallied values, overflow included in the denominator."""
        total = self.total
        if total == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts / total

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram1D):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.transform == other.transform
            and self.sample_count == other.sample_count
            and self.overflow == other.overflow
            and np.array_equal(self.bin_edges, other.bin_edges)
            and self.counts.dtype == other.counts.dtype
            and np.array_equal(self.counts, other.counts)
        )

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dims": 1,
            "transform": self.transform,
            "sample_count": self.sample_count,
            "bin_edges": self.bin_edges.tolist(),
            "counts": self.counts.tolist(),
            "overflow": self.overflow,
            "normalized": self.normalized.tolist(),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "Histogram1D":
        counts = np.asarray(doc["counts"])
        return Histogram1D(
            bin_edges=np.asarray(doc["bin_edges"], dtype=np.float64),
            counts=counts,
            overflow=doc.get("overflow", 0),
            kind=doc.get("kind", ""),
            sample_count=int(doc.get("sample_count", 0)),
            transform=doc.get("transform", "none"),
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("bin_left,bin_right,count,normalized\n")
        norm = self.normalized
        for i in range(self.counts.size):
            out.write(f"{self.bin_edges[i]!r},{self.bin_edges[i + 1]!r},"
                      f"{self.counts[i]},{norm[i]!r}\n")
        total = self.total
        ovf_norm = float(self.overflow) / total if total else 0.0
        out.write(f"overflow,,{self.overflow},{ovf_norm!r}\n")
        return out.getvalue()


@dataclass(frozen=True, eq=False)
class Histogram2D:
    """Binned 2-D tallies; counts[i, j] covers x bin i and y bin j."""

    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray
    overflow: float = 0
    kind: str = ""
    sample_count: int = 0
    transform: str = "none"

    def __post_init__(self) -> None:
        x_edges = _check_edges(self.x_edges, "x_edges")
        y_edges = _check_edges(self.y_edges, "y_edges")
        counts = _check_counts(self.counts, (x_edges.size - 1, y_edges.size - 1))
        object.__setattr__(self, "x_edges", x_edges)
        object.__setattr__(self, "y_edges", y_edges)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> float:
        return float(self.counts.sum()) + float(self.overflow)

    @property
    def normalized(self) -> np.ndarray:
        total = self.total
        if total == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts / total

    @property
    def averaged(self) -> np.ndarray:
        """Counts divided by the number of contributing samples."""
        if self.sample_count == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts / self.sample_count

    def display_values(self) -> np.ndarray:
        """Per-sample-averaged counts with the recorded display transform applied."""
        avg = self.averaged
        if self.transform == "log1p":
            return np.log1p(avg)
        return avg

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram2D):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.transform == other.transform
            and self.sample_count == other.sample_count
            and self.overflow == other.overflow
            and np.array_equal(self.x_edges, other.x_edges)
            and np.array_equal(self.y_edges, other.y_edges)
            and self.counts.dtype == other.counts.dtype
            and np.array_equal(self.counts, other.counts)
        )

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dims": 2,
            "transform": self.transform,
            "sample_count": self.sample_count,
            "x_edges": self.x_edges.tolist(),
            "y_edges": self.y_edges.tolist(),
            "counts": self.counts.tolist(),
            "overflow": self.overflow,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "Histogram2D":
        return Histogram2D(
            x_edges=np.asarray(doc["x_edges"], dtype=np.float64),
            y_edges=np.asarray(doc["y_edges"], dtype=np.float64),
            counts=np.asarray(doc["counts"]),
            overflow=doc.get("overflow", 0),
            kind=doc.get("kind", ""),
            sample_count=int(doc.get("sample_count", 0)),
            transform=doc.get("transform", "none"),
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("x_left,x_right,y_left,y_right,count,normalized\n")
        norm = self.normalized
        for i in range(self.counts.shape[0]):
            for j in range(self.counts.shape[1]):
                out.write(f"{self.x_edges[i]!r},{self.x_edges[i + 1]!r},"
                          f"{self.y_edges[j]!r},{self.y_edges[j + 1]!r},"
                          f"{self.counts[i, j]},{norm[i, j]!r}\n")
        total = self.total
        ovf_norm = float(self.overflow) / total if total else 0.0
        out.write(f"overflow,,,,{self.overflow},{ovf_norm!r}\n")
        return out.getvalue()


def merge_histograms(a, b):
    """Merge two compatible histograms by adding counts.

    Compatibility requires identical bin edges, kind, transform and count
    dtype. Merging integer-count histograms is exact, so streaming
    accumulation is bit-identical to a single batch pass.
    """
    if type(a) is not type(b):
        raise ValueError(f"cannot merge {type(a).__name__} with {type(b).__name__}")
    if a.kind != b.kind or a.transform != b.transform:
        raise ValueError(
            f"histogram metadata mismatch: kind {a.kind!r}/{b.kind!r}, "
            f"transform {a.transform!r}/{b.transform!r}")
    if a.counts.dtype != b.counts.dtype:
        raise ValueError(f"count dtype mismatch: {a.counts.dtype} vs {b.counts.dtype}")
    if isinstance(a, Histogram1D):
        if not np.array_equal(a.bin_edges, b.bin_edges):
            raise ValueError("bin edges differ; histograms are not mergeable")
        return Histogram1D(a.bin_edges, a.counts + b.counts, a.overflow + b.overflow,
                           a.kind, a.sample_count + b.sample_count, a.transform)
    if isinstance(a, Histogram2D):
        if not (np.array_equal(a.x_edges, b.x_edges) and np.array_equal(a.y_edges, b.y_edges)):
            raise ValueError("bin edges differ; histograms are not mergeable")
        return Histogram2D(a.x_edges, a.y_edges, a.counts + b.counts,
                           a.overflow + b.overflow, a.kind,
                           a.sample_count + b.sample_count, a.transform)
    raise ValueError(f"unsupported histogram type {type(a).__name__}")


def normalized_disparity_histogram(maps: Sequence[DisparityMap],
                                   bins: int = DEFAULT_DISPARITY_BINS) -> Histogram1D:
    """Histogram of width-normalized disparities pooled over a dataset.

    Each valid pixel contributes 200 * d / width (images of different
    widths become comparable), binned over [0, 50]; values beyond the
    range land in the overflow bucket.
    """
    maps = list(maps)
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if not maps:
        raise ValueError("no disparity maps given")
    edges = np.linspace(0.0, DISPARITY_HIST_MAX, bins + 1)
    counts = np.zeros(bins, dtype=np.int64)
    overflow = 0
    total_valid = 0
    for dm in maps:
        d = dm.values[dm.mask].astype(np.float64)
        total_valid += d.size
        if d.size == 0:
            continue
        scaled = DISPARITY_SCALE * d / dm.width
        in_range = (scaled >= 0.0) & (scaled <= DISPARITY_HIST_MAX)
        counts += np.histogram(scaled[in_range], bins=edges)[0].astype(np.int64)
        overflow += int((~in_range).sum())
    if total_valid == 0:
        raise ValueError("no valid pixels in any disparity map; histogram would be empty")
    return Histogram1D(edges, counts, overflow, kind="disparity",
                       sample_count=len(maps), transform="none")


def disparity_histogram_single(dm: DisparityMap,
                               bins: int = DEFAULT_DISPARITY_BINS) -> Histogram1D:
    """Width-normalized disparity histogram of one map (may hold zero counts).

    Merging these per-image histograms reproduces
    :func:`normalized_disparity_histogram` bit-exactly.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    edges = np.linspace(0.0, DISPARITY_HIST_MAX, bins + 1)
    d = dm.values[dm.mask].astype(np.float64)
    counts = np.zeros(bins, dtype=np.int64)
    overflow = 0
    if d.size:
        scaled = DISPARITY_SCALE * d / dm.width
        in_range = (scaled >= 0.0) & (scaled <= DISPARITY_HIST_MAX)
        counts += np.histogram(scaled[in_range], bins=edges)[0].astype(np.int64)
        overflow = int((~in_range).sum())
    return Histogram1D(edges, counts, overflow, kind="disparity",
                       sample_count=1, transform="none")


def normal_angle_histogram_single(nm: NormalMap,
                                  bin_deg: float = DEFAULT_ANGLE_BIN_DEG) -> Histogram2D:
    """Per-sample normalized angle histogram; merge and read ``averaged``
    to reproduce :func:`normal_angle_histogram`."""
    return normal_angle_histogram([nm], bin_deg=bin_deg)


def normal_angle_histogram(maps: Sequence[NormalMap],
                           bin_deg: float = DEFAULT_ANGLE_BIN_DEG) -> Histogram2D:
    """Average of per-sample normal angle distributions.

    Each sample is histogrammed over alpha in [0, 360) x beta in [-90, 0]
    and normalized to fractions before averaging, so every sample carries
    equal weight regardless of its valid-pixel count. Normals facing away
    from the camera (beta > 0) fall into the overflow bucket. The log1p
    display transform is recorded in metadata.
    """
    maps = list(maps)
    if not maps:
        raise ValueError("no normal maps given")
    n_alpha = 360.0 / bin_deg
    n_beta = 90.0 / bin_deg
    if abs(n_alpha - round(n_alpha)) > 1e-9 or abs(n_beta - round(n_beta)) > 1e-9:
        raise ValueError(f"bin_deg must evenly divide 360 and 90, got {bin_deg}")
    x_edges = np.linspace(0.0, 360.0, int(round(n_alpha)) + 1)
    y_edges = np.linspace(-90.0, 0.0, int(round(n_beta)) + 1)
    counts = np.zeros((x_edges.size - 1, y_edges.size - 1), dtype=np.float64)
    overflow = 0.0
    for index, nm in enumerate(maps):
        alpha, beta = normal_map_angles(nm)
        a = alpha[nm.mask]
        b = beta[nm.mask]
        total = a.size
        if total == 0:
            raise ValueError(f"normal map {index} has no valid pixels")
        visible = b <= 0.0
        sample = np.histogram2d(a[visible], b[visible], bins=(x_edges, y_edges))[0]
        counts += sample / total
        overflow += float((~visible).sum()) / total
    return Histogram2D(x_edges, y_edges, counts, overflow, kind="normal_angles",
                       sample_count=len(maps), transform="log1p")


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Luminance image; uint8 when rounded, float64 otherwise. Values in [0, 255]."""

    values: np.ndarray

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def rgb_to_gray(img: np.ndarray, rounding: str = "half_even") -> GrayImage:
    """Convert an 8-bit RGB image to luminance 0.299 R + 0.587 G + 0.114 B.

    rounding "half_even" rounds to uint8 for integer binning; "none"
    returns the unrounded float values for metric use.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected 8-bit RGB, got dtype {img.dtype}")
    wr, wg, wb = GRAY_WEIGHTS
    gray = wr * img[:, :, 0] + wg * img[:, :, 1] + wb * img[:, :, 2]
    if rounding == "none":
        return GrayImage(gray)
    if rounding == "half_even":
        return GrayImage(np.clip(np.rint(gray), 0, 255).astype(np.uint8))
    raise ValueError(f"unknown rounding mode {rounding!r}")


def brightness_joint_histogram(left: np.ndarray, right: np.ndarray,
                               gt: DisparityMap) -> Histogram2D:
    """Joint gray-level histogram over disparity-matched stereo pixels.

    For each valid left pixel (u, v) with disparity d, the matched right
    pixel is (round(u - d), v) with round-half-even; matches falling
    outside the image are skipped. Bins are the 256 x 256 integer gray
    pairs (x = left, y = right); counts are raw per-pair tallies
    (sample_count = 1), so merging pairs and reading ``averaged`` gives
    the per-pair average count.
    """
    left = np.asarray(left)
    right = np.asarray(right)
    if left.shape != right.shape:
        raise ValueError(f"left/right shape mismatch: {left.shape} vs {right.shape}")
    if left.shape[:2] != gt.values.shape:
        raise ValueError(
            f"image shape {left.shape[:2]} does not match disparity shape {gt.values.shape}")
    gray_left = rgb_to_gray(left).values
    gray_right = rgb_to_gray(right).values
    h, w = gt.values.shape
    u = np.arange(w, dtype=np.float64)[None, :]
    matched_u = np.rint(u - gt.values.astype(np.float64))
    sel = gt.mask & (matched_u >= 0) & (matched_u < w)
    v_idx, u_idx = np.nonzero(sel)
    gl = gray_left[v_idx, u_idx].astype(np.int64)
    gr = gray_right[v_idx, matched_u[sel].astype(np.int64)].astype(np.int64)
    counts = np.bincount(gl * 256 + gr, minlength=256 * 256).reshape(256, 256)
    edges = np.arange(257, dtype=np.float64)
    return Histogram2D(edges, edges, counts.astype(np.int64), 0,
                       kind="brightness_joint", sample_count=1, transform="log1p")


@dataclass(frozen=True)
class OverexposureStats:
    """Fractions of matched pixel pairs saturated at gray level 255."""

    fraction_both_255: float
    fraction_either_255: float


def overexposure_stats(h: Histogram2D) -> OverexposureStats:
    """Overexposure fractions from a 256 x 256 brightness joint histogram."""
    if h.counts.shape != (256, 256):
        raise ValueError(f"expected a 256x256 brightness histogram, got {h.counts.shape}")
    total = h.total
    if total == 0:
        raise ValueError("histogram holds no matched pixels")
    both = float(h.counts[255, 255])
    either = float(h.counts[255, :].sum()) + float(h.counts[:, 255].sum()) - both
    return OverexposureStats(
        fraction_both_255=both / total,
        fraction_either_255=either / total,
    )
