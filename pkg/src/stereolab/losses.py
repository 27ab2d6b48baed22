"""Loss kernels over disparity maps, map pyramids and normal maps.

These are pure numeric reductions (no gradients): the smooth-L1 kernel,
its per-map mean, the 7-scale weighted disparity loss, and the squared
normal difference loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .maps import DisparityMap, NormalMap
from .metrics import _joint_mask, _require_unit

PYRAMID_LEVELS = 7
# Toolkit default; coarse-to-fine weight schedules are configurable.
DEFAULT_LOSS_WEIGHTS = (0.32, 0.16, 0.08, 0.04, 0.02, 0.01, 0.005)


def smooth_l1(x: float) -> float:
    """0.5 x^2 for |x| < 1, |x| - 0.5 otherwise. Continuous at |x| = 1."""
    if not math.isfinite(x):
        raise ValueError(f"smooth_l1 requires a finite argument, got {x}")
    ax = abs(x)
    if ax < 1.0:
        return 0.5 * x * x
    return ax - 0.5


def _smooth_l1_array(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def scale_loss(pred: DisparityMap, gt: DisparityMap) -> float:
    """Mean smooth-L1 of (gt - pred) over jointly valid pixels."""
    mask = _joint_mask(pred, gt, "disparity")
    residual = gt.values.astype(np.float64)[mask] - pred.values.astype(np.float64)[mask]
    return float(_smooth_l1_array(residual).mean())


def _halve(dm: DisparityMap) -> DisparityMap:
    """One pyramid step: 2x2 valid-pixel block average with disparity halved.

    Disparity is width-proportional, so each level's values shrink by 1/2.
    Odd dimensions keep a partial trailing block (ceiling division); a
    block with no valid parents stays invalid.
    """
    h, w = dm.values.shape
    h2, w2 = (h + 1) // 2, (w + 1) // 2
    padded = np.zeros((h2 * 2, w2 * 2), dtype=np.float64)
    padded_mask = np.zeros((h2 * 2, w2 * 2), dtype=bool)
    padded[:h, :w] = np.where(dm.mask, dm.values.astype(np.float64), 0.0)
    padded_mask[:h, :w] = dm.mask
    blocks = padded.reshape(h2, 2, w2, 2)
    block_mask = padded_mask.reshape(h2, 2, w2, 2)
    sums = blocks.sum(axis=(1, 3))
    counts = block_mask.sum(axis=(1, 3))
    mask = counts > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        values = 0.5 * sums / counts
    values = np.where(mask, values, np.nan).astype(np.float32)
    return DisparityMap(values, mask)


def build_gt_pyramid(gt: DisparityMap) -> list[DisparityMap]:
    """Ground-truth pyramid of PYRAMID_LEVELS maps, full resolution first."""
    levels = [gt]
    for _ in range(PYRAMID_LEVELS - 1):
        levels.append(_halve(levels[-1]))
    return levels


@dataclass(frozen=True)
class LossPyramid:
    """Seven predicted disparity maps, full resolution down to 1/64 scale."""

    levels: tuple[DisparityMap, ...]
    weights: tuple[float, ...] = DEFAULT_LOSS_WEIGHTS

    def __post_init__(self) -> None:
        levels = tuple(self.levels)
        weights = tuple(float(w) for w in self.weights)
        if len(levels) != PYRAMID_LEVELS:
            raise ValueError(f"expected {PYRAMID_LEVELS} pyramid levels, got {len(levels)}")
        if len(weights) != PYRAMID_LEVELS:
            raise ValueError(f"expected {PYRAMID_LEVELS} weights, got {len(weights)}")
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise ValueError(f"weights must be finite and non-negative, got {weights}")
        for s in range(1, PYRAMID_LEVELS):
            prev = levels[s - 1].values.shape
            want = ((prev[0] + 1) // 2, (prev[1] + 1) // 2)
            got = levels[s].values.shape
            if got != want:
                raise ValueError(
                    f"level {s} must halve level {s - 1} dimensions "
                    f"(expected {want}, got {got})")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "weights", weights)


def multiscale_disparity_loss(p: LossPyramid, gt: DisparityMap) -> float:
    """Weighted sum of per-scale smooth-L1 losses against the gt pyramid.

    Zero-weight scales are skipped entirely, so they neither cost time nor
    fail on coarse levels without valid pixels.
    """
    gt_levels = build_gt_pyramid(gt)
    for s in range(PYRAMID_LEVELS):
        if p.levels[s].values.shape != gt_levels[s].values.shape:
            raise ValueError(
                f"pyramid level {s} shape {p.levels[s].values.shape} does not match "
                f"ground truth pyramid {gt_levels[s].values.shape}")
    total = 0.0
    for s in range(PYRAMID_LEVELS):
        if p.weights[s] == 0.0:
            continue
        total += p.weights[s] * scale_loss(p.levels[s], gt_levels[s])
    return total


def normal_loss(pred: NormalMap, gt: NormalMap) -> float:
    """Mean squared vector difference between unit normal fields."""
    mask = _joint_mask(pred, gt, "normal")
    _require_unit(pred, "predicted")
    _require_unit(gt, "ground-truth")
    diff = pred.values.astype(np.float64)[mask] - gt.values.astype(np.float64)[mask]
    return float((diff * diff).sum(axis=1).mean())
