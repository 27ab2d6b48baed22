"""Evaluation metrics: endpoint error and the normal angle error suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maps import DisparityMap, NormalMap

ANGLE_THRESHOLDS_DEG = (11.25, 22.5, 30.0)


def _joint_mask(a, b, what: str) -> np.ndarray:
    if a.values.shape[:2] != b.values.shape[:2]:
        raise ValueError(
            f"{what} dimension mismatch: {a.values.shape[:2]} vs {b.values.shape[:2]}")
    mask = a.mask & b.mask
    if not mask.any():
        raise ValueError(f"no jointly valid pixels to evaluate {what}")
    return mask


def epe(pred: DisparityMap, gt: DisparityMap) -> float:
    """Endpoint error: mean absolute disparity difference over valid pixels.

    Evaluation is restricted to pixels valid in both maps (for dense
    predictions this equals the ground-truth-valid set).
    """
    mask = _joint_mask(pred, gt, "disparity")
    diff = pred.values.astype(np.float64)[mask] - gt.values.astype(np.float64)[mask]
    return float(np.abs(diff).mean())


def disparity_error_map(pred: DisparityMap, gt: DisparityMap) -> np.ndarray:
    """Per-pixel |pred - gt| as float64; pixels outside the joint mask are NaN."""
    mask = _joint_mask(pred, gt, "disparity")
    diff = np.abs(pred.values.astype(np.float64) - gt.values.astype(np.float64))
    return np.where(mask, diff, np.nan)


def _require_unit(nm: NormalMap, name: str, tol: float = 1e-4) -> None:
    v = nm.values.astype(np.float64)
    norms = np.sqrt((v * v).sum(axis=2))[nm.mask]
    if norms.size and np.abs(norms - 1.0).max() > tol:
        worst = float(np.abs(norms - 1.0).max())
        raise ValueError(f"{name} normals must be unit length (worst deviation {worst:g})")


@dataclass(frozen=True)
class NormalErrorStats:
    """Angle error summary, degrees; fractions use strict < thresholds."""

    mean_deg: float
    median_deg: float
    frac_11_25: float
    frac_22_5: float
    frac_30: float


def angle_error_map(pred: NormalMap, gt: NormalMap) -> np.ndarray:
    """Per-pixel angle between normals, degrees; NaN outside the joint mask."""
    mask = _joint_mask(pred, gt, "normal")
    _require_unit(pred, "predicted")
    _require_unit(gt, "ground-truth")
    dot = (pred.values.astype(np.float64) * gt.values.astype(np.float64)).sum(axis=2)
    angles = np.degrees(np.arccos(np.clip(dot, -1.0, 1.0)))
    return np.where(mask, angles, np.nan)


def normal_angle_errors(pred: NormalMap, gt: NormalMap) -> NormalErrorStats:
    """Mean/median angle error plus accuracy fractions at 11.25, 22.5 and 30 degrees."""
    errors = angle_error_map(pred, gt)
    e = errors[np.isfinite(errors)]
    t1, t2, t3 = ANGLE_THRESHOLDS_DEG
    return NormalErrorStats(
        mean_deg=float(e.mean()),
        median_deg=float(np.median(e)),
        frac_11_25=float((e < t1).mean()),
        frac_22_5=float((e < t2).mean()),
        frac_30=float((e < t3).mean()),
    )
