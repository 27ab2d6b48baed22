"""Disparity-to-normal transform and the angle encoding.

The tilted-plane expectation is derived from the analytic surface
gradient: a plane z = 1 + 0.5 x has raw normal (dz/dx, dz/dy, -1) =
(0.5, 0, -1), i.e. unit normal (0.4472, 0, -0.8944).
"""

import math

import numpy as np
import pytest

from stereolab import (
    CameraIntrinsics,
    D2NConfig,
    DisparityMap,
    NormalAngles,
    NormalMap,
    Plane,
    SceneSpec,
    StereoRig,
    angles_to_normal,
    d2n_transform,
    erode_mask,
    normal_map_angles,
    normal_to_angles,
    normalize_normals,
    render_stereo,
)

from conftest import constant_disparity


def angles_between(values: np.ndarray, expected: np.ndarray) -> np.ndarray:
    dots = np.clip(values.astype(np.float64) @ expected, -1.0, 1.0)
    return np.degrees(np.arccos(dots))


class TestD2NTransform:
    def test_fronto_parallel_is_exact(self, rig):
        nm = d2n_transform(constant_disparity(24.0, width=20, height=15), rig)
        assert nm.mask.all()
        # exact equality, not approximate: constant depth means zero slopes
        assert np.array_equal(nm.values[:, :, 0], np.zeros((15, 20), np.float32))
        assert np.array_equal(nm.values[:, :, 1], np.zeros((15, 20), np.float32))
        assert np.array_equal(nm.values[:, :, 2], np.full((15, 20), -1.0, np.float32))

    def test_tilted_plane_matches_analytic_gradient(self):
        rig = StereoRig(CameraIntrinsics(100.0, 100.0, 32.0, 24.0), 0.1)
        scene = SceneSpec((Plane([0.0, 0.0, 1.0], [0.5, 0.0, -1.0]),))
        render = render_stereo(scene, rig, 64, 48)
        nm = d2n_transform(render.gt_disparity, rig)
        expected = np.array([0.5, 0.0, -1.0]) / np.linalg.norm([0.5, 0.0, -1.0])
        np.testing.assert_allclose(expected, [0.4472135955, 0.0, -0.8944271910],
                                   atol=1e-9)
        interior = erode_mask(nm.mask, 2)
        errors = angles_between(nm.values[interior], expected)
        assert errors.mean() <= 1.0
        assert errors.max() <= 1.0

    def test_isolated_pixel_is_masked(self, rig):
        values = np.full((5, 5), np.nan, dtype=np.float32)
        values[2, 2] = 10.0
        nm = d2n_transform(DisparityMap(values), rig)
        assert not nm.mask.any()

    def test_border_pixels_use_one_sided_neighbors(self, rig):
        nm = d2n_transform(constant_disparity(10.0, width=6, height=4), rig)
        assert nm.mask.all()  # corners included: one x-pair and one y-pair each

    def test_missing_row_of_neighbors_masks_pixel(self, rig):
        values = np.full((5, 5), 10.0, dtype=np.float32)
        values[:, 0:2] = np.nan
        values[:, 3:] = np.nan  # column 2 survives: no horizontal neighbors
        nm = d2n_transform(DisparityMap(values), rig)
        assert not nm.mask.any()

    def test_unit_length_everywhere(self, rig):
        rng = np.random.default_rng(21)
        values = rng.uniform(5.0, 50.0, size=(12, 16)).astype(np.float32)
        nm = d2n_transform(DisparityMap(values), rig)
        norms = np.linalg.norm(nm.values[nm.mask].astype(np.float64), axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-6

    def test_nz_never_positive(self, rig):
        rng = np.random.default_rng(22)
        values = rng.uniform(5.0, 50.0, size=(12, 16)).astype(np.float32)
        nm = d2n_transform(DisparityMap(values), rig)
        assert (nm.values[nm.mask][:, 2] < 0).all()

    def test_plane_error_bounded_across_resolutions(self):
        # The slope quotient between backprojected neighbors is exact for
        # planes at any pixel pitch, so refining resolution neither helps
        # nor hurts; the 1-degree bound must hold at every size.
        normal = np.array([0.3, -0.2, -1.0])
        expected = normal / np.linalg.norm(normal)
        for width, height in ((32, 24), (64, 48), (128, 96)):
            f = 2.5 * width
            rig = StereoRig(CameraIntrinsics(f, f, width / 2, height / 2), 0.1)
            scene = SceneSpec((Plane([0.0, 0.0, 2.0], normal),))
            render = render_stereo(scene, rig, width, height)
            nm = d2n_transform(render.gt_disparity, rig)
            interior = erode_mask(nm.mask, 2)
            errors = angles_between(nm.values[interior], expected)
            assert errors.mean() <= 1.0, f"{width}x{height}: {errors.mean()}"

    def test_config_requires_neighbors(self):
        with pytest.raises(ValueError):
            D2NConfig(use_left=False, use_right=False)
        with pytest.raises(ValueError):
            D2NConfig(use_up=False, use_down=False)
        with pytest.raises(ValueError):
            D2NConfig(slope_epsilon=0.0)
        with pytest.raises(ValueError):
            D2NConfig(aggregation="median")

    def test_one_sided_config(self, rig):
        cfg = D2NConfig(use_left=False, use_down=False)
        nm = d2n_transform(constant_disparity(10.0, width=6, height=4), rig)
        one_sided = d2n_transform(constant_disparity(10.0, width=6, height=4), rig, cfg)
        # rightmost column has no right neighbor, top row no up neighbor
        assert not one_sided.mask[:, -1].any()
        assert not one_sided.mask[0, :].any()
        assert one_sided.mask[1:, :-1].all()
        np.testing.assert_array_equal(one_sided.values[1:, :-1], nm.values[1:, :-1])


class TestAngleEncoding:
    def test_paper_anchor_directions(self):
        # left wall, floor, right wall, ceiling, camera-facing wall
        assert normal_to_angles((1.0, 0.0, 0.0)) == NormalAngles(0.0, 0.0)
        assert normal_to_angles((0.0, 1.0, 0.0)) == NormalAngles(90.0, 0.0)
        assert normal_to_angles((-1.0, 0.0, 0.0)) == NormalAngles(180.0, 0.0)
        assert normal_to_angles((0.0, -1.0, 0.0)) == NormalAngles(270.0, 0.0)
        pole = normal_to_angles((0.0, 0.0, -1.0))
        assert pole.beta_deg == -90.0
        assert pole.alpha_deg == 0.0  # degenerate alpha pinned for determinism

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            normal_to_angles((0.0, 0.0, -2.0))
        with pytest.raises(ValueError):
            normal_to_angles((0.0, 0.0, 0.0))

    def test_angles_to_normal_anchors(self):
        np.testing.assert_allclose(angles_to_normal(NormalAngles(0.0, 0.0)),
                                   [1.0, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(angles_to_normal(NormalAngles(90.0, 0.0)),
                                   [0.0, 1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(angles_to_normal(NormalAngles(123.0, -90.0)),
                                   [0.0, 0.0, -1.0], atol=1e-15)

    def test_angles_to_normal_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            angles_to_normal(NormalAngles(-1.0, 0.0))
        with pytest.raises(ValueError):
            angles_to_normal(NormalAngles(360.0, 0.0))
        with pytest.raises(ValueError):
            angles_to_normal(NormalAngles(0.0, 0.5))
        with pytest.raises(ValueError):
            angles_to_normal(NormalAngles(0.0, -90.5))

    def test_round_trip_away_from_pole(self):
        rng = np.random.default_rng(23)
        for _ in range(2000):
            angles = NormalAngles(float(rng.uniform(0.0, 360.0)),
                                  float(rng.uniform(-89.99, 0.0)))
            back = normal_to_angles(angles_to_normal(angles))
            assert abs(back.alpha_deg - angles.alpha_deg) <= 1e-6
            assert abs(back.beta_deg - angles.beta_deg) <= 1e-6

    def test_map_angles_match_scalar(self):
        rng = np.random.default_rng(24)
        raw = rng.normal(size=(6, 8, 3))
        raw[:, :, 2] = -np.abs(raw[:, :, 2]) - 0.1
        unit = raw / np.linalg.norm(raw, axis=2, keepdims=True)
        nm = NormalMap(unit.astype(np.float32))
        alpha, beta = normal_map_angles(nm)
        for v in range(6):
            for u in range(8):
                scalar = normal_to_angles(nm.values[v, u])
                assert math.isclose(alpha[v, u], scalar.alpha_deg, abs_tol=1e-9)
                assert math.isclose(beta[v, u], scalar.beta_deg, abs_tol=1e-9)


class TestNormalizeNormals:
    def test_scaling(self):
        values = np.array([[[0.0, 0.0, -2.0], [3.0, 0.0, -4.0], [0.0, 0.0, 0.0]]],
                          dtype=np.float32)
        nm = normalize_normals(NormalMap(values, np.ones((1, 3), bool)))
        np.testing.assert_allclose(nm.values[0, 0], [0.0, 0.0, -1.0], atol=1e-7)
        np.testing.assert_allclose(nm.values[0, 1], [0.6, 0.0, -0.8], atol=1e-7)
        assert not nm.mask[0, 2]

    def test_orientation_is_scale_invariant(self):
        rng = np.random.default_rng(25)
        raw = rng.normal(size=(5, 7, 3)).astype(np.float32)
        for lam in (0.25, 3.0, 1e3):
            a = normalize_normals(NormalMap(raw))
            b = normalize_normals(NormalMap(raw * np.float32(lam)))
            assert np.array_equal(a.mask, b.mask)
            np.testing.assert_allclose(a.values[a.mask], b.values[b.mask], atol=1e-6)
