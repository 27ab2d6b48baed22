"""Analytic renderer: ground-truth exactness, shading and the normal oracle.

Sphere expectations come from a per-pixel brute-force quadratic solver
written independently in this file.
"""

import numpy as np
import pytest

from stereolab import (
    Box,
    CameraIntrinsics,
    Pixel,
    Plane,
    SceneSpec,
    Sphere,
    StereoRig,
    analytic_normal_map,
    analytic_normal_oracle,
    load_scene,
    render_stereo,
    rgb_to_gray,
    save_scene,
    scene_from_dict,
    scene_to_dict,
)


def small_rig(f=100.0, cx=32.0, cy=24.0, baseline=0.1) -> StereoRig:
    return StereoRig(CameraIntrinsics(f, f, cx, cy), baseline)


def ray_through(rig: StereoRig, u: float, v: float) -> np.ndarray:
    k = rig.intrinsics
    return np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])


def brute_force_sphere_depth(center, radius, rig, u, v):
    """Smallest positive ray parameter of the pixel ray vs the sphere."""
    d = ray_through(rig, u, v)
    a = d @ d
    b = 2.0 * (d @ (-np.asarray(center)))
    c = float(np.asarray(center) @ np.asarray(center)) - radius * radius
    disc = b * b - 4 * a * c
    if disc < 0:
        return None
    roots = sorted([(-b - np.sqrt(disc)) / (2 * a), (-b + np.sqrt(disc)) / (2 * a)])
    for t in roots:
        if t > 1e-9:
            return t
    return None


class TestRenderGroundTruth:
    def test_fronto_parallel_plane(self):
        rig = small_rig()
        scene = SceneSpec((Plane([0.0, 0.0, 2.0], [0.0, 0.0, -1.0]),))
        out = render_stereo(scene, rig, 64, 48)
        assert out.gt_disparity.mask.all()
        np.testing.assert_allclose(out.gt_disparity.values, 5.0, rtol=1e-7)
        np.testing.assert_allclose(out.gt_depth.values, 2.0, rtol=1e-7)
        np.testing.assert_allclose(
            out.gt_normal.values,
            np.broadcast_to([0.0, 0.0, -1.0], (48, 64, 3)), atol=1e-7)

    def test_empty_scene_fully_masked(self):
        out = render_stereo(SceneSpec(()), small_rig(), 16, 12)
        assert not out.gt_disparity.mask.any()
        assert not out.gt_normal.mask.any()
        assert not out.gt_depth.mask.any()
        assert (out.left_rgb == 0).all()
        assert (out.primitive_ids == -1).all()

    def test_sphere_against_brute_force(self):
        rig = small_rig()
        center, radius = (0.0, 0.0, 3.0), 1.0
        scene = SceneSpec((Sphere(center, radius),))
        out = render_stereo(scene, rig, 64, 48)
        # center pixel: on-axis hit, camera-facing normal
        np.testing.assert_allclose(out.gt_normal.values[24, 32], [0, 0, -1], atol=1e-6)
        for v in range(0, 48, 5):
            for u in range(0, 64, 5):
                t = brute_force_sphere_depth(center, radius, rig, u, v)
                if t is None:
                    assert not out.gt_depth.mask[v, u]
                else:
                    assert out.gt_depth.mask[v, u]
                    assert out.gt_depth.values[v, u] == pytest.approx(t, rel=1e-6)

    def test_sphere_disparity_peaks_at_center(self):
        rig = small_rig()
        out = render_stereo(SceneSpec((Sphere((0.0, 0.0, 3.0), 1.0),)), rig, 65, 49)
        row = out.gt_disparity.values[24, :].astype(np.float64)
        mask = out.gt_disparity.mask[24, :]
        cols = np.nonzero(mask)[0]
        center = 32
        assert row[center] == mask[cols].max() * row[cols].max()
        left = row[cols[cols <= center]]
        right = row[cols[cols >= center]]
        assert np.all(np.diff(left) >= -1e-6)  # increasing toward the center
        assert np.all(np.diff(right) <= 1e-6)

    def test_disparity_depth_rig_consistency(self):
        rig = small_rig(f=120.0, baseline=0.25)
        scene = SceneSpec((
            Plane([0.0, 0.0, 4.0], [0.1, -0.2, -1.0]),
            Sphere((0.2, -0.1, 2.5), 0.8),
            Box([-1.0, -0.8, 1.2], [-0.2, 0.0, 1.8]),
        ))
        out = render_stereo(scene, rig, 64, 48)
        mask = out.gt_depth.mask
        disparity = out.gt_disparity.values[mask].astype(np.float64)
        depth = out.gt_depth.values[mask].astype(np.float64)
        np.testing.assert_allclose(disparity, rig.intrinsics.fx * rig.baseline / depth,
                                   rtol=1e-6)

    def test_normals_face_the_camera(self):
        rig = small_rig(f=120.0, baseline=0.25)
        scene = SceneSpec((
            Plane([0.0, 0.0, 4.0], [0.1, -0.2, 1.0]),  # normal given facing away
            Sphere((0.2, -0.1, 2.5), 0.8),
            Box([-1.0, -0.8, 1.2], [-0.2, 0.0, 1.8]),
        ))
        out = render_stereo(scene, rig, 64, 48)
        k = rig.intrinsics
        u = (np.arange(64) - k.cx) / k.fx
        v = (np.arange(48) - k.cy) / k.fy
        rays = np.stack(np.broadcast_arrays(u[None, :], v[:, None],
                                            np.ones((48, 64))), axis=2)
        dots = (out.gt_normal.values * rays).sum(axis=2)[out.gt_normal.mask]
        assert (dots <= 1e-12).all()
        lengths = np.linalg.norm(
            out.gt_normal.values[out.gt_normal.mask].astype(np.float64), axis=1)
        assert np.abs(lengths - 1.0).max() <= 1e-6

    def test_box_face_normals(self):
        rig = small_rig()
        out = render_stereo(SceneSpec((Box([-0.5, -0.5, 2.0], [0.5, 0.5, 3.0]),)),
                            rig, 64, 48)
        np.testing.assert_allclose(out.gt_normal.values[24, 32], [0, 0, -1], atol=1e-12)
        np.testing.assert_allclose(out.gt_depth.values[24, 32], 2.0, rtol=1e-7)

    def test_nearest_hit_wins(self):
        rig = small_rig()
        near = Plane([0.0, 0.0, 1.5], [0.0, 0.0, -1.0], albedo=(1.0, 0.0, 0.0))
        far = Plane([0.0, 0.0, 3.0], [0.0, 0.0, -1.0], albedo=(0.0, 1.0, 0.0))
        out = render_stereo(SceneSpec((far, near)), rig, 16, 12)
        assert (out.primitive_ids == 1).all()
        np.testing.assert_allclose(out.gt_depth.values, 1.5, rtol=1e-7)

    def test_zero_size_rejected(self):
        with pytest.raises(ValueError):
            render_stereo(SceneSpec(()), small_rig(), 0, 10)


class TestShading:
    def dyadic_fixture(self):
        # powers of two and integer disparity make the left/right float
        # paths bit-identical: f=128, z=2, b = 5 * 2 / 128
        rig = StereoRig(CameraIntrinsics(128.0, 128.0, 32.0, 24.0), 0.078125)
        scene = SceneSpec((Plane([0.0, 0.0, 2.0], [0.0, 0.0, -1.0],
                                 albedo=(0.6, 0.6, 0.6)),))
        return rig, scene, 5

    def test_left_right_photometric_consistency_exact(self):
        rig, scene, d = self.dyadic_fixture()
        out = render_stereo(scene, rig, 64, 48)
        np.testing.assert_array_equal(out.gt_disparity.values,
                                      np.full((48, 64), d, np.float32))
        gray_left = rgb_to_gray(out.left_rgb).values
        gray_right = rgb_to_gray(out.right_rgb).values
        np.testing.assert_array_equal(gray_left[:, d:], gray_right[:, :-d])

    def test_lambert_shading_value(self):
        # headlight at the origin: pixel value = rint(albedo * |n.L| * 255)
        rig = small_rig()
        scene = SceneSpec((Plane([0.0, 0.0, 2.0], [0.0, 0.0, -1.0],
                                 albedo=(0.5, 0.25, 1.0)),))
        out = render_stereo(scene, rig, 64, 48)
        k = rig.intrinsics
        u, v = 10, 40
        ray = np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])
        point = ray * 2.0
        lambert = abs(point[2] / np.linalg.norm(point) * -1.0)
        expected = np.rint(np.array([0.5, 0.25, 1.0]) * lambert * 255.0)
        np.testing.assert_array_equal(out.left_rgb[v, u], expected.astype(np.uint8))

    def test_gain_saturates_for_overexposure_fixtures(self):
        rig = small_rig()
        scene = SceneSpec((Plane([0.0, 0.0, 2.0], [0.0, 0.0, -1.0]),), gain=50.0)
        out = render_stereo(scene, rig, 32, 24)
        assert (out.left_rgb == 255).all()
        assert (out.right_rgb == 255).all()


class TestNormalOracle:
    def test_fronto_parallel_plane(self):
        scene = SceneSpec((Plane([0.0, 0.0, 2.0], [0.0, 0.0, -1.0]),))
        n = analytic_normal_oracle(scene, small_rig(), Pixel(10.0, 44.0))
        np.testing.assert_allclose(n, [0.0, 0.0, -1.0], atol=1e-12)

    def test_tilted_plane(self):
        # plane z = 1 + 0.5 x has normal direction (0.5, 0, -1)
        scene = SceneSpec((Plane([0.0, 0.0, 1.0], [0.5, 0.0, -1.0]),))
        n = analytic_normal_oracle(scene, small_rig(), Pixel(32.0, 24.0))
        np.testing.assert_allclose(n, [0.4472135955, 0.0, -0.894427191], atol=1e-9)

    def test_no_hit_is_none(self):
        scene = SceneSpec((Sphere((0.0, 0.0, 3.0), 0.2),))
        assert analytic_normal_oracle(scene, small_rig(), Pixel(0.0, 0.0)) is None

    def test_dense_map_matches_scalar_oracle(self):
        rig = small_rig()
        scene = SceneSpec((Plane([0.0, 0.0, 3.0], [0.1, 0.2, -1.0]),
                           Sphere((0.0, 0.1, 2.0), 0.6)))
        dense, ids = analytic_normal_map(scene, rig, 16, 12)
        for v in range(12):
            for u in range(16):
                n = analytic_normal_oracle(scene, rig, Pixel(float(u), float(v)))
                if n is None:
                    assert not dense.mask[v, u]
                    assert ids[v, u] == -1
                else:
                    np.testing.assert_allclose(dense.values[v, u], n, atol=1e-6)

    def test_sphere_tangent_pixel_normal_perpendicular_to_ray(self):
        # Geometry: center (0,0,2), ray direction (0.5, 0, 1); tangency at
        # (0.5^2+1)(4-r^2) = 4, nudged slightly inward to guarantee a hit.
        rig = small_rig(f=100.0, cx=50.0, cy=50.0)
        r2 = 0.8 * (1.0 + 1e-13)
        sphere = Sphere((0.0, 0.0, 2.0), float(np.sqrt(r2)))
        pixel = Pixel(rig.intrinsics.cx + rig.intrinsics.fx * 0.5, rig.intrinsics.cy)
        ray = ray_through(rig, pixel.u, pixel.v)
        ray_unit = ray / np.linalg.norm(ray)
        # brute-force geometric check: the ray passes at distance ~r
        perp = np.asarray(sphere.center) - (np.asarray(sphere.center) @ ray_unit) * ray_unit
        assert np.linalg.norm(perp) == pytest.approx(sphere.radius, rel=1e-9)
        n = analytic_normal_oracle(SceneSpec((sphere,)), rig, pixel)
        assert n is not None
        assert abs(n @ ray_unit) <= 1e-6


class TestSceneJson:
    def test_round_trip(self, tmp_path):
        scene = SceneSpec((
            Plane([0.0, 1.0, 2.0], [0.0, 0.0, -1.0], albedo=(0.1, 0.2, 0.3)),
            Sphere((0.5, -0.5, 3.0), 0.75, albedo=(1.0, 1.0, 1.0)),
            Box([-1.0, -1.0, 1.0], [1.0, 1.0, 2.0]),
        ), gain=2.5)
        path = tmp_path / "scene.json"
        save_scene(scene, path)
        loaded = load_scene(path)
        assert scene_to_dict(loaded) == scene_to_dict(scene)

    def test_plane_normal_is_normalized_on_load(self):
        scene = scene_from_dict({"primitives": [
            {"type": "plane", "point": [0, 0, 2], "normal": [0, 0, -4]}]})
        np.testing.assert_allclose(scene.primitives[0].normal, [0.0, 0.0, -1.0])

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            scene_from_dict({"primitives": [{"type": "wedge"}]})
        with pytest.raises(ValueError):
            scene_from_dict({"primitives": [{"type": "sphere", "center": [0, 0, 1],
                                             "radius": -1.0}]})
        with pytest.raises(ValueError):
            scene_from_dict({"primitives": [{"type": "box", "min": [1, 0, 0],
                                             "max": [0, 1, 1]}]})
        with pytest.raises(ValueError):
            scene_from_dict({"primitives": [{"type": "plane", "point": [0, 0, 1]}]})
        with pytest.raises(ValueError):
            scene_from_dict({"primitives": [
                {"type": "plane", "point": [0, 0, 1], "normal": [0, 0, -1],
                 "albedo": [2.0, 0.0, 0.0]}]})
