"""Map type construction, mask inference and immutability."""

import numpy as np
import pytest

from stereolab import DepthMap, DisparityMap, NormalMap, erode_mask


class TestDisparityMap:
    def test_inferred_mask_excludes_nonpositive_and_nonfinite(self):
        values = np.array([[1.0, 0.0], [-2.0, np.nan]], dtype=np.float32)
        dm = DisparityMap(values)
        assert dm.mask.tolist() == [[True, False], [False, False]]
        assert dm.valid_count == 1

    def test_explicit_mask_may_keep_zero_disparity(self):
        values = np.zeros((2, 2), dtype=np.float32)
        dm = DisparityMap(values, np.ones((2, 2), bool))
        assert dm.mask.all()

    def test_explicit_mask_never_keeps_nonfinite(self):
        values = np.array([[np.nan, 1.0]], dtype=np.float32)
        dm = DisparityMap(values, np.ones((1, 2), bool))
        assert dm.mask.tolist() == [[False, True]]

    def test_mask_shape_must_match(self):
        with pytest.raises(ValueError):
            DisparityMap(np.ones((2, 3), np.float32), np.ones((3, 2), bool))

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            DisparityMap(np.ones(5, np.float32))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            DisparityMap(np.ones((0, 4), np.float32))

    def test_values_stored_float32_readonly(self):
        dm = DisparityMap(np.ones((2, 2)))
        assert dm.values.dtype == np.float32
        with pytest.raises(ValueError):
            dm.values[0, 0] = 2.0
        with pytest.raises(ValueError):
            dm.mask[0, 0] = False


class TestDepthMap:
    def test_inferred_mask(self):
        values = np.array([[0.5, np.inf], [0.0, 3.0]], dtype=np.float32)
        dm = DepthMap(values)
        assert dm.mask.tolist() == [[True, False], [False, True]]


class TestNormalMap:
    def test_requires_three_channels(self):
        with pytest.raises(ValueError):
            NormalMap(np.ones((2, 2, 2), np.float32))

    def test_zero_vectors_invalid_by_default(self):
        values = np.zeros((1, 2, 3), dtype=np.float32)
        values[0, 1] = (0.0, 0.0, -1.0)
        nm = NormalMap(values)
        assert nm.mask.tolist() == [[False, True]]

    def test_nan_channel_invalidates_pixel(self):
        values = np.full((1, 1, 3), 0.5, dtype=np.float32)
        values[0, 0, 1] = np.nan
        nm = NormalMap(values, np.ones((1, 1), bool))
        assert not nm.mask[0, 0]


class TestErodeMask:
    def test_single_pass_strips_border(self):
        mask = np.ones((5, 7), bool)
        eroded = erode_mask(mask, 1)
        assert eroded.sum() == 3 * 5
        assert eroded[1:-1, 1:-1].all()
        assert not eroded[0].any() and not eroded[-1].any()

    def test_hole_grows(self):
        mask = np.ones((7, 7), bool)
        mask[3, 3] = False
        eroded = erode_mask(mask, 1)
        assert not eroded[2:5, 2:5].any()
        assert eroded[1, 1]

    def test_two_passes_equal_two_single_passes(self):
        rng = np.random.default_rng(3)
        mask = rng.random((20, 30)) > 0.3
        assert np.array_equal(erode_mask(mask, 2), erode_mask(erode_mask(mask, 1), 1))
