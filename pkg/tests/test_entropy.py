import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmfd.entropy import compute_entropy_map, entropy_ceiling, sample_entropy


def naive_entropy_map(img: np.ndarray, radius: int) -> np.ndarray:
    """Independent oracle: per-pixel histogram built from scratch.

    Windows clip at the borders and probabilities renormalize over the
    pixels present.
    """
    h, w = img.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            window = img[
                max(0, y - radius) : min(h, y + radius + 1),
                max(0, x - radius) : min(w, x + radius + 1),
            ]
            counts = np.bincount(window.ravel(), minlength=256)
            p = counts[counts > 0] / window.size
            out[y, x] = float(-np.sum(p * np.log2(p)))
    return out


class TestComputeEntropyMap:
    def test_constant_image_is_all_zero(self):
        img = np.full((40, 50), 77, dtype=np.uint8)
        out = compute_entropy_map(img, 3)
        assert out.shape == img.shape
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_window_of_49_distinct_values_hits_log2_49(self):
        # a 7x7 tile of 49 distinct intensities, tiled so every interior
        # window is a permutation of the same 49 values
        tile = np.arange(49, dtype=np.uint8).reshape(7, 7)
        img = np.tile(tile, (5, 5))
        out = compute_entropy_map(img, 3)
        expected = np.log2(49.0)
        assert abs(expected - 5.615) < 1e-3
        np.testing.assert_allclose(out[3:-3, 3:-3], expected, atol=1e-9)

    def test_two_equiprobable_values_give_one_bit(self):
        # radius 1 on a 2x2 image clips every window to the full image,
        # an exact half/half split of two symbols
        img = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        out = compute_entropy_map(img, 1)
        np.testing.assert_allclose(out, 1.0, atol=1e-12)

    def test_matches_oracle_on_striped_image(self):
        stripes = np.zeros((9, 8), dtype=np.uint8)
        stripes[:, 1::2] = 200
        got = compute_entropy_map(stripes, 3)
        np.testing.assert_allclose(got, naive_entropy_map(stripes, 3), atol=1e-9)

    def test_matches_naive_oracle_on_random_images(self, rng):
        for _ in range(3):
            img = rng.integers(0, 256, size=(24, 31), dtype=np.uint8)
            got = compute_entropy_map(img, 3)
            want = naive_entropy_map(img, 3)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_matches_oracle_with_radius_1_and_2(self, rng):
        for radius in (1, 2):
            img = rng.integers(0, 8, size=(17, 13), dtype=np.uint8)
            np.testing.assert_allclose(
                compute_entropy_map(img, radius),
                naive_entropy_map(img, radius),
                atol=1e-9,
            )

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            compute_entropy_map(np.zeros((4, 4), dtype=np.uint8), 0)

    @given(st.integers(0, 10_000))
    @settings(max_examples=10)
    def test_range_bound(self, seed):
        rng = np.random.default_rng(seed)
        img = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        out = compute_entropy_map(img, 3)
        assert (out >= 0).all()
        assert (out <= entropy_ceiling(3) + 1e-12).all()

    @given(st.integers(0, 10_000))
    @settings(max_examples=10)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        img = rng.integers(0, 256, size=(20, 20), dtype=np.uint8)
        perm = rng.permutation(256).astype(np.uint8)
        base = compute_entropy_map(img, 3)
        remapped = compute_entropy_map(perm[img], 3)
        np.testing.assert_array_equal(base, remapped)

    @given(st.integers(2, 6), st.integers(0, 1000))
    @settings(max_examples=10)
    def test_k_distinct_values_bounded_by_log2_k(self, k, seed):
        rng = np.random.default_rng(seed)
        values = rng.choice(256, size=k, replace=False).astype(np.uint8)
        img = values[rng.integers(0, k, size=(25, 25))]
        out = compute_entropy_map(img, 3)
        assert (out <= np.log2(k) + 1e-9).all()


class TestSampleEntropy:
    def test_rounds_half_up(self):
        emap = np.arange(30 * 30, dtype=np.float64).reshape(30, 30)
        assert sample_entropy(emap, 10.4, 20.6) == emap[21, 10]
        assert sample_entropy(emap, 10.5, 20.5) == emap[21, 11]

    def test_integer_coordinate_exact(self):
        emap = np.random.default_rng(0).uniform(0, 5, size=(8, 8))
        assert sample_entropy(emap, 3.0, 4.0) == emap[4, 3]

    def test_constant_map_reads_zero(self):
        emap = np.zeros((5, 5))
        assert sample_entropy(emap, 2.2, 2.8) == 0.0

    def test_out_of_bounds_raises(self):
        emap = np.zeros((5, 5))
        with pytest.raises(ValueError):
            sample_entropy(emap, 4.6, 0.0)  # rounds to x=5, outside
