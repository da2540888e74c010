import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from creps.biline import BilineFeature, compose, compose_pixel, compose_subset, storage_ratio


def random_feature(seed, channels=3, height=4, width=4, thickness=8, dtype=np.float64):
    rng = np.random.default_rng(seed)
    return BilineFeature(
        rng.normal(size=(channels, height, thickness)).astype(dtype),
        rng.normal(size=(channels, width, thickness)).astype(dtype),
    )


def brute_force(b):
    out = np.zeros((b.channels, b.height, b.width), dtype=np.float64)
    for c in range(b.channels):
        for i in range(b.height):
            for j in range(b.width):
                acc = 0.0
                for d in range(b.thickness):
                    acc += float(b.row_half[c, i, d]) * float(b.col_half[c, j, d])
                out[c, i, j] = acc
    return out


class TestCompose:
    def test_single_product(self):
        b = BilineFeature(np.array([[[2.0]]]), np.array([[[3.0]]]))
        assert compose(b).tolist() == [[[6.0]]]

    def test_orthonormal_factors_give_identity(self):
        eye = np.eye(2)[None]
        b = BilineFeature(eye, eye)
        assert np.array_equal(compose(b), np.eye(2)[None])

    def test_matches_brute_force_float64(self):
        b = random_feature(0)
        assert np.max(np.abs(compose(b) - brute_force(b))) <= 1e-12

    def test_matches_brute_force_float32(self):
        b = random_feature(0, dtype=np.float32)
        assert np.max(np.abs(compose(b) - brute_force(b))) <= 1e-6

    def test_rank_bounded_by_thickness(self):
        for thickness in (1, 2, 4):
            b = random_feature(thickness, channels=1, height=12, width=12, thickness=thickness)
            sv = np.linalg.svd(compose(b)[0], compute_uv=False)
            assert sv[thickness] <= 1e-10 * sv[0]


class TestComposePixel:
    def test_equals_full_composition_bitwise(self):
        b = random_feature(1)
        full = compose(b)
        for i in range(b.height):
            for j in range(b.width):
                assert np.array_equal(compose_pixel(b, i, j), full[:, i, j])

    def test_zero_column_half_annihilates(self):
        b = BilineFeature(np.ones((2, 3, 4)), np.zeros((2, 3, 4)))
        assert np.all(compose_pixel(b, 1, 2) == 0.0)

    def test_out_of_range_rejected(self):
        b = random_feature(2)
        with pytest.raises(IndexError):
            compose_pixel(b, b.height, 0)
        with pytest.raises(IndexError):
            compose_pixel(b, 0, -1)


class TestComposeSubset:
    def test_full_subset_is_compose(self):
        b = random_feature(3)
        got = compose_subset(b, range(b.height), range(b.width))
        assert np.array_equal(got, compose(b))

    def test_singleton_is_pixel(self):
        b = random_feature(4)
        assert np.array_equal(compose_subset(b, [2], [1])[:, 0, 0], compose_pixel(b, 2, 1))

    def test_random_subsets_restrict_exactly(self):
        b = random_feature(5, channels=2, height=9, width=7, thickness=5)
        full = compose(b)
        rng = np.random.default_rng(6)
        for _ in range(10):
            rows = rng.integers(0, b.height, size=4)
            cols = rng.integers(0, b.width, size=3)
            got = compose_subset(b, rows, cols)
            assert np.array_equal(got, full[np.ix_(range(b.channels), rows, cols)])

    def test_duplicates_allowed(self):
        b = random_feature(7)
        got = compose_subset(b, [1, 1], [0, 0])
        assert np.array_equal(got[:, 0, 0], got[:, 1, 1])

    def test_out_of_range_rejected(self):
        b = random_feature(8)
        with pytest.raises(IndexError):
            compose_subset(b, [0, b.height], [0])


class TestStorageRatio:
    def test_thickness_8_at_512(self):
        b = random_feature(0, height=4, width=4, thickness=8)
        assert storage_ratio(b, 512, 512) == pytest.approx(0.03125)

    def test_thickness_32_at_512(self):
        b = random_feature(0, height=4, width=4, thickness=32)
        assert storage_ratio(b, 512, 512) == pytest.approx(0.125)

    def test_thickness_1_at_512(self):
        b = random_feature(0, height=4, width=4, thickness=1)
        assert storage_ratio(b, 512, 512) == pytest.approx(2.0 / 512.0)

    def test_defaults_to_own_shape(self):
        b = random_feature(0, height=10, width=20, thickness=2)
        assert storage_ratio(b) == pytest.approx(2 * 30 / 200)


class TestAlgebraicProperties:
    @given(alpha=st.floats(-8, 8, allow_nan=False))
    @settings(max_examples=40, deadline=None)
    def test_bilinearity_in_row_half(self, alpha):
        b = random_feature(9)
        scaled = BilineFeature(alpha * b.row_half, b.col_half)
        assert np.max(np.abs(compose(scaled) - alpha * compose(b))) <= 1e-12 * max(1.0, abs(alpha))

    @given(alpha=st.floats(-8, 8, allow_nan=False))
    @settings(max_examples=40, deadline=None)
    def test_bilinearity_in_col_half(self, alpha):
        b = random_feature(10)
        scaled = BilineFeature(b.row_half, alpha * b.col_half)
        assert np.max(np.abs(compose(scaled) - alpha * compose(b))) <= 1e-12 * max(1.0, abs(alpha))

    def test_thickness_concatenation_adds_compositions(self):
        a = random_feature(11, thickness=3)
        b = random_feature(12, thickness=5)
        joined = BilineFeature(
            np.concatenate([a.row_half, b.row_half], axis=2),
            np.concatenate([a.col_half, b.col_half], axis=2),
        )
        assert np.max(np.abs(compose(joined) - (compose(a) + compose(b)))) <= 1e-12


class TestValidation:
    def test_channel_mismatch(self):
        with pytest.raises(ValueError):
            BilineFeature(np.zeros((2, 3, 4)), np.zeros((3, 3, 4)))

    def test_thickness_mismatch(self):
        with pytest.raises(ValueError):
            BilineFeature(np.zeros((2, 3, 4)), np.zeros((2, 3, 5)))

    def test_nonfinite_rejected(self):
        bad = np.zeros((1, 2, 2))
        bad[0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            BilineFeature(bad, np.zeros((1, 2, 2)))

    def test_stacked_view_requires_square(self):
        b = random_feature(13, height=3, width=3, thickness=2)
        stacked = b.stacked()
        assert stacked.shape == (3, 3, 4)
        assert np.array_equal(stacked[:, :, :2], b.row_half)
        rect = random_feature(14, height=3, width=5)
        with pytest.raises(ValueError):
            rect.stacked()
