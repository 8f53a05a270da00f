import numpy as np
import pytest

from fovea.geometry import (
    BBox,
    DetectionSet,
    ImageBuffer,
    Point,
    pixel_centers,
    sample_bilinear,
    uniform_downsample,
)

from oracles import bilinear


def make_image(values):
    return ImageBuffer(np.asarray(values, dtype=np.float32))


class TestImageBuffer:
    def test_shape_and_properties(self):
        img = make_image(np.zeros((4, 6, 3)))
        assert (img.width, img.height, img.channels) == (6, 4, 3)

    def test_grayscale_promoted_to_3d(self):
        img = make_image(np.zeros((4, 6)))
        assert img.channels == 1

    def test_rejects_bad_channel_count(self):
        with pytest.raises(ValueError, match="channel count"):
            make_image(np.zeros((4, 6, 5)))

    def test_rejects_nonfinite(self):
        data = np.zeros((2, 2))
        data[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            make_image(data)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            make_image(np.full((2, 2), 1.5))

    def test_uint8_round_trip(self):
        arr = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
        img = ImageBuffer.from_uint8(arr)
        assert np.array_equal(img.to_uint8(), arr)

    def test_to_uint8_rounds_half_away_from_zero(self):
        # 126.5 would round to 126 under banker's rounding
        img = make_image(np.array([[[126.5 / 255], [127.5 / 255]]]))
        assert img.to_uint8().ravel().tolist() == [127, 128]

    def test_data_is_immutable(self):
        img = make_image(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1.0


class TestBoxTypes:
    def test_point_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Point(np.inf, 0.0)

    def test_bbox_rejects_degenerate(self):
        with pytest.raises(ValueError, match="degenerate"):
            BBox(0.5, 0.1, 0.5, 0.2)
        with pytest.raises(ValueError, match="degenerate"):
            BBox(0.1, 0.5, 0.2, 0.4)

    def test_bbox_allows_out_of_frame(self):
        b = BBox(-0.2, -0.1, 0.3, 0.2)
        assert b.w == pytest.approx(0.5)

    def test_bbox_rejects_unknown_space(self):
        with pytest.raises(ValueError, match="space"):
            BBox(0.0, 0.0, 1.0, 1.0, space="banana")

    def test_detection_set_defaults(self):
        ds = DetectionSet((BBox(0.1, 0.1, 0.2, 0.2),))
        assert ds.scores == (1.0,)
        assert ds.class_ids == (-1,)
        assert len(ds) == 1

    def test_detection_set_rejects_length_mismatch(self):
        with pytest.raises(ValueError, match="parallel lists"):
            DetectionSet((BBox(0.1, 0.1, 0.2, 0.2),), scores=(0.5, 0.6))

    def test_detection_set_rejects_mixed_spaces(self):
        with pytest.raises(ValueError, match="spaces"):
            DetectionSet((BBox(0.1, 0.1, 0.2, 0.2), BBox(0.1, 0.1, 0.2, 0.2, space="warped")))

    def test_detection_set_rejects_bad_score(self):
        with pytest.raises(ValueError, match="score"):
            DetectionSet((BBox(0.1, 0.1, 0.2, 0.2),), scores=(1.5,))


class TestSampleBilinear:
    def test_single_pixel_constant(self):
        img = make_image(np.full((1, 1), 0.7))
        for p in (Point(0.5, 0.5), Point(0.0, 1.0), Point(-3.0, 7.0)):
            assert sample_bilinear(img, p)[0] == pytest.approx(0.7)

    def test_two_pixel_ramp_midpoint(self):
        img = make_image(np.array([[0.0, 1.0]]))
        assert sample_bilinear(img, Point(0.5, 0.5))[0] == pytest.approx(0.5)

    def test_three_by_three_frozen_value(self):
        # brute-force four-neighbor oracle value for p=(0.4, 0.6)
        img = make_image(np.arange(9).reshape(3, 3) * 0.1)
        assert sample_bilinear(img, Point(0.4, 0.6))[0] == pytest.approx(0.46, abs=1e-6)

    def test_matches_oracle_on_random_images(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            h, w = rng.integers(1, 12, size=2)
            values = rng.random((h, w))
            img = make_image(values)
            listed = values.tolist()
            for _ in range(25):
                x, y = rng.uniform(-0.3, 1.3, size=2)
                got = sample_bilinear(img, Point(x, y))[0]
                assert got == pytest.approx(bilinear(listed, x, y), abs=1e-6)

    def test_exact_at_pixel_centers(self):
        rng = np.random.default_rng(4)
        for h, w in ((3, 7), (5, 5), (1, 13), (31, 2)):
            values = rng.random((h, w)).astype(np.float32)
            img = ImageBuffer(values)
            for i in (0, w // 2, w - 1):
                for j in (0, h // 2, h - 1):
                    p = Point((i + 0.5) / w, (j + 0.5) / h)
                    assert sample_bilinear(img, p)[0] == values[j, i]

    def test_within_neighbor_range(self):
        rng = np.random.default_rng(5)
        img = make_image(rng.random((9, 9)))
        for _ in range(200):
            x, y = rng.uniform(0, 1, size=2)
            got = sample_bilinear(img, Point(x, y))[0]
            assert img.data.min() - 1e-6 <= got <= img.data.max() + 1e-6

    def test_clamps_to_edge_pixel_centers(self):
        rng = np.random.default_rng(6)
        img = make_image(rng.random((4, 5)))
        pairs = [
            (Point(-0.7, 0.3), Point(0.0, 0.3)),
            (Point(0.4, 1.9), Point(0.4, 1.0)),
            (Point(2.0, -1.0), Point(1.0, 0.0)),
        ]
        for outside, clamped in pairs:
            assert np.array_equal(sample_bilinear(img, outside), sample_bilinear(img, clamped))

    def test_multichannel(self):
        img = make_image(np.stack([np.full((2, 2), 0.2), np.full((2, 2), 0.8)], axis=2))
        got = sample_bilinear(img, Point(0.5, 0.5))
        assert got.shape == (2,)
        assert got[0] == pytest.approx(0.2) and got[1] == pytest.approx(0.8)


class TestUniformDownsample:
    def test_identity_dimensions(self):
        rng = np.random.default_rng(7)
        img = make_image(rng.random((6, 9, 3)))
        out = uniform_downsample(img, 9, 6)
        assert np.allclose(out.data, img.data, atol=1e-6)

    def test_symmetric_average(self):
        img = make_image(np.array([[0.0, 1.0], [1.0, 0.0]]))
        out = uniform_downsample(img, 1, 1)
        assert out.data[0, 0, 0] == pytest.approx(0.5)

    def test_constant_image_full_size(self):
        img = make_image(np.full((1200, 1920), 0.37, dtype=np.float32))
        out = uniform_downsample(img, 960, 600)
        assert (out.width, out.height) == (960, 600)
        assert np.all(out.data == np.float32(0.37))

    def test_rejects_bad_dims(self):
        img = make_image(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            uniform_downsample(img, 0, 1)

    def test_matches_oracle(self):
        rng = np.random.default_rng(8)
        values = rng.random((7, 11))
        img = make_image(values)
        out = uniform_downsample(img, 4, 3)
        listed = values.tolist()
        for j in range(3):
            for i in range(4):
                want = bilinear(listed, (i + 0.5) / 4, (j + 0.5) / 3)
                assert out.data[j, i, 0] == pytest.approx(want, abs=1e-6)


def test_pixel_centers():
    assert np.allclose(pixel_centers(4), [0.125, 0.375, 0.625, 0.875])
