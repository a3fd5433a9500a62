"""Raster image I/O and classical transform tests.

The frozen base64 blobs below were produced by an independent PNG encoder
(Pillow) and pin the decoder against a reference implementation.
"""

import base64

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evoaug.errors import ConfigError, FormatError, IoError
from evoaug.raster import (
    ClassicalAugConfig,
    ClassicalTransformSpec,
    RasterImage,
    apply_transform,
    decode_png,
    encode_png,
    load_image,
    sample_classical_spec,
    save_image,
)

# 1x1 RGB PNG with the single pixel (255, 0, 0), reference-encoded.
RED_1X1_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAIAAACQd1PeAAAADElEQVR4nGP4z8AAAAMBAQDJ/pLvAAAAAElFTkSuQmCC"
)
# 6x5 RGB gradient, reference-encoded with scanline filtering enabled.
GRAD_6X5_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAYAAAAFCAIAAADpOgqxAAAAJElEQVR42mNkYOcTRQWMda096EJ/mLnQhaoaO9CFfvxnQxMCACp1DFqqe3BJAAAAAElFTkSuQmCC"
)
# 4x4 grayscale ramp (0, 16, ..., 240), reference-encoded.
GRAY_4X4_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAQAAAAECAAAAACMmsGiAAAAHElEQVR4nGNkEBAQYHQQEBBgcRAQEGA8ICAgAAAQRAIIZJJl5AAAAABJRU5ErkJggg=="
)


class TestRasterImage:
    def test_invariants(self):
        with pytest.raises(ValueError):
            RasterImage(width=0, height=1, channels=3, data=b"")
        with pytest.raises(ValueError):
            RasterImage(width=1, height=1, channels=2, data=b"ab")
        with pytest.raises(ValueError):
            RasterImage(width=2, height=2, channels=3, data=b"short")

    def test_array_round_trip(self, rng):
        arr = rng.integers(0, 256, (5, 7, 3)).astype(np.uint8)
        img = RasterImage.from_array(arr)
        assert img.width == 7 and img.height == 5 and img.channels == 3
        assert np.array_equal(img.to_array(), arr)


class TestPngCodec:
    def test_reference_red_pixel(self):
        img = decode_png(RED_1X1_PNG)
        assert (img.width, img.height, img.channels) == (1, 1, 3)
        assert list(img.data) == [255, 0, 0]

    def test_reference_gradient(self):
        expected = (np.arange(6 * 5 * 3).reshape(5, 6, 3) * 7 % 256).astype(np.uint8)
        img = decode_png(GRAD_6X5_PNG)
        assert np.array_equal(img.to_array(), expected)

    def test_reference_grayscale(self):
        expected = (np.arange(16).reshape(4, 4) * 16).astype(np.uint8)
        img = decode_png(GRAY_4X4_PNG)
        assert img.channels == 1
        assert np.array_equal(img.to_array()[:, :, 0], expected)

    def test_pillow_reads_our_png(self, small_image):
        PIL = pytest.importorskip("PIL.Image")
        import io

        decoded = PIL.open(io.BytesIO(encode_png(small_image)))
        assert np.array_equal(np.asarray(decoded), small_image.to_array())

    def test_save_load_round_trip(self, tmp_path, rng):
        img = RasterImage.from_array(rng.integers(0, 256, (64, 64, 3)).astype(np.uint8))
        save_image(img, tmp_path / "x.png")
        assert load_image(tmp_path / "x.png") == img

    def test_gray_round_trip(self, tmp_path, gray_image):
        save_image(gray_image, tmp_path / "g.png")
        loaded = load_image(tmp_path / "g.png")
        assert loaded.channels == 1
        assert loaded == gray_image

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_image(tmp_path / "nope.png")

    def test_corrupt_is_format_error(self, tmp_path):
        blob = bytearray(RED_1X1_PNG)
        blob[20] ^= 0xFF  # break the IHDR CRC
        path = tmp_path / "bad.png"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load_image(path)

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not an image at all")
        with pytest.raises(FormatError):
            load_image(path)

    @settings(max_examples=25, deadline=None)
    @given(
        w=st.integers(1, 9),
        h=st.integers(1, 9),
        c=st.sampled_from([1, 3]),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_png_round_trip_property(self, w, h, c, seed):
        arr = np.random.default_rng(seed).integers(0, 256, (h, w, c)).astype(np.uint8)
        img = RasterImage.from_array(arr)
        assert decode_png(encode_png(img)) == img


class TestPpm:
    def test_zero_ppm(self, tmp_path):
        path = tmp_path / "z.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
        img = load_image(path)
        assert (img.width, img.height, img.channels) == (2, 2, 3)
        assert img.data == bytes(12)

    def test_ppm_with_comment(self, tmp_path):
        path = tmp_path / "c.ppm"
        path.write_bytes(b"P6\n# a comment\n1 1\n255\n\x07\x08\x09")
        assert load_image(path).data == b"\x07\x08\x09"

    def test_ppm_truncated(self, tmp_path):
        path = tmp_path / "t.ppm"
        path.write_bytes(b"P6\n2 2\n255\n\x00\x00")
        with pytest.raises(FormatError):
            load_image(path)


class TestApplyTransform:
    def test_identity_is_exact(self, small_image):
        out = apply_transform(small_image, ClassicalTransformSpec())
        assert out.data == small_image.data

    def test_double_hflip_exact(self, small_image):
        spec = ClassicalTransformSpec(hflip=True)
        assert apply_transform(apply_transform(small_image, spec), spec).data == small_image.data

    def test_double_vflip_exact(self, small_image):
        spec = ClassicalTransformSpec(vflip=True)
        assert apply_transform(apply_transform(small_image, spec), spec).data == small_image.data

    @pytest.mark.parametrize("degrees,k", [(90, 3), (-90, 1), (180, 2)])
    def test_axis_aligned_rotation_permutation(self, rng, degrees, k):
        # np.rot90 is the independent oracle for exact 90-degree permutations;
        # positive angles here rotate content clockwise on screen (y axis down).
        arr = rng.integers(0, 256, (4, 4, 3)).astype(np.uint8)
        out = apply_transform(
            RasterImage.from_array(arr), ClassicalTransformSpec(rotate_degrees=degrees)
        )
        assert np.array_equal(out.to_array(), np.rot90(arr, k=k))

    def test_dims_never_change(self, rng):
        img = RasterImage.from_array(rng.integers(0, 256, (9, 5, 3)).astype(np.uint8))
        spec = ClassicalTransformSpec(
            crop_fraction=0.7,
            translate_xy=(0.1, -0.2),
            scale=1.5,
            rotate_degrees=33.0,
            hflip=True,
            brightness=1.3,
            contrast=0.7,
            saturation=1.2,
        )
        out = apply_transform(img, spec)
        assert (out.width, out.height, out.channels) == (img.width, img.height, img.channels)

    def test_brightness_scales_values(self):
        img = RasterImage.from_array(np.full((3, 3, 3), 100, dtype=np.uint8))
        out = apply_transform(img, ClassicalTransformSpec(brightness=1.5))
        assert np.all(out.to_array() == 150)

    def test_jitter_clamps(self):
        img = RasterImage.from_array(np.full((3, 3, 3), 200, dtype=np.uint8))
        out = apply_transform(img, ClassicalTransformSpec(brightness=1.5))
        assert np.all(out.to_array() == 255)

    def test_spec_bounds_enforced(self):
        with pytest.raises(ValueError):
            ClassicalTransformSpec(crop_fraction=0.0)
        with pytest.raises(ValueError):
            ClassicalTransformSpec(scale=3.0)
        with pytest.raises(ValueError):
            ClassicalTransformSpec(brightness=0.2)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_output_stays_in_byte_range(self, seed):
        gen = np.random.default_rng(seed)
        img = RasterImage.from_array(gen.integers(0, 256, (6, 6, 3)).astype(np.uint8))
        spec = sample_classical_spec(gen)
        out = apply_transform(img, spec)
        assert len(out.data) == len(img.data)  # uint8 storage enforces [0, 255]


class TestSampleSpec:
    def test_identity_config(self, rng):
        spec = sample_classical_spec(rng, ClassicalAugConfig.identity())
        assert spec.is_identity

    def test_deterministic_given_seed(self):
        a = sample_classical_spec(np.random.default_rng(42))
        b = sample_classical_spec(np.random.default_rng(42))
        assert a == b

    def test_activation_rate(self):
        # Binomial bound: 10_000 draws at p=0.5 stay within 0.5 +/- 0.02 for
        # these fixed seeds (3-sigma is ~0.015).
        gen = np.random.default_rng(777)
        hits = sum(
            sample_classical_spec(gen).rotate_degrees is not None for _ in range(10_000)
        )
        assert abs(hits / 10_000 - 0.5) < 0.02

    def test_config_rejects_out_of_bounds(self):
        with pytest.raises(ConfigError):
            ClassicalAugConfig(rotate_range=(-200.0, 30.0))
        with pytest.raises(ConfigError):
            ClassicalAugConfig(crop_range=(0.0, 1.0))
        with pytest.raises(ConfigError):
            ClassicalAugConfig(crop_prob=1.5)

    def test_sampled_specs_satisfy_invariants(self):
        # Bulk invariant sweep over 100_000 seeded draws; constructing the
        # spec dataclass runs its range validation.
        gen = np.random.default_rng(2024)
        for _ in range(100_000):
            spec = sample_classical_spec(gen)
            if spec.crop_fraction is not None:
                assert 0.0 < spec.crop_fraction <= 1.0
