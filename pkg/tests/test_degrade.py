"""Tests for the degradation synthesizers."""

import math

import numpy as np
import pytest

from fctl.core.exceptions import DomainError, ShapeError
from fctl.core.registry import call_degrader, get_all_degraders, get_degrader
from fctl.core.tensor import ImageRGB
from fctl.degrade.transforms import (
    DegradeConstants,
    DegradeKind,
    DegradeSpec,
    apply_bayer,
    apply_dark,
    apply_fog,
    apply_rain,
    bayer_mask,
    degrade_image,
    intensity_levels,
    spec_for_image,
)
from fctl.storage.images import decode_ppm, encode_ppm


def _quantized(images, width=16, height=12) -> ImageRGB:
    """Random image whose values survive a PPM roundtrip exactly."""
    return decode_ppm(encode_ppm(images.build(width, height)))


class TestZeroIntensity:
    """Tests for the identity at intensity 0."""

    @pytest.mark.parametrize("kind", [DegradeKind.FOG, DegradeKind.RAIN, DegradeKind.DARK])
    def test_identity_through_ppm(self, images, kind):
        """Test that intensity 0 reproduces the re-encoded input bytes."""
        image = _quantized(images)
        out = degrade_image(image, DegradeSpec(kind=kind, intensity=0.0, seed=5))
        assert out.equals(image)
        assert encode_ppm(out) == encode_ppm(image)


class TestFog:
    """Tests for apply_fog."""

    def test_top_row_of_black_image(self):
        """Test a black top-row pixel at intensity 1 becomes 0.9 * (1 - e^-3)."""
        out = apply_fog(ImageRGB(np.zeros((3, 4, 6))), 1.0)
        assert abs(out.pixels[0, 2, 0] - 0.9 * (1 - math.exp(-3.0))) < 1e-12
        assert abs(out.pixels[0, 2, 0] - 0.8552) < 1e-4

    def test_bottom_row_is_nearest(self):
        """Test the bottom row keeps the most of the scene."""
        out = apply_fog(ImageRGB(np.zeros((3, 2, 5))), 1.0)
        assert out.pixels[0, 0, -1] < out.pixels[0, 0, 0]
        assert abs(out.pixels[0, 0, -1] - 0.9 * (1 - math.exp(-0.6))) < 1e-12

    def test_monotone_in_intensity(self, images):
        """Test |out - airlight| is non-increasing as intensity grows."""
        image = images.build(8, 8)
        distances = [np.abs(apply_fog(image, i).pixels - 0.9) for i in np.linspace(0, 1, 6)]
        for near, far in zip(distances, distances[1:]):
            assert np.all(far <= near + 1e-15)

    def test_out_of_range(self, images):
        """Test intensity outside [0, 1] raises DomainError."""
        with pytest.raises(DomainError):
            apply_fog(images.build(), 1.2)


class TestRain:
    """Tests for apply_rain."""

    def test_deterministic(self, images):
        """Test that the same seed gives identical output."""
        image = images.build(32, 32)
        assert apply_rain(image, 0.7, seed=3).equals(apply_rain(image, 0.7, seed=3))

    def test_seed_matters(self, images):
        """Test that different seeds draw different streaks."""
        image = images.build(32, 32)
        assert not apply_rain(image, 0.4, seed=1).equals(apply_rain(image, 0.4, seed=2))

    @pytest.mark.parametrize("intensity", [0.2, 0.5, 0.9])
    def test_brightens(self, images, intensity):
        """Test mean brightness never decreases."""
        for _ in range(5):
            image = images.build(24, 24)
            out = apply_rain(image, intensity, seed=11)
            assert out.mean_brightness() >= image.mean_brightness()
            assert np.all(out.pixels >= image.pixels)

    def test_range(self):
        """Test that a white image stays within [0, 1]."""
        out = apply_rain(ImageRGB(np.ones((3, 16, 16))), 1.0, seed=0)
        assert out.pixels.max() <= 1.0


class TestDark:
    """Tests for apply_dark."""

    def test_white_pixel_at_full_intensity(self):
        """Test a noiseless white pixel maps to 0.2 ** 2.5."""
        out = apply_dark(ImageRGB(np.ones((3, 2, 2))), 1.0, seed=0, read_noise=False)
        assert abs(out.pixels[1, 1, 1] - 0.2**2.5) < 1e-12
        assert abs(out.pixels[1, 1, 1] - 0.01789) < 1e-5

    def test_darker_with_intensity(self, images):
        """Test mean brightness strictly decreases in noise-free mode."""
        image = images.build(8, 8)
        means = [
            apply_dark(image, i, seed=0, read_noise=False).mean_brightness()
            for i in np.linspace(0, 1, 6)
        ]
        assert all(a > b for a, b in zip(means, means[1:]))

    def test_noise_deterministic(self, images):
        """Test that read noise is seeded."""
        image = images.build(8, 8)
        assert apply_dark(image, 0.6, seed=4).equals(apply_dark(image, 0.6, seed=4))
        assert not apply_dark(image, 0.6, seed=4).equals(apply_dark(image, 0.6, seed=5))


class TestBayer:
    """Tests for apply_bayer."""

    def test_one_channel_per_pixel(self, images):
        """Test exactly one nonzero channel per pixel for positive input."""
        for _ in range(20):
            image = ImageRGB(0.05 + 0.95 * images.build(10, 8).pixels)
            out = apply_bayer(image)
            assert np.all(np.count_nonzero(out.pixels, axis=0) == 1)

    def test_idempotent(self, images):
        """Test that a mosaic of a mosaic is itself."""
        for _ in range(20):
            once = degrade_image(images.build(6, 6), DegradeSpec(kind=DegradeKind.BAYER))
            twice = degrade_image(once, DegradeSpec(kind=DegradeKind.BAYER))
            assert twice.equals(once)

    def test_pure_green(self):
        """Test that a green image survives only at the G sites."""
        pixels = np.zeros((3, 4, 4))
        pixels[1] = 1.0
        out = apply_bayer(ImageRGB(pixels))
        nonzero = out.pixels.sum(axis=0) > 0
        assert nonzero.sum() == 8
        assert np.array_equal(nonzero, bayer_mask(4, 4)[1] > 0)

    def test_channel_sum_selects_input(self, images):
        """Test the channel sum equals the input channel picked by the pattern."""
        image = images.build(6, 4)
        out = apply_bayer(image)
        summed = out.pixels.sum(axis=0)
        for x in range(6):
            for y in range(4):
                channel = 0 if (x % 2, y % 2) == (0, 0) else 2 if (x % 2, y % 2) == (1, 1) else 1
                assert summed[x, y] == image.pixels[channel, x, y]

    def test_odd_dims(self, images):
        """Test that odd width raises ShapeError."""
        with pytest.raises(ShapeError):
            apply_bayer(images.build(5, 4))


class TestDegradeImage:
    """Tests for dispatch, per-image specs and intensity levels."""

    def test_registry_covers_every_kind(self):
        """Test that each kind has a registered synthesizer."""
        assert set(get_all_degraders()) == {kind.value for kind in DegradeKind}
        assert get_degrader("bayer").uses_intensity is False
        assert get_degrader("rain").uses_seed is True

    def test_call_degrader_filters_arguments(self, images):
        """Test that fog ignores the seed and bayer ignores intensity."""
        image = images.build(4, 4)
        assert call_degrader("fog", image, 0.5, 1).equals(call_degrader("fog", image, 0.5, 2))
        assert call_degrader("bayer", image, 0.1, 0).equals(call_degrader("bayer", image, 0.9, 0))

    def test_deterministic(self, images):
        """Test identical (image, spec) gives identical output for every kind."""
        image = images.build(8, 8)
        for kind in DegradeKind:
            spec = DegradeSpec(kind=kind, intensity=0.8, seed=21)
            assert degrade_image(image, spec).equals(degrade_image(image, spec))

    def test_custom_constants(self):
        """Test that constants can be overridden."""
        black = ImageRGB(np.zeros((3, 2, 2)))
        spec = DegradeSpec(kind=DegradeKind.FOG, intensity=1.0)
        out = degrade_image(black, spec, DegradeConstants(fog_airlight=0.5))
        assert out.pixels.max() < 0.5

    def test_spec_validation(self):
        """Test that intensity is validated on the spec."""
        with pytest.raises(ValueError):
            DegradeSpec(kind=DegradeKind.FOG, intensity=1.5)

    def test_intensity_levels(self):
        """Test seven evenly spaced levels ending at the maximum."""
        levels = intensity_levels(0.7)
        assert len(levels) == 7
        assert levels[-1] == pytest.approx(0.7)
        assert levels[0] == pytest.approx(0.1)

    def test_spec_for_image(self):
        """Test per-image seeds and mixed intensities."""
        spec = DegradeSpec(kind=DegradeKind.RAIN, intensity=0.7, seed=9)
        assert spec_for_image(spec, 3).seed == spec_for_image(spec, 3).seed
        assert spec_for_image(spec, 3).seed != spec_for_image(spec, 4).seed
        assert spec_for_image(spec, 3).intensity == 0.7
        mixed = {spec_for_image(spec, i, mixed_intensity=True).intensity for i in range(50)}
        assert mixed <= set(intensity_levels(0.7))
        assert len(mixed) > 1

