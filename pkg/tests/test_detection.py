import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from ghostscatter.detection import (DetectorSpec, NoiseSpec, add_noise, bucket_value, camera_bin,
                                    measure_intensity, point_value)
from ghostscatter.grid import ComplexField, IntensityFrame, make_grid

LAM = 650e-9


def test_unit_amplitude_gives_ones():
    g = make_grid(32, 1e-5)
    np.testing.assert_array_equal(measure_intensity(ComplexField(g, np.ones(32), LAM)).values, 1.0)


def test_zero_field_gives_zeros():
    g = make_grid(32, 1e-5)
    assert not measure_intensity(ComplexField(g, np.zeros(32), LAM)).values.any()


def test_phase_only_field_gives_ones():
    g = make_grid(32, 1e-5)
    a = np.exp(1j * np.linspace(0, 20, 32))
    np.testing.assert_allclose(measure_intensity(ComplexField(g, a, LAM)).values, 1.0, rtol=1e-15)


@given(hnp.arrays(complex, 16, elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False)))
def test_intensity_non_negative(a):
    assert (measure_intensity(ComplexField(make_grid(16, 1e-5), a, LAM)).values >= 0).all()


def test_bucket_uniform():
    g = make_grid(1000, 10e-6)
    assert bucket_value(IntensityFrame(g, np.ones(1000)), DetectorSpec("bucket")) == pytest.approx(0.01)


def test_bucket_zero():
    g = make_grid(64, 1e-5)
    assert bucket_value(IntensityFrame(g, np.zeros(64)), DetectorSpec("bucket")) == 0.0


def test_bucket_halves_add_up():
    g = make_grid(64, 1e-5)
    v = np.random.default_rng(0).random(64)
    fr = IntensityFrame(g, v)
    x = g.coordinates()
    left = bucket_value(IntensityFrame(g, v * (x < 0)), DetectorSpec("bucket"))
    right = bucket_value(IntensityFrame(g, v * (x >= 0)), DetectorSpec("bucket"))
    assert left + right == pytest.approx(bucket_value(fr, DetectorSpec("bucket")), rel=1e-14)


def test_bucket_extent_limits_area():
    g = make_grid(100, 1e-5)
    spec = DetectorSpec("bucket", extent=20e-5)
    assert bucket_value(IntensityFrame(g, np.ones(100)), spec) == pytest.approx(21 * 1e-5)


def test_bin_ratio_one_identity():
    g = make_grid(64, 1e-5)
    fr = IntensityFrame(g, np.random.default_rng(1).random(64))
    assert camera_bin(fr, DetectorSpec("camera", pixel_pitch=1e-5)) is fr


@pytest.mark.parametrize("r", [2, 4, 8])
def test_bin_uniform_frame(r):
    g = make_grid(64, 1e-5)
    out = camera_bin(IntensityFrame(g, np.full(64, 3.5)), DetectorSpec("camera", pixel_pitch=r * 1e-5))
    np.testing.assert_allclose(out.values, 3.5)
    assert out.grid.n == 64 // r and out.grid.pitch == pytest.approx(r * 1e-5)


def test_bin_single_sample():
    g = make_grid(64, 1e-5)
    v = np.zeros(64)
    v[13] = 2.0
    out = camera_bin(IntensityFrame(g, v), DetectorSpec("camera", pixel_pitch=4e-5)).values
    assert out[3] == pytest.approx(0.5)
    assert np.count_nonzero(out) == 1


@given(hnp.arrays(float, 64, elements=st.floats(0, 1e3)), st.sampled_from([1, 2, 4, 8]))
def test_binning_preserves_bucket(v, r):
    g = make_grid(64, 1e-5)
    fr = IntensityFrame(g, v)
    binned = camera_bin(fr, DetectorSpec("camera", pixel_pitch=r * 1e-5))
    b = DetectorSpec("bucket")
    assert bucket_value(binned, b) == pytest.approx(bucket_value(fr, b), rel=1e-10, abs=1e-300)


def test_bin_2d():
    g = make_grid(16, 1e-5, 2)
    v = np.arange(256.0).reshape(16, 16)
    out = camera_bin(IntensityFrame(g, v), DetectorSpec("camera", pixel_pitch=2e-5)).values
    assert out.shape == (8, 8)
    assert out[0, 0] == pytest.approx(np.mean([0, 1, 16, 17]))


@pytest.mark.parametrize("pitch", [1.5e-5, 0.5e-5, 3e-5])
def test_bad_pixel_pitch(pitch):
    with pytest.raises(ValueError):
        DetectorSpec("camera", pixel_pitch=pitch).validate(make_grid(64, 1e-5))


def test_point_value():
    g = make_grid(32, 1e-5)
    v = np.arange(32.0)
    assert point_value(IntensityFrame(g, v), DetectorSpec("point", x=3e-5)) == 19.0


def test_noise_disabled_by_default():
    g = make_grid(16, 1e-5)
    fr = IntensityFrame(g, np.ones(16))
    assert add_noise(fr, NoiseSpec(), np.random.default_rng(0)) is fr


def test_gaussian_noise_is_clipped():
    g = make_grid(4096, 1e-5)
    out = add_noise(IntensityFrame(g, np.full(4096, 0.1)), NoiseSpec("gaussian", 1.0),
                    np.random.default_rng(0))
    assert (out.values >= 0).all() and np.ptp(out.values) > 0


def test_shot_noise_mean():
    g = make_grid(4096, 1e-5)
    out = add_noise(IntensityFrame(g, np.full(4096, 2.0)), NoiseSpec("shot", photons_per_unit=100),
                    np.random.default_rng(0))
    assert out.values.mean() == pytest.approx(2.0, abs=5 * np.sqrt(2.0 / 100 / 4096))
