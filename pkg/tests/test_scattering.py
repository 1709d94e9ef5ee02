import numpy as np
import pytest
from hypothesis import given, strategies as st

from ghostscatter.grid import ComplexField, make_grid, total_power
from ghostscatter.scattering import (MediumParams, ScatteringLayer, apply_layer,
                                     ballistic_fraction, broadening_model, gaussian_psf,
                                     layer_from_medium, psf_kernel, psf_norm)

LAM = 650e-9


@pytest.mark.parametrize("dx", [0.01e-3, 0.74e-3, 1.36e-3])
@pytest.mark.parametrize("pitch", [5e-6, 10e-6, 20e-6])
def test_psf_unit_energy(dx, pitch):
    g = make_grid(2048, pitch)
    p = gaussian_psf(dx, g)
    assert abs(np.sum(p * p) * pitch - 1) <= 1e-12


def test_psf_unit_energy_2d():
    g = make_grid(128, 10e-6, 2)
    p = gaussian_psf(0.1e-3, g)
    assert abs(np.sum(p * p) * g.cell - 1) <= 1e-12


def test_continuous_peak_value():
    g = make_grid(8192, 1e-3)
    assert psf_norm(1.0, g) == pytest.approx((2 / np.pi) ** 0.25, rel=1e-9)
    assert (2 / np.pi) ** 0.25 == pytest.approx(0.8932, abs=1e-4)


def test_amplitude_width_at_one_over_e():
    g = make_grid(2048, 10e-6)
    p = gaussian_psf(1.36e-3, g)
    x = g.coordinates()
    y = p / p.max()
    right = x >= 0
    xr, yr = x[right], y[right]
    k = np.nonzero(yr < np.exp(-1))[0][0]
    cross = xr[k - 1] + (yr[k - 1] - np.exp(-1)) / (yr[k - 1] - yr[k]) * (xr[k] - xr[k - 1])
    assert 2 * cross == pytest.approx(2.72e-3, rel=1e-3)


def test_kernel_sum_grows_as_root_width():
    g = make_grid(4096, 5e-6)
    for dx in (20e-6, 80e-6, 320e-6):
        expected = (2 * np.pi) ** 0.25 * np.sqrt(dx / g.pitch)
        assert psf_kernel(dx, g).sum() == pytest.approx(expected, rel=1e-9)


def test_width_below_quarter_pitch_rejected():
    with pytest.raises(ValueError):
        gaussian_psf(1e-6, make_grid(64, 10e-6))


# ---------------------------------------------------------------- layers


def test_layer_validation():
    with pytest.raises(ValueError):
        ScatteringLayer(0.9, 0.9, 1e-4, 1e-3)
    with pytest.raises(ValueError):
        ScatteringLayer(0.6, 0.8, 1e-4, 0.0)
    with pytest.raises(ValueError):
        ScatteringLayer(0.6, 0.8, -1e-4, 1e-3)
    ScatteringLayer(0.6, 0.8, 1e-4, 1e-3)


def _random_field(g, seed):
    r = np.random.default_rng(seed)
    return ComplexField(g, r.standard_normal(g.shape) + 1j * r.standard_normal(g.shape), LAM)


def test_ballistic_layer_is_identity():
    g = make_grid(64, 1e-5)
    f = _random_field(g, 0)
    out = apply_layer(f, ScatteringLayer.transparent())
    np.testing.assert_array_equal(out.amplitude, f.amplitude)


def test_impulse_response_is_scattered_profile():
    g = make_grid(512, 10e-6)
    a = np.zeros(512, complex)
    a[256] = 1 / np.sqrt(g.pitch)  # unit-power impulse
    layer = ScatteringLayer(0.0, 1.0, 0.2e-3, 1e-3)
    out = apply_layer(ComplexField(g, a, LAM), layer).amplitude
    np.testing.assert_allclose(out.real, gaussian_psf(0.2e-3, g), atol=1e-12)
    assert np.max(np.abs(out.imag)) < 1e-12


def test_plane_wave_gain_matches_direct_sum():
    g = make_grid(1024, 10e-6)
    dx = 0.1e-3
    s = 1 / np.sqrt(2)
    out = apply_layer(ComplexField(g, np.ones(1024), LAM), ScatteringLayer(s, s, dx, 1e-3)).amplitude
    k = psf_kernel(dx, g)
    gain = s * (1 + k.sum())
    direct = s * (1 + np.convolve(np.ones(1024), k)[512:1536])
    interior = slice(256, 768)
    np.testing.assert_allclose(out[interior].real, gain, rtol=1e-12)
    np.testing.assert_allclose(out[interior].real, direct[interior], rtol=1e-12)


def test_plane_wave_energy_split():
    g = make_grid(1024, 10e-6)
    dx = 50e-6
    a, b = 0.6, 0.8
    f = ComplexField(g, np.ones(1024), LAM)
    out = apply_layer(f, ScatteringLayer(a, b, dx, 1e-3)).amplitude
    interior = slice(300, 724)
    gain = abs(a + b * psf_kernel(dx, g).sum()) ** 2
    np.testing.assert_allclose(np.abs(out[interior]) ** 2, gain, rtol=1e-12)


def test_linear_convolution_matches_numpy():
    g = make_grid(256, 10e-6)
    f = _random_field(g, 3)
    layer = ScatteringLayer(0.6, 0.8, 80e-6, 1e-3)
    out = apply_layer(f, layer).amplitude
    # kernel centre sits at index n/2, so the aligned slice of the full convolution starts there
    full = np.convolve(f.amplitude, psf_kernel(80e-6, g))
    ref = 0.6 * f.amplitude + 0.8 * full[g.n // 2: g.n // 2 + g.n]
    np.testing.assert_allclose(out, ref, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=5, allow_nan=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False))
def test_layer_is_linear(seed, ca, cb):
    g = make_grid(128, 10e-6)
    f, h = _random_field(g, seed), _random_field(g, seed + 1)
    layer = ScatteringLayer(0.6, 0.8, 60e-6, 1e-3)
    lhs = apply_layer(f.with_amplitude(ca * f.amplitude + cb * h.amplitude), layer).amplitude
    rhs = ca * apply_layer(f, layer).amplitude + cb * apply_layer(h, layer).amplitude
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(40e-6, 300e-6),
       st.floats(40e-6, 300e-6))
def test_layers_commute(s1, s2, dx1, dx2):
    g = make_grid(512, 10e-6)
    x = g.coordinates()
    f = ComplexField(g, np.exp(-(x / 0.2e-3) ** 2) * np.exp(3j * x / 1e-4), LAM)
    l1 = ScatteringLayer(np.sqrt(1 - s1 * s1), s1, dx1, 1e-3)
    l2 = ScatteringLayer(np.sqrt(1 - s2 * s2), s2, dx2, 1e-3)
    a = apply_layer(apply_layer(f, l1), l2).amplitude
    b = apply_layer(apply_layer(f, l2), l1).amplitude
    assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(a))


def test_layer_2d_separable():
    g = make_grid(64, 10e-6, 2)
    a = np.zeros((64, 64), complex)
    a[32, 32] = 1 / g.pitch
    out = apply_layer(ComplexField(g, a, LAM), ScatteringLayer(0.0, 1.0, 40e-6, 1e-3)).amplitude
    p = gaussian_psf(40e-6, g)
    np.testing.assert_allclose(out.real, p, atol=1e-12 * p.max())
    assert total_power(ComplexField(g, out, LAM)) == pytest.approx(1.0, rel=1e-10)


# ---------------------------------------------------------------- medium models


def test_transparent_medium():
    assert ballistic_fraction(0.0, 0.04) == (1.0, 0.0)


def test_beer_lambert_anchor():
    a, b = ballistic_fraction(164.0, 0.04)
    assert (b / a) ** 2 == pytest.approx(np.expm1(6.56), rel=1e-12)
    assert abs((b / a) ** 2 / 694 - 1) <= 0.03


def test_half_ballistic_point():
    a, b = ballistic_fraction(np.log(2) / 0.01, 0.01)
    assert a * a == pytest.approx(0.5, rel=1e-12) and b * b == pytest.approx(0.5, rel=1e-12)


@given(st.floats(0, 1e4), st.floats(0, 0.1))
def test_beer_lambert_unit_norm(mu, L):
    a, b = ballistic_fraction(mu, L)
    assert a * a + b * b == pytest.approx(1.0, abs=1e-12)


def test_direct_width_mode():
    p = MediumParams(k_x=1.36e-3)
    for L in (0.001, 0.02, 0.04):
        assert broadening_model(p, L)[1] == pytest.approx(1.36e-3, rel=1e-12)


def test_linear_broadening_law():
    p = MediumParams(k_x=1.36e-3 / 0.04, d_x=1.0)
    assert broadening_model(p, 0.02)[1] == pytest.approx(0.68e-3, rel=1e-12)


def test_zero_thickness_zero_width():
    p = MediumParams(k_x=0.9, d_x=0.87801)
    assert broadening_model(p, 0.0)[1] == 0.0


def test_layer_from_medium_beer_lambert():
    p = MediumParams(k_x=1.36e-3, mu_s=164.0)
    layer = layer_from_medium(p, 0.04)
    a, b = ballistic_fraction(164.0, 0.04)
    assert (layer.alpha, layer.beta) == (a, b)
    assert layer.delta_x == pytest.approx(1.36e-3)
    assert not layer_from_medium(p, 0.0).scatters
