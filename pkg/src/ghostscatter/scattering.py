"""Thin scattering screens: ballistic plus Gaussian-broadened amplitude.

A layer maps a field ``f`` to ``alpha * f + beta * (k * f)`` where ``k`` is a
sampled Gaussian point-scattering kernel. The continuous profile is
``(2 / (pi dx^2))**0.25 * exp(-(x/dx)**2)``, whose square integrates to one.
On the grid that profile ``P`` is renormalized so ``sum |P|^2 * cell == 1``,
and the convolution kernel is ``k = P * sqrt(cell)`` so that ``sum k^2 == 1``:
each sample scatters unit probability into its neighbourhood, independent of
the sampling pitch.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import ComplexField, GridSpec

__all__ = [
    "ScatteringLayer",
    "MediumParams",
    "gaussian_psf",
    "psf_kernel",
    "psf_norm",
    "apply_layer",
    "ballistic_fraction",
    "broadening_model",
    "layer_from_medium",
]


@dataclass(frozen=True)
class ScatteringLayer:
    """Ballistic/scattered amplitude split with Gaussian broadening width.

    Parameters
    ----------
    alpha, beta : complex
        Ballistic and scattered amplitudes, ``|alpha|^2 + |beta|^2 == 1``.
    delta_x : float
        Broadening width in meters (1/e half width of the amplitude).
    thickness : float
        Medium thickness in meters. Zero thickness forces ``beta == 0``.
    """

    alpha: complex = 1.0
    beta: complex = 0.0
    delta_x: float = 1e-5
    thickness: float = 0.0
    label: str = ""

    def __post_init__(self):
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1) > 1e-12:
            raise ValueError("|alpha|^2 + |beta|^2 must equal 1")
        if not self.delta_x > 0:
            raise ValueError("delta_x must be positive")
        if self.thickness < 0:
            raise ValueError("thickness must be non-negative")
        if self.thickness == 0 and self.beta != 0:
            raise ValueError("a zero-thickness layer cannot scatter (beta must be 0)")

    @classmethod
    def transparent(cls, label: str = "") -> "ScatteringLayer":
        return cls(1.0, 0.0, 1e-5, 0.0, label)

    @property
    def scatters(self) -> bool:
        return self.beta != 0


@dataclass(frozen=True)
class MediumParams:
    """Physical description of a turbid medium and its broadening power law.

    ``delta_x = k_x * D**a_x * w**c_x * L**d_x * n**e_x / wavelength**b_x`` and
    the same form with the ``beta`` exponents for ``beta_scale``. The default
    exponents are all zero, so the constants are used directly.
    """

    particle_diameter: float = 3.26e-6
    concentration: float = 0.0
    refractive_index: float = 1.0
    wavelength: float = 650e-9
    mu_s: float = 0.0
    a_beta: float = 0.0
    b_beta: float = 0.0
    c_beta: float = 0.0
    d_beta: float = 0.0
    e_beta: float = 0.0
    a_x: float = 0.0
    b_x: float = 0.0
    c_x: float = 0.0
    d_x: float = 0.0
    e_x: float = 0.0
    k_beta: float = 1.0
    k_x: float = 1e-5

    def __post_init__(self):
        for name in ("particle_diameter", "wavelength", "mu_s", "concentration"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.refractive_index < 1:
            raise ValueError("refractive index must be >= 1")


def psf_norm(delta_x: float, grid: GridSpec) -> float:
    """Peak value of the discretely normalized profile (1-D factor)."""
    return _psf_1d(float(delta_x), grid.n, grid.pitch)[1]


@lru_cache(maxsize=64)
def _psf_1d(delta_x: float, n: int, pitch: float):
    x = (np.arange(n) - n // 2) * pitch
    p = (2 / (np.pi * delta_x**2)) ** 0.25 * np.exp(-((x / delta_x) ** 2))
    c = 1 / np.sqrt(np.sum(p * p) * pitch)
    p = p * c
    p.flags.writeable = False
    return p, float(c * (2 / (np.pi * delta_x**2)) ** 0.25)


def _check_width(delta_x: float, grid: GridSpec):
    if not delta_x > 0:
        raise ValueError("delta_x must be positive")
    if delta_x < grid.pitch / 4:
        raise ValueError(
            f"delta_x {delta_x} m is below a quarter pitch ({grid.pitch / 4} m); "
            "treat the layer as ballistic instead")


def gaussian_psf(delta_x: float, grid: GridSpec) -> np.ndarray:
    """Sampled Gaussian point-scattering profile with ``sum |P|^2 * cell == 1``.

    In 2-D the profile is the separable product of two 1-D profiles.
    """
    _check_width(delta_x, grid)
    p, _ = _psf_1d(float(delta_x), grid.n, grid.pitch)
    if grid.dim == 1:
        return p.copy()
    return np.outer(p, p)


def psf_kernel(delta_x: float, grid: GridSpec) -> np.ndarray:
    """Per-sample convolution kernel ``P * sqrt(cell)`` (unit sum of squares)."""
    return gaussian_psf(delta_x, grid) * np.sqrt(grid.cell)


@lru_cache(maxsize=64)
def _kernel_spectrum(delta_x: float, n: int, pitch: float) -> np.ndarray:
    # spectrum of the 1-D kernel placed for a linear convolution on 2n samples
    p, _ = _psf_1d(delta_x, n, pitch)
    k = np.zeros(2 * n)
    k[:n] = p * np.sqrt(pitch)
    # kernel centre (index n/2) goes to index 0 so the output stays aligned
    k = np.roll(k, -(n // 2))
    s = np.fft.fft(k)
    s.flags.writeable = False
    return s


def _convolve(a: np.ndarray, delta_x: float, grid: GridSpec) -> np.ndarray:
    n = grid.n
    s = _kernel_spectrum(float(delta_x), n, grid.pitch)
    out = a
    for ax in range(a.ndim - grid.dim, a.ndim):
        spec = np.fft.fft(out, n=2 * n, axis=ax)
        shape = [1] * a.ndim
        shape[ax] = 2 * n
        full = np.fft.ifft(spec * s.reshape(shape), axis=ax)
        out = np.take(full, np.arange(n), axis=ax)
    return out


def apply_layer(f: ComplexField, layer: ScatteringLayer) -> ComplexField:
    """Pass a field through a thin scattering screen.

    Returns ``alpha * f + beta * (k * f)`` with a zero-padded linear
    convolution, cropped back to the grid.
    """
    if layer.thickness == 0 or layer.beta == 0:
        if layer.alpha == 1:
            return f
        return f.with_amplitude(layer.alpha * f.amplitude)
    _check_width(layer.delta_x, f.grid)
    a = np.asarray(f.amplitude)
    out = layer.alpha * a + layer.beta * _convolve(a, layer.delta_x, f.grid)
    return f.with_amplitude(out)


def ballistic_fraction(mu_s: float, L: float) -> tuple[float, float]:
    """Beer-Lambert split: ``alpha = exp(-mu_s L / 2)``, ``beta = sqrt(1 - alpha^2)``."""
    if mu_s < 0 or L < 0:
        raise ValueError("mu_s and L must be non-negative")
    alpha = float(np.exp(-mu_s * L / 2))
    # -expm1 keeps beta accurate when the medium is nearly transparent
    beta = float(np.sqrt(-np.expm1(-mu_s * L)))
    return alpha, beta


def _power_law(k, D, w, L, n, lam, a, b, c, d, e) -> float:
    with np.errstate(divide="ignore"):
        terms = [k]
        for base, ex in ((D, a), (w, c), (L, d), (n, e)):
            terms.append(1.0 if ex == 0 else base**ex)
        terms.append(1.0 if b == 0 else lam ** (-b))
    return float(np.prod(terms))


def broadening_model(p: MediumParams, L: float) -> tuple[float, float]:
    """Evaluate the broadening power laws at thickness ``L``.

    Returns
    -------
    beta_scale : float
        Scattered-amplitude magnitude clamped to ``[0, 1]``.
    delta_x : float
        Broadening width in meters.
    """
    if L < 0:
        raise ValueError("thickness must be non-negative")
    dx = _power_law(p.k_x, p.particle_diameter, p.concentration, L,
                    p.refractive_index, p.wavelength, p.a_x, p.b_x, p.c_x, p.d_x, p.e_x)
    bs = _power_law(p.k_beta, p.particle_diameter, p.concentration, L,
                    p.refractive_index, p.wavelength, p.a_beta, p.b_beta, p.c_beta,
                    p.d_beta, p.e_beta)
    if not (dx >= 0 and bs >= 0) or not (np.isfinite(dx) and np.isfinite(bs)):
        raise ValueError(f"broadening model gives invalid values ({bs}, {dx})")
    return min(bs, 1.0), dx


def layer_from_medium(p: MediumParams, L: float, label: str = "",
                      split: str = "beer-lambert") -> ScatteringLayer:
    """Layer of thickness ``L`` from medium parameters.

    ``split="beer-lambert"`` takes the amplitudes from ``mu_s``;
    ``split="model"`` uses the clamped ``beta_scale`` of the power law.
    """
    if L == 0:
        return ScatteringLayer.transparent(label)
    bs, dx = broadening_model(p, L)
    if split == "beer-lambert":
        alpha, beta = ballistic_fraction(p.mu_s, L)
    elif split == "model":
        beta = bs
        alpha = float(np.sqrt(1 - bs * bs))
    else:
        raise ValueError(f"unknown amplitude split {split!r}")
    if beta == 0:
        return ScatteringLayer(1.0, 0.0, max(dx, 1e-12), L, label)
    return ScatteringLayer(alpha, beta, dx, L, label)
