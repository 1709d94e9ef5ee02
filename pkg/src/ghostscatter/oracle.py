"""Closed-form prediction of the ghost-imaging correlation through two layers.

The test arm illuminates the object plane with speckle, applies the first
screen, the object and the second screen, and images the object plane onto
the test detector with magnification ``-1/m``. The reference detector sees
the same speckle scaled by ``1/m``. With Gaussian field statistics the
intensity covariance is the squared modulus of the cross-coherence,

    dG(x_r, x_t) = |A(x_r, x_t)|^2,
    A = a2 t(u_t) g(u_t) + b2 sum_i k2(u_t - x_i) t_i g(x_i),
    g(x) = a1 K(x - u_r) + b1 sum_j k1(x - x_j) K(x_j - u_r),

with ``u_r = m x_r`` and ``u_t = -m x_t`` the object-plane points conjugate
to the two detector pixels. ``K`` is the coherence kernel of the speckle
illumination (the finite-width stand-in for a delta function) and ``k1``,
``k2`` are the per-sample scattering kernels of the two screens. Sums run
over the object grid; ``t`` is interpolated linearly off the grid.

All results are shapes: the overall radiometric scale is undefined and is
fitted when comparing against simulations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec
from .optics import ObjectMask
from .scattering import ScatteringLayer, psf_norm
from .source import SourceSpec

__all__ = [
    "CoherenceKernel",
    "SceneSpec",
    "predict_delta_g2",
    "delta_g2_matrix",
    "predict_ccd_image",
    "predict_bucket_image",
    "fit_scale",
]

_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class CoherenceKernel:
    """Normalized mutual coherence of the object-plane illumination.

    ``K(u) = sum_s w_s exp(-2j pi x_s u / scale) / sum_s w_s`` over source
    samples ``x_s`` with weights ``w_s``; ``scale = wavelength * focal`` of
    the illumination lens. ``K(0) == 1``.
    """

    positions: tuple
    weights: tuple
    scale: float

    @classmethod
    def from_source(cls, source: SourceSpec, focal: float) -> "CoherenceKernel":
        """Kernel produced by ``source`` behind a lens of focal length ``focal``."""
        if source.grid.dim != 1:
            raise ValueError("the oracle works on 1-D grids")
        mask = source.aperture_mask()
        x = source.grid.coordinates()[mask]
        w = np.full(x.size, source.mean_intensity)
        return cls(tuple(x), tuple(w), source.wavelength * focal)

    @classmethod
    def point(cls) -> "CoherenceKernel":
        """Fully coherent illumination, ``K == 1`` everywhere."""
        return cls((0.0,), (1.0,), 1.0)

    def _uniform_lattice(self):
        # (first position, spacing, count) when weights are equal and spacing regular
        x = np.asarray(self.positions, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.size < 2 or not np.all(w == w[0]):
            return None
        d = np.diff(x)
        if not np.allclose(d, d[0], rtol=1e-12, atol=0.0):
            return None
        return float(x[0]), float(d[0]), x.size

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lattice = self._uniform_lattice()
        if lattice is not None:
            return self._dirichlet(u, *lattice)
        x = np.asarray(self.positions)
        w = np.asarray(self.weights) / np.sum(self.weights)
        flat = u.ravel()
        out = np.empty(flat.size, dtype=complex)
        step = max(1, _CHUNK_ELEMENTS // x.size)
        for s in range(0, flat.size, step):
            # bounded memory: (chunk, samples) phase block
            out[s:s + step] = np.exp((-2j * np.pi / self.scale) * np.outer(flat[s:s + step], x)) @ w
        return out.reshape(u.shape)

    def _dirichlet(self, u, x0, dx, count):
        # closed-form geometric sum over an evenly spaced, evenly weighted aperture
        half = np.pi * u * dx / self.scale
        centre = x0 + 0.5 * (count - 1) * dx
        den = np.sin(half)
        num = np.sin(count * half)
        small = np.abs(den) < 1e-12
        # at den -> 0 the ratio tends to count * (+-1)^(k (count - 1)) with half = k pi
        k = np.rint(half / np.pi)
        limit = count * np.where((k * (count - 1)) % 2 == 0, 1.0, -1.0)
        ratio = np.where(small, limit, num / np.where(small, 1.0, den))
        return np.exp(-2j * np.pi * u * centre / self.scale) * ratio / count

    def sample_sum(self, grid: GridSpec) -> float:
        """``sum_j K(x_j)`` over the grid: samples inside one coherence area."""
        return float(np.real(self(grid.coordinates()).sum()))


@dataclass(frozen=True)
class SceneSpec:
    """Everything the oracle needs.

    Parameters
    ----------
    object : ObjectMask
        Transmission on the object-plane grid (1-D).
    layer1, layer2 : ScatteringLayer
        Screens before and after the object.
    magnification : float
        Object-plane distance per detector-plane distance (``f1 / f``).
    ref_grid : GridSpec
        Reference detector grid.
    test_grid : GridSpec, optional
        Test detector grid, defaults to ``ref_grid``.
    coherence : CoherenceKernel, optional
        Illumination coherence; ``None`` means a one-sample delta.
    """

    object: ObjectMask
    layer1: ScatteringLayer
    layer2: ScatteringLayer
    magnification: float
    ref_grid: GridSpec
    test_grid: GridSpec | None = None
    coherence: CoherenceKernel | None = None

    def __post_init__(self):
        if not self.magnification > 0:
            raise ValueError("magnification must be positive")
        if self.object.grid.dim != 1:
            raise ValueError("the oracle works on 1-D grids")
        if self.test_grid is None:
            object.__setattr__(self, "test_grid", self.ref_grid)

    @property
    def grid(self) -> GridSpec:
        return self.object.grid


class _Scene:
    """Precomputed object-grid quantities shared by the predictions."""

    def __init__(self, scene: SceneSpec):
        self.s = scene
        g = scene.grid
        self.x = g.coordinates()
        self.t = np.asarray(scene.object.transmission)
        self.sqrt_pitch = np.sqrt(g.pitch)
        self.k1 = self._kernel(scene.layer1)
        self.k2 = self._kernel(scene.layer2)

    def _kernel(self, layer: ScatteringLayer):
        if not layer.scatters:
            return None
        c = psf_norm(layer.delta_x, self.s.grid) * self.sqrt_pitch
        dx = layer.delta_x
        return lambda d: c * np.exp(-((np.asarray(d) / dx) ** 2))

    def K(self, u):
        if self.s.coherence is None:
            # one-sample delta on the object grid
            p = self.s.grid.pitch
            return (np.abs(np.asarray(u)) < p / 2).astype(float)
        return self.s.coherence(u)

    def t_at(self, u):
        u = np.asarray(u, dtype=float)
        re = np.interp(u, self.x, self.t.real, left=0.0, right=0.0)
        im = np.interp(u, self.x, self.t.imag, left=0.0, right=0.0)
        return re + 1j * im


def delta_g2_matrix(scene: SceneSpec, x_r, x_t) -> np.ndarray:
    """Predicted covariance for every pair of ``x_r`` (rows) and ``x_t`` (columns)."""
    sc = _Scene(scene)
    m = scene.magnification
    ur = m * np.atleast_1d(np.asarray(x_r, dtype=float))
    ut = -m * np.atleast_1d(np.asarray(x_t, dtype=float))
    x = sc.x
    a1, b1 = scene.layer1.alpha, scene.layer1.beta
    a2, b2 = scene.layer2.alpha, scene.layer2.beta

    Kg = sc.K(x[None, :] - ur[:, None])                    # (R, n)
    g_at_ut = a1 * sc.K(ut[None, :] - ur[:, None])          # (R, T)
    g_grid = a1 * Kg
    if sc.k1 is not None:
        g_at_ut = g_at_ut + b1 * (Kg @ sc.k1(ut[None, :] - x[:, None]))
        g_grid = g_grid + b1 * (Kg @ sc.k1(x[:, None] - x[None, :]))
    amp = a2 * sc.t_at(ut)[None, :] * g_at_ut
    if sc.k2 is not None:
        amp = amp + b2 * ((g_grid * sc.t[None, :]) @ sc.k2(ut[None, :] - x[:, None]))
    return np.abs(amp) ** 2


def predict_delta_g2(scene: SceneSpec, x_r, x_t):
    """Predicted covariance at paired points ``(x_r, x_t)``, broadcast elementwise."""
    xr, xt = np.broadcast_arrays(np.asarray(x_r, dtype=float), np.asarray(x_t, dtype=float))
    sc = _Scene(scene)
    m = scene.magnification
    ur = m * xr.ravel()
    ut = -m * xt.ravel()
    x = sc.x
    a1, b1 = scene.layer1.alpha, scene.layer1.beta
    a2, b2 = scene.layer2.alpha, scene.layer2.beta

    Kg = sc.K(x[None, :] - ur[:, None])                    # (P, n)
    g_at_ut = a1 * sc.K(ut - ur)
    g_grid = a1 * Kg
    if sc.k1 is not None:
        g_at_ut = g_at_ut + b1 * np.sum(Kg * sc.k1(ut[:, None] - x[None, :]), axis=1)
        g_grid = g_grid + b1 * (Kg @ sc.k1(x[:, None] - x[None, :]))
    amp = a2 * sc.t_at(ut) * g_at_ut
    if sc.k2 is not None:
        amp = amp + b2 * np.sum(g_grid * sc.t[None, :] * sc.k2(ut[:, None] - x[None, :]), axis=1)
    out = (np.abs(amp) ** 2).reshape(xr.shape)
    return float(out) if out.ndim == 0 else out


def predict_ccd_image(scene: SceneSpec, x_r=None) -> np.ndarray:
    """Anti-diagonal image in the narrow-coherence limit.

    ``|(a1 a2 + (a1 b2 k2(0) + b1 a2 k1(0)) N) t(m x_r) + b1 b2 N C0(x_r)|^2``
    with ``k(0) = P(0) sqrt(pitch)`` the kernel peaks, ``N = sum_j K(x_j)``
    the number of object samples inside one coherence area (1 for a delta)
    and ``C0(x_r) = sum_i t_i k1(x_i - m x_r) k2(m x_r - x_i)``, a trapezoidal
    quadrature of ``t P1 P2`` over the object grid.
    """
    sc = _Scene(scene)
    xr = scene.ref_grid.coordinates() if x_r is None else np.asarray(x_r, dtype=float)
    u = scene.magnification * xr
    a1, b1 = scene.layer1.alpha, scene.layer1.beta
    a2, b2 = scene.layer2.alpha, scene.layer2.beta
    n_coh = 1.0 if scene.coherence is None else scene.coherence.sample_sum(scene.grid)
    k1_0 = 0.0 if sc.k1 is None else float(sc.k1(0.0))
    k2_0 = 0.0 if sc.k2 is None else float(sc.k2(0.0))
    coef = a1 * a2 + (a1 * b2 * k2_0 + b1 * a2 * k1_0) * n_coh
    amp = coef * sc.t_at(u)
    if sc.k1 is not None and sc.k2 is not None:
        d = sc.x[None, :] - u[:, None]
        c0 = (sc.k1(d) * sc.k2(-d)) @ sc.t
        amp = amp + b1 * b2 * n_coh * c0
    return np.abs(amp) ** 2


def predict_bucket_image(scene: SceneSpec, x_r=None) -> np.ndarray:
    """Bucket image: trapezoidal integral of the covariance over the test grid."""
    xr = scene.ref_grid.coordinates() if x_r is None else np.asarray(x_r, dtype=float)
    xt = scene.test_grid.coordinates()
    m = delta_g2_matrix(scene, xr, xt)
    return np.trapezoid(m, xt, axis=1) if hasattr(np, "trapezoid") else np.trapz(m, xt, axis=1)


def fit_scale(measured, predicted, sigma=None) -> tuple[float, np.ndarray]:
    """Least-squares global scale ``s`` minimizing ``sum ((meas - s pred)/sigma)^2``.

    Returns the scale and the normalized residuals ``(meas - s pred) / sigma``
    (plain residuals when ``sigma`` is omitted).
    """
    y = np.asarray(measured, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    w = np.ones_like(y) if sigma is None else 1 / np.asarray(sigma, dtype=float).ravel() ** 2
    denom = np.sum(w * p * p)
    if denom == 0:
        raise ValueError("prediction is identically zero")
    s = float(np.sum(w * p * y) / denom)
    r = y - s * p
    if sigma is not None:
        r = r / np.asarray(sigma, dtype=float).ravel()
    return s, r
