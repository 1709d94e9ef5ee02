"""Paraxial propagation, thin lenses, object masks and optical trains."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np
from scipy import fft as sfft

from .grid import ComplexField, GridSpec
from .scattering import ScatteringLayer, apply_layer

__all__ = [
    "SamplingWarning",
    "FreeSpace",
    "ThinLens",
    "Mask",
    "Scatter",
    "DetectorPlane",
    "OpticalTrain",
    "ObjectMask",
    "ConditionReport",
    "fresnel_propagate",
    "apply_thin_lens",
    "apply_transmission",
    "check_imaging_conditions",
    "run_arm",
    "single_slit",
    "double_slit",
    "ring",
    "uniform_mask",
    "mask_from_image",
    "transfer_function_limit",
]

CONDITION_TOL = 1e-9


class SamplingWarning(UserWarning):
    """Propagation distance beyond the transfer-function sampling limit.

    Attributes carry the distance, the limit and the method used instead.
    """

    def __init__(self, z: float, limit: float, method: str):
        self.z, self.limit, self.method = z, limit, method
        super().__init__(
            f"z={z:.6g} m exceeds transfer-function limit {limit:.6g} m; using {method}")


def transfer_function_limit(grid: GridSpec, wavelength: float) -> float:
    """Largest distance for which the transfer function is adequately sampled."""
    return grid.n * grid.pitch**2 / wavelength


@lru_cache(maxsize=128)
def _propagator(n: int, pitch: float, wavelength: float, z: float, pad: int, method: str):
    m = n * pad
    if method == "transfer":
        nu = np.fft.fftfreq(m, pitch)
        h = np.exp(-1j * np.pi * wavelength * z * nu**2)
    else:
        x = (np.arange(m) - m // 2) * pitch
        kern = np.exp(1j * np.pi * x**2 / (wavelength * z)) * pitch / np.sqrt(1j * wavelength * z)
        h = np.fft.fft(np.fft.ifftshift(kern))
    h.flags.writeable = False
    return h


def _method_for(grid: GridSpec, wavelength: float, z: float, warn: bool = True) -> str:
    limit = transfer_function_limit(grid, wavelength)
    if z <= limit:
        return "transfer"
    if warn:
        warnings.warn(SamplingWarning(z, limit, "impulse-response"), stacklevel=3)
    return "impulse"


def fresnel_propagate(f: ComplexField, z: float, pad: int = 2,
                      method: str | None = None) -> ComplexField:
    """Fresnel propagation by distance ``z`` on the field's own grid.

    Parameters
    ----------
    f : ComplexField
    z : float
        Distance in meters, positive.
    pad : int
        Zero-padding factor. ``pad=1`` gives periodic (wrap-around) boundaries.
    method : {"transfer", "impulse"}, optional
        Forces a method. By default the transfer function is used up to
        ``n * pitch**2 / wavelength`` and the impulse-response kernel beyond,
        with a :class:`SamplingWarning`.

    Notes
    -----
    The constant phase ``exp(jkz)`` is dropped.
    """
    if not z > 0 or not np.isfinite(z):
        raise ValueError(f"propagation distance must be positive, got {z}")
    if pad < 1 or int(pad) != pad:
        raise ValueError("pad must be a positive integer")
    g = f.grid
    if method is None:
        method = _method_for(g, f.wavelength, z)
    elif method not in ("transfer", "impulse"):
        raise ValueError(f"unknown propagation method {method!r}")
    h = _propagator(g.n, g.pitch, f.wavelength, float(z), int(pad), method)
    n, m = g.n, g.n * pad
    a = np.asarray(f.amplitude)
    s = (m - n) // 2
    for ax in range(a.ndim - g.dim, a.ndim):
        shape = [1] * a.ndim
        shape[ax] = m
        if pad > 1:
            # zero-pad, filter, crop back: slicing avoids extra copies
            full = list(a.shape)
            full[ax] = m
            buf = np.zeros(full, dtype=complex)
            win = [slice(None)] * a.ndim
            win[ax] = slice(s, s + n)
            buf[tuple(win)] = a
            spec = sfft.fft(buf, axis=ax, overwrite_x=True)
            spec *= h.reshape(shape)
            a = sfft.ifft(spec, axis=ax, overwrite_x=True)[tuple(win)]
        else:
            spec = sfft.fft(a, axis=ax)
            spec *= h.reshape(shape)
            a = sfft.ifft(spec, axis=ax, overwrite_x=True)
    # in 2-D the two separable impulse kernels multiply to pitch^2 / (j lambda z)
    return f.with_amplitude(a)


def apply_thin_lens(f: ComplexField, focal: float) -> ComplexField:
    """Multiply by ``exp(-j pi r^2 / (wavelength * focal))``."""
    if not focal > 0 or not np.isfinite(focal):
        raise ValueError(f"focal length must be positive, got {focal}")
    phase = _lens_phase(f.grid, f.wavelength, float(focal))
    return f.with_amplitude(np.asarray(f.amplitude) * phase)


@lru_cache(maxsize=64)
def _lens_phase(grid: GridSpec, wavelength: float, focal: float) -> np.ndarray:
    p = np.exp(-1j * np.pi * grid.radius_squared() / (wavelength * focal))
    p.flags.writeable = False
    return p


@dataclass(frozen=True)
class ObjectMask:
    """Complex transmission on a grid with ``|t| <= 1``."""

    grid: GridSpec
    transmission: np.ndarray
    descriptor: str = "custom"

    def __post_init__(self):
        t = np.asarray(self.transmission, dtype=complex)
        if t.shape != self.grid.shape:
            raise ValueError(f"mask shape {t.shape} does not match grid {self.grid.shape}")
        if (np.abs(t) > 1 + 1e-12).any():
            raise ValueError("mask transmission magnitude exceeds 1")
        t = t.view()
        t.flags.writeable = False
        object.__setattr__(self, "transmission", t)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.transmission) ** 2


def _band(grid: GridSpec, lo: float, hi: float) -> np.ndarray:
    # half-open [lo, hi) in sample units with a rounding guard
    k = np.arange(grid.n) - grid.n // 2
    a = lo / grid.pitch - 1e-9
    b = hi / grid.pitch - 1e-9
    return (k >= a) & (k < b)


def _lift(grid: GridSpec, line: np.ndarray) -> np.ndarray:
    # 1-D profile extended along the second axis for 2-D grids
    if grid.dim == 1:
        return line.astype(float)
    return np.broadcast_to(line[None, :], grid.shape).astype(float)


def uniform_mask(grid: GridSpec, value: float = 1.0) -> ObjectMask:
    return ObjectMask(grid, np.full(grid.shape, value, dtype=complex), f"uniform({value})")


def single_slit(grid: GridSpec, width: float, center: float = 0.0) -> ObjectMask:
    """Open band ``[center - width/2, center + width/2)``; a vertical slit in 2-D."""
    if not width > 0:
        raise ValueError("slit width must be positive")
    t = _lift(grid, _band(grid, center - width / 2, center + width / 2))
    return ObjectMask(grid, t, f"single-slit(a={width})")


def double_slit(grid: GridSpec, width: float, separation: float) -> ObjectMask:
    """Two slits of ``width`` whose centres are ``separation`` apart."""
    if not width > 0 or not separation > width:
        raise ValueError("double slit needs 0 < width < separation")
    line = (_band(grid, -separation / 2 - width / 2, -separation / 2 + width / 2)
            | _band(grid, separation / 2 - width / 2, separation / 2 + width / 2))
    return ObjectMask(grid, _lift(grid, line), f"double-slit(a={width},d={separation})")


def ring(grid: GridSpec, diameter: float, stroke: float) -> ObjectMask:
    """Annulus of mean ``diameter`` and line width ``stroke``.

    On a 1-D grid this is the diametral cut: two strokes centred at
    ``+-diameter/2``.
    """
    if not 0 < stroke < diameter:
        raise ValueError("ring needs 0 < stroke < diameter")
    r0, r1 = diameter / 2 - stroke / 2, diameter / 2 + stroke / 2
    if grid.dim == 1:
        t = _band(grid, -r1, -r0) | _band(grid, r0, r1)
    else:
        r = np.sqrt(grid.radius_squared())
        t = (r >= r0) & (r < r1)
    return ObjectMask(grid, t.astype(float), f"ring(diameter={diameter},stroke={stroke})")


def mask_from_image(grid: GridSpec, path: str | Path) -> ObjectMask:
    """Load an 8-bit grayscale image (PGM or PNG) as transmission ``v / 255``.

    A 2-D grid needs an ``n x n`` image. A 1-D grid takes the middle row of an
    image ``n`` pixels wide.
    """
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "P", "1"):
            raise ValueError(f"{path}: expected an 8-bit grayscale image, got mode {im.mode}")
        a = np.asarray(im.convert("L"), dtype=float) / 255.0
    if grid.dim == 2:
        if a.shape != grid.shape:
            raise ValueError(f"{path}: image is {a.shape}, grid needs {grid.shape}")
        t = a
    else:
        if a.shape[1] != grid.n:
            raise ValueError(f"{path}: image width {a.shape[1]} differs from grid n={grid.n}")
        t = a[a.shape[0] // 2]
    return ObjectMask(grid, t, f"from-image-file({path})")


def apply_transmission(f: ComplexField, m: ObjectMask) -> ComplexField:
    """Sample-wise product with the mask; grids must match exactly."""
    if m.grid != f.grid:
        raise ValueError(f"mask grid {m.grid} does not match field grid {f.grid}")
    return f.with_amplitude(np.asarray(f.amplitude) * m.transmission)


# ---------------------------------------------------------------- trains


@dataclass(frozen=True)
class FreeSpace:
    z: float

    def __post_init__(self):
        if not self.z > 0 or not np.isfinite(self.z):
            raise ValueError(f"free-space distance must be positive, got {self.z}")


@dataclass(frozen=True)
class ThinLens:
    focal: float

    def __post_init__(self):
        if not self.focal > 0 or not np.isfinite(self.focal):
            raise ValueError(f"focal length must be positive, got {self.focal}")


@dataclass(frozen=True)
class Mask:
    mask: ObjectMask


@dataclass(frozen=True)
class Scatter:
    layer: ScatteringLayer


@dataclass(frozen=True)
class DetectorPlane:
    label: str = "detector"


Element = Union[FreeSpace, ThinLens, Mask, Scatter, DetectorPlane]


@dataclass(frozen=True)
class OpticalTrain:
    """Ordered optical elements ending in exactly one detector plane."""

    elements: tuple
    wavelength: float
    pad: int = field(default=2)

    def __post_init__(self):
        els = tuple(self.elements)
        object.__setattr__(self, "elements", els)
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        det = [i for i, e in enumerate(els) if isinstance(e, DetectorPlane)]
        if det != [len(els) - 1]:
            raise ValueError("a train needs exactly one DetectorPlane, as its last element")
        for e in els:
            if not isinstance(e, (FreeSpace, ThinLens, Mask, Scatter, DetectorPlane)):
                raise TypeError(f"unsupported optical element {e!r}")

    @property
    def detector(self) -> DetectorPlane:
        return self.elements[-1]

    def length(self) -> float:
        return sum(e.z for e in self.elements if isinstance(e, FreeSpace))


def run_arm(input: ComplexField, train: OpticalTrain) -> ComplexField:
    """Apply every element of ``train`` in order and return the detector field."""
    if abs(input.wavelength - train.wavelength) > 1e-6 * train.wavelength:
        raise ValueError("field and train wavelengths differ")
    f = input
    for e in train.elements:
        if isinstance(e, FreeSpace):
            f = fresnel_propagate(f, e.z, pad=train.pad)
        elif isinstance(e, ThinLens):
            f = apply_thin_lens(f, e.focal)
        elif isinstance(e, Mask):
            f = apply_transmission(f, e.mask)
        elif isinstance(e, Scatter):
            f = apply_layer(f, e.layer)
        else:
            f = f.with_amplitude(f.amplitude, e.label)
    return f


# ---------------------------------------------------------------- conditions


@dataclass(frozen=True)
class ConditionReport:
    """Residuals (1/m) of the imaging, speckle-matching and magnification conditions."""

    imaging_residual: float
    matching_residual: float
    magnification_residual: float
    tol: float = CONDITION_TOL

    @property
    def imaging(self) -> bool:
        return self.imaging_residual < self.tol

    @property
    def matching(self) -> bool:
        return self.matching_residual < self.tol

    @property
    def magnification(self) -> bool:
        return self.magnification_residual < self.tol

    @property
    def satisfied(self) -> bool:
        return self.imaging and self.matching and self.magnification

    def warnings(self) -> list[str]:
        out = []
        if not self.imaging:
            out.append(f"test-arm imaging condition violated (residual {self.imaging_residual:.4g} 1/m)")
        if not self.matching:
            out.append(f"speckle matching condition violated (residual {self.matching_residual:.4g} 1/m)")
        if not self.magnification:
            out.append(f"magnification condition violated (residual {self.magnification_residual:.4g})")
        return out

    def as_dict(self) -> dict:
        return {
            "imaging_residual": self.imaging_residual,
            "matching_residual": self.matching_residual,
            "magnification_residual": self.magnification_residual,
            "imaging": self.imaging,
            "matching": self.matching,
            "magnification": self.magnification,
        }


def check_imaging_conditions(z, z1, z2, z3, f, f1, f2, L1=0.0, L2=0.0,
                             tol: float = CONDITION_TOL) -> ConditionReport:
    """Check the three geometric conditions of the two-arm setup.

    Parameters are in meters: ``z`` reference lens to reference detector,
    ``z1`` / ``z2`` free distances before / after the medium, ``z3`` imaging
    lens to test detector, ``f`` / ``f1`` / ``f2`` focal lengths of the
    reference, illumination and imaging lenses, ``L1`` / ``L2`` medium
    thicknesses before / after the object.

    The residuals are ``|1/(z2+L2) + 1/z3 - 1/f2|`` (thin-lens imaging),
    ``|(1 - z/f)/f - (1 - (z1+L1)/f1)/f1|`` (equal speckle chirps) and
    ``|f1/f - (z2+L2)/z3|`` (equal speckle scale).
    """
    vals = (z, z1 + L1, z2 + L2, z3, f, f1, f2)
    if min(vals) <= 0 or z1 < 0 or z2 < 0 or L1 < 0 or L2 < 0:
        raise ValueError("all lengths must be positive")
    r1 = abs(1 / (z2 + L2) + 1 / z3 - 1 / f2)
    r2 = abs((1 - z / f) / f - (1 - (z1 + L1) / f1) / f1)
    r3 = abs(f1 / f - (z2 + L2) / z3)
    return ConditionReport(float(r1), float(r2), float(r3), tol)
