"""Pseudothermal speckle source.

Every frame is drawn from its own counter-based Philox stream keyed by the
master seed, with the frame index in the counter. Frames can therefore be
generated in any order, on any worker, and still come out bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ComplexField, GridSpec

__all__ = [
    "SourceSpec",
    "FrameSeed",
    "derive_frame_seed",
    "frame_rng",
    "generate_frame",
    "generate_frames",
    "aperture_for_speckle_size",
]

STATISTICS = ("circular-gaussian", "phase-only")
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SourceSpec:
    """Incoherent source plane.

    Parameters
    ----------
    grid : GridSpec
    aperture_width : float
        Full width of the illuminated region in meters. Square in 2-D.
    mean_intensity : float
        Per-sample mean intensity ``I0``.
    statistics : str
        ``"circular-gaussian"`` or ``"phase-only"``.
    wavelength : float
        Carried into the generated fields.
    """

    grid: GridSpec
    aperture_width: float
    mean_intensity: float = 1.0
    statistics: str = "circular-gaussian"
    wavelength: float = 650e-9

    def __post_init__(self):
        if not 0 < self.aperture_width <= self.grid.extent:
            raise ValueError(
                f"aperture width {self.aperture_width} m must be in (0, {self.grid.extent}] m")
        if not self.mean_intensity > 0:
            raise ValueError("mean intensity must be positive")
        if self.statistics not in STATISTICS:
            raise ValueError(f"unknown source statistics {self.statistics!r}")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    def aperture_mask(self) -> np.ndarray:
        """Half-open band ``[-w/2, w/2)``: exactly ``w / pitch`` samples when divisible."""
        k = np.arange(self.grid.n) - self.grid.n // 2
        h = self.aperture_width / (2 * self.grid.pitch)
        inside = (k >= -h - 1e-9) & (k < h - 1e-9)
        if self.grid.dim == 2:
            inside = inside[:, None] & inside[None, :]
        return inside


@dataclass(frozen=True)
class FrameSeed:
    master_seed: int
    frame_index: int

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame index must be >= 0, got {self.frame_index}")


def derive_frame_seed(master: int, index: int) -> FrameSeed:
    """Seed of frame ``index`` under ``master``; independent of call order."""
    return FrameSeed(int(master) & _MASK64, int(index))


def frame_rng(seed: FrameSeed, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by the master seed, with the frame in the counter.

    ``stream`` selects an independent sequence for the same frame (0 is the
    source field; other consumers such as detector noise use 1 and up).
    """
    bitgen = np.random.Philox(key=seed.master_seed & _MASK64,
                              counter=[0, 0, seed.frame_index, int(stream)])
    return np.random.Generator(bitgen)


def _draw(spec: SourceSpec, rng: np.random.Generator, m: int) -> np.ndarray:
    i0 = spec.mean_intensity
    if spec.statistics == "circular-gaussian":
        re_im = rng.standard_normal((2, m))
        return np.sqrt(i0 / 2) * (re_im[0] + 1j * re_im[1])
    phase = rng.random(m) * (2 * np.pi)
    return np.sqrt(i0) * np.exp(1j * phase)


def generate_frame(spec: SourceSpec, seed: FrameSeed) -> ComplexField:
    """One source realization: independent samples inside the aperture, zero outside."""
    if seed.frame_index < 0:
        raise ValueError("frame index must be >= 0")
    mask = spec.aperture_mask()
    a = np.zeros(spec.grid.shape, dtype=complex)
    a[mask] = _draw(spec, frame_rng(seed), int(mask.sum()))
    return ComplexField(spec.grid, a, spec.wavelength, "source")


def generate_frames(spec: SourceSpec, master_seed: int, indices) -> ComplexField:
    """Batch of realizations, identical to calling :func:`generate_frame` per index."""
    idx = np.asarray(indices, dtype=np.int64).ravel()
    mask = spec.aperture_mask()
    m = int(mask.sum())
    a = np.zeros((idx.size,) + spec.grid.shape, dtype=complex)
    for k, i in enumerate(idx):
        a[k][mask] = _draw(spec, frame_rng(derive_frame_seed(master_seed, int(i))), m)
    return ComplexField(spec.grid, a, spec.wavelength, "source")


def aperture_for_speckle_size(fwhm: float, wavelength: float, focal: float) -> float:
    """Aperture width giving an intensity-autocovariance FWHM of ``fwhm``.

    A uniform aperture of width ``D`` seen through a lens of focal length
    ``focal`` yields a squared-sinc intensity autocovariance whose full width at
    half maximum is ``0.8859 * wavelength * focal / D``.
    """
    return _SINC2_FWHM * wavelength * focal / fwhm


# full width at half maximum of sinc(u)^2 in units of its first zero
_SINC2_FWHM = 0.8858929413789047
