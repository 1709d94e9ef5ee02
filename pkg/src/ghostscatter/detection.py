"""Detectors: intensity measurement, bucket integration, camera binning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ComplexField, GridSpec, IntensityFrame

__all__ = [
    "DetectorSpec",
    "NoiseSpec",
    "measure_intensity",
    "bucket_value",
    "camera_bin",
    "point_value",
    "add_noise",
]

KINDS = ("bucket", "camera", "point")


@dataclass(frozen=True)
class DetectorSpec:
    """Detector description.

    Parameters
    ----------
    kind : {"bucket", "camera", "point"}
    pixel_pitch : float, optional
        Camera pixel size in meters (defaults to the grid pitch).
    extent : float, optional
        Active width in meters, centred on the axis (default: whole grid).
    x : float
        Position of a point detector in meters.
    """

    kind: str
    pixel_pitch: float | None = None
    extent: float | None = None
    x: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if self.pixel_pitch is not None and not self.pixel_pitch > 0:
            raise ValueError("pixel pitch must be positive")
        if self.extent is not None and not self.extent > 0:
            raise ValueError("detector extent must be positive")

    def validate(self, grid: GridSpec):
        """Check the detector settings against the grid it will observe."""
        if self.kind == "camera" and self.pixel_pitch is not None:
            if self.pixel_pitch < grid.pitch * (1 - 1e-9):
                raise ValueError("camera pixel pitch is finer than the grid pitch")
            _bin_ratio(self.pixel_pitch, grid)
        if self.kind == "point" and abs(self.x) > grid.extent / 2:
            raise ValueError(f"point detector at {self.x} m lies outside the grid")


@dataclass(frozen=True)
class NoiseSpec:
    """Optional detector noise (disabled by default).

    ``kind="gaussian"`` adds zero-mean noise of standard deviation ``sigma``;
    ``kind="shot"`` draws Poisson counts with ``photons_per_unit`` photons per
    intensity unit and rescales. Negative results are clipped to zero.
    """

    kind: str = "none"
    sigma: float = 0.0
    photons_per_unit: float = 1000.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "shot"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0 or self.photons_per_unit <= 0:
            raise ValueError("noise parameters must be positive")

    @property
    def enabled(self) -> bool:
        return self.kind != "none"


def measure_intensity(f: ComplexField) -> IntensityFrame:
    """``|amplitude|^2`` per sample."""
    a = np.asarray(f.amplitude)
    return IntensityFrame(f.grid, a.real**2 + a.imag**2)


def _active(grid: GridSpec, extent: float | None) -> np.ndarray | None:
    if extent is None or extent >= grid.extent:
        return None
    x = grid.coordinates()
    m = np.abs(x) <= extent / 2
    if grid.dim == 2:
        m = m[:, None] & m[None, :]
    return m


def bucket_value(frame: IntensityFrame, spec: DetectorSpec):
    """Integrated intensity ``sum values * pitch**dim`` over the active extent.

    Returns one value per batch member.
    """
    if spec.kind != "bucket":
        raise ValueError(f"bucket_value needs a bucket detector, got {spec.kind!r}")
    g = frame.grid
    v = np.asarray(frame.values)
    m = _active(g, spec.extent)
    if m is not None:
        v = v * m
    out = v.sum(axis=tuple(range(v.ndim - g.dim, v.ndim))) * g.cell
    return float(out) if np.ndim(out) == 0 else out


def _bin_ratio(pixel_pitch: float, grid: GridSpec) -> int:
    r = pixel_pitch / grid.pitch
    k = int(round(r))
    if k < 1 or abs(r - k) > 1e-9 * r:
        raise ValueError(f"pixel pitch {pixel_pitch} m is not an integer multiple of {grid.pitch} m")
    if grid.n % k:
        raise ValueError(f"binning ratio {k} does not divide grid size {grid.n}")
    if grid.n // k < 8:
        raise ValueError("binned camera would have fewer than 8 pixels")
    return k


def camera_bin(frame: IntensityFrame, spec: DetectorSpec) -> IntensityFrame:
    """Average ``r x r`` blocks of samples, ``r = pixel_pitch / pitch``.

    Block ``j`` covers input samples ``j*r .. j*r + r - 1``; the output grid
    has ``n / r`` pixels at ``pixel_pitch``.
    """
    if spec.kind != "camera":
        raise ValueError(f"camera_bin needs a camera detector, got {spec.kind!r}")
    g = frame.grid
    if spec.pixel_pitch is None:
        return frame
    r = _bin_ratio(spec.pixel_pitch, g)
    if r == 1:
        return frame
    v = np.asarray(frame.values)
    lead = v.shape[: v.ndim - g.dim]
    m = g.n // r
    if g.dim == 1:
        out = v.reshape(lead + (m, r)).mean(axis=-1)
    else:
        out = v.reshape(lead + (m, r, m, r)).mean(axis=(-3, -1))
    return IntensityFrame(GridSpec(m, g.pitch * r, g.dim), out)


def point_value(frame: IntensityFrame, spec: DetectorSpec):
    """Intensity at the sample nearest to the point detector (per batch member)."""
    if spec.kind != "point":
        raise ValueError(f"point_value needs a point detector, got {spec.kind!r}")
    g = frame.grid
    i = g.index_of(spec.x)
    v = np.asarray(frame.values)
    # 2-D points sit on the horizontal axis (row y = 0, column x)
    idx = (Ellipsis, i) if g.dim == 1 else (Ellipsis, g.n // 2, i)
    out = v[idx]
    return float(out) if np.ndim(out) == 0 else out


def add_noise(frame: IntensityFrame, noise: NoiseSpec, rng: np.random.Generator) -> IntensityFrame:
    """Apply the optional detector noise stage."""
    if not noise.enabled:
        return frame
    v = np.asarray(frame.values)
    if noise.kind == "gaussian":
        v = v + noise.sigma * rng.standard_normal(v.shape)
    else:
        v = rng.poisson(v * noise.photons_per_unit) / noise.photons_per_unit
    return IntensityFrame(frame.grid, np.clip(v, 0, None))
