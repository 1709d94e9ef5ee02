"""Sampling grids, complex fields and intensity frames.

All lengths are in meters. Grids use a centered convention: sample ``i``
sits at ``(i - n/2) * pitch`` so the zero coordinate is index ``n // 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "ComplexField",
    "IntensityFrame",
    "make_grid",
    "total_power",
    "flip",
    "flip_array",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    # read-only view, leaves the caller's array writable
    v = a.view()
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class GridSpec:
    """Uniform centered sampling grid.

    Parameters
    ----------
    n : int
        Samples per axis, at least 8.
    pitch : float
        Sample spacing in meters.
    dim : int
        1 for a line, 2 for a square ``n x n`` grid.
    """

    n: int
    pitch: float
    dim: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"grid needs n >= 8 samples, got {self.n}")
        if not np.isfinite(self.pitch) or self.pitch <= 0:
            raise ValueError(f"grid pitch must be positive, got {self.pitch}")
        if self.dim not in (1, 2):
            raise ValueError(f"grid dim must be 1 or 2, got {self.dim}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "pitch", float(self.pitch))

    @property
    def extent(self) -> float:
        return self.n * self.pitch

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell(self) -> float:
        """Area (or length) element of one sample."""
        return self.pitch**self.dim

    @property
    def center_index(self) -> int:
        return self.n // 2

    def coordinate(self, i) -> np.ndarray | float:
        return (np.asarray(i) - self.n // 2) * self.pitch

    def coordinates(self) -> np.ndarray:
        """1-D axis coordinates (shared by both axes when ``dim == 2``)."""
        return (np.arange(self.n) - self.n // 2) * self.pitch

    def radius_squared(self) -> np.ndarray:
        """Squared distance from the origin for every sample."""
        x = self.coordinates()
        if self.dim == 1:
            return x * x
        return x[:, None] ** 2 + x[None, :] ** 2

    def index_of(self, x: float) -> int:
        """Nearest sample index to coordinate ``x``; raises if outside."""
        i = int(np.rint(x / self.pitch)) + self.n // 2
        if not 0 <= i < self.n:
            raise ValueError(f"coordinate {x} m lies outside the grid")
        return i

    def scaled(self, factor: float) -> "GridSpec":
        return GridSpec(self.n, self.pitch * factor, self.dim)


def make_grid(n: int, pitch: float, dim: int = 1) -> GridSpec:
    """Build a centered grid of ``n`` samples (per axis) at ``pitch`` meters."""
    return GridSpec(n, pitch, dim)


def _check_shape(grid: GridSpec, a: np.ndarray, what: str):
    if a.ndim < grid.dim or a.shape[a.ndim - grid.dim:] != grid.shape:
        raise ValueError(f"{what} shape {a.shape} does not end with grid shape {grid.shape}")


@dataclass(frozen=True)
class ComplexField:
    """Sampled complex amplitude on a grid.

    Leading axes beyond the grid shape are treated as a batch of independent
    realizations; every operation acts on each member separately.
    """

    grid: GridSpec
    amplitude: np.ndarray
    wavelength: float
    plane_label: str = ""

    def __post_init__(self):
        a = np.asarray(self.amplitude, dtype=complex)
        _check_shape(self.grid, a, "amplitude")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        object.__setattr__(self, "amplitude", _frozen(a))

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.amplitude.shape[: self.amplitude.ndim - self.grid.dim]

    def with_amplitude(self, amplitude: np.ndarray, label: str | None = None) -> "ComplexField":
        return ComplexField(self.grid, amplitude, self.wavelength,
                            self.plane_label if label is None else label)


@dataclass(frozen=True)
class IntensityFrame:
    """Non-negative intensity samples on a grid (batch axes allowed)."""

    grid: GridSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        _check_shape(self.grid, v, "values")
        if v.size and not (v >= 0).all():
            raise ValueError("intensity values must be non-negative")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.values.shape[: self.values.ndim - self.grid.dim]


def total_power(f: ComplexField | IntensityFrame):
    """Integrated intensity ``sum |a|^2 * pitch**dim`` (per batch member)."""
    if isinstance(f, IntensityFrame):
        v = f.values
    else:
        v = np.abs(f.amplitude) ** 2
    axes = tuple(range(v.ndim - f.grid.dim, v.ndim))
    out = v.sum(axis=axes) * f.grid.cell
    return float(out) if np.ndim(out) == 0 else out


def flip_array(a: np.ndarray, dim: int = 1) -> np.ndarray:
    """Reverse coordinates ``x -> -x`` on the trailing ``dim`` axes.

    Index ``i`` maps to ``(n - i) mod n``, so index 0 and the center stay put.
    """
    out = a
    for ax in range(a.ndim - dim, a.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def flip(f: IntensityFrame) -> IntensityFrame:
    """Coordinate-reversed copy of an intensity frame."""
    return IntensityFrame(f.grid, flip_array(np.asarray(f.values), f.grid.dim), dict(f.meta))
