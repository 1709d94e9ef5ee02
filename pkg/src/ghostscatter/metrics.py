"""Image-quality measures for reconstructions."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage, optimize, special

from .grid import GridSpec, IntensityFrame

__all__ = [
    "MetricReport",
    "visibility",
    "fidelity",
    "speckle_size",
    "edge_width",
    "edge_width_fit",
    "truth_edges",
    "region_masks",
    "window_mean",
]

# 10%-90% rise of an erf edge in units of the Gaussian sigma
RISE_PER_SIGMA = 2 * np.sqrt(2) * special.erfinv(0.8)


@dataclass
class MetricReport:
    """Summary of one reconstruction (``None`` where not evaluated)."""

    visibility: float | None = None
    fidelity: float | None = None
    speckle_fwhm: float | None = None
    edge_width: float | None = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.visibility is not None and not -1 - 1e-12 <= self.visibility <= 1 + 1e-12:
            raise ValueError("visibility outside [-1, 1]")
        if self.fidelity is not None and not -1 - 1e-12 <= self.fidelity <= 1 + 1e-12:
            raise ValueError("fidelity outside [-1, 1]")

    def as_dict(self) -> dict:
        return asdict(self)


def visibility(img, fg_mask, bg_mask) -> float:
    """Contrast of region means, ``(fg - bg) / (fg + bg)``."""
    img = np.asarray(img, dtype=float)
    fg = np.asarray(fg_mask, dtype=bool)
    bg = np.asarray(bg_mask, dtype=bool)
    if not fg.any() or not bg.any():
        raise ValueError("visibility masks must be non-empty")
    if (fg & bg).any():
        raise ValueError("visibility masks must be disjoint")
    a, b = img[fg].mean(), img[bg].mean()
    if a + b == 0:
        raise ValueError("both region means are zero")
    return float((a - b) / (a + b))


def fidelity(img, truth) -> float:
    """Pearson correlation between an image and its ground truth."""
    a = np.asarray(img, dtype=float).ravel()
    b = np.asarray(truth, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("image and truth differ in size")
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0 or nb == 0:
        raise ValueError("fidelity is undefined for a constant input")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def region_masks(truth, erode: int = 2, dilate: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Foreground and background masks from a ground-truth image.

    Foreground is the truth support eroded by ``erode`` samples; background
    is the complement of the support dilated by ``dilate`` samples.
    """
    t = np.asarray(truth, dtype=float)
    support = t > 0.5 * t.max()
    fg = ndimage.binary_erosion(support, iterations=erode) if erode else support
    bg = ~ndimage.binary_dilation(support, iterations=dilate) if dilate else ~support
    return fg, bg


def _autocov_1d(d: np.ndarray) -> np.ndarray:
    # unbiased normalized autocovariance of zero-mean rows along the last axis
    d = d.reshape(-1, d.shape[-1])
    n = d.shape[-1]
    spec = np.fft.rfft(d, n=2 * n, axis=-1)
    ac = np.fft.irfft(np.abs(spec) ** 2, n=2 * n, axis=-1)[:, :n]
    ac = ac.sum(axis=0) / (n - np.arange(n))
    if not ac[0] > 0:
        raise ValueError("constant frame has no speckle")
    return ac / ac[0]


def speckle_size(frame: IntensityFrame | np.ndarray, grid: GridSpec | None = None) -> float:
    """Full width at half maximum of the normalized intensity autocovariance.

    Batched frames are averaged in the autocovariance after subtracting the
    per-sample ensemble mean, which removes the slowly varying illumination
    envelope; a single frame has its own mean subtracted. In 2-D the
    horizontal lag axis is used.
    """
    if isinstance(frame, IntensityFrame):
        grid, v = frame.grid, np.asarray(frame.values, dtype=float)
    else:
        if grid is None:
            raise ValueError("a grid is needed for raw arrays")
        v = np.asarray(frame, dtype=float)
    if v.size == 0 or np.ptp(v) == 0:
        raise ValueError("constant frame has no speckle")
    nb = v.ndim - grid.dim
    if nb > 0 and np.prod(v.shape[:nb]) > 1:
        # per-sample ensemble mean removes the illumination envelope
        d = v - v.mean(axis=tuple(range(nb)), keepdims=True)
    else:
        d = v - v.mean(axis=-1, keepdims=True)
    ac = _autocov_1d(d)
    below = np.nonzero(ac < 0.5)[0]
    if below.size == 0:
        raise ValueError("autocovariance never falls to half; speckle larger than the frame")
    k = below[0]
    # linear interpolation between lags k-1 and k
    frac = (ac[k - 1] - 0.5) / (ac[k - 1] - ac[k])
    return float(2 * (k - 1 + frac) * grid.pitch)


def _window(img, edge_location, grid, window):
    v = np.asarray(img, dtype=float).ravel()
    x = grid.coordinates()
    if v.size != x.size:
        raise ValueError("edge profile must be a 1-D image on the grid")
    sel = np.abs(x - edge_location) <= window
    if sel.sum() < 3:
        raise ValueError("edge window holds fewer than 3 samples")
    return x[sel], v[sel]


def edge_width(img, edge_location: float, grid: GridSpec, window: float | None = None,
               tolerance: float = 0.05) -> float:
    """10%-90% rise distance of an edge, floored at one pitch.

    Levels are taken from the window end points; crossings are linearly
    interpolated. A falling edge is measured after reversal.

    Raises
    ------
    ValueError
        For a flat window, or when the profile backtracks by more than
        ``tolerance`` of its range.
    """
    window = 8 * grid.pitch if window is None else window
    x, v = _window(img, edge_location, grid, window)
    lo, hi = v[0], v[-1]
    if hi < lo:
        v = v[::-1]
        x = -x[::-1]
        lo, hi = hi, lo
    span = hi - lo
    if not span > 0 or span <= 1e-12 * max(abs(hi), abs(lo), 1e-300):
        raise ValueError("flat window: no edge")
    steps = np.diff(v)
    if (steps < -tolerance * span).any() or v.max() - hi > tolerance * span \
            or lo - v.min() > tolerance * span:
        raise ValueError("edge window is not monotonic")
    y = (v - lo) / span
    x10 = _crossing(x, y, 0.1)
    x90 = _crossing(x, y, 0.9)
    return float(max(x90 - x10, grid.pitch))


def _crossing(x, y, level):
    i = int(np.nonzero(y >= level)[0][0])
    if i == 0:
        return float(x[0])
    return float(x[i - 1] + (level - y[i - 1]) / (y[i] - y[i - 1]) * (x[i] - x[i - 1]))


def truth_edges(truth, grid: GridSpec) -> list[tuple[float, bool]]:
    """Edge locations of a 1-D binary-ish truth profile with their direction."""
    t = np.asarray(truth, dtype=float).ravel()
    b = t > 0.5 * t.max()
    x = grid.coordinates()
    out = []
    for i in np.nonzero(np.diff(b.astype(int)))[0]:
        out.append((float(0.5 * (x[i] + x[i + 1])), bool(b[i + 1])))
    return out


def _erf_model(x, x0, s, lo, hi, slope):
    return lo + slope * x + (hi - lo) * 0.5 * (1 + special.erf((x - x0) / (np.sqrt(2) * s)))


def edge_width_fit(img, edges, grid: GridSpec, window: float) -> float:
    """10%-90% width from an erf fit to the averaged edge profile.

    Profiles around every ``(location, rising)`` edge are oriented as rising,
    averaged, and fitted with an erf step on a linear background. The centre
    may move by at most ``window / 2``. Robust to noise where the crossing
    method is not.
    """
    v = np.asarray(img, dtype=float).ravel()
    x = grid.coordinates()
    h = int(round(window / grid.pitch))
    if h < 2:
        raise ValueError("window must span at least two samples")
    offs = np.arange(-h, h + 1)
    prof = []
    for loc, rising in edges:
        c = int(np.floor(loc / grid.pitch)) + grid.n // 2
        idx = c + offs if rising else c + 1 - offs
        if idx.min() < 0 or idx.max() >= x.size:
            continue
        # sample at offset k sits (k - 1/2) pitches past the edge in both orientations
        prof.append(v[idx])
    if not prof:
        raise ValueError("no edge window fits inside the image")
    p = np.mean(prof, axis=0)
    xs = (offs - 0.5) * grid.pitch
    span = p.max() - p.min()
    if not span > 0:
        raise ValueError("flat window: no edge")
    s0 = max(window / 4, grid.pitch)
    p0 = [0.0, s0, p[:h].mean(), p[h + 1:].mean(), 0.0]
    bounds = ([-window / 2, grid.pitch / 4, -np.inf, -np.inf, -np.inf],
              [window / 2, 2 * window, np.inf, np.inf, np.inf])
    popt, _ = optimize.curve_fit(_erf_model, xs, p, p0=p0, bounds=bounds, maxfev=20000)
    if popt[3] <= popt[2]:
        raise ValueError("averaged profile does not rise")
    return float(max(RISE_PER_SIGMA * popt[1], grid.pitch))


def window_mean(img, grid: GridSpec, half_width: float, center: float = 0.0) -> float:
    """Mean of a 1-D image over ``|x - center| <= half_width``."""
    v = np.ma.asarray(img).ravel()
    x = grid.coordinates()
    sel = np.abs(x - center) <= half_width + 1e-15
    if not sel.any():
        raise ValueError("empty averaging window")
    return float(v[sel].mean())
