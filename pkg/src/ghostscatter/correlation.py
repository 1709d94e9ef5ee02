"""Streaming, mergeable intensity-correlation estimator.

An accumulator keeps the frame count and compensated sums of the reference
intensity, the test observation and their products. From these the
intensity covariance

    dG(x_r, x_t) = <I_r(x_r) I_t(x_t)> - <I_r(x_r)> <I_t(x_t)>

is finalized with 1/N normalization, along with the normalized form
``g2 = 1 + dG / (<I_r><I_t>)``. Four index sets are supported:

``outer-product``
    every ``(x_r, x_t)`` pair;
``anti-diagonal``
    ``x_t = -x_r`` (reference and test cameras on matching grids);
``fixed-test-point``
    one test sample ``x_t0`` against every reference sample;
``bucket``
    a scalar test signal against every reference sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid import GridSpec, IntensityFrame, flip_array

__all__ = [
    "AccumulatorMode",
    "CorrelationAccumulator",
    "DEFAULT_MEMORY_BUDGET",
    "new_accumulator",
    "update",
    "merge",
    "merge_tree",
    "finalize_delta_g2",
    "finalize_g2",
    "reconstruct_bucket",
    "reconstruct_anti_diagonal",
    "shard_standard_error",
]

MODES = ("outer-product", "anti-diagonal", "fixed-test-point", "bucket")
DEFAULT_MEMORY_BUDGET = 256 * 2**20


@dataclass(frozen=True)
class AccumulatorMode:
    """Which index set of the correlation map to accumulate.

    ``test_point`` (meters) is used only by ``fixed-test-point``.
    """

    kind: str
    test_point: float = 0.0

    def __post_init__(self):
        if self.kind not in MODES:
            raise ValueError(f"unknown accumulator mode {self.kind!r}; choose from {MODES}")

    def __str__(self):
        if self.kind == "fixed-test-point":
            return f"fixed-test-point({self.test_point:g})"
        return self.kind


def _pair(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return s, np.zeros_like(s)


@dataclass
class CorrelationAccumulator:
    """Compensated sufficient statistics of the intensity covariance.

    Each sum is held as a ``(value, compensation)`` pair; the represented sum
    is their total. Sample axes are flattened.
    """

    mode: AccumulatorMode
    ref_grid: GridSpec
    test_grid: GridSpec | None
    n_frames: int = 0
    sum_r: np.ndarray = field(default=None, repr=False)
    comp_r: np.ndarray = field(default=None, repr=False)
    sum_t: np.ndarray = field(default=None, repr=False)
    comp_t: np.ndarray = field(default=None, repr=False)
    sum_prod: np.ndarray = field(default=None, repr=False)
    comp_prod: np.ndarray = field(default=None, repr=False)

    @property
    def n_ref(self) -> int:
        return int(np.prod(self.ref_grid.shape))

    @property
    def n_test(self) -> int:
        if self.mode.kind in ("bucket", "fixed-test-point"):
            return 1
        return int(np.prod(self.test_grid.shape))

    def totals(self):
        """Compensated totals ``(sum_r, sum_t, sum_prod)``."""
        return (self.sum_r + self.comp_r, self.sum_t + self.comp_t,
                self.sum_prod + self.comp_prod)

    def copy(self) -> "CorrelationAccumulator":
        return CorrelationAccumulator(
            self.mode, self.ref_grid, self.test_grid, self.n_frames,
            self.sum_r.copy(), self.comp_r.copy(), self.sum_t.copy(), self.comp_t.copy(),
            self.sum_prod.copy(), self.comp_prod.copy())

    def compatible(self, other: "CorrelationAccumulator") -> bool:
        return (self.mode == other.mode and self.ref_grid == other.ref_grid
                and self.test_grid == other.test_grid)


def new_accumulator(mode: AccumulatorMode, ref_grid: GridSpec, test_grid: GridSpec | None = None,
                    memory_budget: int = DEFAULT_MEMORY_BUDGET) -> CorrelationAccumulator:
    """Zeroed accumulator for ``mode`` on the given detector grids.

    Parameters
    ----------
    mode : AccumulatorMode
    ref_grid : GridSpec
        Grid of the reference detector frames.
    test_grid : GridSpec, optional
        Grid of the test detector frames; required except in bucket mode.
        Anti-diagonal mode needs it equal to ``ref_grid``.
    memory_budget : int
        Byte limit for the outer-product store.
    """
    if isinstance(mode, str):
        mode = AccumulatorMode(mode)
    kind = mode.kind
    if kind != "bucket" and test_grid is None:
        raise ValueError(f"{kind} mode needs a test grid")
    if kind == "anti-diagonal" and test_grid != ref_grid:
        raise ValueError("anti-diagonal mode needs identical reference and test grids")
    if kind == "fixed-test-point":
        test_grid.index_of(mode.test_point)
    nr = int(np.prod(ref_grid.shape))
    if kind == "outer-product":
        nt = int(np.prod(test_grid.shape))
        need = nr * nt * 8 * 2
        if need > memory_budget:
            raise MemoryError(
                f"outer-product store needs {need} bytes, over the budget of {memory_budget}")
        prod = np.zeros((nr, nt))
        st = np.zeros(nt)
    elif kind == "anti-diagonal":
        prod = np.zeros(nr)
        st = np.zeros(nr)
    else:
        prod = np.zeros(nr)
        st = np.zeros(1)
    sr, cr = _pair(np.zeros(nr))
    st, ct = _pair(st)
    sp, cp = _pair(prod)
    return CorrelationAccumulator(mode, ref_grid, None if kind == "bucket" else test_grid,
                                  0, sr, cr, st, ct, sp, cp)


def _frames(x, grid: GridSpec, what: str) -> np.ndarray:
    if isinstance(x, IntensityFrame):
        if x.grid != grid:
            raise ValueError(f"{what} grid {x.grid} does not match accumulator grid {grid}")
        v = np.asarray(x.values)
    else:
        v = np.asarray(x, dtype=float)
        if v.shape[v.ndim - grid.dim:] != grid.shape:
            raise ValueError(f"{what} shape {v.shape} does not match grid {grid.shape}")
    return np.ascontiguousarray(v.reshape((-1, int(np.prod(grid.shape)))), dtype=float)


def update(acc: CorrelationAccumulator, I_r, t_obs) -> CorrelationAccumulator:
    """Add one frame, or a batch of frames, to ``acc`` in place.

    Parameters
    ----------
    I_r : IntensityFrame or array
        Reference frames on ``acc.ref_grid``; leading axes are frames.
    t_obs : IntensityFrame, array or scalar
        Test frames on the test grid, or one scalar per frame in bucket mode.
        Fixed-test-point mode accepts either full test frames or the scalar
        value at the test point.

    Returns
    -------
    CorrelationAccumulator
        ``acc`` itself.
    """
    r = _frames(I_r, acc.ref_grid, "reference")
    nf = r.shape[0]
    kind = acc.mode.kind
    # fixed-test-point takes scalars when there is exactly one value per frame
    scalar = kind == "bucket" or (kind == "fixed-test-point"
                                  and not isinstance(t_obs, IntensityFrame)
                                  and np.size(t_obs) == nf)
    if scalar:
        w = np.ascontiguousarray(np.atleast_1d(np.asarray(t_obs, dtype=float)).ravel())
        if w.shape[0] != nf:
            raise ValueError(f"{nf} reference frames but {w.shape[0]} test values")
    elif kind == "fixed-test-point":
        t = _frames(t_obs, acc.test_grid, "test")
        if t.shape[0] != nf:
            raise ValueError("reference and test frame counts differ")
        i = acc.test_grid.index_of(acc.mode.test_point)
        if acc.test_grid.dim == 2:
            i = acc.test_grid.n // 2 * acc.test_grid.n + i
        w = np.ascontiguousarray(t[:, i])
    else:
        t = _frames(t_obs, acc.test_grid, "test")
        if t.shape[0] != nf:
            raise ValueError("reference and test frame counts differ")

    kernels.add_rows(r, acc.sum_r, acc.comp_r)
    if kind in ("bucket", "fixed-test-point"):
        kernels.add_rows(w[:, None], acc.sum_t, acc.comp_t)
        kernels.add_scaled(r, w, acc.sum_prod, acc.comp_prod)
    elif kind == "anti-diagonal":
        kernels.add_rows(t, acc.sum_t, acc.comp_t)
        g = acc.ref_grid
        tf = np.ascontiguousarray(
            flip_array(t.reshape((nf,) + g.shape), g.dim).reshape(nf, -1))
        kernels.add_products(r, tf, acc.sum_prod, acc.comp_prod)
    else:
        kernels.add_rows(t, acc.sum_t, acc.comp_t)
        kernels.add_outer(r, t, acc.sum_prod, acc.comp_prod)
    acc.n_frames += nf
    return acc


def _merge_pair(sa, ca, sb, cb):
    # symmetric two-sum: merge(a, b) and merge(b, a) agree bit for bit
    t = sa + sb
    err = np.where(np.abs(sa) >= np.abs(sb), (sa - t) + sb, (sb - t) + sa)
    return t, (ca + cb) + err


def merge(a: CorrelationAccumulator, b: CorrelationAccumulator) -> CorrelationAccumulator:
    """New accumulator holding the statistics of both inputs."""
    if not a.compatible(b):
        raise ValueError("cannot merge accumulators with different modes or grids")
    sr, cr = _merge_pair(a.sum_r, a.comp_r, b.sum_r, b.comp_r)
    st, ct = _merge_pair(a.sum_t, a.comp_t, b.sum_t, b.comp_t)
    sp, cp = _merge_pair(a.sum_prod, a.comp_prod, b.sum_prod, b.comp_prod)
    return CorrelationAccumulator(a.mode, a.ref_grid, a.test_grid, a.n_frames + b.n_frames,
                                  sr, cr, st, ct, sp, cp)


def merge_tree(accs) -> CorrelationAccumulator:
    """Merge a sequence pairwise in index order (deterministic balanced tree)."""
    level = list(accs)
    if not level:
        raise ValueError("nothing to merge")
    while len(level) > 1:
        nxt = [merge(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def _means(acc: CorrelationAccumulator):
    if acc.n_frames < 1:
        raise ValueError("finalizing an empty accumulator")
    sr, st, sp = acc.totals()
    n = acc.n_frames
    mr, mt, mp = sr / n, st / n, sp / n
    if acc.mode.kind == "anti-diagonal":
        g = acc.ref_grid
        mt = flip_array(mt.reshape(g.shape), g.dim).ravel()
    return mr, mt, mp


def _shape(acc: CorrelationAccumulator, flat: np.ndarray) -> np.ndarray:
    if acc.mode.kind == "outer-product":
        return flat.reshape(acc.ref_grid.shape + acc.test_grid.shape)
    return flat.reshape(acc.ref_grid.shape)


def finalize_delta_g2(acc: CorrelationAccumulator) -> np.ndarray:
    """Intensity covariance over the mode's index set (1/N normalization).

    Returns an array on the reference grid, or ``ref.shape + test.shape`` in
    outer-product mode.
    """
    mr, mt, mp = _means(acc)
    if acc.mode.kind == "outer-product":
        d = mp - mr[:, None] * mt[None, :]
    else:
        d = mp - mr * mt
    return _shape(acc, d)


def finalize_g2(acc: CorrelationAccumulator) -> np.ma.MaskedArray:
    """Normalized correlation ``1 + dG / (<I_r><I_t>)``.

    Samples where either mean is zero are masked rather than set to NaN.
    """
    mr, mt, mp = _means(acc)
    if acc.mode.kind == "outer-product":
        denom = mr[:, None] * mt[None, :]
        d = mp - denom
    else:
        denom = mr * mt
        d = mp - denom
    bad = ~(denom > 0)
    if bad.all():
        raise ValueError("all intensity means are zero; g2 is undefined")
    g = np.ones_like(d)
    np.divide(d, denom, out=g, where=~bad)
    g = np.where(bad, 1.0, 1.0 + g)
    return np.ma.MaskedArray(_shape(acc, g), mask=_shape(acc, bad))


def _need_two(acc: CorrelationAccumulator):
    if acc.n_frames < 2:
        raise ValueError(f"a reconstruction needs at least 2 frames, have {acc.n_frames}")


def reconstruct_bucket(acc: CorrelationAccumulator) -> np.ndarray:
    """Ghost image over the reference grid from bucket correlations."""
    if acc.mode.kind != "bucket":
        raise ValueError(f"bucket reconstruction needs bucket mode, got {acc.mode}")
    _need_two(acc)
    return finalize_delta_g2(acc)


def reconstruct_anti_diagonal(acc: CorrelationAccumulator) -> np.ndarray:
    """Ghost image ``dG(x_r, -x_r)`` over the reference grid."""
    if acc.mode.kind != "anti-diagonal":
        raise ValueError(f"anti-diagonal reconstruction needs anti-diagonal mode, got {acc.mode}")
    _need_two(acc)
    return finalize_delta_g2(acc)


def shard_standard_error(accs) -> np.ndarray:
    """Standard error of the covariance map from the spread of shard estimates.

    Batch-means estimate: each shard's finalized map is one batch mean; the
    standard error of the pooled estimate is ``std(maps, ddof=1) / sqrt(K)``
    weighted by shard sizes.
    """
    accs = list(accs)
    if len(accs) < 2:
        raise ValueError("need at least two shards for a spread estimate")
    maps = np.stack([finalize_delta_g2(a) for a in accs])
    w = np.array([a.n_frames for a in accs], dtype=float)
    w = w / w.sum()
    mean = np.tensordot(w, maps, axes=1)
    var = np.tensordot(w, (maps - mean) ** 2, axes=1) / (1 - np.sum(w * w))
    return np.sqrt(var * np.sum(w * w))
