"""Numpy fallback for the compensated-summation kernels.

Vectorized over samples, sequential over frames, with exactly the operation
order of the compiled kernels so results agree bit for bit.
"""

from __future__ import annotations

import numpy as np


def _step(s: np.ndarray, c: np.ndarray, x: np.ndarray):
    t = s + x
    big = np.abs(s) >= np.abs(x)
    c += np.where(big, (s - t) + x, (x - t) + s)
    s[...] = t


def _check(*pairs):
    for a, b in pairs:
        if a != b:
            raise ValueError("shape mismatch")


def add_rows(rows, s, c):
    """s += rows[f] for every frame f."""
    rows = np.asarray(rows, dtype=float)
    _check((rows.shape[1], s.shape[0]), (s.shape, c.shape))
    for r in rows:
        _step(s, c, r)


def add_products(a, b, s, c):
    """s += a[f] * b[f] elementwise for every frame f."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check((a.shape, b.shape), (a.shape[1], s.shape[0]), (s.shape, c.shape))
    for ra, rb in zip(a, b):
        _step(s, c, ra * rb)


def add_scaled(a, w, s, c):
    """s += a[f] * w[f] for every frame f."""
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    _check((a.shape[0], w.shape[0]), (a.shape[1], s.shape[0]), (s.shape, c.shape))
    for ra, wf in zip(a, w):
        _step(s, c, ra * wf)


def add_outer(a, b, s, c):
    """s += outer(a[f], b[f]) for every frame f."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check((a.shape[0], b.shape[0]), (s.shape, (a.shape[1], b.shape[1])), (s.shape, c.shape))
    for ra, rb in zip(a, b):
        _step(s, c, ra[:, None] * rb[None, :])
