"""Backend selection for the accumulation kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``GHOSTSCATTER_PURE_PYTHON`` is set to a true value, the
numpy fallback is used. Both expose ``add_rows``, ``add_products``,
``add_scaled`` and ``add_outer``.
"""

from __future__ import annotations

import os

import numpy as np

from . import _accumulate_py as fallback

ENV_FORCE_PURE = "GHOSTSCATTER_PURE_PYTHON"


def _load():
    if os.environ.get(ENV_FORCE_PURE, "").strip().lower() in ("1", "true", "yes", "on"):
        return fallback, "python"
    try:
        from . import _accumulate as compiled
    except ImportError:
        return fallback, "python"
    return compiled, "compiled"


backend, BACKEND = _load()


def _c(a):
    return np.ascontiguousarray(a, dtype=float)


def add_rows(rows, s, c):
    """``s += rows[f]`` for every frame, compensated into ``c``."""
    backend.add_rows(_c(rows), s, c)


def add_products(a, b, s, c):
    """``s += a[f] * b[f]`` for every frame, compensated into ``c``."""
    backend.add_products(_c(a), _c(b), s, c)


def add_scaled(a, w, s, c):
    """``s += a[f] * w[f]`` for every frame, compensated into ``c``."""
    backend.add_scaled(_c(a), _c(w), s, c)


def add_outer(a, b, s, c):
    """``s += outer(a[f], b[f])`` for every frame, compensated into ``c``."""
    backend.add_outer(_c(a), _c(b), s, c)


__all__ = ["BACKEND", "backend", "fallback", "add_rows", "add_products", "add_scaled", "add_outer"]
