# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled compensated-summation kernels.

Every kernel adds terms frame by frame into a running sum ``s`` with a
Neumaier compensation ``c``. The numpy fallback in ``_accumulate_py``
performs the same floating-point operations in the same order, so both
backends produce bit-identical sums.
"""

from libc.math cimport fabs


cdef inline void _step(double* s, double* c, double x) noexcept nogil:
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


def add_rows(const double[:, ::1] rows, double[::1] s, double[::1] c):
    """s += rows[f] for every frame f."""
    cdef Py_ssize_t nf = rows.shape[0], n = rows.shape[1], f, i
    if s.shape[0] != n or c.shape[0] != n:
        raise ValueError("sum length mismatch")
    with nogil:
        for f in range(nf):
            for i in range(n):
                _step(&s[i], &c[i], rows[f, i])


def add_products(const double[:, ::1] a, const double[:, ::1] b, double[::1] s, double[::1] c):
    """s += a[f] * b[f] elementwise for every frame f."""
    cdef Py_ssize_t nf = a.shape[0], n = a.shape[1], f, i
    cdef double x
    if b.shape[0] != nf or b.shape[1] != n or s.shape[0] != n or c.shape[0] != n:
        raise ValueError("shape mismatch")
    with nogil:
        for f in range(nf):
            for i in range(n):
                x = a[f, i] * b[f, i]
                _step(&s[i], &c[i], x)


def add_scaled(const double[:, ::1] a, const double[::1] w, double[::1] s, double[::1] c):
    """s += a[f] * w[f] for every frame f."""
    cdef Py_ssize_t nf = a.shape[0], n = a.shape[1], f, i
    cdef double x
    if w.shape[0] != nf or s.shape[0] != n or c.shape[0] != n:
        raise ValueError("shape mismatch")
    with nogil:
        for f in range(nf):
            for i in range(n):
                x = a[f, i] * w[f]
                _step(&s[i], &c[i], x)


def add_outer(const double[:, ::1] a, const double[:, ::1] b, double[:, ::1] s, double[:, ::1] c):
    """s += outer(a[f], b[f]) for every frame f."""
    cdef Py_ssize_t nf = a.shape[0], nr = a.shape[1], nt = b.shape[1], f, i, j
    cdef double x, ai
    if b.shape[0] != nf or s.shape[0] != nr or s.shape[1] != nt \
            or c.shape[0] != nr or c.shape[1] != nt:
        raise ValueError("shape mismatch")
    with nogil:
        for f in range(nf):
            for i in range(nr):
                ai = a[f, i]
                for j in range(nt):
                    x = ai * b[f, j]
                    _step(&s[i, j], &c[i, j], x)
