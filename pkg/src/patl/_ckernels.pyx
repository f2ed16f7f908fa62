# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: tridiagonal elimination and the leapfrog recurrence.

The pure-numpy twins live in :mod:`patl._pykernels`; both expose the same
signatures and are selected in :mod:`patl.kernels`.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def solve_tridiagonal(const double[::1] lower, const double[::1] diag,
                      const double[::1] upper, const double[::1] rhs):
    """Thomas elimination. ``lower[0]`` and ``upper[n-1]`` are ignored."""
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double m
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
    cdef double[::1] cp = np.empty(n, dtype=np.float64)
    cdef double[::1] dp = np.empty(n, dtype=np.float64)
    with nogil:
        cp[0] = upper[0] / diag[0]
        dp[0] = rhs[0] / diag[0]
        for i in range(1, n):
            m = diag[i] - lower[i] * cp[i - 1]
            cp[i] = upper[i] / m
            dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m
        x[n - 1] = dp[n - 1]
        for i in range(n - 2, -1, -1):
            x[i] = dp[i] - cp[i] * x[i + 1]
    return out


def leapfrog_forward(const double[::1] mw, const double[::1] kd, const double[::1] ko,
                     double beta, double dt,
                     const double[::1] p0, const double[::1] p1, Py_ssize_t nsteps,
                     double[::1] trace, energy=None, field=None):
    """Advance ``M p'' + K p + B p' = 0`` with the three-level leapfrog scheme.

    ``trace`` (length nsteps+2) receives the last component of p^0..p^{nsteps+1};
    ``energy`` (length nsteps+1) receives E^{n+1/2}; ``field`` (nsteps+2, m)
    receives every state.
    """
    cdef Py_ssize_t m = mw.shape[0]
    cdef Py_ssize_t n, j
    cdef double idt2 = 1.0 / (dt * dt)
    cdef double bterm = beta / (2.0 * dt)
    cdef double acc
    cdef bint want_energy = energy is not None
    cdef bint want_field = field is not None
    cdef double[::1] en
    cdef double[:, ::1] fld
    if want_energy:
        en = energy
    if want_field:
        fld = field

    cdef double[::1] inv_d = np.empty(m, dtype=np.float64)
    cdef double[::1] c0 = np.empty(m, dtype=np.float64)
    cdef double[::1] prev = np.array(p0, dtype=np.float64)
    cdef double[::1] cur = np.array(p1, dtype=np.float64)
    cdef double[::1] nxt = np.empty(m, dtype=np.float64)
    cdef double[::1] tmp

    for j in range(m):
        inv_d[j] = 1.0 / (mw[j] * idt2)
        c0[j] = mw[j] * idt2
    inv_d[m - 1] = 1.0 / (mw[m - 1] * idt2 + bterm)
    c0[m - 1] = mw[m - 1] * idt2 - bterm

    trace[0] = prev[m - 1]
    trace[1] = cur[m - 1]
    if want_field:
        for j in range(m):
            fld[0, j] = prev[j]
            fld[1, j] = cur[j]

    with nogil:
        if want_energy:
            en[0] = _energy(mw, kd, ko, cur, prev, idt2, m)
        for n in range(1, nsteps + 1):
            for j in range(m):
                acc = (2.0 * mw[j] * idt2 - kd[j]) * cur[j] - c0[j] * prev[j]
                if j > 0:
                    acc = acc - ko[j - 1] * cur[j - 1]
                if j < m - 1:
                    acc = acc - ko[j] * cur[j + 1]
                nxt[j] = inv_d[j] * acc
            trace[n + 1] = nxt[m - 1]
            if want_field:
                for j in range(m):
                    fld[n + 1, j] = nxt[j]
            if want_energy:
                en[n] = _energy(mw, kd, ko, nxt, cur, idt2, m)
            tmp = prev
            prev = cur
            cur = nxt
            nxt = tmp
    return np.asarray(prev), np.asarray(cur)


cdef inline double _energy(const double[::1] mw, const double[::1] kd, const double[::1] ko,
                           double[::1] a, double[::1] b, double idt2,
                           Py_ssize_t m) noexcept nogil:
    cdef double e = 0.0
    cdef double d
    cdef Py_ssize_t j
    for j in range(m):
        d = a[j] - b[j]
        e += mw[j] * d * d * idt2 + kd[j] * a[j] * b[j]
    for j in range(m - 1):
        e += ko[j] * (a[j] * b[j + 1] + a[j + 1] * b[j])
    return e


def leapfrog_adjoint(const double[::1] mw, const double[::1] kd, const double[::1] ko,
                     double beta, double dt, const double[::1] forcing,
                     Py_ssize_t nsteps):
    """Transpose of :func:`leapfrog_forward` for forcing on the last component.

    ``forcing[k]`` (k = 0..nsteps+1) is the cotangent of the last component of
    p^k.  Returns the accumulated cotangents of p^0 and p^1.
    """
    cdef Py_ssize_t m = mw.shape[0]
    cdef Py_ssize_t k, j
    cdef double idt2 = 1.0 / (dt * dt)
    cdef double bterm = beta / (2.0 * dt)
    cdef double acc
    cdef double[::1] inv_d = np.empty(m, dtype=np.float64)
    cdef double[::1] c0 = np.empty(m, dtype=np.float64)
    cdef double[::1] w = np.empty(m, dtype=np.float64)
    cdef double[::1] a2 = np.zeros(m, dtype=np.float64)  # a^{k+2}
    cdef double[::1] a1 = np.zeros(m, dtype=np.float64)  # a^{k+1}
    cdef double[::1] a0 = np.zeros(m, dtype=np.float64)  # a^{k}
    cdef double[::1] tmp

    for j in range(m):
        inv_d[j] = 1.0 / (mw[j] * idt2)
        c0[j] = mw[j] * idt2
    inv_d[m - 1] = 1.0 / (mw[m - 1] * idt2 + bterm)
    c0[m - 1] = mw[m - 1] * idt2 - bterm

    with nogil:
        for k in range(nsteps + 1, -1, -1):
            for j in range(m):
                a0[j] = 0.0
            if 1 <= k <= nsteps:
                for j in range(m):
                    w[j] = inv_d[j] * a1[j]
                for j in range(m):
                    acc = (2.0 * mw[j] * idt2 - kd[j]) * w[j]
                    if j > 0:
                        acc = acc - ko[j - 1] * w[j - 1]
                    if j < m - 1:
                        acc = acc - ko[j] * w[j + 1]
                    a0[j] = acc
            if k <= nsteps - 1:
                for j in range(m):
                    a0[j] = a0[j] - inv_d[j] * c0[j] * a2[j]
            a0[m - 1] = a0[m - 1] + forcing[k]
            tmp = a2
            a2 = a1
            a1 = a0
            a0 = tmp
    # after the loop a1 holds a^0 and a2 holds a^1
    return np.asarray(a1).copy(), np.asarray(a2).copy()
