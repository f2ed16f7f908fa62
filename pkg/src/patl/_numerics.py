"""Finite-difference and quadrature helpers shared across modules."""

from functools import lru_cache
from math import factorial

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid


@lru_cache(maxsize=None)
def _fd_weights(offsets, order):
    offsets = np.asarray(offsets, dtype=float)
    k = len(offsets)
    vander = np.vander(offsets, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[order] = factorial(order)
    return np.linalg.solve(vander, rhs)


def derivative(values, h, order=1):
    """Second-order accurate nodal derivative of a uniformly sampled function.

    Interior nodes use the narrowest centred stencil; the nodes closest to
    each end use one-sided stencils of the same accuracy.
    """
    f = np.asarray(values, dtype=float)
    n = len(f)
    if order == 0:
        return f.copy()
    half = (order + 1) // 2
    width = order + 2  # one-sided second-order stencil
    if n < width:
        width = n
        if n <= order:
            raise ValueError(f"need more than {order} points for derivative of order {order}")
    out = np.empty(n)
    centred = tuple(range(-half, half + 1))
    wc = _fd_weights(centred, order)
    lo, hi = half, n - half
    if hi > lo:
        acc = np.zeros(hi - lo)
        for off, w in zip(centred, wc):
            acc += w * f[lo + off:hi + off]
        out[lo:hi] = acc
    for i in list(range(0, min(lo, n))) + list(range(max(hi, lo), n)):
        start = 0 if i < lo else n - width
        offs = tuple(range(start - i, start - i + width))
        out[i] = np.dot(_fd_weights(offs, order), f[start:start + width])
    return out / h**order


def trapz(values, h):
    return float(trapezoid(np.asarray(values, dtype=float), dx=h))


def cumtrapz(values, h):
    return cumulative_trapezoid(np.asarray(values, dtype=float), dx=h, initial=0.0)


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def c1_norm(values, h):
    """Discrete C^1 norm: sup of nodal values plus sup of nodal derivative."""
    f = np.asarray(values, dtype=float)
    return float(np.max(np.abs(f)) + np.max(np.abs(derivative(f, h, 1))))


def sobolev_norm(values, h, order):
    """Discrete H^order norm using finite-difference derivatives and trapezoid sums."""
    f = np.asarray(values, dtype=float)
    total = 0.0
    for j in range(order + 1):
        d = derivative(f, h, j)
        total += trapz(d * d, h)
    return float(np.sqrt(total))
