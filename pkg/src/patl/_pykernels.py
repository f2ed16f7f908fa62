"""Pure-numpy versions of the compiled kernels in ``_ckernels.pyx``."""

import numpy as np
from scipy.linalg import solve_banded


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve a tridiagonal system. ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)


def _coefficients(mw, beta, dt):
    idt2 = 1.0 / dt**2
    lhs = mw * idt2
    c0 = mw * idt2
    lhs = lhs.copy()
    c0 = c0.copy()
    lhs[-1] += beta / (2.0 * dt)
    c0[-1] -= beta / (2.0 * dt)
    return idt2, 1.0 / lhs, c0


def _apply_a(mw, kd, ko, idt2, x):
    out = (2.0 * mw * idt2 - kd) * x
    out[1:] -= ko * x[:-1]
    out[:-1] -= ko * x[1:]
    return out


def _energy(mw, kd, ko, a, b, idt2):
    d = a - b
    return float(np.dot(mw * d, d) * idt2 + np.dot(kd * a, b)
                 + np.dot(ko, a[:-1] * b[1:] + a[1:] * b[:-1]))


def leapfrog_forward(mw, kd, ko, beta, dt, p0, p1, nsteps, trace,
                     energy=None, field=None):
    idt2, inv_d, c0 = _coefficients(mw, beta, dt)
    prev = np.array(p0, dtype=float)
    cur = np.array(p1, dtype=float)
    trace[0] = prev[-1]
    trace[1] = cur[-1]
    if field is not None:
        field[0] = prev
        field[1] = cur
    if energy is not None:
        energy[0] = _energy(mw, kd, ko, cur, prev, idt2)
    for n in range(1, nsteps + 1):
        nxt = inv_d * (_apply_a(mw, kd, ko, idt2, cur) - c0 * prev)
        trace[n + 1] = nxt[-1]
        if field is not None:
            field[n + 1] = nxt
        if energy is not None:
            energy[n] = _energy(mw, kd, ko, nxt, cur, idt2)
        prev, cur = cur, nxt
    return prev, cur


def leapfrog_adjoint(mw, kd, ko, beta, dt, forcing, nsteps):
    idt2, inv_d, c0 = _coefficients(mw, beta, dt)
    m = len(mw)
    a1 = np.zeros(m)  # a^{k+1}
    a2 = np.zeros(m)  # a^{k+2}
    for k in range(nsteps + 1, -1, -1):
        if 1 <= k <= nsteps:
            a0 = _apply_a(mw, kd, ko, idt2, inv_d * a1)
        else:
            a0 = np.zeros(m)
        if k <= nsteps - 1:
            a0 -= inv_d * c0 * a2
        a0[-1] += forcing[k]
        a2, a1 = a1, a0
    return a1.copy(), a2.copy()
