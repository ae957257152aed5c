"""Independent derivative oracle: Richardson-extrapolated central differences.

Used to cross-check every hand-written derivative formula.  Steps are
relative to |coordinate| + 1 so large coordinates do not lose precision;
Richardson extrapolation on halved steps lifts the central differences to
fourth order.
"""

import numpy as np


def _shift(x, i, h):
    out = np.array(x, dtype=float)
    out[i] += h
    return out


def _d1(fn, x, i, h):
    return (fn(_shift(x, i, h)) - fn(_shift(x, i, -h))) / (2.0 * h)


def _d2(fn, x, i, h):
    return (fn(_shift(x, i, h)) - 2.0 * fn(x) + fn(_shift(x, i, -h))) / h**2


def _cross(fn, x, i, j, hi, hj):
    pp = fn(_shift(_shift(x, i, hi), j, hj))
    pm = fn(_shift(_shift(x, i, hi), j, -hj))
    mp = fn(_shift(_shift(x, i, -hi), j, hj))
    mm = fn(_shift(_shift(x, i, -hi), j, -hj))
    return (pp - pm - mp + mm) / (4.0 * hi * hj)


def _richardson(coarse, fine):
    return (4.0 * fine - coarse) / 3.0


def fd_gradient(fn, x, base_step=1e-3):
    """Fourth-order gradient of a scalar function of a coordinate vector."""
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.size)
    for i in range(x.size):
        h = base_step * (abs(x[i]) + 1.0)
        grad[i] = _richardson(_d1(fn, x, i, h), _d1(fn, x, i, h / 2.0))
    return grad


def fd_hessian(fn, x, base_step=1e-3):
    """Fourth-order Hessian of a scalar function of a coordinate vector."""
    x = np.asarray(x, dtype=float)
    n = x.size
    steps = base_step * (np.abs(x) + 1.0)
    hess = np.empty((n, n))
    for i in range(n):
        hess[i, i] = _richardson(_d2(fn, x, i, steps[i]), _d2(fn, x, i, steps[i] / 2.0))
        for j in range(i + 1, n):
            coarse = _cross(fn, x, i, j, steps[i], steps[j])
            fine = _cross(fn, x, i, j, steps[i] / 2.0, steps[j] / 2.0)
            hess[i, j] = hess[j, i] = _richardson(coarse, fine)
    return hess
