"""Elementwise interval arithmetic on (lo, hi) ndarray pairs.

All functions take and return pairs of equally-shaped float arrays and
produce guaranteed enclosures of the true range (up to floating-point
rounding, which is negligible against the branch-and-prune precision
delta used downstream).
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def make(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("interval lower bound exceeds upper bound")
    return lo, hi


def add(a, b):
    return a[0] + b[0], a[1] + b[1]


def sub(a, b):
    return a[0] - b[1], a[1] - b[0]


def neg(a):
    return -a[1], -a[0]


def scale(c, a):
    """Multiply by a scalar or array of constants c."""
    c = np.asarray(c, dtype=float)
    lo = np.where(c >= 0, c * a[0], c * a[1])
    hi = np.where(c >= 0, c * a[1], c * a[0])
    return lo, hi


def shift(c, a):
    return a[0] + c, a[1] + c


def mul(a, b):
    p1 = a[0] * b[0]
    p2 = a[0] * b[1]
    p3 = a[1] * b[0]
    p4 = a[1] * b[1]
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return lo, hi


def square(a):
    """Exact range of x**2; tighter than mul(a, a)."""
    lo_abs = np.where((a[0] <= 0) & (a[1] >= 0), 0.0, np.minimum(np.abs(a[0]), np.abs(a[1])))
    hi_abs = np.maximum(np.abs(a[0]), np.abs(a[1]))
    return lo_abs**2, hi_abs**2


def tanh(a):
    # monotone, so endpoint images are exact
    return np.tanh(a[0]), np.tanh(a[1])


def cos(a):
    lo, hi = np.asarray(a[0], dtype=float), np.asarray(a[1], dtype=float)
    clo = np.cos(lo)
    chi = np.cos(hi)
    out_lo = np.minimum(clo, chi)
    out_hi = np.maximum(clo, chi)
    # widen where a multiple of 2*pi (max) or pi+2k*pi (min) is inside
    k_lo = np.ceil(lo / TWO_PI)
    has_max = k_lo * TWO_PI <= hi
    k_lo2 = np.ceil((lo - np.pi) / TWO_PI)
    has_min = k_lo2 * TWO_PI + np.pi <= hi
    out_hi = np.where(has_max, 1.0, out_hi)
    out_lo = np.where(has_min, -1.0, out_lo)
    return out_lo, out_hi


def sin(a):
    return cos((a[0] - np.pi / 2.0, a[1] - np.pi / 2.0))


def matvec(W, a):
    """Enclosure of W @ x for constant matrix W and box x = (lo, hi).

    Accepts a batch of boxes with shape (..., m); contraction is over the
    last axis, giving output shape (..., rows).
    """
    Wp = np.maximum(W, 0.0)
    Wn = np.minimum(W, 0.0)
    lo = a[0] @ Wp.T + a[1] @ Wn.T
    hi = a[1] @ Wp.T + a[0] @ Wn.T
    return lo, hi


def total(a):
    """Enclosure of the sum of all entries."""
    return float(np.sum(a[0])), float(np.sum(a[1]))


def width(a):
    return np.max(a[1] - a[0]) if np.size(a[0]) else 0.0
