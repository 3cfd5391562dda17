"""Linearization around the origin and the asymptotic-stability check."""

from dataclasses import dataclass

import numpy as np

from .errors import EigenSolveFailure


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    eigenvalues: np.ndarray


def jacobian(f, m, h=1e-6, x0=None):
    """Central-difference Jacobian of f: R^m -> R^m around x0 (default origin).

    Step per coordinate is h * (1 + |x0_j|).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x0 = np.zeros(m) if x0 is None else np.asarray(x0, dtype=float)
    A = np.empty((m, m))
    for j in range(m):
        step = h * (1.0 + abs(x0[j]))
        e = np.zeros(m)
        e[j] = step
        A[:, j] = (np.asarray(f(x0 + e)) - np.asarray(f(x0 - e))) / (2.0 * step)
    return A


def linearize(system, h=1e-6):
    A = jacobian(system.dynamics, system.m, h=h)
    _, eigs = is_asymptotically_stable(A)
    return LinearModel(A=A, eigenvalues=eigs)


def is_asymptotically_stable(A, margin=0.0):
    """True iff every eigenvalue satisfies Re(lambda) < -margin."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    try:
        eigs = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenSolveFailure(str(exc)) from exc
    stable = bool(np.max(eigs.real) < -margin)
    return stable, eigs
