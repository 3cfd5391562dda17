"""Quadratic-Lyapunov comparison method built from the linearization.

Solves A^T P + P A = -Q for P, searches (by bisection, each candidate radius
checked with the interval falsifier) for the largest radius u_q on which
x^T P x still decreases along the *nonlinear* flow, and takes the exact
sphere minimum d_q = lambda_min(P) * u_q^2 as the level value.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NotHurwitz
from .falsifier import FalsifierConfig, QuadraticEvaluator, falsify
from .linear_analysis import is_asymptotically_stable


@dataclass(frozen=True)
class QuadraticCertificate:
    P: np.ndarray
    u_q: float
    d_q: float
    capped: bool = False  # True when decrease held all the way to the search cap
    stats: dict = field(default_factory=dict, compare=False)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.P @ x)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x) < self.u_q and self.value(x) < self.d_q)


def solve_lyapunov_equation(A, Q=None):
    """Unique symmetric P with A^T P + P A = -Q, via the Kronecker system."""
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    Q = np.eye(m) if Q is None else np.asarray(Q, dtype=float)
    stable, _ = is_asymptotically_stable(A)
    if not stable:
        raise NotHurwitz("A has an eigenvalue with nonnegative real part")
    K = np.kron(np.eye(m), A.T) + np.kron(A.T, np.eye(m))
    vecP = np.linalg.solve(K, -Q.reshape(-1, order="F"))
    P = vecP.reshape((m, m), order="F")
    return 0.5 * (P + P.T)


def quadratic_region(system, P, fals_cfg: FalsifierConfig, u_max=None,
                     resolution=None):
    """Largest falsifier-certified radius for V = x^T P x, and its level d_q."""
    P = np.asarray(P, dtype=float)
    eigs = np.linalg.eigvalsh(P)
    if eigs[0] <= 0:
        raise ValueError("P must be positive definite")
    u_max = fals_cfg.u if u_max is None else u_max
    resolution = 1e-2 * u_max if resolution is None else resolution
    evaluator = QuadraticEvaluator.for_system(P, system)
    m = system.m
    l_frac = fals_cfg.l / fals_cfg.u

    def certified(u):
        cfg = FalsifierConfig(u=u, delta=fals_cfg.delta, l=l_frac * u,
                              max_cells=fals_cfg.max_cells)
        return falsify(evaluator, m, cfg).empty

    checks = 0
    if certified(u_max):
        u_q = u_max
        capped = True
        checks += 1
    else:
        lo, hi = 0.0, u_max
        # grow a feasible lower end first
        probe = resolution
        while probe < u_max and certified(probe):
            lo = probe
            probe *= 2.0
            checks += 1
        if lo == 0.0:
            raise ValueError(
                "quadratic decrease fails even at the smallest probed radius"
            )
        hi = min(probe, u_max)
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            checks += 1
            if certified(mid):
                lo = mid
            else:
                hi = mid
        u_q = lo
        capped = False

    d_q = float(eigs[0] * u_q**2)
    return QuadraticCertificate(
        P=P, u_q=float(u_q), d_q=d_q, capped=capped,
        stats={"falsifier_checks": checks, "resolution": resolution},
    )


def monte_carlo_volumes(neural_region, quadratic_cert, n_samples=100_000, seed=0):
    """Monte-Carlo volume of both regions over a shared bounding box."""
    m = neural_region.certificate.params.m
    R = max(neural_region.u, quadratic_cert.u_q)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-R, R, size=(n_samples, m))
    box_volume = (2.0 * R) ** m

    norms = np.linalg.norm(pts, axis=1)
    v_neural = neural_region.certificate.value_batch(pts)
    in_neural = (norms < neural_region.u) & (v_neural < neural_region.d_star)
    v_quad = np.einsum("ni,ij,nj->n", pts, quadratic_cert.P, pts)
    in_quad = (norms < quadratic_cert.u_q) & (v_quad < quadratic_cert.d_q)

    vol_n = box_volume * np.mean(in_neural)
    vol_q = box_volume * np.mean(in_quad)
    return {
        "neural_volume": float(vol_n),
        "quadratic_volume": float(vol_q),
        "ratio": float(vol_n / vol_q) if vol_q > 0 else float("inf"),
        "n_samples": n_samples,
        "bounding_radius": R,
    }
