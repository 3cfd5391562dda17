"""Security-region maximization on the valid-region boundary.

Critical points of the certificate on the sphere ||x|| = u are located by
multistart Jacobian-free Newton-Krylov on the Lagrange stationarity system

    h(x, phi) = (2 phi x + dV/dx, ||x||^2 - u^2) = 0,

the level d* is the smallest V over the critical set, and the security
region is {x : ||x|| < u, V(x) < d*}.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import Diverged, NoCriticalPoints
from .lyapunov_net import Certificate
from .sampling import uniform_sphere


@dataclass(frozen=True)
class SecurityRegion:
    certificate: Certificate
    u: float
    d_star: float
    touch_points: tuple
    critical_set: tuple
    stats: dict = field(default_factory=dict, compare=False)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x) < self.u and self.certificate.value(x) < self.d_star)


def critical_system(certificate, u):
    """Residual of the Lagrange stationarity conditions on the u-sphere."""

    def h(z):
        x, phi = z[:-1], z[-1]
        grad = certificate.gradient(x)
        return np.concatenate([2.0 * phi * x + grad, [float(x @ x) - u**2]])

    return h


def newton_krylov(h, z0, tol=1e-10, max_iter=50, krylov_dim=20):
    """Jacobian-free Newton with GMRES inner solves (finite-difference J.v)."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    z = np.asarray(z0, dtype=float).copy()
    n = len(z)
    res = np.inf
    for it in range(max_iter):
        r = h(z)
        res = float(np.linalg.norm(r))
        if not np.isfinite(res) or np.linalg.norm(z) > 1e6:
            raise Diverged(it, res)
        if res <= tol:
            return z, res, it

        eps = 1e-7 * (1.0 + np.linalg.norm(z))

        def jv(v, z=z, r=r, eps=eps):
            nv = np.linalg.norm(v)
            if nv == 0:
                return np.zeros_like(v)
            return (h(z + (eps / nv) * v) - r) * (nv / eps)

        J = LinearOperator((n, n), matvec=jv)
        s, _ = gmres(J, -r, rtol=1e-8, atol=0.0,
                     restart=min(n, krylov_dim), maxiter=200)
        if not np.all(np.isfinite(s)):
            raise Diverged(it, res)
        z = z + s
    r = h(z)
    res = float(np.linalg.norm(r))
    if res <= tol:
        return z, res, max_iter
    raise Diverged(max_iter, res)


def sr_est(certificate, u=None, n_sr=100, seed=0, tol=1e-10, dedup_tol=1e-5,
           phi_range=2.0):
    """Multistart critical-point search and maximal sublevel value d*."""
    u = certificate.u if u is None else u
    m = certificate.params.m
    rng = np.random.default_rng(seed)
    h = critical_system(certificate, u)
    starts = uniform_sphere(rng, m, u, n_sr)
    phis = rng.uniform(-phi_range, phi_range, size=n_sr)

    solutions = []
    diverged = 0
    for x0, phi0 in zip(starts, phis):
        try:
            z, res, _ = newton_krylov(h, np.concatenate([x0, [phi0]]), tol=tol)
        except Diverged:
            diverged += 1
            continue
        solutions.append((z[:-1], z[-1], res))

    if not solutions:
        raise NoCriticalPoints(
            f"all {n_sr} multistarts diverged; raise n_sr or check conditioning"
        )

    # deterministic order before dedup so the critical set is seed-reproducible
    solutions.sort(key=lambda s: tuple(s[0]))
    critical = []
    for x, phi, res in solutions:
        if all(np.max(np.abs(x - c)) > dedup_tol for c, _ in critical):
            critical.append((x, float(certificate.value(x))))

    d_star = min(v for _, v in critical)
    touch = tuple(x for x, v in critical if abs(v - d_star) <= 1e-9)
    return SecurityRegion(
        certificate=certificate,
        u=u,
        d_star=float(d_star),
        touch_points=touch,
        critical_set=tuple(critical),
        stats={
            "n_sr": n_sr,
            "converged": len(solutions),
            "diverged": diverged,
            "distinct": len(critical),
            "seed": seed,
        },
    )


def contains(region: SecurityRegion, x):
    return region.contains(x)


def boundary_sweep_oracle(certificate, u=None, n_grid=20000, seed=0):
    """Independent dense sweep of the sphere; lower-bounds check on d*.

    m = 2 uses an exact uniform angle grid; m = 3, 4 use seeded
    quasi-uniform (normalized Gaussian) sampling.
    """
    u = certificate.u if u is None else u
    m = certificate.params.m
    if m > 4:
        raise ValueError("sweep oracle is desk-scale only (m <= 4)")
    if m == 2:
        ang = np.linspace(0.0, 2.0 * np.pi, n_grid, endpoint=False)
        pts = u * np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        rng = np.random.default_rng(seed)
        pts = uniform_sphere(rng, m, u, n_grid)
    values = certificate.value_batch(pts)
    return float(np.min(values))


def gradient_sup_bound(certificate):
    """Upper bound on ||dV/dx||_2: sum_j |w2_j| ||W1_j||_2 (tanh' <= 1)."""
    th = certificate.params
    return float(np.sum(np.abs(th.W2) * np.linalg.norm(th.W1, axis=1)))


def write_level_set_csv(path, certificate, d_star, u, dims=(0, 1), fixed=None,
                        n_grid=201):
    """Sample V on a 2-D coordinate slice for plotting; one row per grid point."""
    m = certificate.params.m
    base = np.zeros(m)
    if fixed:
        for k, v in fixed.items():
            base[int(k)] = v
    axis = np.linspace(-u, u, n_grid)
    i, j = dims
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}", f"x{j}", "V", "inside_region", "inside_ball"])
        for a in axis:
            for b in axis:
                x = base.copy()
                x[i], x[j] = a, b
                v = certificate.value(x)
                inside_ball = np.linalg.norm(x) < u
                writer.writerow([
                    repr(float(a)), repr(float(b)), repr(float(v)),
                    int(inside_ball and v < d_star), int(inside_ball),
                ])
