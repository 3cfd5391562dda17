"""Counterexample search over the valid-region annulus, plus the CEGIS loop.

The falsifier answers the query "does the candidate satisfy V > 0 and
Vdot < 0 everywhere in {l^2 <= ||x||^2 <= u^2}?" by interval branch and
prune. A box is pruned when its enclosure proves both conditions; a box is
reported as a counterexample source when violation is certain or the box has
been refined to the precision delta. An empty result certifies the
conditions up to delta; an exhausted cell budget is a distinct "unknown"
outcome, never silently treated as certified.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import intervals as iv
from .errors import BudgetExhausted, LearnFailure
from .lyapunov_net import (
    NetParams,
    forward,
    init_params,
    lie_derivative,
    min_risk,
    risk,
    shift_to_zero,
)
from .sampling import uniform_ball

COLLECT_CAP = 256
RETURN_CAP = 64


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


@dataclass(frozen=True)
class FalsifierConfig:
    u: float
    delta: float = 1e-3
    l: float | None = None  # defaults to 0.1 * u
    max_cells: int = 500_000

    def __post_init__(self):
        l = 0.1 * self.u if self.l is None else self.l
        object.__setattr__(self, "l", float(l))
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.l < self.u:
            raise ValueError("need 0 < l < u")
        if self.max_cells < 1:
            raise ValueError("max_cells must be positive")


@dataclass
class FalsificationResult:
    verdict: str  # "certified" | "counterexamples"
    points: list  # sorted nearest-to-origin first, capped
    cells: int
    wall_time: float
    delta: float

    @property
    def empty(self):
        return len(self.points) == 0


# -- candidate evaluators ---------------------------------------------------

class NeuralEvaluator:
    """Interval and point evaluation of the tanh candidate over a vector field."""

    def __init__(self, theta: NetParams, system, shift=0.0):
        self.theta = theta
        self.system = system
        self.shift = float(shift)

    def point(self, x):
        V, _ = forward(self.theta, x)
        vdot = lie_derivative(self.theta, x, self.system.dynamics(x))
        return V - self.shift, vdot

    def bounds_batch(self, los, his):
        """V and Vdot enclosures over K boxes; returns four (K,) arrays.

        Each quantity is bounded twice and the bounds intersected: a natural
        interval extension, and a centered (mean-value) form around the box
        midpoint whose slack shrinks quadratically with the box width. Both
        are guaranteed enclosures, so their intersection is one too.
        """
        th = self.theta
        box = (np.asarray(los, dtype=float), np.asarray(his, dtype=float))
        # natural extension -------------------------------------------------
        c1 = iv.shift(th.b1, iv.matvec(th.W1, box))
        t = iv.tanh(c1)
        c2_lo = t[0] @ np.maximum(th.W2, 0.0) + t[1] @ np.minimum(th.W2, 0.0) + th.b2
        c2_hi = t[1] @ np.maximum(th.W2, 0.0) + t[0] @ np.minimum(th.W2, 0.0) + th.b2
        V_raw = iv.tanh((c2_lo, c2_hi))
        f_box = self.system.dynamics_interval_batch(*box)
        g = iv.matvec(th.W1, f_box)
        tsq = iv.square(t)
        tprime = (1.0 - tsq[1], 1.0 - tsq[0])
        terms = iv.scale(th.W2, iv.mul(tprime, g))
        S = (terms[0].sum(axis=-1), terms[1].sum(axis=-1))
        vsq = iv.square(V_raw)
        sfac = (1.0 - vsq[1], 1.0 - vsq[0])
        D_lo, D_hi = iv.mul(sfac, S)
        V_lo, V_hi = V_raw

        # centered form -----------------------------------------------------
        # V(x) in V(c) + [dV/dx](box) . [x - c]
        # Vdot(x) in Vdot(c) + ([H_V](box) [x - c]) . [f](box)
        #                    + dV/dx(c) . ([f](box) - f(c))
        # where H_V is the Hessian of V; [x - c] is symmetric, so both
        # matrix-interval products reduce to absolute-value sums.
        c = 0.5 * (box[0] + box[1])
        hw = 0.5 * (box[1] - box[0])
        a1 = c @ th.W1.T + th.b1
        tc = np.tanh(a1)
        Vc = np.tanh(tc @ th.W2 + th.b2)
        grad_c = (1.0 - Vc**2)[:, None] * ((th.W2 * (1.0 - tc**2)) @ th.W1)
        fc = self.system.dynamics_interval_batch(c, c)[0]
        Dc = np.sum(grad_c * fc, axis=1)

        # interval inner gradient z_i = sum_j W2_j (1 - t_j^2) W1_ji
        coeff = th.W2[:, None] * th.W1                      # (p, m)
        z = (tprime[0] @ np.maximum(coeff, 0.0) + tprime[1] @ np.minimum(coeff, 0.0),
             tprime[1] @ np.maximum(coeff, 0.0) + tprime[0] @ np.minimum(coeff, 0.0))
        sfac_b = (sfac[0][:, None], sfac[1][:, None])
        grad_iv = iv.mul(sfac_b, z)                         # (K, m) interval
        rad_V = np.sum(np.maximum(np.abs(grad_iv[0]), np.abs(grad_iv[1])) * hw,
                       axis=1)
        V_lo = np.maximum(V_lo, Vc - rad_V)
        V_hi = np.minimum(V_hi, Vc + rad_V)

        # interval Hessian: H = -2 V (1-V^2) z z^T
        #                     + (1-V^2) sum_j W2_j (-2 t_j (1-t_j^2)) W1_j W1_j^T
        q1 = iv.scale(-2.0, iv.mul(V_raw, sfac))            # (K,) interval
        zz = iv.mul((z[0][:, :, None], z[1][:, :, None]),
                    (z[0][:, None, :], z[1][:, None, :]))   # (K, m, m)
        A = iv.mul((q1[0][:, None, None], q1[1][:, None, None]), zz)
        e = iv.scale(-2.0, iv.mul(t, tprime))               # (K, p) interval
        C = (th.W2[:, None, None] * th.W1[:, :, None]
             * th.W1[:, None, :]).reshape(th.p, -1)         # (p, m*m)
        B_inner = (e[0] @ np.maximum(C, 0.0) + e[1] @ np.minimum(C, 0.0),
                   e[1] @ np.maximum(C, 0.0) + e[0] @ np.minimum(C, 0.0))
        m = th.m
        B_inner = (B_inner[0].reshape(-1, m, m), B_inner[1].reshape(-1, m, m))
        B = iv.mul((sfac[0][:, None, None], sfac[1][:, None, None]), B_inner)
        H = iv.add(A, B)
        H_abs = np.maximum(np.abs(H[0]), np.abs(H[1]))
        # |(H [x-c])_i| <= sum_k |H_ik| hw_k, then dotted with |f| bounds
        s = np.einsum("kim,km->ki", H_abs, hw)
        f_abs = np.maximum(np.abs(f_box[0]), np.abs(f_box[1]))
        rad_1 = np.sum(s * f_abs, axis=1)
        df = (f_box[0] - fc, f_box[1] - fc)
        t2 = (grad_c * df[0], grad_c * df[1])
        T2 = (np.minimum(t2[0], t2[1]).sum(axis=1),
              np.maximum(t2[0], t2[1]).sum(axis=1))
        D_lo = np.maximum(D_lo, Dc - rad_1 + T2[0])
        D_hi = np.minimum(D_hi, Dc + rad_1 + T2[1])
        return V_lo - self.shift, V_hi - self.shift, D_lo, D_hi

    def bounds(self, lo, hi):
        V_lo, V_hi, D_lo, D_hi = self.bounds_batch(
            np.asarray(lo, dtype=float)[None, :], np.asarray(hi, dtype=float)[None, :]
        )
        return (float(V_lo[0]), float(V_hi[0])), (float(D_lo[0]), float(D_hi[0]))


class QuadraticEvaluator:
    """V = x^T P x with Vdot = 2 x^T P f(x) over an arbitrary vector field."""

    def __init__(self, P, f_point, f_interval):
        self.P = np.asarray(P, dtype=float)
        self.f_point = f_point
        self.f_interval = f_interval

    @classmethod
    def for_system(cls, P, system):
        return cls(P, system.dynamics, system.dynamics_interval_batch)

    @classmethod
    def for_linear_field(cls, P, A):
        A = np.asarray(A, dtype=float)
        return cls(
            P,
            lambda x: A @ np.asarray(x, dtype=float),
            lambda lo, hi: iv.matvec(A, (np.asarray(lo, float), np.asarray(hi, float))),
        )

    def point(self, x):
        x = np.asarray(x, dtype=float)
        V = float(x @ self.P @ x)
        vdot = float(2.0 * x @ (self.P @ np.asarray(self.f_point(x), dtype=float)))
        return V, vdot

    def bounds_batch(self, los, his):
        box = (np.asarray(los, dtype=float), np.asarray(his, dtype=float))
        m = box[0].shape[-1]
        sq = iv.square(box)
        diag = iv.scale(np.diag(self.P), sq)
        V_lo = diag[0].sum(axis=-1)
        V_hi = diag[1].sum(axis=-1)
        for i in range(m):
            for j in range(i + 1, m):
                if self.P[i, j] != 0.0:
                    cross = iv.scale(
                        2.0 * self.P[i, j],
                        iv.mul((box[0][..., i], box[1][..., i]),
                               (box[0][..., j], box[1][..., j])),
                    )
                    V_lo = V_lo + cross[0]
                    V_hi = V_hi + cross[1]
        f_box = self.f_interval(*box)
        w = iv.matvec(self.P, f_box)
        prod = iv.mul(box, w)
        D_lo = 2.0 * prod[0].sum(axis=-1)
        D_hi = 2.0 * prod[1].sum(axis=-1)
        return V_lo, V_hi, D_lo, D_hi

    def bounds(self, lo, hi):
        V_lo, V_hi, D_lo, D_hi = self.bounds_batch(
            np.asarray(lo, dtype=float)[None, :], np.asarray(hi, dtype=float)[None, :]
        )
        return (float(V_lo[0]), float(V_hi[0])), (float(D_lo[0]), float(D_hi[0]))


def interval_bounds(theta, system, box: Box, shift=0.0):
    """Guaranteed enclosures of V and Vdot over the box."""
    return NeuralEvaluator(theta, system, shift=shift).bounds(box.lo, box.hi)


# -- branch and prune -------------------------------------------------------

def _clamp_to_annulus(x, l, u):
    norm = np.linalg.norm(x)
    if norm == 0.0:
        return None
    if norm < l:
        return x * (l / norm)
    if norm > u:
        return x * (u / norm)
    return x


_WAVE = 4096


def falsify(evaluator, m, cfg: FalsifierConfig):
    """Branch-and-prune search for Lyapunov-condition violations in the annulus.

    Boxes are processed in waves so the interval evaluations vectorize; the
    pop order is deterministic, so results are reproducible run to run.
    """
    start = time.perf_counter()
    l2, u2 = cfg.l**2, cfg.u**2
    delta = cfg.delta
    lo_stack = np.full((1, m), -cfg.u)
    hi_stack = np.full((1, m), cfg.u)
    points = []
    cells = 0
    capped = False

    def point_ok(x):
        V, vdot = evaluator.point(x)
        return V <= delta or vdot >= -delta

    while len(lo_stack) and not capped:
        if cells >= cfg.max_cells:
            if points:
                break
            raise BudgetExhausted(cfg.max_cells, len(lo_stack))
        take = min(_WAVE, len(lo_stack), cfg.max_cells - cells)
        lo, hi = lo_stack[-take:], hi_stack[-take:]
        lo_stack, hi_stack = lo_stack[:-take], hi_stack[:-take]
        cells += take
        sq = iv.square((lo, hi))
        in_annulus = (sq[1].sum(axis=1) >= l2) & (sq[0].sum(axis=1) <= u2)
        if not in_annulus.any():
            continue
        lo, hi = lo[in_annulus], hi[in_annulus]
        V_lo, V_hi, D_lo, D_hi = evaluator.bounds_batch(lo, hi)
        active = ~((V_lo > 0.0) & (D_hi < 0.0))
        widths = (hi - lo).max(axis=1)
        leaf = widths <= delta
        candidate = active & ((V_hi <= delta) | (D_lo >= -delta) | leaf)
        split_mask = active & ~leaf
        for idx in np.nonzero(candidate)[0]:
            x = _clamp_to_annulus(0.5 * (lo[idx] + hi[idx]), cfg.l, cfg.u)
            if x is not None and point_ok(x):
                points.append(x)
                split_mask[idx] = False
                if len(points) >= COLLECT_CAP:
                    capped = True
                    break
        if capped:
            break
        sl, sh = lo[split_mask], hi[split_mask]
        if len(sl):
            rows = np.arange(len(sl))
            j = np.argmax(sh - sl, axis=1)
            mid = 0.5 * (sl[rows, j] + sh[rows, j])
            left_hi = sh.copy()
            left_hi[rows, j] = mid
            right_lo = sl.copy()
            right_lo[rows, j] = mid
            lo_stack = np.concatenate([lo_stack, sl, right_lo])
            hi_stack = np.concatenate([hi_stack, left_hi, sh])

    points.sort(key=lambda x: (float(np.linalg.norm(x)), tuple(x)))
    points = points[:RETURN_CAP]
    return FalsificationResult(
        verdict="certified" if not points else "counterexamples",
        points=points,
        cells=cells,
        wall_time=time.perf_counter() - start,
        delta=delta,
    )


def add_samples(samples, counterexamples):
    """Union with exact-match deduplication; never shrinks the sample set."""
    samples = np.asarray(samples, dtype=float)
    seen = {s.tobytes() for s in samples}
    added = []
    for c in counterexamples:
        c = np.asarray(c, dtype=float)
        key = c.tobytes()
        if key not in seen:
            seen.add(key)
            added.append(c)
    if not added:
        return samples
    return np.vstack([samples, np.array(added)])


# -- CEGIS loop -------------------------------------------------------------

@dataclass
class RoundRecord:
    updates: int
    n_samples: int
    risk: float
    n_counterexamples: int
    cells: int
    wall_time: float


def learn_function(system, train_cfg, fals_cfg, n_i, theta0=None, initial_samples=None):
    """Alternate risk minimization and falsification until certified.

    Returns a shifted certificate with an audit trail, or raises LearnFailure
    once the update budget n_i is spent (or the falsifier runs out of cells).
    """
    m = system.m
    rng = np.random.default_rng(train_cfg.seed)
    if initial_samples is None:
        X = uniform_ball(rng, m, fals_cfg.u, train_cfg.q)
    else:
        X = np.asarray(initial_samples, dtype=float)
    FX = np.array([system.dynamics(x) for x in X])
    theta = theta0 if theta0 is not None else init_params(m, train_cfg.p, train_cfg.seed)

    audit = []
    j = 0
    result = None
    while j <= n_i:
        theta, trace = min_risk(theta, X, FX, train_cfg)
        j += train_cfg.r
        # falsify the shifted candidate V - V(0): exactly what the certificate
        # returns, so the certified conditions survive the final shift
        V0, _ = forward(theta, np.zeros(m))
        evaluator = NeuralEvaluator(theta, system, shift=V0)
        try:
            result = falsify(evaluator, m, fals_cfg)
        except BudgetExhausted as exc:
            raise LearnFailure(
                f"falsifier cell budget exhausted after {j} updates "
                f"({exc.unresolved} boxes unresolved); raise max_cells or decrease u",
                [], audit,
            ) from exc
        audit.append(RoundRecord(
            updates=j,
            n_samples=len(X),
            risk=trace[-1] if trace else risk(theta, X, FX, train_cfg),
            n_counterexamples=len(result.points),
            cells=result.cells,
            wall_time=result.wall_time,
        ))
        if result.empty:
            return shift_to_zero(theta, fals_cfg.u, audit={
                "updates": j,
                "rounds": len(audit),
                "final_samples": len(X),
                "risk_trace": [r.risk for r in audit],
                "sample_trace": [r.n_samples for r in audit],
            })
        new_X = add_samples(X, result.points)
        if len(new_X) > len(X):
            extra = new_X[len(X):]
            FX = np.vstack([FX, np.array([system.dynamics(x) for x in extra])])
            X = new_X

    # diagnose which condition kept failing
    pos_bad = dot_bad = 0
    last = result.points if result is not None else []
    V0, _ = forward(theta, np.zeros(m))
    evaluator = NeuralEvaluator(theta, system, shift=V0)
    for x in last:
        V, vdot = evaluator.point(x)
        if V <= fals_cfg.delta:
            pos_bad += 1
        if vdot >= -fals_cfg.delta:
            dot_bad += 1
    raise LearnFailure(
        f"no certificate within {n_i} parameter updates "
        f"(last round: {pos_bad} positivity violations, {dot_bad} decrease violations); "
        "try decreasing u, changing the seed, or retuning alpha/beta/gamma",
        last, audit,
    )
