"""Two-layer tanh Lyapunov candidate: evaluation, risk, analytic gradient, trainer.

The candidate is V(x) = tanh(W2 tanh(W1 x + b1) + b2). Training minimizes the
empirical risk

    R = (alpha/q) sum ReLU(-V(x_i))
      + (beta/q)  sum ReLU(Vdot(x_i) + tau)
      + gamma * V(0)^2

by plain full-batch gradient descent. Everything here is pure numpy and
deterministic given the seed.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteRisk

CERTIFICATE_FORMAT = "lyapunov-net-certificate"
CERTIFICATE_VERSION = 1


@dataclass(frozen=True)
class NetParams:
    W1: np.ndarray  # (p, m)
    b1: np.ndarray  # (p,)
    W2: np.ndarray  # (p,)  row weights of the scalar output layer
    b2: float

    def __post_init__(self):
        W1 = np.asarray(self.W1, dtype=float)
        b1 = np.asarray(self.b1, dtype=float)
        W2 = np.asarray(self.W2, dtype=float).reshape(-1)
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "W2", W2)
        object.__setattr__(self, "b2", float(self.b2))
        p, m = W1.shape
        if b1.shape != (p,) or W2.shape != (p,):
            raise ValueError("inconsistent layer dimensions")
        if not (np.all(np.isfinite(W1)) and np.all(np.isfinite(b1))
                and np.all(np.isfinite(W2)) and np.isfinite(self.b2)):
            raise ValueError("parameters must be finite")

    @property
    def p(self):
        return self.W1.shape[0]

    @property
    def m(self):
        return self.W1.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 1.0
    beta: float = 5.0
    gamma: float = 0.0
    tau: float = 0.1
    eta: float = 0.01
    r: int = 10
    p: int = 6
    seed: int = 0
    q: int = 500

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("risk weights must be nonnegative")


def init_params(m, p, seed):
    """Zero-mean uniform init scaled by 1/sqrt(fan_in), per layer."""
    rng = np.random.default_rng(seed)
    s1 = 1.0 / np.sqrt(m)
    s2 = 1.0 / np.sqrt(p)
    return NetParams(
        W1=rng.uniform(-s1, s1, size=(p, m)),
        b1=rng.uniform(-s1, s1, size=p),
        W2=rng.uniform(-s2, s2, size=p),
        b2=float(rng.uniform(-s2, s2)),
    )


# -- evaluation -------------------------------------------------------------

def forward(theta, x):
    """V at a single point, plus the layer intermediates (c1, v1, c2)."""
    x = np.asarray(x, dtype=float)
    c1 = theta.W1 @ x + theta.b1
    v1 = np.tanh(c1)
    c2 = float(theta.W2 @ v1 + theta.b2)
    return float(np.tanh(c2)), (c1, v1, c2)


def forward_batch(theta, X):
    X = np.asarray(X, dtype=float)
    C1 = X @ theta.W1.T + theta.b1
    T = np.tanh(C1)
    c2 = T @ theta.W2 + theta.b2
    return np.tanh(c2), (C1, T, c2)


def lie_derivative(theta, x, f):
    """Vdot = dV/dx . f(x) through the tanh chain."""
    V, (c1, v1, _) = forward(theta, x)
    fx = np.asarray(f(x) if callable(f) else f, dtype=float)
    g = theta.W1 @ fx
    return float((1.0 - V**2) * np.sum(theta.W2 * (1.0 - v1**2) * g))


def lie_derivative_batch(theta, X, FX):
    V, (_, T, _) = forward_batch(theta, X)
    G = np.asarray(FX, dtype=float) @ theta.W1.T
    U = ((1.0 - T**2) * G) @ theta.W2
    return (1.0 - V**2) * U, V


def v_gradient(theta, x):
    """Row gradient dV/dx = (1 - V^2) * (W2 o (1 - tanh^2 c1)) W1."""
    V, (_, v1, _) = forward(theta, x)
    return (1.0 - V**2) * (theta.W2 * (1.0 - v1**2)) @ theta.W1


# -- risk and gradient ------------------------------------------------------

def risk(theta, X, FX, cfg):
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ValueError("sample set must be nonempty")
    Vdot, V = lie_derivative_batch(theta, X, FX)
    q = len(X)
    V0, _ = forward(theta, np.zeros(theta.m))
    value = (
        cfg.alpha / q * np.sum(np.maximum(-V, 0.0))
        + cfg.beta / q * np.sum(np.maximum(Vdot + cfg.tau, 0.0))
        + cfg.gamma * V0**2
    )
    return float(value)


def _batch_partials(theta, X, FX):
    """Per-sample partial derivatives of V and Vdot w.r.t. every parameter."""
    X = np.asarray(X, dtype=float)
    FX = np.asarray(FX, dtype=float)
    W2 = theta.W2
    C1 = X @ theta.W1.T + theta.b1
    T = np.tanh(C1)
    c2 = T @ W2 + theta.b2
    V = np.tanh(c2)
    S = 1.0 - V**2
    Tp = 1.0 - T**2  # tanh' at the hidden layer
    G = FX @ theta.W1.T
    U = (Tp * G) @ W2
    Vdot = S * U

    dV_dc1 = S[:, None] * W2[None, :] * Tp
    dV = {
        "W2": S[:, None] * T,
        "b2": S,
        "c1": dV_dc1,
    }
    dU_dW2 = Tp * G
    dU_dc1 = -2.0 * T * W2[None, :] * G * Tp
    coef = -2.0 * U * V  # chain through dS = -2 V dV
    dVdot = {
        "W2": S[:, None] * dU_dW2 + coef[:, None] * dV["W2"],
        "b2": coef * S,
        "c1": S[:, None] * dU_dc1 + coef[:, None] * dV_dc1,
        "W1_f": S[:, None] * (W2[None, :] * Tp),  # extra term paired with f(x)
    }
    return V, Vdot, dV, dVdot, X, FX


def risk_gradient(theta, X, FX, cfg):
    """Exact gradient of the empirical risk; ReLU subgradient at the kink is 0."""
    V, Vdot, dV, dVdot, X, FX = _batch_partials(theta, X, FX)
    q = len(X)
    w_pos = np.where(-V > 0, -cfg.alpha / q, 0.0)       # d ReLU(-V) = -dV
    w_dot = np.where(Vdot + cfg.tau > 0, cfg.beta / q, 0.0)

    gW2 = w_pos @ dV["W2"] + w_dot @ dVdot["W2"]
    gb2 = float(w_pos @ dV["b2"] + w_dot @ dVdot["b2"])
    gc1 = w_pos[:, None] * dV["c1"] + w_dot[:, None] * dVdot["c1"]
    gb1 = gc1.sum(axis=0)
    gW1 = gc1.T @ X + (w_dot[:, None] * dVdot["W1_f"]).T @ FX

    if cfg.gamma != 0.0:
        zero = np.zeros(theta.m)
        V0, (_, v10, _) = forward(theta, zero)
        S0 = 1.0 - V0**2
        c = cfg.gamma * 2.0 * V0
        gW2 = gW2 + c * S0 * v10
        gb2 += c * S0
        dc1 = c * S0 * theta.W2 * (1.0 - v10**2)
        gb1 = gb1 + dc1
        # dV0/dW1 = dc1 x0^T = 0 at the origin
    return NetParams(W1=gW1, b1=gb1, W2=gW2, b2=gb2)


def min_risk(theta0, X, FX, cfg):
    """r full-batch gradient-descent updates; returns final params and risk trace."""
    theta = theta0
    trace = []
    for _ in range(cfg.r):
        value = risk(theta, X, FX, cfg)
        if not np.isfinite(value):
            raise NonFiniteRisk("risk became non-finite; reduce eta")
        try:
            grad = risk_gradient(theta, X, FX, cfg)
        except ValueError as exc:
            raise NonFiniteRisk(f"gradient became non-finite: {exc}") from exc
        if not all(
            np.all(np.isfinite(v)) for v in (grad.W1, grad.b1, grad.W2, [grad.b2])
        ):
            raise NonFiniteRisk("risk or gradient became non-finite; reduce eta")
        trace.append(value)
        theta = NetParams(
            W1=theta.W1 - cfg.eta * grad.W1,
            b1=theta.b1 - cfg.eta * grad.b1,
            W2=theta.W2 - cfg.eta * grad.W2,
            b2=theta.b2 - cfg.eta * grad.b2,
        )
    return theta, trace


# -- shifted certificate ----------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    """Shifted candidate V(x) - V(0) with its valid-region radius."""

    params: NetParams
    shift: float
    u: float
    audit: dict = field(default_factory=dict, compare=False)

    def value(self, x):
        V, _ = forward(self.params, x)
        return V - self.shift

    def value_batch(self, X):
        V, _ = forward_batch(self.params, X)
        return V - self.shift

    def vdot(self, x, f):
        # constant shift has zero derivative
        return lie_derivative(self.params, x, f)

    def gradient(self, x):
        return v_gradient(self.params, x)

    def to_dict(self):
        return {
            "format": CERTIFICATE_FORMAT,
            "version": CERTIFICATE_VERSION,
            "m": self.params.m,
            "p": self.params.p,
            "u": self.u,
            "shift": self.shift,
            "W1": self.params.W1.tolist(),
            "b1": self.params.b1.tolist(),
            "W2": self.params.W2.tolist(),
            "b2": self.params.b2,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != CERTIFICATE_FORMAT:
            raise ValueError("not a certificate file")
        if data.get("version") != CERTIFICATE_VERSION:
            raise ValueError(f"unsupported certificate version {data.get('version')}")
        params = NetParams(
            W1=np.array(data["W1"], dtype=float),
            b1=np.array(data["b1"], dtype=float),
            W2=np.array(data["W2"], dtype=float),
            b2=float(data["b2"]),
        )
        return cls(params=params, shift=float(data["shift"]), u=float(data["u"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def shift_to_zero(theta, u, audit=None):
    """Pin the candidate to zero at the origin by subtracting V(0)."""
    V0, _ = forward(theta, np.zeros(theta.m))
    return Certificate(params=theta, shift=V0, u=u, audit=audit or {})
