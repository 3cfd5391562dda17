"""Fixed-step RK4 time-domain integration for empirical validation."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteState


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    final_norm: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if len(t) != len(s):
            raise ValueError("times and states must have equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)


def integrate(f, x0, T, dt):
    """Classical 4th-order Runge-Kutta with fixed step; records every step.

    ``f`` may be a callable or an assembled system (its ``dynamics`` is used).
    """
    if dt <= 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    if hasattr(f, "dynamics"):
        f = f.dynamics
    x = np.asarray(x0, dtype=float).copy()
    n_steps = int(round(T / dt))
    times = [0.0]
    states = [x.copy()]
    for k in range(n_steps):
        k1 = np.asarray(f(x))
        k2 = np.asarray(f(x + 0.5 * dt * k1))
        k3 = np.asarray(f(x + 0.5 * dt * k2))
        k4 = np.asarray(f(x + dt * k3))
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"state blew up at t = {(k + 1) * dt:.4f}")
        times.append((k + 1) * dt)
        states.append(x.copy())
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        final_norm=float(np.linalg.norm(x)),
    )


def converged(trajectory: Trajectory, eps=1e-3, window=None):
    """True iff ||x(t)|| <= eps throughout the trailing window (seconds).

    Default window is the last 10% of the simulated span.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    t = trajectory.times
    span = t[-1] - t[0]
    window = 0.1 * span if window is None else window
    mask = t >= t[-1] - window
    norms = np.linalg.norm(trajectory.states[mask], axis=1)
    return bool(np.all(norms <= eps))


def default_time_grid(system, factor_T=20.0, steps_per_tc=50.0):
    """(T, dt) from the interface time constants: T = 20 * max, dt = min / 50."""
    tcs = []
    for itf in system.interfaces:
        if itf is None:
            continue
        for name in ("M_a", "M_v", "M_f"):
            value = getattr(itf, name)
            if value is not None:
                tcs.append(value)
    T = factor_T * max(tcs)
    dt = min(tcs) / steps_per_tc
    return T, dt


def write_trajectory_csv(path, trajectory: Trajectory, state_names):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + list(state_names))
        for t, x in zip(trajectory.times, trajectory.states):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in x])
