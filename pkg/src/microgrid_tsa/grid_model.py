"""Networked-microgrid model: droop interfaces, admittance coupling, vector field.

The model covers n PCC-level interfaces coupled through a lossy distribution
network. Three interface flavors are supported:

* angle droop, full        -> states (angle deviation, voltage deviation)
* angle droop, reduced     -> state  (angle deviation); voltage frozen at setpoint
* frequency droop          -> states (angle deviation, frequency deviation)

A bus may also be *stiff* (interface ``None``): its angle and voltage stay at
the setpoint and it contributes no states. That is how a grid-connected case
represents the upstream grid.

All quantities are per-unit except angles (rad) and time constants (s). The
state vector x collects deviations from the setpoint, so the origin is the
equilibrium whenever the setpoints balance the network power flow.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import intervals as iv
from .errors import DimensionMismatch, EquilibriumInconsistent


class InterfaceKind(Enum):
    ANGLE_DROOP_FULL = "angle_droop_full"
    ANGLE_DROOP_REDUCED = "angle_droop_reduced"
    FREQUENCY_DROOP = "frequency_droop"


ANGLE_DEV = "angle_dev"
VOLTAGE_DEV = "voltage_dev"
FREQ_DEV = "freq_dev"


@dataclass(frozen=True)
class DroopInterface:
    kind: InterfaceKind
    M_a: float | None = None
    D_a: float | None = None
    M_v: float | None = None
    D_v: float | None = None
    M_f: float | None = None
    D_f: float | None = None

    def __post_init__(self):
        required = {
            InterfaceKind.ANGLE_DROOP_FULL: ("M_a", "D_a", "M_v", "D_v"),
            InterfaceKind.ANGLE_DROOP_REDUCED: ("M_a", "D_a"),
            InterfaceKind.FREQUENCY_DROOP: ("M_f", "D_f"),
        }[self.kind]
        for name in required:
            value = getattr(self, name)
            if value is None or not value > 0:
                raise ValueError(f"{self.kind.value} requires {name} > 0, got {value}")

    @property
    def roles(self):
        if self.kind is InterfaceKind.ANGLE_DROOP_FULL:
            return (ANGLE_DEV, VOLTAGE_DEV)
        if self.kind is InterfaceKind.ANGLE_DROOP_REDUCED:
            return (ANGLE_DEV,)
        return (ANGLE_DEV, FREQ_DEV)


@dataclass(frozen=True)
class Setpoint:
    delta_star: float
    E_star: float
    P_star: float
    Q_star: float

    def __post_init__(self):
        if not self.E_star > 0:
            raise ValueError(f"E_star must be positive, got {self.E_star}")


@dataclass(frozen=True)
class NetworkModel:
    """Bus-admittance data: off-diagonal magnitude/angle plus self G, B."""

    Y_mag: np.ndarray
    Y_ang: np.ndarray
    G_diag: np.ndarray
    B_diag: np.ndarray

    def __post_init__(self):
        Y_mag = np.asarray(self.Y_mag, dtype=float)
        Y_ang = np.asarray(self.Y_ang, dtype=float)
        G = np.asarray(self.G_diag, dtype=float)
        B = np.asarray(self.B_diag, dtype=float)
        object.__setattr__(self, "Y_mag", Y_mag)
        object.__setattr__(self, "Y_ang", Y_ang)
        object.__setattr__(self, "G_diag", G)
        object.__setattr__(self, "B_diag", B)
        n = Y_mag.shape[0]
        if Y_mag.shape != (n, n) or Y_ang.shape != (n, n):
            raise DimensionMismatch("admittance matrices must be square and equal-sized")
        if G.shape != (n,) or B.shape != (n,):
            raise DimensionMismatch("self-admittance vectors must have length n")
        if np.any(Y_mag < 0):
            raise ValueError("admittance magnitudes must be nonnegative")
        if np.any(np.diag(Y_mag) != 0):
            raise ValueError("Y_mag diagonal must be zero (self terms live in G/B)")
        if not np.allclose(Y_mag, Y_mag.T, atol=1e-12):
            raise ValueError("Y_mag must be symmetric")
        mask = Y_mag > 0
        if not np.allclose(np.where(mask, Y_ang, 0.0), np.where(mask, Y_ang.T, 0.0), atol=1e-12):
            raise ValueError("Y_ang must be symmetric where lines exist")

    @property
    def n(self):
        return self.Y_mag.shape[0]

    @classmethod
    def from_lines(cls, n, lines):
        """Standard bus-admittance assembly from a list of (i, j, R, X) lines."""
        Y = np.zeros((n, n), dtype=complex)
        for i, j, R, X in lines:
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise DimensionMismatch(f"bad line endpoints ({i}, {j}) for n={n}")
            y = 1.0 / complex(R, X)
            Y[i, i] += y
            Y[j, j] += y
            Y[i, j] -= y
            Y[j, i] -= y
        off = Y - np.diag(np.diag(Y))
        return cls(
            Y_mag=np.abs(off),
            Y_ang=np.where(np.abs(off) > 0, np.angle(off), 0.0),
            G_diag=np.real(np.diag(Y)),
            B_diag=np.imag(np.diag(Y)),
        )


@dataclass(frozen=True)
class NetworkedSystem:
    """Immutable assembled system; owns the vector field of the coupled deviations."""

    interfaces: tuple
    setpoints: tuple
    network: NetworkModel
    state_layout: tuple = field(default=())
    eq_tol: float = 1e-8

    @property
    def n_bus(self):
        return len(self.setpoints)

    @property
    def m(self):
        return len(self.state_layout)

    @property
    def state_names(self):
        prefix = {ANGLE_DEV: "delta", VOLTAGE_DEV: "E", FREQ_DEV: "omega"}
        return [f"{prefix[role]}_dev_{bus + 1}" for bus, role in self.state_layout]

    # -- state packing ------------------------------------------------------

    def _unpack(self, x):
        """Split a state vector into full-length bus deviation vectors."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise DimensionMismatch(f"state has shape {x.shape}, expected ({self.m},)")
        d = np.zeros(self.n_bus)
        e = np.zeros(self.n_bus)
        w = np.zeros(self.n_bus)
        for value, (bus, role) in zip(x, self.state_layout):
            if role == ANGLE_DEV:
                d[bus] = value
            elif role == VOLTAGE_DEV:
                e[bus] = value
            else:
                w[bus] = value
        return d, e, w

    # -- point evaluation ---------------------------------------------------

    def _injections(self, d_dev, e_dev):
        sp = self.setpoints
        delta = np.array([s.delta_star for s in sp]) + d_dev
        E = np.array([s.E_star for s in sp]) + e_dev
        net = self.network
        D = delta[:, None] - delta[None, :] - net.Y_ang
        coupling_P = (net.Y_mag * np.cos(D)) @ E
        coupling_Q = (net.Y_mag * np.sin(D)) @ E
        P = net.G_diag * E**2 + E * coupling_P
        Q = -net.B_diag * E**2 + E * coupling_Q
        return P, Q

    def power_injection(self, x):
        """Real/reactive injection at every bus for deviation state x."""
        d, e, _ = self._unpack(x)
        P, Q = self._injections(d, e)
        return list(zip(P.tolist(), Q.tolist()))

    def dynamics(self, x):
        d, e, w = self._unpack(x)
        P, Q = self._injections(d, e)
        xdot = np.empty(self.m)
        for idx, (bus, role) in enumerate(self.state_layout):
            itf = self.interfaces[bus]
            sp = self.setpoints[bus]
            if role == ANGLE_DEV:
                if itf.kind is InterfaceKind.FREQUENCY_DROOP:
                    xdot[idx] = w[bus]
                else:
                    xdot[idx] = (itf.D_a * (sp.P_star - P[bus]) - d[bus]) / itf.M_a
            elif role == VOLTAGE_DEV:
                xdot[idx] = (itf.D_v * (sp.Q_star - Q[bus]) - e[bus]) / itf.M_v
            else:  # FREQ_DEV
                xdot[idx] = (sp.P_star - P[bus] - itf.D_f * w[bus]) / itf.M_f
        return xdot

    # -- interval evaluation ------------------------------------------------

    def dynamics_interval_batch(self, lo, hi):
        """Enclosures of the vector field over K boxes; lo, hi have shape (K, m)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        K = lo.shape[0]
        if lo.shape != (K, self.m) or hi.shape != (K, self.m):
            raise DimensionMismatch("box bounds must have shape (K, m)")
        n = self.n_bus
        d = (np.zeros((K, n)), np.zeros((K, n)))
        e = (np.zeros((K, n)), np.zeros((K, n)))
        w = (np.zeros((K, n)), np.zeros((K, n)))
        for idx, (bus, role) in enumerate(self.state_layout):
            tgt = {ANGLE_DEV: d, VOLTAGE_DEV: e, FREQ_DEV: w}[role]
            tgt[0][:, bus] = lo[:, idx]
            tgt[1][:, bus] = hi[:, idx]
        sp = self.setpoints
        dstar = np.array([s.delta_star for s in sp])
        estar = np.array([s.E_star for s in sp])
        net = self.network
        # pairwise angle argument: d_k - d_i + (delta*_k - delta*_i - sigma_ki)
        const = dstar[:, None] - dstar[None, :] - net.Y_ang
        arg = (
            d[0][:, :, None] - d[1][:, None, :] + const,
            d[1][:, :, None] - d[0][:, None, :] + const,
        )
        E = iv.shift(estar, e)
        Ek = (E[0][:, :, None] + np.zeros((1, 1, n)), E[1][:, :, None] + np.zeros((1, 1, n)))
        Ei = (np.zeros((1, n, 1)) + E[0][:, None, :], np.zeros((1, n, 1)) + E[1][:, None, :])
        pair = iv.mul(Ek, Ei)
        termP = iv.scale(net.Y_mag, iv.mul(pair, iv.cos(arg)))
        termQ = iv.scale(net.Y_mag, iv.mul(pair, iv.sin(arg)))
        sumP = (termP[0].sum(axis=2), termP[1].sum(axis=2))
        sumQ = (termQ[0].sum(axis=2), termQ[1].sum(axis=2))
        Esq = iv.square(E)
        P = iv.add(iv.scale(net.G_diag, Esq), iv.mul(E, sumP))
        Q = iv.add(iv.scale(-net.B_diag, Esq), iv.mul(E, sumQ))
        out_lo = np.empty((K, self.m))
        out_hi = np.empty((K, self.m))
        for idx, (bus, role) in enumerate(self.state_layout):
            itf = self.interfaces[bus]
            s = sp[bus]
            if role == ANGLE_DEV:
                if itf.kind is InterfaceKind.FREQUENCY_DROOP:
                    term = (w[0][:, bus], w[1][:, bus])
                else:
                    term = iv.scale(-itf.D_a / itf.M_a, (P[0][:, bus], P[1][:, bus]))
                    term = iv.add(term, iv.scale(-1.0 / itf.M_a, (d[0][:, bus], d[1][:, bus])))
                    term = iv.shift(itf.D_a * s.P_star / itf.M_a, term)
            elif role == VOLTAGE_DEV:
                term = iv.scale(-itf.D_v / itf.M_v, (Q[0][:, bus], Q[1][:, bus]))
                term = iv.add(term, iv.scale(-1.0 / itf.M_v, (e[0][:, bus], e[1][:, bus])))
                term = iv.shift(itf.D_v * s.Q_star / itf.M_v, term)
            else:
                term = iv.scale(-1.0 / itf.M_f, (P[0][:, bus], P[1][:, bus]))
                term = iv.add(term, iv.scale(-itf.D_f / itf.M_f, (w[0][:, bus], w[1][:, bus])))
                term = iv.shift(s.P_star / itf.M_f, term)
            out_lo[:, idx], out_hi[:, idx] = term
        return out_lo, out_hi

    def dynamics_interval(self, lo, hi):
        """Guaranteed enclosure of the vector field over the box [lo, hi]."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != (self.m,) or hi.shape != (self.m,):
            raise DimensionMismatch("box bounds must have length m")
        out_lo, out_hi = self.dynamics_interval_batch(lo[None, :], hi[None, :])
        return out_lo[0], out_hi[0]


def _build_layout(interfaces):
    layout = []
    for role_pass in (ANGLE_DEV, VOLTAGE_DEV, FREQ_DEV):
        for bus, itf in enumerate(interfaces):
            if itf is not None and role_pass in itf.roles:
                layout.append((bus, role_pass))
    return tuple(layout)


def equilibrium_residual(interfaces, setpoints, network):
    """Power-balance residual (P then Q rows) of the setpoints, per bus."""
    dstar = np.array([s.delta_star for s in setpoints])
    estar = np.array([s.E_star for s in setpoints])
    D = dstar[:, None] - dstar[None, :] - network.Y_ang
    P0 = network.G_diag * estar**2 + estar * ((network.Y_mag * np.cos(D)) @ estar)
    Q0 = -network.B_diag * estar**2 + estar * ((network.Y_mag * np.sin(D)) @ estar)
    resP = np.array([s.P_star for s in setpoints]) - P0
    resQ = np.array([s.Q_star for s in setpoints]) - Q0
    return resP, resQ


def repair_setpoints(setpoints, network):
    """Recompute P*, Q* from delta*, E* so the equilibrium balance holds exactly."""
    dstar = np.array([s.delta_star for s in setpoints])
    estar = np.array([s.E_star for s in setpoints])
    D = dstar[:, None] - dstar[None, :] - network.Y_ang
    P0 = network.G_diag * estar**2 + estar * ((network.Y_mag * np.cos(D)) @ estar)
    Q0 = -network.B_diag * estar**2 + estar * ((network.Y_mag * np.sin(D)) @ estar)
    return tuple(
        Setpoint(s.delta_star, s.E_star, float(p), float(q))
        for s, p, q in zip(setpoints, P0, Q0)
    )


def assemble_system(interfaces, setpoints, network, eq_tol=1e-8):
    """Validate dimensions and equilibrium consistency, fix the state ordering.

    ``interfaces[k] is None`` marks bus k as stiff (no dynamics, pinned at its
    setpoint). At least one bus must carry an interface.
    """
    interfaces = tuple(interfaces)
    setpoints = tuple(setpoints)
    n = network.n
    if len(interfaces) != n or len(setpoints) != n:
        raise DimensionMismatch(
            f"interfaces ({len(interfaces)}), setpoints ({len(setpoints)}) and "
            f"network ({n}) disagree on bus count"
        )
    if all(itf is None for itf in interfaces):
        raise DimensionMismatch("at least one bus must carry a droop interface")
    resP, resQ = equilibrium_residual(interfaces, setpoints, network)
    res = np.concatenate([resP, resQ])
    worst = int(np.argmax(np.abs(res)))
    if np.abs(res[worst]) > eq_tol:
        raise EquilibriumInconsistent(float(np.abs(res[worst])), worst % n)
    layout = _build_layout(interfaces)
    return NetworkedSystem(
        interfaces=interfaces,
        setpoints=setpoints,
        network=network,
        state_layout=layout,
        eq_tol=eq_tol,
    )
