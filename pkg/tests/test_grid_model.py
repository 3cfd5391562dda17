"""Grid model: admittance assembly, power flow, vector field, interval enclosures."""

import numpy as np
import pytest

import microgrid_tsa as mt
from microgrid_tsa.errors import DimensionMismatch, EquilibriumInconsistent
from microgrid_tsa.grid_model import (
    ANGLE_DEV,
    FREQ_DEV,
    VOLTAGE_DEV,
    equilibrium_residual,
    repair_setpoints,
)

LINES_3BUS = [(0, 1, 1.10, 0.95), (1, 2, 1.25, 1.05), (0, 2, 1.30, 1.15)]


def reduced_interface(M_a=1.0, D_a=1.2):
    return mt.DroopInterface(kind=mt.InterfaceKind.ANGLE_DROOP_REDUCED,
                             M_a=M_a, D_a=D_a)


def three_bus_system(deltas=(0.0, -0.15, 0.2)):
    net = mt.NetworkModel.from_lines(3, LINES_3BUS)
    itfs = [reduced_interface(M) for M in (1.2, 1.0, 0.8)]
    sps = repair_setpoints([mt.Setpoint(d, 1.0, 0.0, 0.0) for d in deltas], net)
    return mt.assemble_system(itfs, sps, net)


# -- admittance assembly ----------------------------------------------------

def test_from_lines_matches_complex_ybus():
    # independent construction of the bus admittance matrix
    n = 3
    Y = np.zeros((n, n), dtype=complex)
    for i, j, R, X in LINES_3BUS:
        y = 1.0 / complex(R, X)
        Y[i, i] += y
        Y[j, j] += y
        Y[i, j] -= y
        Y[j, i] -= y
    net = mt.NetworkModel.from_lines(n, LINES_3BUS)
    off = Y - np.diag(np.diag(Y))
    np.testing.assert_allclose(net.Y_mag, np.abs(off), atol=1e-14)
    mask = np.abs(off) > 0
    np.testing.assert_allclose(net.Y_ang[mask], np.angle(off[mask]), atol=1e-14)
    np.testing.assert_allclose(net.G_diag, np.real(np.diag(Y)), atol=1e-14)
    np.testing.assert_allclose(net.B_diag, np.imag(np.diag(Y)), atol=1e-14)


def test_from_lines_rejects_bad_endpoints():
    with pytest.raises(DimensionMismatch):
        mt.NetworkModel.from_lines(2, [(0, 0, 1.0, 1.0)])
    with pytest.raises(DimensionMismatch):
        mt.NetworkModel.from_lines(2, [(0, 5, 1.0, 1.0)])


def test_network_model_validation():
    with pytest.raises(ValueError):
        mt.NetworkModel(Y_mag=np.array([[0.0, -1.0], [-1.0, 0.0]]),
                        Y_ang=np.zeros((2, 2)), G_diag=np.zeros(2),
                        B_diag=np.zeros(2))
    with pytest.raises(ValueError):
        mt.NetworkModel(Y_mag=np.array([[0.0, 1.0], [2.0, 0.0]]),
                        Y_ang=np.zeros((2, 2)), G_diag=np.zeros(2),
                        B_diag=np.zeros(2))


# -- power flow oracle ------------------------------------------------------

def injections_oracle(system, x):
    """Loop-form power flow, written independently of the vectorized code."""
    n = system.n_bus
    d = np.zeros(n)
    e = np.zeros(n)
    for value, (bus, role) in zip(x, system.state_layout):
        if role == ANGLE_DEV:
            d[bus] = value
        elif role == VOLTAGE_DEV:
            e[bus] = value
    delta = np.array([s.delta_star for s in system.setpoints]) + d
    E = np.array([s.E_star for s in system.setpoints]) + e
    net = system.network
    out = []
    for k in range(n):
        P = net.G_diag[k] * E[k] ** 2
        Q = -net.B_diag[k] * E[k] ** 2
        for i in range(n):
            if i == k:
                continue
            arg = delta[k] - delta[i] - net.Y_ang[k, i]
            P += E[k] * E[i] * net.Y_mag[k, i] * np.cos(arg)
            Q += E[k] * E[i] * net.Y_mag[k, i] * np.sin(arg)
        out.append((P, Q))
    return out


def test_power_injection_matches_loop_oracle():
    system = three_bus_system()
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(-0.5, 0.5, size=system.m)
        got = system.power_injection(x)
        want = injections_oracle(system, x)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_power_injection_invariant_under_uniform_angle_shift():
    # only angle differences enter the flow
    net = mt.NetworkModel.from_lines(3, LINES_3BUS)
    base = [0.0, -0.15, 0.2]
    for shift in (0.3, -1.1):
        sp0 = repair_setpoints([mt.Setpoint(d, 1.0, 0, 0) for d in base], net)
        sp1 = repair_setpoints([mt.Setpoint(d + shift, 1.0, 0, 0) for d in base], net)
        for a, b in zip(sp0, sp1):
            assert np.isclose(a.P_star, b.P_star, atol=1e-12)
            assert np.isclose(a.Q_star, b.Q_star, atol=1e-12)


# -- assembly and layout ----------------------------------------------------

def test_state_layout_orders_roles_angle_voltage_frequency():
    net = mt.NetworkModel.from_lines(3, LINES_3BUS)
    itfs = [
        mt.DroopInterface(kind=mt.InterfaceKind.ANGLE_DROOP_FULL,
                          M_a=0.5, D_a=1.2, M_v=2.0, D_v=1.0),
        reduced_interface(),
        mt.DroopInterface(kind=mt.InterfaceKind.FREQUENCY_DROOP, M_f=0.5, D_f=1.2),
    ]
    sps = repair_setpoints([mt.Setpoint(0, 1, 0, 0)] * 3, net)
    system = mt.assemble_system(itfs, sps, net)
    assert system.state_layout == (
        (0, ANGLE_DEV), (1, ANGLE_DEV), (2, ANGLE_DEV),
        (0, VOLTAGE_DEV), (2, FREQ_DEV),
    )
    assert system.state_names == [
        "delta_dev_1", "delta_dev_2", "delta_dev_3", "E_dev_1", "omega_dev_3",
    ]


def test_stiff_bus_contributes_no_state():
    net = mt.NetworkModel.from_lines(2, [(0, 1, 1.2, 1.1)])
    itf = reduced_interface()
    sps = repair_setpoints([mt.Setpoint(0, 1, 0, 0)] * 2, net)
    system = mt.assemble_system([itf, None], sps, net)
    assert system.m == 1
    assert system.state_layout == ((0, ANGLE_DEV),)


def test_assemble_rejects_all_stiff_and_bad_counts():
    net = mt.NetworkModel.from_lines(2, [(0, 1, 1.2, 1.1)])
    sps = repair_setpoints([mt.Setpoint(0, 1, 0, 0)] * 2, net)
    with pytest.raises(DimensionMismatch):
        mt.assemble_system([None, None], sps, net)
    with pytest.raises(DimensionMismatch):
        mt.assemble_system([reduced_interface()], sps[:1], net)


def test_assemble_rejects_unbalanced_setpoints():
    net = mt.NetworkModel.from_lines(2, [(0, 1, 1.2, 1.1)])
    sps = (mt.Setpoint(0.4, 1.0, 0.0, 0.0), mt.Setpoint(0.0, 1.0, 0.0, 0.0))
    with pytest.raises(EquilibriumInconsistent) as exc:
        mt.assemble_system([reduced_interface(), None], sps, net)
    assert exc.value.residual_norm > 0


def test_interface_validation():
    with pytest.raises(ValueError):
        mt.DroopInterface(kind=mt.InterfaceKind.ANGLE_DROOP_REDUCED, M_a=1.0)
    with pytest.raises(ValueError):
        mt.DroopInterface(kind=mt.InterfaceKind.FREQUENCY_DROOP, M_f=-1.0, D_f=1.0)
    with pytest.raises(ValueError):
        mt.Setpoint(0.0, -1.0, 0.0, 0.0)


# -- vector field -----------------------------------------------------------

def test_origin_is_equilibrium_after_repair():
    system = three_bus_system()
    np.testing.assert_allclose(system.dynamics(np.zeros(system.m)),
                               np.zeros(system.m), atol=1e-12)


def test_repair_setpoints_zeroes_residual():
    net = mt.NetworkModel.from_lines(3, LINES_3BUS)
    sps = repair_setpoints(
        [mt.Setpoint(d, 1.0 + 0.05 * i, 0, 0)
         for i, d in enumerate((0.0, -0.3, 0.4))], net)
    resP, resQ = equilibrium_residual([None] * 3, sps, net)
    np.testing.assert_allclose(resP, 0.0, atol=1e-12)
    np.testing.assert_allclose(resQ, 0.0, atol=1e-12)


def test_dynamics_matches_droop_laws():
    # hand-evaluate the droop ODEs from the injections at one state
    net = mt.NetworkModel.from_lines(2, [(0, 1, 1.2, 1.1)])
    itfs = [
        mt.DroopInterface(kind=mt.InterfaceKind.ANGLE_DROOP_FULL,
                          M_a=0.5, D_a=1.2, M_v=2.0, D_v=1.0),
        mt.DroopInterface(kind=mt.InterfaceKind.FREQUENCY_DROOP, M_f=0.4, D_f=1.3),
    ]
    sps = repair_setpoints([mt.Setpoint(0.0, 1.0, 0, 0),
                            mt.Setpoint(0.1, 1.0, 0, 0)], net)
    system = mt.assemble_system(itfs, sps, net)
    x = np.array([0.2, -0.1, 0.05, 0.3])  # d1, d2, e1, w2
    (P1, Q1), (P2, _) = system.power_injection(x)
    want = np.array([
        (1.2 * (sps[0].P_star - P1) - 0.2) / 0.5,
        0.3,
        (1.0 * (sps[0].Q_star - Q1) - 0.05) / 2.0,
        (sps[1].P_star - P2 - 1.3 * 0.3) / 0.4,
    ])
    np.testing.assert_allclose(system.dynamics(x), want, atol=1e-12)


def test_dynamics_rejects_wrong_shape():
    system = three_bus_system()
    with pytest.raises(DimensionMismatch):
        system.dynamics(np.zeros(system.m + 1))


# -- interval enclosure -----------------------------------------------------

def test_dynamics_interval_encloses_samples():
    system = three_bus_system()
    rng = np.random.default_rng(11)
    for _ in range(25):
        c = rng.uniform(-0.6, 0.6, size=system.m)
        w = rng.uniform(0.0, 0.3, size=system.m)
        lo, hi = c - w, c + w
        blo, bhi = system.dynamics_interval(lo, hi)
        for _ in range(15):
            x = rng.uniform(lo, hi)
            fx = system.dynamics(x)
            assert np.all(blo <= fx + 1e-9) and np.all(fx <= bhi + 1e-9)


def test_dynamics_interval_degenerate_box_is_point():
    system = three_bus_system()
    x = np.array([0.1, -0.2, 0.3])
    blo, bhi = system.dynamics_interval(x, x)
    fx = system.dynamics(x)
    np.testing.assert_allclose(blo, fx, atol=1e-12)
    np.testing.assert_allclose(bhi, fx, atol=1e-12)


def test_dynamics_interval_batch_matches_single():
    system = three_bus_system()
    rng = np.random.default_rng(5)
    los = rng.uniform(-0.5, 0.0, size=(7, system.m))
    his = los + rng.uniform(0.0, 0.4, size=(7, system.m))
    blo, bhi = system.dynamics_interval_batch(los, his)
    for k in range(7):
        slo, shi = system.dynamics_interval(los[k], his[k])
        np.testing.assert_allclose(blo[k], slo, atol=1e-14)
        np.testing.assert_allclose(bhi[k], shi, atol=1e-14)
