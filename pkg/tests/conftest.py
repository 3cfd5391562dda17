"""Shared fixtures: reference systems and session-scoped learned certificates."""

import pathlib
import time

import numpy as np
import pytest

import microgrid_tsa as mt
from microgrid_tsa import intervals as iv
from microgrid_tsa.falsifier import FalsifierConfig, learn_function
from microgrid_tsa.grid_model import repair_setpoints
from microgrid_tsa.lyapunov_net import TrainConfig
from microgrid_tsa.region import sr_est

SCENARIO_DIR = pathlib.Path(__file__).resolve().parents[1] / "scenarios"


class LinearSystem:
    """Minimal system protocol (dynamics + interval enclosure) for xdot = A x."""

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)

    @property
    def m(self):
        return self.A.shape[0]

    def dynamics(self, x):
        return self.A @ np.asarray(x, dtype=float)

    def dynamics_interval_batch(self, lo, hi):
        return iv.matvec(self.A, (np.asarray(lo, float), np.asarray(hi, float)))

    def dynamics_interval(self, lo, hi):
        out = self.dynamics_interval_batch(lo[None, :], hi[None, :])
        return out[0][0], out[1][0]


@pytest.fixture(scope="session")
def case_a_scenario():
    return mt.load_scenario(SCENARIO_DIR / "case_a.yaml")


@pytest.fixture(scope="session")
def case_123_scenario():
    return mt.load_scenario(SCENARIO_DIR / "case_123.yaml")


@pytest.fixture(scope="session")
def case_a_cert(case_a_scenario):
    sc = case_a_scenario
    t0 = time.perf_counter()
    cert = learn_function(sc.system, sc.train_cfg, sc.fals_cfg, sc.n_i)
    cert.audit["learn_seconds"] = time.perf_counter() - t0
    return cert


@pytest.fixture(scope="session")
def case_a_region(case_a_cert, case_a_scenario):
    return sr_est(case_a_cert, n_sr=case_a_scenario.n_sr, seed=case_a_scenario.seed)


@pytest.fixture(scope="session")
def case_123_cert(case_123_scenario):
    sc = case_123_scenario
    return learn_function(sc.system, sc.train_cfg, sc.fals_cfg, sc.n_i)


@pytest.fixture(scope="session")
def case_123_region(case_123_cert, case_123_scenario):
    return sr_est(case_123_cert, n_sr=case_123_scenario.n_sr,
                  seed=case_123_scenario.seed)


@pytest.fixture(scope="session")
def toy_cert():
    """Cheap 1-state certificate for region/baseline plumbing tests."""
    system = LinearSystem(np.array([[-1.0]]))
    tc = TrainConfig(alpha=1, beta=5, gamma=0, tau=0.1, eta=0.05, r=10,
                     p=4, seed=0, q=200)
    fc = FalsifierConfig(u=1.0, delta=1e-3)
    return learn_function(system, tc, fc, 2000)
