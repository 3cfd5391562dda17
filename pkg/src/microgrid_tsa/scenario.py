"""Scenario files: one YAML document describing a case and its hyperparameters.

Layout::

    name: case-a
    system:
      buses:                       # one entry per bus, 1-based order
        - kind: angle_droop_full   # or angle_droop_reduced / frequency_droop / stiff
          M_a: 0.5
          D_a: 1.2
          M_v: 2.0
          D_v: 1.0
          setpoint: {delta_star: 0.0, E_star: 1.0}
        - kind: stiff
          setpoint: {delta_star: 0.0, E_star: 1.0}
      network:
        lines:                     # bus indices are 1-based
          - {from: 1, to: 2, R: 1.2030, X: 1.1034}
      repair_setpoints: true       # recompute P*, Q* from delta*, E*
    hyperparameters:
      u: 1.5
      ...

Missing P*/Q* with ``repair_setpoints: true`` are recomputed from the power
balance; otherwise they default to 0 and must satisfy it to eq_tol.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ScenarioError
from .falsifier import FalsifierConfig
from .grid_model import (
    DroopInterface,
    InterfaceKind,
    NetworkModel,
    Setpoint,
    assemble_system,
    repair_setpoints,
)
from .lyapunov_net import TrainConfig

HYPER_DEFAULTS = {
    "p": None,  # defaults to 2 m
    "q": 500,
    "n_sr": 100,
    "n_i": 5000,
    "r": 10,
    "tau": 0.1,
    "eta": 0.01,
    "alpha": 1.0,
    "beta": 5.0,
    "gamma": 0.0,
    "delta": 1e-3,
    "l": None,  # defaults to 0.1 u
    "max_cells": 500_000,
    "seed": 0,
    "stability_margin": 0.0,
}


@dataclass(frozen=True)
class Scenario:
    name: str
    system: object
    train_cfg: TrainConfig
    fals_cfg: FalsifierConfig
    n_i: int
    n_sr: int
    stability_margin: float
    sim_T: float | None
    sim_dt: float | None
    sim_eps: float
    initial_condition: np.ndarray | None
    scenario_hash: str
    hyperparameters: dict = field(default_factory=dict)
    authoritative_network: bool = True

    @property
    def u(self):
        return self.fals_cfg.u

    @property
    def seed(self):
        return self.train_cfg.seed


def _parse_bus(entry, index):
    kind = entry.get("kind")
    sp = entry.get("setpoint", {})
    setpoint = Setpoint(
        delta_star=float(sp.get("delta_star", 0.0)),
        E_star=float(sp.get("E_star", 1.0)),
        P_star=float(sp.get("P_star", 0.0)),
        Q_star=float(sp.get("Q_star", 0.0)),
    )
    if kind == "stiff":
        return None, setpoint
    try:
        ik = InterfaceKind(kind)
    except ValueError as exc:
        raise ScenarioError(f"bus {index + 1}: unknown interface kind {kind!r}") from exc
    fields = {k: entry.get(k) for k in ("M_a", "D_a", "M_v", "D_v", "M_f", "D_f")}
    try:
        itf = DroopInterface(kind=ik, **{k: (float(v) if v is not None else None)
                                         for k, v in fields.items()})
    except ValueError as exc:
        raise ScenarioError(f"bus {index + 1}: {exc}") from exc
    return itf, setpoint


def _parse_network(spec, n):
    if "lines" in spec:
        lines = []
        for ln in spec["lines"]:
            lines.append((int(ln["from"]) - 1, int(ln["to"]) - 1,
                          float(ln["R"]), float(ln["X"])))
        return NetworkModel.from_lines(n, lines)
    if "matrix" in spec:
        mx = spec["matrix"]
        return NetworkModel(
            Y_mag=np.array(mx["Y_mag"], dtype=float),
            Y_ang=np.array(mx["Y_ang"], dtype=float),
            G_diag=np.array(mx["G_diag"], dtype=float),
            B_diag=np.array(mx["B_diag"], dtype=float),
        )
    raise ScenarioError("network needs either 'lines' or 'matrix'")


def load_scenario(path):
    try:
        with open(path, "rb") as fh:
            raw_bytes = fh.read()
        data = yaml.safe_load(raw_bytes)
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must be a mapping")
    return build_scenario(data, scenario_hash=hashlib.sha256(raw_bytes).hexdigest())


def build_scenario(data, scenario_hash=""):
    try:
        sysspec = data["system"]
        buses = sysspec["buses"]
    except KeyError as exc:
        raise ScenarioError(f"scenario missing section: {exc}") from exc

    interfaces, setpoints = [], []
    for i, entry in enumerate(buses):
        itf, sp = _parse_bus(entry, i)
        interfaces.append(itf)
        setpoints.append(sp)
    network = _parse_network(sysspec.get("network", {}), len(buses))
    eq_tol = float(sysspec.get("eq_tol", 1e-8))
    if sysspec.get("repair_setpoints", False):
        setpoints = repair_setpoints(setpoints, network)
    try:
        system = assemble_system(interfaces, setpoints, network, eq_tol=eq_tol)
    except Exception as exc:
        raise ScenarioError(f"system assembly failed: {exc}") from exc

    hyper = dict(HYPER_DEFAULTS)
    hyper.update(data.get("hyperparameters", {}))
    if "u" not in hyper:
        raise ScenarioError("hyperparameters must set the valid-region radius u")
    u = float(hyper["u"])
    p = int(hyper["p"]) if hyper["p"] is not None else 2 * system.m
    train_cfg = TrainConfig(
        alpha=float(hyper["alpha"]), beta=float(hyper["beta"]),
        gamma=float(hyper["gamma"]), tau=float(hyper["tau"]),
        eta=float(hyper["eta"]), r=int(hyper["r"]), p=p,
        seed=int(hyper["seed"]), q=int(hyper["q"]),
    )
    fals_cfg = FalsifierConfig(
        u=u, delta=float(hyper["delta"]),
        l=float(hyper["l"]) if hyper["l"] is not None else None,
        max_cells=int(hyper["max_cells"]),
    )

    sim = data.get("simulation", {})
    x0 = data.get("initial_condition")
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (system.m,):
            raise ScenarioError(
                f"initial_condition has length {len(x0)}, state dimension is {system.m}"
            )
    effective = dict(hyper)
    effective["p"] = p
    effective["u"] = u
    return Scenario(
        name=str(data.get("name", "unnamed")),
        system=system,
        train_cfg=train_cfg,
        fals_cfg=fals_cfg,
        n_i=int(hyper["n_i"]),
        n_sr=int(hyper["n_sr"]),
        stability_margin=float(hyper["stability_margin"]),
        sim_T=float(sim["T"]) if sim.get("T") is not None else None,
        sim_dt=float(sim["dt"]) if sim.get("dt") is not None else None,
        sim_eps=float(sim.get("eps", 1e-3)),
        initial_condition=x0,
        scenario_hash=scenario_hash,
        hyperparameters=effective,
        authoritative_network=bool(data.get("authoritative_network", True)),
    )
