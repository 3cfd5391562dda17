"""Transient stability assessment for networked droop-controlled microgrids."""

from .grid_model import (
    DroopInterface,
    InterfaceKind,
    NetworkModel,
    NetworkedSystem,
    Setpoint,
    assemble_system,
    repair_setpoints,
)
from .linear_analysis import is_asymptotically_stable, jacobian, linearize
from .lyapunov_net import (
    Certificate,
    NetParams,
    TrainConfig,
    forward,
    init_params,
    lie_derivative,
    min_risk,
    risk,
    risk_gradient,
    shift_to_zero,
    v_gradient,
)
from .falsifier import (
    Box,
    FalsifierConfig,
    NeuralEvaluator,
    QuadraticEvaluator,
    add_samples,
    falsify,
    interval_bounds,
    learn_function,
)
from .region import (
    SecurityRegion,
    boundary_sweep_oracle,
    contains,
    critical_system,
    newton_krylov,
    sr_est,
)
from .baseline import (
    QuadraticCertificate,
    monte_carlo_volumes,
    quadratic_region,
    solve_lyapunov_equation,
)
from .simulator import Trajectory, converged, default_time_grid, integrate
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"
