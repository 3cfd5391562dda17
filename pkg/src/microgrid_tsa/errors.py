"""Exception types shared across the package."""


class MicrogridTsaError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(MicrogridTsaError):
    pass


class EquilibriumInconsistent(MicrogridTsaError):
    def __init__(self, residual_norm, bus_index):
        self.residual_norm = residual_norm
        self.bus_index = bus_index
        super().__init__(
            f"setpoints violate the equilibrium power-flow balance: "
            f"residual {residual_norm:.3e} at bus {bus_index}"
        )


class EigenSolveFailure(MicrogridTsaError):
    pass


class NonFiniteRisk(MicrogridTsaError):
    """Risk or gradient became non-finite; usually the learning rate is too large."""


class BudgetExhausted(MicrogridTsaError):
    """Branch-and-prune ran out of cells before reaching a verdict."""

    def __init__(self, max_cells, unresolved):
        self.max_cells = max_cells
        self.unresolved = unresolved
        super().__init__(
            f"cell budget {max_cells} exhausted with {unresolved} boxes unresolved"
        )


class LearnFailure(MicrogridTsaError):
    """CEGIS loop hit its update budget (or the falsifier gave up) without a certificate."""

    def __init__(self, reason, last_counterexamples, audit):
        self.reason = reason
        self.last_counterexamples = last_counterexamples
        self.audit = audit
        super().__init__(reason)


class Diverged(MicrogridTsaError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"root search diverged after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class NoCriticalPoints(MicrogridTsaError):
    """Every multistart diverged; raise n_sr or inspect conditioning."""


class NotHurwitz(MicrogridTsaError):
    pass


class NonFiniteState(MicrogridTsaError):
    """State blew up during time integration."""


class ScenarioError(MicrogridTsaError):
    """Scenario file missing, malformed, or inconsistent."""
