class TrafficEstimationError(Exception):
    """
    Base exception for all domain-level errors
    inside the traffic estimation engine.
    """


class ParameterDomainError(TrafficEstimationError):
    """Raised when flux or geometry parameters violate their invariants."""


class DensityDomainError(TrafficEstimationError):
    """Raised when a density lies outside [0, rho_m]."""


class ConditionError(TrafficEstimationError):
    """Raised when a value condition cannot be constructed."""


class UncoveredPointError(TrafficEstimationError):
    """
    Raised when no partial solution is finite at the requested points.
    """

    def __init__(self, points):
        self.points = list(points)

        shown = ", ".join(f"({t:.6g}, {x:.6g})" for t, x in self.points[:5])
        more = len(self.points) - 5
        message = f"No finite partial solution at (t, x) = {shown}"
        if more > 0:
            message += f" and {more} more"
        super().__init__(message)


class BranchConsistencyError(TrafficEstimationError):
    """Raised when adjacent branch expressions disagree beyond tolerance."""


class ConfigurationError(TrafficEstimationError):
    """Raised for invalid solver, big-M or simulation settings."""


class TopologyError(TrafficEstimationError):
    """Raised when a network topology or junction is malformed."""


class DataError(TrafficEstimationError):
    """Raised when measurements are malformed or inconsistent."""


class InfeasibleScenarioError(TrafficEstimationError):
    """
    Raised when an estimation problem has no feasible point.
    Carries the constraint-family histogram of the problem.
    """

    def __init__(self, histogram: dict[str, int], sense: str = ""):
        self.histogram = dict(histogram)
        self.sense = sense

        families = ", ".join(
            f"{tag}={count}" for tag, count in sorted(self.histogram.items())
        )
        message = "Estimation problem is infeasible"
        if sense:
            message += f" ({sense})"
        message += f"; constraint families: {families}"
        super().__init__(message)


class ScenarioFileError(TrafficEstimationError):
    """
    Raised when a scenario file cannot be parsed or validated.
    """

    def __init__(self, path: str, detail: str, location: str | None = None):
        self.path = path
        self.detail = detail
        self.location = location

        where = f" at {location}" if location else ""
        super().__init__(f"{path}{where}: {detail}")


class SolverError(TrafficEstimationError):
    """Raised when the LP backend fails numerically."""


class InvalidNodeTransitionError(TrafficEstimationError):
    """
    Raised when an illegal branch-and-bound node transition is attempted.
    """

    def __init__(self, from_state: str, to_state: str):
        self.from_state = from_state
        self.to_state = to_state

        message = (
            f"Illegal node transition attempted: "
            f"{from_state} -> {to_state}"
        )
        super().__init__(message)
