"""Exception hierarchy.

Each family maps to one CLI exit code (see ``cli.EXIT_CODES``).
"""


class GridPassivityError(Exception):
    pass


# -- case files --------------------------------------------------------------

class CaseError(GridPassivityError):
    pass


class SchemaError(CaseError):
    """Raised with a list of ``(line, message)`` problems."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [(None, problems)]
        self.problems = list(problems)
        lines = []
        for line, msg in self.problems:
            lines.append(f"line {line}: {msg}" if line is not None else msg)
        super().__init__("; ".join(lines))


class DanglingReference(CaseError):
    def __init__(self, kind, ref, line=None):
        self.kind = kind
        self.ref = ref
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{kind} references missing bus {ref!r}{where}")


# -- network -----------------------------------------------------------------

class NetworkError(GridPassivityError):
    pass


class ZeroImpedanceBranch(NetworkError):
    pass


class IndexOutOfRange(NetworkError, IndexError):
    pass


class DimensionMismatch(NetworkError, ValueError):
    pass


# -- bus models --------------------------------------------------------------

class ModelError(GridPassivityError):
    pass


class InvalidTimeConstant(ModelError, ValueError):
    pass


# -- power flow / equilibrium ------------------------------------------------

class PowerFlowError(GridPassivityError):
    pass


class NonConvergence(PowerFlowError):
    def __init__(self, iterations, mismatch):
        self.iterations = iterations
        self.mismatch = mismatch
        super().__init__(
            f"power flow did not converge after {iterations} iterations "
            f"(max mismatch {mismatch:.3e} pu)")


class SingularJacobian(PowerFlowError):
    pass


class EquilibriumError(GridPassivityError):
    pass


class InfeasibleSteadyState(EquilibriumError):
    pass


# -- linear analysis ---------------------------------------------------------

class AnalysisError(GridPassivityError):
    pass


class ResolventSingular(AnalysisError):
    def __init__(self, omega):
        self.omega = omega
        super().__init__(f"jwI - A is singular at w = {omega:.6g} rad/s")


class NonFiniteDerivative(AnalysisError):
    pass


class IllPosedInterconnection(AnalysisError):
    pass


# -- tuning ------------------------------------------------------------------

class TuningError(GridPassivityError):
    pass


class TuningFailed(TuningError):
    def __init__(self, message, tried=()):
        self.tried = list(tried)
        super().__init__(message)


class OrderingViolated(TuningError, ValueError):
    pass


# -- simulation --------------------------------------------------------------

class SimulationError(GridPassivityError):
    pass


class NonFiniteState(SimulationError):
    """Integration blew up; ``trajectory`` holds the samples taken so far."""

    def __init__(self, time, trajectory=None):
        self.time = time
        self.trajectory = trajectory
        super().__init__(f"non-finite state at t = {time:.4f} s")


class VoltageCollapse(SimulationError):
    pass


class VoltageCollapseAtEvent(VoltageCollapse):
    pass
