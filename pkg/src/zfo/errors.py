"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, violated runtime assumptions with 3, and a reference solver that
fails to converge with 4.
"""


class ZfoError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(ZfoError):
    """Invalid or inconsistent user-supplied configuration (exit code 2)."""


class AssumptionViolation(ZfoError):
    """A runtime assumption failed, e.g. a disconnected communication
    graph or a staleness window overrun (exit code 3)."""


class ProtocolViolation(AssumptionViolation):
    """The information-exchange protocol referenced state it no longer
    holds, such as a perturbation evicted from the history window."""


class DomainError(AssumptionViolation):
    """A point left its feasible set where the model forbids it, e.g. an
    infeasible joint action submitted for evaluation."""


class OracleError(ZfoError):
    """The centralized reference solver did not certify convergence
    (exit code 4)."""
