"""Exception hierarchy shared by all vsc services"""

from typing import Any, Optional


class VscError(Exception):
    """Base class for every error raised by the toolkit"""


class OnAxisPoleError(VscError):
    """A transfer function was evaluated exactly on one of its poles"""

    def __init__(self, omega: float):
        super().__init__(f"on-axis pole at omega={omega!r} rad/s")
        self.omega = omega


class ImproperTransferFunctionError(VscError):
    """Numerator degree exceeds denominator degree"""


class UnresolvedSignalError(VscError):
    """A wired signal name does not resolve to any block output or external input"""


class IllPosedInterconnectionError(VscError):
    """The direct-feedthrough loop of an interconnection is singular"""


class EigenvalueError(VscError):
    """Eigenvalue iteration failed to converge"""


class UnstableSystemError(VscError):
    """An operation that requires a stable system received an unstable one"""

    def __init__(self, abscissa: float, message: Optional[str] = None):
        super().__init__(message or f"system is unstable (spectral abscissa {abscissa:.6g})")
        self.abscissa = abscissa


class UnstableControllerError(VscError):
    """A subcontroller denominator has roots outside the open left half-plane"""


class RankDeficiencyError(VscError):
    """Least-squares fit is rank deficient (too few or duplicate abscissae)"""


class InfeasibleDesignError(VscError):
    """One or more design points could not satisfy the constraints"""

    def __init__(self, message: str, results: Optional[list[Any]] = None):
        super().__init__(message)
        self.results = results or []


class NumericBlowupError(VscError):
    """Simulation state exceeded the blow-up threshold"""

    def __init__(self, t: float, state: Any):
        peak = max((abs(float(v)) for v in state), default=0.0)
        super().__init__(f"numeric blow-up at t={t:.6f}s (max |state| = {peak:.3e})")
        self.t = t
        self.state = state


class ScheduleFormatError(VscError):
    """A gain schedule document could not be parsed"""


class ConfigError(VscError):
    """A run configuration file could not be read"""
