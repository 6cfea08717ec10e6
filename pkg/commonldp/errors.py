from __future__ import annotations


class CommonLdpError(Exception):
    """Base class for every error raised by commonldp."""


class ValidationError(CommonLdpError, ValueError):
    pass


class GraphFormatError(ValidationError):
    def __init__(self, message: str, line_no: int | None = None, path: str | None = None):
        self.line_no = line_no
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line_no is not None:
            where = f"{where}{line_no}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class UnknownVertexError(ValidationError):
    pass


class InfeasibleSamplingError(CommonLdpError, RuntimeError):
    def __init__(self, found: int, requested: int, kappa: float | None = None):
        self.found = found
        self.requested = requested
        self.kappa = kappa
        if kappa is None:
            reason = "infeasible sampling"
        else:
            reason = f"infeasible kappa ({kappa:g})"
        super().__init__(f"{reason}: found {found} of {requested} requested pairs")


class ProtocolOrderError(CommonLdpError, RuntimeError):
    pass


class OptimizationError(CommonLdpError, RuntimeError):
    pass


class UsageError(CommonLdpError):
    """Command-line input that is well-formed but incomplete or contradictory."""
