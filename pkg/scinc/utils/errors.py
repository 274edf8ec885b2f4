from typing import Any, Optional


class SolverError(Exception):
    """Error base del solver: lleva el código de salida de la CLI y un detalle legible."""

    exit_code: int = 3

    def __init__(self, detail: str, **context: Any):
        super().__init__(detail)
        self.detail = detail
        self.context = context

    def __str__(self) -> str:
        if not self.context:
            return self.detail
        extra = " | ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.detail} | {extra}"


class UsageError(SolverError):
    exit_code = 1


class CapabilityError(SolverError):
    """El par (g, Q) no tiene prox en forma cerrada; usar inexact_subsolve."""

    exit_code = 1


class TraceFormatError(SolverError):
    exit_code = 1

    def __init__(self, detail: str, line: Optional[int] = None, field: Optional[str] = None):
        super().__init__(detail, line=line, field=field)
        self.line = line
        self.field = field


class BudgetExceededError(SolverError):
    exit_code = 2

    def __init__(self, detail: str, trace: Any = None, **context: Any):
        super().__init__(detail, **context)
        self.trace = trace


class DomainError(SolverError):
    exit_code = 3


class NumericError(SolverError):
    exit_code = 3

    def __init__(self, detail: str, condition: Optional[float] = None, **context: Any):
        super().__init__(detail, condition=condition, **context)
        self.condition = condition


class ConvergenceError(SolverError):
    exit_code = 3

    def __init__(self, detail: str, best_delta: Optional[float] = None, **context: Any):
        super().__init__(detail, best_delta=best_delta, **context)
        self.best_delta = best_delta


class InitializationError(SolverError):
    exit_code = 3


class VerificationError(SolverError):
    exit_code = 4
