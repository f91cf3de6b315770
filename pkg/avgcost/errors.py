from __future__ import annotations

from typing import Sequence


class AvgCostError(Exception):
    pass


class ModelValidationError(AvgCostError):

    def __init__(self, message: str, violations: Sequence | None = None):
        self.violations = list(violations or [])
        details = "".join(f"\n  - {v}" for v in self.violations)
        super().__init__(message + details)


class MinorizationError(ModelValidationError):

    def __init__(self, message: str, witness: tuple | None = None):
        self.witness = witness
        super().__init__(message if witness is None else f"{message} at (x, u, y)={witness}")


class SingularSystemError(AvgCostError):

    def __init__(self, message: str, state=None):
        self.state = state
        super().__init__(message if state is None else f"{message}: state {state} does not reach the atom")


class MultichainError(AvgCostError):
    pass


class EnumerationLimitError(AvgCostError):

    def __init__(self, count: int, limit: int):
        self.count = count
        super().__init__(f"Enumerating {count} deterministic policies exceeds the limit of {limit}.")


class ConvergenceError(AvgCostError):

    def __init__(self, message: str, residual: float | None = None, trace=None):
        self.residual = residual
        self.trace = trace
        super().__init__(message if residual is None else f"{message} (last residual: {residual:.6g})")


class DivergenceError(ConvergenceError):
    pass


class H2Error(AvgCostError):
    pass


class RiccatiError(ConvergenceError):
    pass


class LqgModelError(ModelValidationError):
    pass


class InstabilityError(AvgCostError):
    pass


class RollingHorizonError(AvgCostError):
    pass
