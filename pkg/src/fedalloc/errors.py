"""Typed errors raised by the solvers and the simulation harness.

Degenerate inputs surface as exceptions instead of inf/nan so tests can
assert on them. The CLI maps these onto exit codes (infeasible -> 3,
solver failure -> 4, bad config -> 2).
"""


class FedAllocError(Exception):
    """Base class for all library errors."""


class ConfigError(FedAllocError):
    """Malformed or inconsistent run configuration."""


class InfeasibleError(FedAllocError):
    """No allocation can satisfy the stated constraints."""


class TransmissionInfeasible(InfeasibleError):
    """A device has zero data rate, so its upload never completes."""


class ComputationInfeasible(InfeasibleError):
    """A device has zero CPU frequency, so local training never completes."""


class DeadlineInfeasible(InfeasibleError):
    """The per-round deadline cannot be met by at least one device."""

    def __init__(self, message: str, device: int | None = None):
        super().__init__(message)
        self.device = device


class FloorInfeasible(InfeasibleError):
    """No bandwidth-price root exists for the requested rate floors."""


class BudgetInfeasible(InfeasibleError):
    """The bandwidth budget cannot cover the per-device minimums."""


class AllocationInfeasible(InfeasibleError):
    """An allocation violates box/budget/deadline constraints."""

    def __init__(self, violations: list[str]):
        super().__init__("infeasible allocation: " + "; ".join(violations))
        self.violations = violations


class SolverError(FedAllocError):
    """Numerical failure inside a solver loop."""


class LineSearchStalled(SolverError):
    """Backtracking exceeded its step budget without sufficient decrease."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class BracketError(SolverError):
    """Root bracketing failed: no sign change after expansion."""
