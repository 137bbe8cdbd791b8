"""
Exception hierarchy for nonsmooth DP errors.
"""
from typing import Optional, Sequence


class NsdpError(Exception):
    """Base exception for all toolkit errors."""
    pass


class DimensionMismatchError(NsdpError):
    """Raised when vector or matrix dimensions disagree."""

    def __init__(self, message: str, expected: Optional[int] = None, got: Optional[int] = None):
        super().__init__(message)
        self.expected = expected
        self.got = got


class UndefinedGradientError(NsdpError):
    """Raised when an atom gradient is not defined (non-finite) at a point."""
    pass


class IllConditionedError(NsdpError):
    """Raised when LP input is numerically ill-conditioned (huge generator norms)."""
    pass


class LPError(NsdpError):
    """Raised when the simplex solver cannot finish or its answer fails the feasibility check."""
    pass


class InfeasiblePointError(NsdpError):
    """Raised when a cone or probe is requested at a point outside the set."""
    pass


class EmptyPolicySetError(NsdpError):
    """Raised when a policy (or feasible candidate) set is empty at a state."""

    def __init__(self, message: str, state: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.state = tuple(state) if state is not None else None


class DivergentBoundsError(NsdpError):
    """Raised when per-stage cost bounds do not form a summable series."""

    def __init__(self, message: str, stage: Optional[int] = None, bound: Optional[float] = None):
        super().__init__(message)
        self.stage = stage
        self.bound = bound


class AllInfeasibleStageError(NsdpError):
    """Raised when no grid node of a stage admits a feasible action."""

    def __init__(self, message: str, stage: int):
        super().__init__(message)
        self.stage = stage


class InadmissibleProgramError(NsdpError):
    """Raised when a program violates a feasibility constraint."""

    def __init__(self, message: str, stage: int):
        super().__init__(message)
        self.stage = stage


class PremiseError(NsdpError):
    """Raised when a premise-gated check is asked to run with an uncertified hypothesis."""

    def __init__(self, message: str, premise: str):
        super().__init__(message)
        self.premise = premise


class NonSingletonGradientError(PremiseError):
    """Raised when a strict derivative is requested but the partial gradient is a set."""

    def __init__(self, message: str):
        super().__init__(message, premise="non_singleton_gradient")


class AdaptednessError(NsdpError):
    """Raised when a process is not constant on the cells of its information partition."""

    def __init__(
        self,
        message: str,
        stage: int,
        cell: Sequence[int] = (),
        atoms: Sequence[int] = (),
    ):
        super().__init__(message)
        self.stage = stage
        self.cell = tuple(cell)
        self.atoms = tuple(atoms)


class ModelFormatError(NsdpError):
    """Raised when a model or program file cannot be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.line = line
        self.column = column
