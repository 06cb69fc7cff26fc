"""Exceptions raised by twostop.

Classes:
    TwoStopError: Root of the hierarchy.
    ResolutionError: The dp grid cannot bracket a threshold.
    MalformedKernelError: A recursion kernel violates q(0)=0 or monotonicity.
    HorizonMismatchError: A policy table does not match the requested horizon.
    InvariantViolation: An asserted numerical property failed.
    ConvergenceError: A recursion did not stall before its step budget.
"""


class TwoStopError(Exception):
    """Base class for every error raised by twostop."""


class ResolutionError(TwoStopError):
    """The abscissa grid is too coarse to bracket the threshold b_n."""

    def __init__(self, stage: int, detail: str = "") -> None:  # noqa: D107
        self.stage = stage
        msg = f"grid cannot bracket the threshold at stage n={stage}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class MalformedKernelError(TwoStopError):
    """A kernel q is not a valid recursion kernel (q(0)=0, non-decreasing)."""


class HorizonMismatchError(TwoStopError):
    """The policy table was built for a different horizon."""


class InvariantViolation(TwoStopError):  # noqa: N818
    """A property that must hold was observed to fail.

    Attributes:
        check: Stable name of the failed check, used by the CLI exit report.
        detail: Human-readable description of the offending values.
    """

    def __init__(self, check: str, detail: str) -> None:  # noqa: D107
        self.check = check
        self.detail = detail
        super().__init__(f"{check}: {detail}")


class ConvergenceError(TwoStopError):
    """The recursion exhausted max_n without meeting the stall tolerance."""
