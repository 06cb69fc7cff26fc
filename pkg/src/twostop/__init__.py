# noqa: D104
from .dist import PowerLawDist, cdf, quantile, sample, uniform_stream
from .dp import DpTrace, DpTraceList, dp_sweep, fn_hn, g1, iterate_g
from .exceptions import (
    ConvergenceError,
    HorizonMismatchError,
    InvariantViolation,
    MalformedKernelError,
    ResolutionError,
    TwoStopError,
)
from .limits import LimitConstants, H_func, solve_b_alpha, table1
from .recursion import RecursionSpec, RecursionState, run_to_convergence, sandwich_bounds, step
from .sim import PolicyTable, SimReport, run_one_choice, run_prophet, run_two_choice

__all__ = [
    "ConvergenceError",
    "DpTrace",
    "DpTraceList",
    "H_func",
    "HorizonMismatchError",
    "InvariantViolation",
    "LimitConstants",
    "MalformedKernelError",
    "PolicyTable",
    "PowerLawDist",
    "RecursionSpec",
    "RecursionState",
    "ResolutionError",
    "SimReport",
    "TwoStopError",
    "cdf",
    "dp_sweep",
    "fn_hn",
    "g1",
    "iterate_g",
    "quantile",
    "run_one_choice",
    "run_prophet",
    "run_to_convergence",
    "run_two_choice",
    "sample",
    "sandwich_bounds",
    "solve_b_alpha",
    "step",
    "table1",
    "uniform_stream",
]
