import pytest
from hypothesis import settings

from twostop.dp import DpTrace, DpTraceList, GnGrid, dp_sweep, fn_hn, sandwich_residuals

settings.register_profile("twostop", deadline=None, max_examples=60)
settings.load_profile("twostop")

OBSERVED_ALPHAS = (0.3, 1.0, 3.0)
OBSERVED_N = 2000


class StageObserver:
    """Collects the stages at which a structural property of g_n fails."""

    def __init__(self, alpha: float):
        self.alpha = alpha
        self.f_not_decreasing: list[int] = []
        self.h_not_increasing: list[int] = []
        self.sandwich_failures: list[int] = []

    def __call__(self, grid: GnGrid, record: DpTrace) -> None:
        sampled = fn_hn(self.alpha, grid)
        if not (sampled.f[1:] < sampled.f[:-1]).all():
            self.f_not_decreasing.append(record.n)
        # near x = 1 the increments of g_n sink below the rounding of its iterates
        lower_half = sampled.ys <= record.n / 2
        h = sampled.h[lower_half]
        if not (h[1:] > h[:-1]).all():
            self.h_not_increasing.append(record.n)
        if not sandwich_residuals(self.alpha, grid).holds():
            self.sandwich_failures.append(record.n)


@pytest.fixture(scope="session")
def observed_sweeps() -> dict[float, tuple[DpTraceList, StageObserver]]:
    sweeps = {}
    for alpha in OBSERVED_ALPHAS:
        observer = StageObserver(alpha)
        sweeps[alpha] = (dp_sweep(alpha, OBSERVED_N, 4096, on_stage=observer), observer)
    return sweeps


@pytest.fixture(scope="session")
def alpha_one_sweep() -> DpTraceList:
    return dp_sweep(1.0, 10_000, 8192)
