import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "toolkit",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("toolkit")

from bolzadual import (BolzaProblem, Box, StageSpec, TerminalCost,  # noqa: E402
                       WholeSpace)


def make_problem(A, B, phi, Q, R, X, U, Qf, G, T=1):
    stage = lambda: StageSpec(A=A, B=B, phi=phi, Q=Q, R=R,
                              state_set=X, control_set=U)
    return BolzaProblem([stage() for _ in range(T)], TerminalCost(Qf, G))


@pytest.fixture
def worked():
    """Scalar worked instance: T=1, A=0, B=1, phi=0, Q=0, R=1, Qf=1, free."""
    return make_problem([[0.0]], [[1.0]], [0.0], [[0.0]], [[1.0]],
                        WholeSpace(1), WholeSpace(1), [[1.0]], WholeSpace(1))


@pytest.fixture
def rng():
    return np.random.default_rng(1729)
