import numpy as np
import pytest
from hypothesis import settings

from privlp.lp import LinearProgram, SensitivityProfile

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def small_lp():
    # max 2x1 + 3x2  s.t.  x1 + x2 <= 4,  x1 + 3x2 <= 6
    return LinearProgram(c=[2.0, 3.0], A=[[1.0, 1.0], [1.0, 3.0]], b=[4.0, 6.0])


def random_positive_lp(rng, m, n):
    A = rng.uniform(0.5, 1.5, (m, n))
    b = rng.uniform(5.0, 10.0, m)
    c = rng.uniform(0.5, 1.5, n)
    return LinearProgram(c, A, b)


def full_profile(lp, delta=0.05, A_sup=None, b_inf=None):
    m, n = lp.A.shape
    return SensitivityProfile(
        delta11_A=delta,
        delta1_b=delta,
        delta1_c=delta,
        mask_A=np.ones((m, n), dtype=bool),
        mask_c=np.ones(n, dtype=bool),
        A_sup=lp.A + 10.0 if A_sup is None else A_sup,
        b_inf=np.zeros(m) if b_inf is None else b_inf,
    )


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
