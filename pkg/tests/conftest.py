import pytest

from specmult import build_operator, build_space, decompose

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def cycle128():
    return decompose(build_operator(build_space("cycle", n=128)))


@pytest.fixture(scope="session")
def cycle64():
    return decompose(build_operator(build_space("cycle", n=64)))


@pytest.fixture(scope="session")
def path16():
    return decompose(build_operator(build_space("path", n=16)))


def random_weighted_operator(rng, n=6):
    """A random non-negative operator self-adjoint on L^2(mu), plus its space."""
    w = rng.uniform(0.5, 2.0, n)
    space = build_space("path", n=n, weights=w)
    B = rng.standard_normal((n, n))
    P = B @ B.T
    return space, P / w[:, None]
