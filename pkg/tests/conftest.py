import math

import pytest
from hypothesis import settings

from freeperp.measure import builtin_law
from freeperp.subordination import JointLaw

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

C_FBP21 = 2 * math.sqrt(2) / math.pi
C_INV_MP = 2 / math.pi


@pytest.fixture(scope="session")
def mp1():
    return builtin_law("marchenko_pastur", 1.0)


@pytest.fixture(scope="session")
def fbp23():
    return builtin_law("free_beta_prime", 2, 3)


@pytest.fixture(scope="session")
def fbp21():
    return builtin_law("free_beta_prime", 2, 1)


@pytest.fixture(scope="session")
def inverse_mp():
    return builtin_law("inverse_mp")


@pytest.fixture(scope="session")
def sub_pair():
    """A = B ~ fbp(2, 5); the perpetuity is fbp(2, 3)."""
    return JointLaw.graph(builtin_law("free_beta_prime", 2, 5))


@pytest.fixture(scope="session")
def crit_pair():
    """A = B ~ fbp(2, 3), tau(A) = 1; the perpetuity is fbp(2, 1)."""
    return JointLaw.graph(builtin_law("free_beta_prime", 2, 3))


@pytest.fixture(scope="session")
def gig_pair():
    """A = S^2, B = S with S ~ fGIG(-1); the perpetuity is the inverse MP law."""
    return JointLaw.graph(builtin_law("free_gig", -1.0), power=2)


_RESULTS: dict = {}


def record(crit: int, part: str, ok: bool, detail: str):
    _RESULTS.setdefault(crit, []).append((part, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_RESULTS):
        parts = _RESULTS[crit]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p}: {d}" + ("" if ok else " [fail]") for p, ok, d in parts)
        terminalreporter.write_line(f"AC{crit} {status}  {detail}")
