import mpmath
import pytest


def approx_mp(value, expect, tol):
    """abs(value - expect) <= tol, with an informative failure message."""
    diff = abs(mpmath.mpf(value) - mpmath.mpf(expect))
    assert diff <= tol, f"|{value} - {expect}| = {float(diff)} > {tol}"


@pytest.fixture(scope="session")
def hermite_weight():
    from opx.weights import Weight
    return Weight.hermite()
