import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from inkstream.lp import UnboundedError, simplex_max


def test_textbook_problem():
    # max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> 36 at (2, 6)
    res = simplex_max([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert res.value == pytest.approx(36)
    assert res.x == pytest.approx([2, 6])


def test_unbounded():
    with pytest.raises(UnboundedError):
        simplex_max([1, 1], [[1, -1]], [1])


def test_degenerate_problem_terminates():
    # classic cycling example for largest-coefficient pivoting
    c = [10, -57, -9, -24]
    A = [[0.5, -5.5, -2.5, 9], [0.5, -1.5, -0.5, 1], [1, 0, 0, 0]]
    res = simplex_max(c, A, [0, 0, 1])
    assert res.value == pytest.approx(1)


def test_rejects_negative_rhs():
    with pytest.raises(ValueError):
        simplex_max([1], [[1]], [-1])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 6), rng.integers(1, 6)
    A = rng.uniform(0, 3, size=(m, n))
    b = rng.uniform(0, 5, size=m)
    c = rng.uniform(-1, 3, size=n)
    ref = linprog(-c, A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
    if ref.status == 3:
        with pytest.raises(UnboundedError):
            simplex_max(c, A, b)
        return
    res = simplex_max(c, A, b)
    assert res.value == pytest.approx(-ref.fun, abs=1e-7)
    assert np.all(A @ res.x <= b + 1e-7) and np.all(res.x >= -1e-9)
