import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import LinAlgError

from kinkbench.minimize import QuarticFunctional
from kinkbench.newton import newton_descent, spd_tridiag_solve


def _dense(diag, off, corner):
    a = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    if corner:
        a[0, -1] = a[-1, 0] = corner
    return a


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(3, 60), st.booleans())
def test_tridiagonal_solve_matches_dense(seed, m, cyclic):
    rng = np.random.default_rng(seed)
    off = -rng.uniform(0.1, 1.0, m - 1)
    corner = -rng.uniform(0.1, 1.0) if cyclic else 0.0
    diag = 2.2 + rng.uniform(0.0, 1.0, m)
    rhs = rng.normal(size=m)
    x = spd_tridiag_solve(diag, off, corner, rhs)
    assert np.allclose(_dense(diag, off, corner) @ x, rhs, atol=1e-12)


def test_indefinite_rejected():
    with pytest.raises(LinAlgError):
        spd_tridiag_solve(np.array([1.0, -1.0, 1.0]), np.zeros(2), 0.0, np.ones(3))
    # periodic Laplacian is singular
    with pytest.raises(LinAlgError):
        spd_tridiag_solve(np.full(6, 2.0), np.full(5, -1.0), -1.0, np.arange(6.0))


def _double_well(n=201, eps=0.1, c=0.3):
    x = np.linspace(-2, 2, n)
    h = x[1] - x[0]
    w = np.full(n, h)
    w[[0, -1]] *= 0.5
    free = np.ones(n, bool)
    free[[0, -1]] = False
    return QuarticFunctional(h, eps, np.ones(n) / eps, 1.0 / eps, c * np.tanh(x), w, free, periodic=False), x


def test_descent_monotone_and_superlinear():
    fun, x = _double_well()
    u0 = fun.restrict(0.5 * np.cos(x))
    u, ok, its, tr = newton_descent(fun, u0, grad_tol=1e-12, max_iters=200,
                                    shift_scale=fun.shift_scale(), norm=fun.norm)
    assert ok
    e = np.array(tr.energies)
    assert np.all(np.diff(e) <= 1e-14 * np.abs(e[:-1]).max())
    g = np.array([v for v in tr.grad_norms if v > 1e-10])
    # superlinear tail: the contraction factor itself keeps shrinking
    ratios = g[1:] / g[:-1]
    tail = ratios[-3:]
    assert np.all(np.diff(tail) < 0) and tail[-1] < 1e-2


def test_quadratic_converges_in_one_step():
    n = 50
    h = 1.0 / (n - 1)
    w = np.full(n, h)
    free = np.ones(n, bool)
    free[[0, -1]] = False
    fun = QuarticFunctional(h, 1.0, -np.ones(n), 0.0, np.ones(n), w, free, periodic=False)
    u, ok, its, _ = newton_descent(fun, np.zeros(n - 2), grad_tol=1e-10, max_iters=5,
                                   shift_scale=fun.shift_scale(), norm=fun.norm)
    assert ok and its == 1


def test_max_iters_reports_nonconvergence():
    fun, x = _double_well()
    u0 = fun.restrict(0.5 * np.cos(x))
    u, ok, its, _ = newton_descent(fun, u0, grad_tol=1e-14, max_iters=2,
                                   shift_scale=fun.shift_scale(), norm=fun.norm)
    assert not ok and its == 2
