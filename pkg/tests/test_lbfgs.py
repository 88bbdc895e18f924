import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitomo.lbfgs import LineSearchError, minimize_lbfgs, strong_wolfe


def rosenbrock(x):
    f = np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2)
    g = np.zeros_like(x)
    g[:-1] = -400 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2 * (1 - x[:-1])
    g[1:] += 200 * (x[1:] - x[:-1] ** 2)
    return f, g


def test_rosenbrock():
    r = minimize_lbfgs(rosenbrock, np.full(6, -1.2), max_iters=500, rel_tol=0.0, gtol=1e-10)
    np.testing.assert_allclose(r.x, 1.0, atol=1e-7)
    assert r.converged


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 30))
def test_quadratic_minimum(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    hess = a @ a.T + n * np.eye(n)
    b = rng.standard_normal(n)

    def fun(x):
        return 0.5 * x @ hess @ x - b @ x, hess @ x - b

    r = minimize_lbfgs(fun, np.zeros(n), max_iters=300, rel_tol=0.0, gtol=1e-9)
    np.testing.assert_allclose(r.x, np.linalg.solve(hess, b), atol=1e-7)
    assert np.all(np.diff(r.history) <= 0)
    assert len(r.history) == r.n_iterations + 1


def test_strong_wolfe_conditions():
    x = np.array([-1.2, 1.0])
    f0, g0 = rosenbrock(x)
    d = -g0
    p, n_eval = strong_wolfe(rosenbrock, x, f0, g0, d, 1.0 / np.linalg.norm(g0), c1=1e-4, c2=0.9)
    assert p.f <= f0 + 1e-4 * p.alpha * (g0 @ d)
    assert abs(p.g @ d) <= 0.9 * abs(g0 @ d)
    assert n_eval >= 1


def test_ascent_direction_rejected():
    x = np.array([0.5, 0.5])
    f0, g0 = rosenbrock(x)
    with pytest.raises(LineSearchError):
        strong_wolfe(rosenbrock, x, f0, g0, g0)


def test_max_iters_and_callback():
    seen = []
    r = minimize_lbfgs(rosenbrock, np.full(4, -1.0), max_iters=5, callback=lambda i, x, f: seen.append(i))
    assert r.n_iterations == 5 and seen == [1, 2, 3, 4, 5] and not r.converged


def test_relative_tolerance_stop():
    r = minimize_lbfgs(lambda x: (float(x @ x), 2 * x), np.ones(3), rel_tol=1e-3)
    assert r.converged and "tolerance" in r.message
