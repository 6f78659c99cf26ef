import numpy as np
import pytest

from sobmor.optimizer import OptimOptions, Termination, line_search, minimize
from sobmor.param import Layout, ParamVector


def quad(A, b):
    return (lambda x: 0.5 * x @ A @ x - b @ x), (lambda x: A @ x - b)


def rosen(x):
    return 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2


def rosen_grad(x):
    return np.array([-400 * x[0] * (x[1] - x[0] ** 2) - 2 * (1 - x[0]), 200 * (x[1] - x[0] ** 2)])


def test_quadratic():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    res = minimize(*quad(A, b), np.zeros(2), OptimOptions(grad_tol=1e-12))
    assert res.termination is Termination.GRADIENT
    np.testing.assert_allclose(res.theta_min, np.linalg.solve(A, b), atol=1e-10)


def test_ill_conditioned_quadratic(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((10, 10)))
    A = Q @ np.diag(np.geomspace(1, 1e4, 10)) @ Q.T
    b = rng.standard_normal(10)
    res = minimize(*quad(A, b), np.zeros(10), OptimOptions(grad_tol=1e-9))
    np.testing.assert_allclose(res.theta_min, np.linalg.solve(A, b), rtol=1e-6, atol=1e-8)


def test_rosenbrock():
    res = minimize(rosen, rosen_grad, np.array([-1.2, 1.0]), OptimOptions(grad_tol=1e-9))
    assert res.termination is Termination.GRADIENT
    np.testing.assert_allclose(res.theta_min, [1.0, 1.0], atol=1e-6)
    assert res.iterations < 200


def test_history_monotone():
    res = minimize(rosen, rosen_grad, np.array([-1.2, 1.0]))
    h = np.array(res.f_history)
    assert len(h) == res.iterations + 1
    assert np.all(np.diff(h) <= 0)


def test_stationary_start():
    res = minimize(rosen, rosen_grad, np.array([1.0, 1.0]))
    assert res.iterations == 0 and res.termination is Termination.GRADIENT


def test_max_iters():
    res = minimize(rosen, rosen_grad, np.array([-1.2, 1.0]), OptimOptions(max_iters=3))
    assert res.iterations == 3 and res.termination is Termination.MAX_ITERS


def test_f_decrease_stop():
    res = minimize(rosen, rosen_grad, np.array([-1.2, 1.0]), OptimOptions(f_tol=1e-3, grad_tol=0.0))
    assert res.termination is Termination.F_DECREASE


def test_line_search_failure():
    # gradient inconsistent with the function: no descent along -g is ever found
    res = minimize(lambda x: float(x @ x), lambda x: -x, np.ones(2))
    assert res.termination is Termination.LINE_SEARCH_FAILURE


def test_non_finite_start():
    with pytest.raises(ValueError):
        minimize(lambda x: np.inf, lambda x: x, np.ones(2))


def test_rejects_bad_options():
    with pytest.raises(ValueError):
        OptimOptions(max_iters=0)
    with pytest.raises(ValueError):
        OptimOptions(wolfe_c1=0.9, wolfe_c2=0.5)


def test_strong_wolfe_step(rng):
    def fg(x):
        return rosen(x), rosen_grad(x)

    x = np.array([-1.2, 1.0])
    f0, g0 = fg(x)
    p = -g0 / np.linalg.norm(g0)
    a, f, g, _ = line_search(fg, x, p, f0, g0, 1e-4, 0.9)
    assert a is not None
    assert f <= f0 + 1e-4 * a * (g0 @ p)
    assert abs(g @ p) <= 0.9 * abs(g0 @ p)


def test_line_search_handles_infinite_values():
    def fg(x):
        if x[0] > 0.5:
            return np.inf, np.full(1, np.nan)
        return float((x[0] - 0.4) ** 2), np.array([2 * (x[0] - 0.4)])

    a, f, g, _ = line_search(fg, np.zeros(1), np.ones(1), 0.16, np.array([-0.8]), alpha0=1.0)
    assert a is not None and a <= 0.5


def test_param_vector_in_and_out():
    lay = Layout("ph", 1, 1)
    res = minimize(lambda x: float((x - 1) @ (x - 1)), lambda x: 2 * (x - 1), ParamVector(np.zeros(3), lay))
    assert isinstance(res.theta_min, ParamVector) and res.theta_min.layout is lay
    np.testing.assert_allclose(res.theta_min.data, 1.0, atol=1e-8)


def test_deterministic():
    a = minimize(rosen, rosen_grad, np.array([-1.2, 1.0]))
    b = minimize(rosen, rosen_grad, np.array([-1.2, 1.0]))
    np.testing.assert_array_equal(a.theta_min, b.theta_min)
    assert a.f_history == b.f_history


def test_callback_called():
    calls = []
    minimize(rosen, rosen_grad, np.array([-1.2, 1.0]), OptimOptions(max_iters=5), callback=lambda *a: calls.append(a))
    assert [c[0] for c in calls] == [1, 2, 3, 4, 5]
