"""Limited-memory quasi-Newton minimizer."""

import numpy as np
import pytest

from covdl.optim import minimize


def _quadratic(H, b):
    def fun(x):
        return 0.5 * float(x @ (H @ x)) - float(b @ x), H @ x - b

    return fun


def test_quadratic_reaches_exact_solution():
    rng = np.random.default_rng(0)
    raw = rng.normal(size=(12, 12))
    H = raw @ raw.T + 12 * np.eye(12)
    b = rng.normal(size=12)
    res = minimize(_quadratic(H, b), np.zeros(12), grad_tol=1e-8, max_iters=300)
    assert res.converged
    assert np.allclose(res.x, np.linalg.solve(H, b), atol=1e-7)
    assert res.grad_norm <= 1e-8


def test_rosenbrock():
    def fun(x):
        a, b = x
        value = (1.0 - a) ** 2 + 100.0 * (b - a * a) ** 2
        grad = np.array(
            [-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]
        )
        return value, grad

    res = minimize(fun, np.array([-1.2, 1.0]), grad_tol=1e-8, max_iters=500)
    assert res.converged
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-6)


def test_trace_is_monotone_nonincreasing():
    def fun(x):
        return float(np.cos(x[0]) + 0.01 * x[0] ** 2), np.array(
            [-np.sin(x[0]) + 0.02 * x[0]]
        )

    res = minimize(fun, np.array([2.0]), grad_tol=1e-9, max_iters=200)
    assert np.all(np.diff(res.trace) <= 0.0)
    assert res.trace[0] == pytest.approx(np.cos(2.0) + 0.04)


def test_gradient_descent_mode_still_converges():
    H = np.diag([1.0, 10.0])
    b = np.array([1.0, -2.0])
    res = minimize(_quadratic(H, b), np.zeros(2), grad_tol=1e-8, max_iters=2000,
                   gradient_descent=True)
    assert res.converged
    assert np.allclose(res.x, np.linalg.solve(H, b), atol=1e-6)


def test_quasi_newton_beats_gradient_descent_on_ill_conditioned_bowl():
    H = np.diag(np.logspace(0, 3, 20))
    b = np.ones(20)
    fun = _quadratic(H, b)
    qn = minimize(fun, np.zeros(20), grad_tol=1e-6, max_iters=400)
    gd = minimize(fun, np.zeros(20), grad_tol=1e-6, max_iters=400,
                  gradient_descent=True)
    assert qn.converged
    assert qn.iterations < gd.iterations or not gd.converged


def test_max_iters_cap_reports_not_converged():
    H = np.diag(np.logspace(0, 5, 10))
    res = minimize(_quadratic(H, np.ones(10)), np.zeros(10), grad_tol=1e-12,
                   max_iters=3)
    assert not res.converged
    assert res.iterations == 3
    assert res.trace.size == 4  # initial value plus three accepted steps


def test_already_at_minimum_takes_no_steps():
    H = np.eye(3)
    b = np.array([1.0, 2.0, 3.0])
    res = minimize(_quadratic(H, b), b.copy(), grad_tol=1e-6)
    assert res.converged
    assert res.iterations == 0
    assert np.array_equal(res.x, b)


def test_nonfinite_start_raises():
    def fun(x):
        return float("nan"), x

    with pytest.raises(ValueError):
        minimize(fun, np.zeros(2))


def test_stationary_at_line_search_resolution_stops_cleanly():
    # |x| has no descent step at 0 that Armijo can accept along -grad
    def fun(x):
        return float(np.abs(x[0])), np.array([np.sign(x[0]) if x[0] else 1.0])

    res = minimize(fun, np.array([0.0]), grad_tol=1e-12, max_iters=50)
    assert not res.converged
    assert res.value == 0.0


def test_result_is_float64_and_detached_from_input():
    x0 = np.zeros(2)
    res = minimize(_quadratic(np.eye(2), np.ones(2)), x0, grad_tol=1e-10)
    res.x[0] = 99.0
    assert x0[0] == 0.0
