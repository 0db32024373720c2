"""Smooth unconstrained minimization for the projector-matching step.

A compact limited-memory BFGS with Armijo backtracking.  The objective it
serves (projector mismatch over mixing matrices) is nonconvex and cheap to
evaluate, so robustness beats cleverness here: any non-descent or failed
line search falls back to plain steepest descent, and the accepted-iterate
objective trace is non-increasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["OptimResult", "minimize"]

_ARMIJO_C = 1e-4
_SHRINK = 0.5
_MAX_BACKTRACKS = 50
# curvature pairs with s'y below this (relative) are dropped from memory
_CURVATURE_FLOOR = 1e-10


@dataclass
class OptimResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    trace: np.ndarray  # objective at x0 and after each accepted step


def _two_loop(grad, s_hist, y_hist, rho_hist):
    """L-BFGS two-loop recursion; returns the (descent) direction -H·grad."""
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if y_hist:
        y = y_hist[-1]
        gamma = (s_hist[-1] @ y) / (y @ y)
        q *= gamma
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    grad_tol: float = 1e-6,
    max_iters: int = 200,
    memory: int = 10,
    gradient_descent: bool = False,
) -> OptimResult:
    """Minimize ``fun`` from ``x0``; ``fun`` returns (value, gradient).

    Stops when the gradient norm drops to ``grad_tol``, after ``max_iters``
    accepted steps, or when even a steepest-descent backtracking search
    cannot decrease the objective (a stationary point at line-search
    resolution).  ``gradient_descent=True`` disables the quasi-Newton
    direction entirely.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    value, grad = fun(x)
    if not np.isfinite(value):
        raise ValueError("objective is non-finite at the initial point")
    trace = [value]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []

    n_iters = 0
    grad_norm = float(np.linalg.norm(grad))
    while grad_norm > grad_tol and n_iters < max_iters:
        direction = None
        if not gradient_descent and s_hist:
            direction = _two_loop(grad, s_hist, y_hist, rho_hist)
            if not np.all(np.isfinite(direction)) or direction @ grad >= 0.0:
                direction = None  # not a descent direction; discard
        if direction is None:
            # steepest descent with a curvature-agnostic initial step
            direction = -grad / max(grad_norm, 1.0)

        step = 1.0
        slope = float(direction @ grad)
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            x_new = x + step * direction
            value_new, grad_new = fun(x_new)
            if np.isfinite(value_new) and value_new <= value + _ARMIJO_C * step * slope:
                accepted = True
                break
            step *= _SHRINK
        if not accepted:
            break  # cannot decrease along a descent direction: call it converged

        s = x_new - x
        y = grad_new - grad
        sy = float(s @ y)
        if sy > _CURVATURE_FLOOR * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)

        x, value, grad = x_new, value_new, grad_new
        grad_norm = float(np.linalg.norm(grad))
        trace.append(value)
        n_iters += 1

    return OptimResult(
        x=x,
        value=value,
        grad_norm=grad_norm,
        iterations=n_iters,
        converged=grad_norm <= grad_tol,
        trace=np.asarray(trace),
    )
