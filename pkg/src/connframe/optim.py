"""Deterministic batch minimizers for smooth convex objectives.

minimize() runs a limited-memory quasi-Newton method (two-loop recursion)
with a strong Wolfe line search and falls back to a plain gradient-descent
step whenever the line search fails; method="gd" skips the quasi-Newton
part entirely.  Convergence is declared when the sup-norm of the gradient
drops below tol.  Every accepted iterate satisfies sufficient decrease, so
the recorded loss trace is non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_C1 = 1e-4   # sufficient-decrease constant
_C2 = 0.9    # curvature constant
_MIN_STEP = 1e-20


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    converged: bool
    loss_trace: list = field(default_factory=list)


def _zoom(fg, x, d, lo, f_lo, hi, f_hi, f0, dphi0, max_iter=30):
    """Bisection zoom between a low and high step (Wolfe bracketing)."""
    for _ in range(max_iter):
        alpha = 0.5 * (lo + hi)
        f_a, g_a = fg(x + alpha * d)
        dphi_a = float(g_a @ d)
        if f_a > f0 + _C1 * alpha * dphi0 or f_a >= f_lo:
            hi, f_hi = alpha, f_a
        else:
            if abs(dphi_a) <= -_C2 * dphi0:
                return alpha, f_a, g_a
            if dphi_a * (hi - lo) >= 0:
                hi, f_hi = lo, f_lo
            lo, f_lo = alpha, f_a
        if abs(hi - lo) < _MIN_STEP:
            break
    # Bracket collapsed; accept lo if it at least decreases sufficiently.
    f_a, g_a = fg(x + lo * d)
    if lo > 0 and f_a <= f0 + _C1 * lo * dphi0:
        return lo, f_a, g_a
    return None


def _wolfe_search(fg, x, f0, g0, d, alpha0=1.0, max_iter=25):
    """Strong Wolfe line search; returns (alpha, f, g) or None on failure."""
    dphi0 = float(g0 @ d)
    if dphi0 >= 0:
        return None
    alpha_prev, f_prev = 0.0, f0
    alpha = alpha0
    for i in range(max_iter):
        f_a, g_a = fg(x + alpha * d)
        dphi_a = float(g_a @ d)
        if f_a > f0 + _C1 * alpha * dphi0 or (i > 0 and f_a >= f_prev):
            return _zoom(fg, x, d, alpha_prev, f_prev, alpha, f_a, f0, dphi0)
        if abs(dphi_a) <= -_C2 * dphi0:
            return alpha, f_a, g_a
        if dphi_a >= 0:
            return _zoom(fg, x, d, alpha, f_a, alpha_prev, f_prev, f0, dphi0)
        alpha_prev, f_prev = alpha, f_a
        alpha *= 2.0
    return None


def _backtracking(fg, x, f0, g0, d, max_halvings=60):
    """Armijo backtracking from step 1; returns (alpha, f, g) or None."""
    dphi0 = float(g0 @ d)
    if dphi0 >= 0:
        return None
    alpha = 1.0
    while alpha > _MIN_STEP:
        f_a, g_a = fg(x + alpha * d)
        if f_a <= f0 + _C1 * alpha * dphi0:
            return alpha, f_a, g_a
        alpha *= 0.5
        max_halvings -= 1
        if max_halvings <= 0:
            break
    return None


def minimize(fun_grad, x0, max_iter=500, tol=1e-6, history=10, method="lbfgs"):
    """Minimize fun_grad(x) -> (value, gradient) from x0.

    method: "lbfgs" (default) or "gd" (plain batch gradient descent with
    backtracking).
    """
    if method not in ("lbfgs", "gd"):
        raise ValueError(f"unknown optimizer method {method!r}")
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    trace = [float(f)]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if float(np.max(np.abs(g))) < tol:
            return OptimResult(x, float(f), g, n_iter - 1, True, trace)

        if method == "lbfgs" and s_hist:
            d = _two_loop_direction(g, s_hist, y_hist)
        else:
            d = -g

        if method == "lbfgs":
            alpha0 = 1.0 if s_hist else min(1.0, 1.0 / (1.0 + float(np.sum(np.abs(g)))))
            step = _wolfe_search(fun_grad, x, f, g, d, alpha0=alpha0)
            if step is None:
                # Quasi-Newton direction rejected: drop the memory and take
                # a plain gradient-descent step instead.
                s_hist.clear()
                y_hist.clear()
                d = -g
                step = _backtracking(fun_grad, x, f, g, d)
        else:
            step = _backtracking(fun_grad, x, f, g, d)

        if step is None:
            # No acceptable step in any direction: numerically stuck.
            return OptimResult(x, float(f), g, n_iter - 1, False, trace)

        alpha, f_new, g_new = step
        s = alpha * d
        y = g_new - g
        if method == "lbfgs" and float(s @ y) > 1e-12:
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
        x = x + s
        f, g = f_new, g_new
        trace.append(float(f))

    converged = float(np.max(np.abs(g))) < tol
    return OptimResult(x, float(f), g, max_iter, converged, trace)


def _two_loop_direction(g, s_hist, y_hist):
    """L-BFGS two-loop recursion for -H.g with the standard gamma scaling."""
    q = g.copy()
    alphas = []
    rhos = [1.0 / float(y @ s) for s, y in zip(s_hist, y_hist)]
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    s_last, y_last = s_hist[-1], y_hist[-1]
    gamma = float(s_last @ y_last) / float(y_last @ y_last)
    q *= gamma
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rhos), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q
