"""BFGS with a strong Wolfe line search.

The inverse Hessian approximation starts at the identity and is rescaled by
``s^T y / y^T y`` before the first update. Updates are skipped when the
curvature condition fails. A failed line search resets the approximation to
the identity once; a second consecutive failure ends the run.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .param import ParamVector

__all__ = ["OptimOptions", "OptimResult", "Termination", "minimize", "line_search"]


class Termination(str, enum.Enum):
    GRADIENT = "gradient"
    F_DECREASE = "f-decrease"
    MAX_ITERS = "max-iters"
    LINE_SEARCH_FAILURE = "line-search-failure"


@dataclass(frozen=True)
class OptimOptions:
    max_iters: int = 2000
    grad_tol: float = 1e-10
    f_tol: float = 0.0
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol < 0 or self.f_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < wolfe_c1 < wolfe_c2 < 1")


@dataclass
class OptimResult:
    theta_min: object
    f_min: float
    iterations: int
    termination: Termination
    f_history: list = field(default_factory=list)
    grad_norm: float = np.nan
    n_evals: int = 0


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating (a, fa, da), (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (db + d2 - d1) / denom
    return t if np.isfinite(t) else None


def line_search(fg, x, p, f0, g0, c1=1e-4, c2=0.9, alpha0=1.0, max_evals=40):
    """Find a step satisfying the strong Wolfe conditions along ``p``.

    Returns ``(alpha, f, g, n_evals)``; ``alpha`` is ``None`` on failure.
    Non-finite objective values are treated as sufficient-decrease failures.
    """
    d0 = float(g0 @ p)
    evals = 0

    def phi(a):
        nonlocal evals
        evals += 1
        f, g = fg(x + a * p)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return np.inf, None, np.nan
        return f, g, float(g @ p)

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        while evals < max_evals:
            width = hi - lo
            a = None
            if np.isfinite(f_hi) and np.isfinite(d_hi):
                a = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            if a is None or not (min(lo, hi) + 0.1 * abs(width) <= a <= max(lo, hi) - 0.1 * abs(width)):
                a = lo + 0.5 * width
            if a == lo or a == hi:
                break
            f, g, d = phi(a)
            if f > f0 + c1 * a * d0 or f >= f_lo:
                hi, f_hi, d_hi = a, f, d
            else:
                if abs(d) <= -c2 * d0:
                    return a, f, g
                if d * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = a, f, d
        return None, None, None

    a_prev, f_prev, d_prev = 0.0, f0, d0
    a = alpha0
    first = True
    while evals < max_evals:
        f, g, d = phi(a)
        if f > f0 + c1 * a * d0 or (not first and f >= f_prev):
            out = zoom(a_prev, f_prev, d_prev, a, f, d)
            return (*out, evals)
        if abs(d) <= -c2 * d0:
            return a, f, g, evals
        if d >= 0:
            out = zoom(a, f, d, a_prev, f_prev, d_prev)
            return (*out, evals)
        a_prev, f_prev, d_prev = a, f, d
        a = 4.0 * a
        first = False
    return None, None, None, evals


def minimize(f, g, theta0, options=None, callback=None, fg=None):
    """Minimize ``f`` with BFGS starting at ``theta0``.

    Parameters
    ----------
    f, g : callable
        Objective and gradient on 1-d float arrays. Either may be ``None``
        when ``fg`` (returning both) is given.
    theta0 : ParamVector or array_like
    options : OptimOptions, optional
    callback : callable, optional
        Called as ``callback(iteration, f, grad_inf_norm)`` after each step.
    """
    opts = options or OptimOptions()
    layout = theta0.layout if isinstance(theta0, ParamVector) else None
    x = np.array(theta0.data if layout else theta0, dtype=float).ravel()
    if fg is None:

        def fg(z):
            return f(z), g(z)

    fx, gx = fg(x)
    gx = np.asarray(gx, dtype=float)
    if not np.isfinite(fx) or not np.all(np.isfinite(gx)):
        raise ValueError("objective or gradient is not finite at the starting point")
    n_evals = 1
    n = x.size
    H = np.eye(n)
    fresh = True
    scaled = False
    history = [float(fx)]
    it = 0
    term = None
    while True:
        gnorm = np.abs(gx).max(initial=0.0)
        if gnorm <= opts.grad_tol:
            term = Termination.GRADIENT
            break
        if it >= opts.max_iters:
            term = Termination.MAX_ITERS
            break
        p = -H @ gx
        if gx @ p >= 0:
            H, fresh, scaled, p = np.eye(n), True, False, -gx
        alpha0 = 1.0
        if fresh:
            alpha0 = min(1.0, 1.0 / np.linalg.norm(gx))
        alpha, f_new, g_new, ne = line_search(fg, x, p, fx, gx, opts.wolfe_c1, opts.wolfe_c2, alpha0)
        n_evals += ne
        if alpha is None:
            if fresh:
                term = Termination.LINE_SEARCH_FAILURE
                break
            H, fresh, scaled = np.eye(n), True, False
            continue
        s = alpha * p
        y = g_new - gx
        x = x + s
        f_old, fx, gx = fx, f_new, np.asarray(g_new, dtype=float)
        history.append(float(fx))
        it += 1
        sy = s @ y
        if sy > 1e-14 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                H = (sy / (y @ y)) * np.eye(n)
                scaled = True
            rho = 1.0 / sy
            Hy = H @ y
            H = H + ((sy + y @ Hy) * rho * rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
            fresh = False
        if callback is not None:
            callback(it, fx, np.abs(gx).max(initial=0.0))
        if opts.f_tol > 0 and f_old - fx <= opts.f_tol * max(abs(f_old), abs(fx), 1e-300):
            term = Termination.F_DECREASE
            break
    theta = ParamVector(x, layout) if layout else x
    return OptimResult(theta, float(fx), it, term, history, float(np.abs(gx).max(initial=0.0)), n_evals)
