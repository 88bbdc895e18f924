"""Limited-memory BFGS with a strong-Wolfe line search.

Follows the two-loop recursion and the bracketing/zoom line search of
Nocedal & Wright (Algorithms 7.4, 3.5 and 3.6). The objective returns the
value and gradient together, since in this package both come from a single
forward evaluation.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class LBFGSResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    history: list[float]
    n_iterations: int
    n_evaluations: int
    converged: bool
    message: str


@dataclass
class _Point:
    alpha: float
    f: float
    g: np.ndarray
    dg: float  # directional derivative at alpha


class LineSearchError(RuntimeError):
    pass


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def strong_wolfe(
    fun: Objective,
    x: np.ndarray,
    f0: float,
    g0: np.ndarray,
    d: np.ndarray,
    alpha0: float = 1.0,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_evals: int = 30,
    alpha_max: float = 1e10,
) -> tuple[_Point, int]:
    """Find a step along ``d`` satisfying the strong Wolfe conditions.

    Returns the accepted point and the number of objective evaluations.
    Raises :class:`LineSearchError` when no acceptable step is found.
    """
    dg0 = float(g0 @ d)
    if dg0 >= 0:
        raise LineSearchError("not a descent direction")
    n_eval = 0

    def phi(alpha):
        nonlocal n_eval
        n_eval += 1
        f, g = fun(x + alpha * d)
        return _Point(alpha, float(f), g, float(g @ d))

    def zoom(lo: _Point, hi: _Point) -> _Point:
        while n_eval < max_evals:
            a = _cubic_min(lo.alpha, lo.f, lo.dg, hi.alpha, hi.f, hi.dg)
            span = hi.alpha - lo.alpha
            left, right = sorted((lo.alpha, hi.alpha))
            margin = 0.1 * abs(span)
            if a is None or not np.isfinite(a) or a < left + margin or a > right - margin:
                a = lo.alpha + 0.5 * span
            p = phi(a)
            if not np.isfinite(p.f) or p.f > f0 + c1 * a * dg0 or p.f >= lo.f:
                hi = p
            else:
                if abs(p.dg) <= -c2 * dg0:
                    return p
                if p.dg * span >= 0:
                    hi = lo
                lo = p
            if abs(hi.alpha - lo.alpha) <= 1e-16 * max(1.0, abs(lo.alpha)):
                break
        if lo.alpha > 0 and lo.f < f0:
            # sufficient decrease holds for lo; accept it without curvature
            return lo
        raise LineSearchError("zoom did not converge")

    prev = _Point(0.0, f0, g0, dg0)
    alpha = alpha0
    first = True
    while n_eval < max_evals:
        p = phi(alpha)
        if not np.isfinite(p.f) or p.f > f0 + c1 * alpha * dg0 or (not first and p.f >= prev.f):
            return zoom(prev, p), n_eval
        if abs(p.dg) <= -c2 * dg0:
            return p, n_eval
        if p.dg >= 0:
            return zoom(p, prev), n_eval
        prev = p
        alpha = min(2.0 * alpha, alpha_max)
        first = False
    raise LineSearchError("bracketing phase exceeded the evaluation budget")


def _two_loop(g: np.ndarray, pairs: deque) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    s, y, _ = pairs[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def minimize_lbfgs(
    fun: Objective,
    x0: np.ndarray,
    *,
    history_size: int = 10,
    max_iters: int = 200,
    rel_tol: float = 1e-9,
    gtol: float = 0.0,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
) -> LBFGSResult:
    """Minimize ``fun`` starting from ``x0``.

    Stops when one accepted step lowers the value by less than ``rel_tol``
    relative to the previous value, when the gradient max-norm falls to
    ``gtol`` or below, or after ``max_iters`` accepted steps.
    """
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    f = float(f)
    n_eval = 1
    hist = [f]
    pairs: deque = deque(maxlen=history_size)
    if not np.isfinite(f):
        return LBFGSResult(x, f, g, hist, 0, n_eval, False, "non-finite initial value")
    if np.max(np.abs(g)) <= gtol:
        return LBFGSResult(x, f, g, hist, 0, n_eval, True, "initial point is stationary")

    converged = False
    message = "maximum iterations reached"
    it = 0
    while it < max_iters:
        if pairs:
            d = -_two_loop(g, pairs)
            alpha0 = 1.0
        else:
            d = -g
            alpha0 = 1.0 / max(np.linalg.norm(g), 1e-300)
        if g @ d >= 0:
            pairs.clear()
            d = -g
            alpha0 = 1.0 / max(np.linalg.norm(g), 1e-300)
        try:
            p, used = strong_wolfe(fun, x, f, g, d, alpha0)
        except LineSearchError as exc:
            message = f"line search failed: {exc}"
            log.info("L-BFGS stopped after %d iterations: %s", it, message)
            break
        n_eval += used
        s = p.alpha * d
        y = p.g - g
        sy = s @ y
        if sy > 1e-12 * np.sqrt((s @ s) * (y @ y)):
            pairs.append((s, y, 1.0 / sy))
        f_prev = f
        x = x + s
        f, g = p.f, p.g
        it += 1
        hist.append(f)
        if callback is not None:
            callback(it, x, f)
        if (f_prev - f) <= rel_tol * max(abs(f_prev), 1e-300):
            converged = True
            message = "relative cost decrease below tolerance"
            break
        if np.max(np.abs(g)) <= gtol:
            converged = True
            message = "gradient below tolerance"
            break
    return LBFGSResult(x, f, g, hist, it, n_eval, converged, message)
