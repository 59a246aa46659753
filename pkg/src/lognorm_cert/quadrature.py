"""Adaptive Simpson quadrature and cumulative integrals of ``t -> mu[A(t)]``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .linalg import NormKind, log_norm
from .system_model import MatrixFunction, eval_matrix

__all__ = ["QuadResult", "CumulativeIntegral", "integrate", "cumulative_integral", "cumulative_mu"]

DEFAULT_TOL = 1e-9
MAX_DEPTH = 40
_ROUNDING = 64 * np.finfo(float).eps


class QuadResult(NamedTuple):
    value: float | np.ndarray
    error: float
    converged: bool


@dataclass(frozen=True)
class CumulativeIntegral:
    """Running integral ``values[i] ~ int_{ts[0]}^{ts[i]} f`` with per-interval error estimates."""

    ts: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    converged: bool = True

    def between(self, i: int, j: int) -> float:
        """Integral from ``ts[i]`` to ``ts[j]``."""
        return float(self.values[j] - self.values[i])

    @property
    def total_error(self) -> float:
        return float(np.sum(self.errors))


def _size(v) -> float:
    return abs(v) if isinstance(v, float) else float(np.abs(v).max())


def integrate(f: Callable, a: float, b: float, tol: float = DEFAULT_TOL,
              max_depth: int = MAX_DEPTH) -> QuadResult:
    """Adaptive Simpson rule with Richardson correction.

    ``f`` may return a scalar or an array; for arrays the tolerance applies
    to the largest component.  Intervals are bisected until
    ``|S_halves - S_whole| <= 15 tol_local``; each accepted panel adds
    ``|S_halves - S_whole| / 15`` to the reported error.  Panels whose
    difference is at the level of rounding in ``int |f|`` are accepted as
    converged, since bisecting further cannot help.  Hitting
    ``max_depth`` keeps the current panel and clears ``converged``.
    """
    a, b = float(a), float(b)
    if not b >= a:
        raise ValueError(f"need a <= b, got [{a}, {b}]")
    if tol <= 0:
        raise ValueError("tol must be positive")

    first = np.asarray(f(a), dtype=float)
    scalar = first.ndim == 0

    if scalar:
        def ev(t):
            v = float(f(t))
            if not math.isfinite(v):
                raise ValueError(f"integrand is not finite at t={t}")
            return v
    else:
        shape = first.shape

        def ev(t):
            v = np.asarray(f(t), dtype=float)
            if v.shape != shape or not math.isfinite(float(v.sum())):
                raise ValueError(f"integrand is not finite (or changed shape) at t={t}")
            return v

    fa = ev(a)
    if a == b:
        return QuadResult(0.0 * fa, 0.0, True)
    fm, fb = ev(0.5 * (a + b)), ev(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    total = 0.0 * whole
    error = 0.0
    converged = True
    # explicit stack of (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = ev(0.5 * (lo + mid)), ev(0.5 * (mid + hi))
        left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi)
        delta = left + right - s
        gap = _size(delta)
        # below this the panel difference is rounding noise
        noise = _ROUNDING * (hi - lo) * _size(abs(flo) + 4.0 * abs(fmid) + abs(fhi)) / 6.0
        limit = max(15.0 * eps, noise)
        if gap <= limit or depth >= max_depth or mid in (lo, hi):
            if gap > limit:
                converged = False
            total = total + left + right + delta / 15.0
            error += gap / 15.0
            continue
        stack.append((mid, hi, fmid, fr, fhi, right, 0.5 * eps, depth + 1))
        stack.append((lo, mid, flo, fl, fmid, left, 0.5 * eps, depth + 1))

    value = float(total) if scalar else total
    return QuadResult(value, error, converged)


def cumulative_integral(f: Callable[[float], float], ts, tol: float = DEFAULT_TOL) -> CumulativeIntegral:
    """Integrate ``f`` interval by interval over an increasing grid.

    Each interval gets the tolerance ``tol * (length / span)`` so that the
    summed tolerance over the grid is ``tol``.
    """
    ts = np.asarray(ts, dtype=float).reshape(-1)
    if ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ValueError("grid must have >= 2 strictly increasing times")
    span = ts[-1] - ts[0]
    values = np.zeros(ts.size)
    errors = np.zeros(ts.size)
    ok = True
    for i in range(1, ts.size):
        r = integrate(f, ts[i - 1], ts[i], tol * (ts[i] - ts[i - 1]) / span)
        values[i] = values[i - 1] + r.value
        errors[i] = r.error
        ok = ok and r.converged
    return CumulativeIntegral(ts, values, errors, ok)


def mu_function(mf: MatrixFunction, kind: NormKind) -> Callable[[float], float]:
    """``t -> mu[A(t)]`` for the given norm kind."""
    return lambda t: log_norm(eval_matrix(mf, t), kind)


def cumulative_mu(mf: MatrixFunction, kind: NormKind, T: float, steps: int = 200,
                  tol: float = DEFAULT_TOL, ts=None) -> CumulativeIntegral:
    """Running integral of the logarithmic norm of ``A(s)`` on ``[0, T]``.

    The grid is ``linspace(0, T, steps + 1)`` unless ``ts`` is given.
    """
    if ts is None:
        if not T > 0:
            raise ValueError("horizon T must be positive")
        if steps < 2:
            raise ValueError("steps must be >= 2")
        ts = np.linspace(0.0, float(T), int(steps) + 1)
    return cumulative_integral(mu_function(mf, kind), ts, tol)
