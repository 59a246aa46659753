"""Finite-horizon diagnostics for the decay classes V, AD and D.

For a continuous ``h: [0, inf) -> R^n`` the three window statistics are

* ``V``:  ``||h(t)||``
* ``AD``: ``int_t^{t+1} ||h(s)|| ds``
* ``D``:  ``sup_{0 <= eta <= 1} || int_t^{t+eta} h(s) ds ||``

and membership means the statistic tends to zero.  A finite grid cannot
decide a limit, so each :class:`ProbeSeries` carries a heuristic verdict
computed by :func:`trend_verdict` from the samples alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import NormKind, vec_norm
from .quadrature import integrate

__all__ = [
    "TENDS_TO_ZERO",
    "BOUNDED_AWAY",
    "INCONCLUSIVE",
    "ProbeSeries",
    "trend_verdict",
    "probe_V",
    "probe_AD",
    "probe_D",
    "needle",
    "needle_peak",
    "NeedleFunction",
    "oscillatory",
    "zero_function",
    "example2_perturbation",
    "BUILTIN_FUNCTIONS",
]

TENDS_TO_ZERO = "tends-to-zero"
BOUNDED_AWAY = "bounded-away"
INCONCLUSIVE = "inconclusive"

EPS_ABS = 1e-3
DELTA = 1e-2
ETA_POINTS = 64
_WINDOW_TOL = 1e-9


@dataclass
class ProbeSeries:
    """Diagnostic values ``values[k]`` for windows starting at ``ts[k]``.

    ``errors`` holds a per-window bound on the numerical error of the value
    (zero where the value is computed in closed form).
    """

    cls: str
    ts: np.ndarray
    values: np.ndarray
    verdict: str
    trend_slope: float | None
    errors: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,value\n")
            for t, v in zip(self.ts, self.values):
                fh.write(f"{t:.17g},{v:.17g}\n")

    def sidecar(self) -> dict:
        return {"class": self.cls, "verdict": self.verdict,
                "trend_slope": self.trend_slope, "params": self.params}

    def write(self, csv_path, json_path) -> None:
        self.to_csv(csv_path)
        with open(json_path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _loglog_slope(ts: np.ndarray, values: np.ndarray) -> float | None:
    mask = ts > 0
    t, v = ts[mask], values[mask]
    if t.size < 2 or np.all(v == 0):
        return None
    floor = np.finfo(float).tiny
    x, y = np.log(t), np.log(np.maximum(v, floor))
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0:
        return None
    return float(np.dot(x, y - y.mean()) / denom)


def trend_verdict(ts, values, eps_abs: float = EPS_ABS, delta: float = DELTA,
                  slope_max: float = 0.0) -> tuple[str, float | None]:
    """Classify a nonnegative series as tending to zero or staying away.

    Over the last half of the samples, fit ``log value`` against ``log t``.

    * tends-to-zero: last value ``< eps_abs`` and slope ``< slope_max``,
      or every last-half value is exactly zero;
    * bounded-away: smallest last-half value ``> delta``;
    * inconclusive otherwise.

    Returns the verdict and the fitted slope (``None`` when undefined).
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.size == 0:
        return INCONCLUSIVE, None
    half = ts.size // 2
    tail_t, tail_v = ts[half:], values[half:]
    slope = _loglog_slope(tail_t, tail_v)
    if np.all(tail_v == 0):
        return TENDS_TO_ZERO, slope
    if values[-1] < eps_abs and slope is not None and slope < slope_max:
        return TENDS_TO_ZERO, slope
    if np.min(tail_v) > delta:
        return BOUNDED_AWAY, slope
    return INCONCLUSIVE, slope


def _grid(t_grid) -> np.ndarray:
    ts = np.asarray(t_grid, dtype=float).reshape(-1)
    if ts.size == 0 or np.any(np.diff(ts) <= 0) or ts[0] < 0:
        raise ValueError("t_grid must be strictly increasing and nonnegative")
    return ts


def _finish(cls, ts, values, errors, params, rule) -> ProbeSeries:
    verdict, slope = trend_verdict(ts, values, **rule)
    return ProbeSeries(cls, ts, np.asarray(values), verdict, slope, np.asarray(errors), params)


def probe_V(h: Callable[[float], np.ndarray], t_grid, kind: NormKind = NormKind.TWO,
            **rule) -> ProbeSeries:
    """Pointwise norms ``||h(t_k)||``."""
    ts = _grid(t_grid)
    values = np.array([vec_norm(h(t), kind) for t in ts])
    return _finish("V", ts, values, np.zeros(ts.size), {"kind": str(kind)}, rule)


def probe_AD(h: Callable[[float], np.ndarray], t_grid, kind: NormKind = NormKind.TWO,
             tol: float = _WINDOW_TOL, **rule) -> ProbeSeries:
    """Unit-window integrals of ``||h||``.

    Functions exposing ``integral_of_norm(a, b)`` (the needle) are
    integrated in closed form; everything else by adaptive Simpson.
    """
    ts = _grid(t_grid)
    exact = getattr(h, "integral_of_norm", None)
    values = np.empty(ts.size)
    errors = np.zeros(ts.size)
    flags = []
    for k, t in enumerate(ts):
        if exact is not None:
            values[k] = exact(t, t + 1.0)
            continue
        r = integrate(lambda s: vec_norm(h(s), kind), t, t + 1.0, tol)
        values[k], errors[k] = r.value, r.error
        if not r.converged:
            flags.append(float(t))
    params = {"kind": str(kind), "window": 1.0, "unconverged_windows": flags}
    return _finish("AD", ts, values, errors, params, rule)


def _partial_integrals(h, t, etas, tol):
    """Componentwise ``int_t^{t+eta} h`` for each ``eta``, accumulated panel by panel."""
    exact = getattr(h, "integral", None)
    out = [np.zeros_like(np.asarray(h(t), dtype=float))]
    errs = [0.0]
    for a, b in zip(etas[:-1], etas[1:]):
        if exact is not None:
            piece, err = exact(t + a, t + b), 0.0
        else:
            r = integrate(h, t + a, t + b, tol / len(etas))
            piece, err = r.value, r.error
        out.append(out[-1] + piece)
        errs.append(errs[-1] + err)
    return out, errs


def probe_D(h: Callable[[float], np.ndarray], t_grid, eta_grid_size: int = ETA_POINTS,
            kind: NormKind = NormKind.TWO, tol: float = _WINDOW_TOL, **rule) -> ProbeSeries:
    """Largest partial-integral norm over ``eta`` in ``[0, 1]`` per window.

    The sup is taken over a uniform ``eta`` grid, then refined with 16
    extra points on each panel next to the grid maximiser.  The reported
    per-window error adds the quadrature error to half the coarse spacing
    times the largest sampled ``||h||``, which bounds how far the true sup
    can sit above the best sampled value.
    """
    if eta_grid_size < 16:
        raise ValueError("eta_grid_size must be >= 16")
    ts = _grid(t_grid)
    coarse = np.linspace(0.0, 1.0, eta_grid_size)
    values = np.empty(ts.size)
    errors = np.empty(ts.size)
    for k, t in enumerate(ts):
        parts, errs = _partial_integrals(h, t, coarse, tol)
        norms = [vec_norm(p, kind) for p in parts]
        j = int(np.argmax(norms))
        best, best_err = norms[j], errs[j]
        lo, hi = coarse[max(j - 1, 0)], coarse[min(j + 1, coarse.size - 1)]
        fine = np.linspace(lo, hi, 33)
        base = parts[max(j - 1, 0)]
        fparts, ferrs = _partial_integrals(h, t + lo, fine - lo, tol)
        fnorms = [vec_norm(base + p, kind) for p in fparts]
        i = int(np.argmax(fnorms))
        if fnorms[i] > best:
            best, best_err = fnorms[i], errs[max(j - 1, 0)] + ferrs[i]
        hmax = max(vec_norm(h(t + e), kind) for e in np.concatenate([coarse, fine]))
        values[k] = best
        errors[k] = best_err + 0.5 * hmax * (coarse[1] - coarse[0])
    params = {"kind": str(kind), "eta_grid_size": int(eta_grid_size)}
    return _finish("D", ts, values, errors, params, rule)


# builtin functions -----------------------------------------------------------

def needle_peak(n: int) -> float:
    """Apex ``n - 1 + 1/(2n)`` of the n-th needle, where it takes the value 1."""
    return (n - 1) + 1.0 / (2 * n)


def needle(t: float) -> float:
    """Sum of disjoint unit-height triangles; the n-th sits on ``[n-1, n-1+1/n)``.

    Rising as ``2n(t-n+1)`` and falling as ``2(-nt+n^2-n+1)``, written here
    as ``1 - 2n|t - apex|`` so the apex evaluates to exactly 1.
    """
    t = float(t)
    if t < 0:
        raise ValueError("needle is defined for t >= 0")
    n = int(math.floor(t)) + 1
    start = float(n - 1)
    if t - start >= 1.0 / n:
        return 0.0
    return max(0.0, 1.0 - 2 * n * abs(t - needle_peak(n)))


def _needle_antiderivative(n: int, t: float) -> float:
    # integral of the n-th needle from its left foot up to t
    start, width = float(n - 1), 1.0 / n
    u = t - start
    if u <= 0:
        return 0.0
    if u >= width:
        return 1.0 / (2 * n)
    if u <= 0.5 * width:
        return n * u * u
    v = width - u
    return 1.0 / (2 * n) - n * v * v


def _needle_integral(a: float, b: float) -> float:
    if b <= a:
        return 0.0
    first, last = int(math.floor(a)) + 1, int(math.floor(b)) + 1
    total = 0.0
    for n in range(first, last + 1):
        start, end = float(n - 1), (n - 1) + 1.0 / n
        if a <= start and b >= end:
            total += 1.0 / (2 * n)
        else:
            total += _needle_antiderivative(n, min(b, end)) - _needle_antiderivative(n, max(a, start))
    return total


class NeedleFunction:
    """Vector ``[needle(t), 0, ..., 0]`` with closed-form window integrals."""

    def __init__(self, n: int = 1):
        self.n = int(n)

    def __call__(self, t: float) -> np.ndarray:
        out = np.zeros(self.n)
        out[0] = needle(t)
        return out

    def integral(self, a: float, b: float) -> np.ndarray:
        out = np.zeros(self.n)
        out[0] = _needle_integral(a, b)
        return out

    def integral_of_norm(self, a: float, b: float) -> float:
        # single nonnegative component: every vector norm equals it
        return _needle_integral(a, b)


def oscillatory(lam: float = 1.0) -> Callable[[float], np.ndarray]:
    """``lam [sin e^t, cos e^t]``: partial integrals vanish, unit-window norm integral does not."""
    def h(t):
        e = math.exp(t)
        return np.array([lam * math.sin(e), lam * math.cos(e)])
    return h


def zero_function(n: int = 2) -> Callable[[float], np.ndarray]:
    z = np.zeros(n)
    return lambda t: z


def example2_perturbation(t: float) -> np.ndarray:
    return np.array([t ** 0.875, 100.0 * math.cos(t)])


BUILTIN_FUNCTIONS = {
    "oscillatory": oscillatory,
    "needle": lambda: NeedleFunction(2),
    "example2-perturbation": lambda: example2_perturbation,
    "zero": zero_function,
}
