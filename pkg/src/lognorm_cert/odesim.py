"""Explicit Dormand-Prince 4(5) integration of vector and matrix ODEs.

Output between accepted steps uses cubic Hermite interpolation built from
the states and slopes at both step ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linalg import as_vector
from .system_model import MatrixFunction, eval_matrix

__all__ = [
    "IntegratorSettings",
    "Trajectory",
    "FundamentalSamples",
    "integrate_ode",
    "fundamental_matrix",
    "transition_matrix",
    "write_trajectory_csv",
]

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    first_step: float | None = None
    max_step: float = math.inf
    max_steps: int = 200_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.first_step is not None and not self.first_step > 0:
            raise ValueError("first_step must be positive")
        if not self.max_step > 0 or self.max_steps < 1:
            raise ValueError("max_step and max_steps must be positive")


@dataclass
class Trajectory:
    """Solution samples ``states[i] ~ x(ts[i])``.

    ``success`` is ``False`` when the integrator stopped early; ``ts`` and
    ``states`` then hold the part that was computed and ``message`` says why.
    """

    ts: np.ndarray
    states: np.ndarray
    accepted: int = 0
    rejected: int = 0
    max_error: float = 0.0
    success: bool = True
    message: str = ""
    step_ts: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def norms(self, norm: Callable[[np.ndarray], float]) -> np.ndarray:
        return np.array([norm(x) for x in self.states])


def _initial_step(rhs, t0, y0, f0, direction_span, rtol, atol):
    # Hairer, Norsett & Wanner, starting step heuristic for order 5
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_span)


def _hermite(t, t0, t1, y0, y1, f0, f1):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def integrate_ode(rhs: Callable[[float, np.ndarray], np.ndarray], x0, t_span: Sequence[float],
                  settings: IntegratorSettings | None = None, t_eval=None) -> Trajectory:
    """Integrate ``x' = rhs(t, x)`` forward over ``t_span = (t0, tf)``.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, x)`` returning an array shaped like ``x``.
    x0 : array_like
        Initial state.
    t_span : (t0, tf)
        ``tf >= t0``; ``tf == t0`` returns the single initial sample.
    settings : IntegratorSettings, optional
    t_eval : array_like, optional
        Increasing output times inside ``t_span``.  Without it the accepted
        step points are returned.

    Returns
    -------
    Trajectory
        With ``success=False`` on step-size underflow or when
        ``settings.max_steps`` is exhausted.
    """
    settings = settings or IntegratorSettings()
    y = as_vector(x0, "x0").copy()
    t0, tf = float(t_span[0]), float(t_span[1])
    if not tf >= t0:
        raise ValueError("integration runs forward only: need tf >= t0")
    if t_eval is None:
        out_ts = None
    else:
        out_ts = np.asarray(t_eval, dtype=float).reshape(-1)
        if np.any(np.diff(out_ts) < 0) or (out_ts.size and (out_ts[0] < t0 or out_ts[-1] > tf)):
            raise ValueError("t_eval must be increasing and inside t_span")

    def f(t, x):
        return np.asarray(rhs(t, x), dtype=float).reshape(-1)

    rtol, atol = settings.rel_tol, settings.abs_tol
    t = t0
    fy = f(t, y)
    step_ts, step_ys, step_fs = [t], [y.copy()], [fy.copy()]
    accepted = rejected = 0
    max_err = 0.0
    success, message = True, ""

    if tf > t0:
        h = settings.first_step or _initial_step(f, t0, y, fy, tf - t0, rtol, atol)
        h = min(h, settings.max_step)
        err_prev = 1e-4
        k = np.empty((7, y.size))
        while t < tf:
            if accepted + rejected >= settings.max_steps:
                success, message = False, f"max_steps={settings.max_steps} exceeded at t={t}"
                break
            h_min = 16 * np.spacing(max(abs(t), 1.0))
            if h < h_min:
                success, message = False, f"step size underflow at t={t}"
                break
            last = t + h >= tf
            if last:
                h = tf - t
            k[0] = fy
            # overflow shows up as a non-finite state and is rejected below
            with np.errstate(over="ignore", invalid="ignore"):
                for s in range(1, 7):
                    ys = y + h * (np.asarray(_A[s]) @ k[:s])
                    k[s] = f(t + _C[s] * h, ys)
                y_new = y + h * (_B5 @ k)
            if not np.all(np.isfinite(y_new)):
                err = math.inf
            else:
                scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
                err = float(np.sqrt(np.mean((h * (_E @ k) / scale) ** 2)))
            if err <= 1.0:
                accepted += 1
                t = tf if last else t + h
                y = y_new
                fy = k[6].copy()
                max_err = max(max_err, err)
                step_ts.append(t)
                step_ys.append(y.copy())
                step_fs.append(fy.copy())
                if err == 0.0:
                    fac = _FAC_MAX
                else:
                    fac = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
                fac = min(_FAC_MAX, max(_FAC_MIN, fac))
                err_prev = max(err, 1e-4)
                h = min(h * fac, settings.max_step)
            else:
                rejected += 1
                if math.isfinite(err):
                    fac = max(_FAC_MIN, _SAFETY * err ** -_ALPHA)
                else:
                    fac = _FAC_MIN
                h *= fac

    st = np.array(step_ts)
    sy = np.array(step_ys)
    sf = np.array(step_fs)
    if out_ts is None:
        return Trajectory(st, sy, accepted, rejected, max_err, success, message, st)

    reach = st[-1]
    keep = out_ts[out_ts <= reach]
    states = np.empty((keep.size, y.size))
    idx = np.clip(np.searchsorted(st, keep, side="right") - 1, 0, max(st.size - 2, 0))
    for i, (tt, j) in enumerate(zip(keep, idx)):
        if st.size == 1 or tt == st[j]:
            states[i] = sy[j]
        elif tt == st[j + 1]:
            states[i] = sy[j + 1]
        else:
            states[i] = _hermite(tt, st[j], st[j + 1], sy[j], sy[j + 1], sf[j], sf[j + 1])
    if success and keep.size < out_ts.size:
        success, message = False, "integration stopped before the last output time"
    return Trajectory(keep, states, accepted, rejected, max_err, success, message, st)


@dataclass(frozen=True)
class FundamentalSamples:
    """Samples of ``Phi(t)`` with ``Phi' = A(t) Phi`` on a time grid.

    ``det`` and ``cond`` are per-sample determinant and 2-norm condition
    number; ``near_singular`` flags samples with ``cond > 1e12``.
    """

    ts: np.ndarray
    phi: np.ndarray
    det: np.ndarray
    cond: np.ndarray
    success: bool = True
    message: str = ""

    @property
    def near_singular(self) -> np.ndarray:
        return self.cond > 1e12

    def index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.ts - t)))
        if abs(self.ts[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a sampled time")
        return i

    def at(self, t: float) -> np.ndarray:
        return self.phi[self.index(t)]


def fundamental_matrix(mf: MatrixFunction, t_grid, settings: IntegratorSettings | None = None,
                       phi0=None) -> FundamentalSamples:
    """Integrate ``Phi' = A(t) Phi`` from ``Phi(t_grid[0]) = phi0`` (identity by default)."""
    ts = np.asarray(t_grid, dtype=float).reshape(-1)
    if ts.size == 0 or np.any(np.diff(ts) <= 0) or ts[0] < 0:
        raise ValueError("t_grid must be strictly increasing and start at t >= 0")
    n = mf.n
    P0 = np.eye(n) if phi0 is None else np.asarray(phi0, dtype=float).reshape(n, n)

    def rhs(t, y):
        return (eval_matrix(mf, t) @ y.reshape(n, n)).reshape(-1)

    traj = integrate_ode(rhs, P0.reshape(-1), (ts[0], ts[-1]), settings, t_eval=ts)
    phi = traj.states.reshape(-1, n, n)
    det = np.linalg.det(phi)
    cond = np.linalg.cond(phi)
    if np.any(det == 0):
        return FundamentalSamples(traj.ts, phi, det, cond, False, "singular fundamental matrix sample")
    return FundamentalSamples(traj.ts, phi, det, cond, traj.success, traj.message)


def transition_matrix(samples: FundamentalSamples, t: float, tau: float) -> np.ndarray:
    """``Phi(t) Phi(tau)^{-1}`` via a linear solve, for sampled ``tau <= t``."""
    if t < tau:
        raise ValueError("transition matrix needs t >= tau")
    P_t, P_tau = samples.at(t), samples.at(tau)
    try:
        return np.linalg.solve(P_tau.T, P_t.T).T
    except np.linalg.LinAlgError:
        raise ValueError(f"Phi({tau}) is singular") from None


def write_trajectory_csv(path, ts, states, extra: dict | None = None) -> None:
    """CSV with header ``t,x1,...,xn`` (plus ``extra`` columns), 17 significant digits."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[1]
    extra = extra or {}
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + list(extra)
    cols = [np.asarray(v, dtype=float) for v in extra.values()]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i, t in enumerate(ts):
            row = [t, *states[i], *(c[i] for c in cols)]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
