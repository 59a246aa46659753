"""Small dense matrix kernels: vector, induced and logarithmic norms.

Everything here works on plain ``numpy`` arrays of shape ``(n,)`` or
``(n, n)``.  The symmetric eigensolver is a cyclic Jacobi iteration so that
the largest eigenvalue behind the Euclidean norms comes with an explicit
residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ConvergenceError",
    "NotHurwitzError",
    "NormKind",
    "EigResult",
    "as_matrix",
    "as_vector",
    "vec_norm",
    "mat_induced_norm",
    "log_norm",
    "log_norm_limit",
    "sym_eig_max",
    "lyapunov_solve",
    "mu_weighted_hurwitz",
    "lyapunov_norm",
    "norm_equivalence",
]

_SYM_TOL = 1e-12
_EPS = np.finfo(float).eps


class ConvergenceError(ArithmeticError):
    """An iterative kernel stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class NotHurwitzError(ValueError):
    """The Lyapunov equation has no positive-definite solution."""


def as_matrix(A, name: str = "A") -> np.ndarray:
    """Return ``A`` as a finite, square float array or raise ``ValueError``."""
    M = np.array(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def as_vector(x, name: str = "x") -> np.ndarray:
    v = np.array(x, dtype=float).reshape(-1) if np.ndim(x) else np.array([x], dtype=float)
    if v.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


class NormKind:
    """Choice of vector norm on R^n.

    The vector norm fixes the induced matrix norm and the logarithmic norm.
    Use the module constants ``NormKind.ONE``, ``NormKind.TWO`` and
    ``NormKind.INF`` or :meth:`weighted` for ``||x||_H = sqrt(x^T H x)``.
    """

    __slots__ = ("label", "H", "_chol")

    ONE: "NormKind"
    TWO: "NormKind"
    INF: "NormKind"

    def __init__(self, label: str, H: np.ndarray | None = None, chol: np.ndarray | None = None):
        self.label = label
        self.H = H
        self._chol = chol

    @classmethod
    def weighted(cls, H) -> "NormKind":
        """Weighted Euclidean norm; ``H`` must be symmetric positive definite."""
        H = as_matrix(H, "H")
        scale = max(1.0, float(np.linalg.norm(H)))
        if np.linalg.norm(H - H.T) > _SYM_TOL * scale:
            raise ValueError("weight matrix H is not symmetric")
        H = 0.5 * (H + H.T)
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise ValueError("weight matrix H is not positive definite") from None
        H.setflags(write=False)
        L.setflags(write=False)
        return cls("H", H, L)

    @classmethod
    def parse(cls, text: str) -> "NormKind":
        key = str(text).strip().lower()
        table = {"1": cls.ONE, "one": cls.ONE, "l1": cls.ONE,
                 "2": cls.TWO, "two": cls.TWO, "l2": cls.TWO,
                 "inf": cls.INF, "infinity": cls.INF, "linf": cls.INF}
        try:
            return table[key]
        except KeyError:
            raise ValueError(f"unknown norm kind {text!r}; expected 1, 2 or inf") from None

    @property
    def is_weighted(self) -> bool:
        return self.H is not None

    @property
    def cholesky(self) -> np.ndarray | None:
        """Lower factor ``L`` with ``H = L L^T`` (``None`` when unweighted)."""
        return self._chol

    def _transform(self, A: np.ndarray) -> np.ndarray:
        # ||x||_H = ||L^T x||_2, so A acts as L^T A L^{-T} in Euclidean coordinates
        L = self._chol
        if L.shape != A.shape:
            raise ValueError(f"weight matrix is {L.shape}, matrix is {A.shape}")
        return np.linalg.solve(L, A.T @ L).T

    def __eq__(self, other):
        if not isinstance(other, NormKind) or other.label != self.label:
            return NotImplemented if not isinstance(other, NormKind) else False
        if self.H is None:
            return True
        return self.H.shape == other.H.shape and bool(np.array_equal(self.H, other.H))

    def __hash__(self):
        return hash((self.label, None if self.H is None else self.H.tobytes()))

    def __repr__(self):
        return f"NormKind({self.label!r})" if self.H is None else f"NormKind.weighted(n={self.H.shape[0]})"

    def __str__(self):
        return self.label


NormKind.ONE = NormKind("1")
NormKind.TWO = NormKind("2")
NormKind.INF = NormKind("inf")


@dataclass(frozen=True)
class EigResult:
    """Eigenvalues of a symmetric matrix, ascending, with the final off-diagonal mass."""

    eigenvalues: np.ndarray
    iterations: int
    residual: float

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def min(self) -> float:
        return float(self.eigenvalues[0])


def _euclid(v: np.ndarray) -> float:
    # scaled so tiny or huge entries neither underflow nor overflow when squared
    m = float(np.max(np.abs(v))) if v.size else 0.0
    if m == 0.0 or not math.isfinite(m):
        return m
    return m * float(np.linalg.norm(v / m))


def vec_norm(x, kind: NormKind = NormKind.TWO) -> float:
    """Norm of a real vector in the given kind."""
    v = as_vector(x)
    if kind.is_weighted:
        L = kind.cholesky
        if L.shape[0] != v.size:
            raise ValueError(f"vector has length {v.size}, weight matrix is {L.shape}")
        return _euclid(L.T @ v)
    if kind.label == "1":
        return float(np.sum(np.abs(v)))
    if kind.label == "inf":
        return float(np.max(np.abs(v)))
    return _euclid(v)


def _off_diagonal_mass(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def sym_eig_max(S, tol: float = 1e-12, max_sweeps: int = 50) -> EigResult:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    S : array_like, shape (n, n)
        Symmetric matrix; ``||S - S^T||_F <= 1e-12 ||S||_F`` is required.
    tol : float
        Sweeps stop once the off-diagonal Frobenius mass is at most
        ``tol * max(||S||_F, 1)``.
    max_sweeps : int
        Sweep budget before :class:`ConvergenceError` is raised.

    Returns
    -------
    EigResult
        Ascending eigenvalues, number of sweeps, final off-diagonal mass.
    """
    a = as_matrix(S, "S").copy()
    if tol <= 0:
        raise ValueError("tol must be positive")
    fro = float(np.linalg.norm(a))
    if np.linalg.norm(a - a.T) > _SYM_TOL * fro:
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    threshold = tol * max(fro, 1.0)

    sweeps = 0
    off = _off_diagonal_mass(a)
    while off > threshold:
        if sweeps >= max_sweeps:
            raise ConvergenceError("Jacobi sweeps exhausted", off, sweeps)
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
        off = _off_diagonal_mass(a)

    return EigResult(np.sort(np.diag(a).copy()), sweeps, off)


def _spectral_norm(A: np.ndarray) -> float:
    G = A.T @ A
    G = 0.5 * (G + G.T)
    return math.sqrt(max(sym_eig_max(G).max, 0.0))


def mat_induced_norm(A, kind: NormKind = NormKind.TWO) -> float:
    """Operator norm of ``A`` induced by ``kind``.

    Column-sum for ``1``, row-sum for ``inf``, ``sqrt(lambda_max(A^T A))``
    for ``2`` and ``||L^T A L^{-T}||_2`` for a weighted norm ``H = L L^T``.
    """
    A = as_matrix(A)
    if kind.is_weighted:
        return _spectral_norm(kind._transform(A))
    if kind.label == "1":
        return float(np.max(np.sum(np.abs(A), axis=0)))
    if kind.label == "inf":
        return float(np.max(np.sum(np.abs(A), axis=1)))
    return _spectral_norm(A)


def log_norm(A, kind: NormKind = NormKind.TWO) -> float:
    """Logarithmic norm (matrix measure) of ``A``; may be negative."""
    A = as_matrix(A)
    if kind.is_weighted:
        A = kind._transform(A)
    elif kind.label in ("1", "inf"):
        M = A if kind.label == "1" else A.T
        off = np.sum(np.abs(M), axis=0) - np.abs(np.diag(M))
        return float(np.max(np.diag(M) + off))
    return 0.5 * sym_eig_max(A + A.T).max


def log_norm_limit(A, kind: NormKind = NormKind.TWO, h_schedule: Sequence[float] | None = None):
    """Logarithmic norm from the difference quotient ``(||I + hA|| - 1) / h``.

    The quotients on ``h_schedule`` are extrapolated to ``h = 0`` with
    Neville's polynomial scheme.

    Returns
    -------
    estimate : float
    error : float
        Gap between the last two extrapolation levels plus a rounding floor.
    """
    A = as_matrix(A)
    if h_schedule is None:
        scale = 1.0 + mat_induced_norm(A, kind)
        h_schedule = [10.0 ** -k / scale for k in (2, 3, 4)]
    hs = np.asarray(h_schedule, dtype=float).reshape(-1)
    if hs.size == 0 or np.any(hs <= 0) or np.any(np.diff(hs) >= 0):
        raise ValueError("h_schedule must be strictly decreasing positive values")

    eye = np.eye(A.shape[0])
    level = [(mat_induced_norm(eye + h * A, kind) - 1.0) / h for h in hs]
    previous = level[-1]
    for k in range(1, len(hs)):
        previous = level[-1]
        level = [(hs[i] * level[i + 1] - hs[i + k] * level[i]) / (hs[i] - hs[i + k])
                 for i in range(len(level) - 1)]
    estimate = float(level[0])
    rounding = 1e2 * _EPS * (1.0 + mat_induced_norm(eye + hs[-1] * A, kind)) / hs[-1]
    return estimate, abs(estimate - float(previous)) + rounding


def lyapunov_solve(A) -> np.ndarray:
    """Solve ``A^T H + H A = -2 I`` for symmetric positive-definite ``H``.

    The equation is vectorised into an ``n^2 x n^2`` dense system.
    Raises :class:`NotHurwitzError` when the system is singular or the
    solution is not positive definite.
    """
    A = as_matrix(A)
    n = A.shape[0]
    eye = np.eye(n)
    K = np.kron(A.T, eye) + np.kron(eye, A.T)
    rhs = (-2.0 * eye).reshape(-1)
    if np.linalg.cond(K) > 1e14:
        raise NotHurwitzError("Lyapunov operator is singular; A is not Hurwitz")
    try:
        h = np.linalg.solve(K, rhs)
        h = h + np.linalg.solve(K, rhs - K @ h)
    except np.linalg.LinAlgError:
        raise NotHurwitzError("Lyapunov operator is singular; A is not Hurwitz") from None
    H = h.reshape(n, n)
    H = 0.5 * (H + H.T)
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise NotHurwitzError("Lyapunov solution is not positive definite; A is not Hurwitz") from None
    return H


def lyapunov_norm(A) -> NormKind:
    """Weighted norm under which a Hurwitz ``A`` has negative logarithmic norm."""
    return NormKind.weighted(lyapunov_solve(A))


def mu_weighted_hurwitz(A) -> float:
    """``-1 / lambda_max(H)`` for the Lyapunov solution ``H`` of ``A``."""
    H = lyapunov_solve(A)
    return -1.0 / sym_eig_max(H).max


_PLAIN_EQUIVALENCE = {
    ("1", "2"): lambda n: math.sqrt(n), ("1", "inf"): lambda n: float(n),
    ("2", "1"): lambda n: 1.0, ("2", "inf"): lambda n: math.sqrt(n),
    ("inf", "1"): lambda n: 1.0, ("inf", "2"): lambda n: 1.0,
}


def norm_equivalence(to_kind: NormKind, from_kind: NormKind, n: int) -> float:
    """Smallest ``c`` with ``||x||_to <= c ||x||_from`` on R^n (weighted kinds go through 2)."""
    if to_kind == from_kind:
        return 1.0
    if from_kind.is_weighted:
        lam_min = sym_eig_max(from_kind.H).min
        return norm_equivalence(to_kind, NormKind.TWO, n) / math.sqrt(lam_min)
    if to_kind.is_weighted:
        lam_max = sym_eig_max(to_kind.H).max
        return math.sqrt(lam_max) * norm_equivalence(NormKind.TWO, from_kind, n)
    return _PLAIN_EQUIVALENCE[(to_kind.label, from_kind.label)](n)
