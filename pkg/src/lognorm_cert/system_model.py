"""Time-varying system matrices, perturbations and the builtin scenarios.

A scenario bundles ``A(t)``, an optional perturbation ``w(x, t)`` with its
bounding envelope ``||w~(t)||`` and, where one exists, closed-form oracles
for the fundamental matrix and particular solutions.

Scenario JSON layout::

    {"name": ..., "n": 2,
     "matrix": {"builtin": "example2"} | {"constant": [[...]]}
               | {"grid": {"ts": [...], "entries": [[[...]], ...]}},
     "perturbation": {"builtin": "example2" | "none" | ...},
     "params": {...}}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .linalg import as_matrix, as_vector

__all__ = [
    "ScenarioError",
    "MatrixFunction",
    "Perturbation",
    "Scenario",
    "builtin_scenario",
    "builtin_perturbation",
    "eval_matrix",
    "constant_matrix",
    "sampled_matrix",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "BUILTIN_SCENARIOS",
]

BUILTIN_SCENARIOS = ("example2", "example3", "lti_hurwitz", "custom-grid")


class ScenarioError(ValueError):
    """Invalid scenario name, parameters or evaluation point."""


@dataclass(frozen=True)
class MatrixFunction:
    """Continuous ``t -> A(t)`` on ``t >= 0``.

    ``source`` is the JSON-ready description the function was built from;
    it is what :func:`scenario_to_dict` writes back out.
    """

    n: int
    evaluator: Callable[[float], np.ndarray] = field(repr=False, compare=False)
    kind: str = "constant"
    source: dict = field(default_factory=dict, compare=False)
    t_max: float = math.inf

    def __call__(self, t: float) -> np.ndarray:
        return eval_matrix(self, t)


def eval_matrix(mf: MatrixFunction, t: float) -> np.ndarray:
    t = float(t)
    if not t >= 0.0:
        raise ScenarioError(f"A(t) is defined for t >= 0 only, got t={t}")
    if t > mf.t_max:
        raise ScenarioError(f"t={t} is outside the sampled range [0, {mf.t_max}]")
    A = np.asarray(mf.evaluator(t), dtype=float)
    if A.shape != (mf.n, mf.n) or not np.all(np.isfinite(A)):
        raise ScenarioError(f"A({t}) is not a finite {mf.n}x{mf.n} matrix")
    return A


def constant_matrix(A) -> MatrixFunction:
    A = as_matrix(A)
    A.setflags(write=False)
    return MatrixFunction(A.shape[0], lambda t: A, "constant", {"constant": A.tolist()})


def sampled_matrix(ts, entries) -> MatrixFunction:
    """Piecewise-linear ``A(t)`` through matrices sampled at increasing ``ts``."""
    ts = np.asarray(ts, dtype=float).reshape(-1)
    mats = np.asarray(entries, dtype=float)
    if ts.size < 2 or mats.ndim != 3 or mats.shape[0] != ts.size or mats.shape[1] != mats.shape[2]:
        raise ScenarioError("grid needs >= 2 times and a matching stack of square matrices")
    if ts[0] != 0.0 or np.any(np.diff(ts) <= 0):
        raise ScenarioError("grid times must start at 0 and increase strictly")
    if not np.all(np.isfinite(mats)):
        raise ScenarioError("grid matrices must be finite")

    def evaluate(t):
        k = int(np.searchsorted(ts, t, side="right")) - 1
        if k >= ts.size - 1:
            return mats[-1]
        if t == ts[k]:
            return mats[k]
        s = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1.0 - s) * mats[k] + s * mats[k + 1]

    source = {"grid": {"ts": ts.tolist(), "entries": mats.tolist()}}
    return MatrixFunction(mats.shape[1], evaluate, "sampled-grid", source, float(ts[-1]))


@dataclass(frozen=True)
class Perturbation:
    """``w(x, t)`` with an optional envelope ``e(t) >= ||w(x, t)||`` for all ``x``.

    ``envelope_kind`` names the vector norm the envelope was derived for.
    """

    evaluator: Callable[[np.ndarray, float], np.ndarray] = field(repr=False)
    envelope: Callable[[float], float] | None = field(default=None, repr=False)
    envelope_kind: str = "2"
    source: dict = field(default_factory=dict)

    def __call__(self, x, t) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(x, dtype=float), float(t)), dtype=float)

    @property
    def has_envelope(self) -> bool:
        return self.envelope is not None


@dataclass(frozen=True)
class Scenario:
    name: str
    matrix_function: MatrixFunction
    perturbation: Perturbation | None = None
    params: dict = field(default_factory=dict)
    oracles: dict = field(default_factory=dict, repr=False, compare=False)
    default_x0: tuple | None = None
    sim_horizon: float | None = None

    @property
    def n(self) -> int:
        return self.matrix_function.n

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        """Right-hand side ``A(t) x + w(x, t)`` of the perturbed system."""
        dx = eval_matrix(self.matrix_function, t) @ x
        if self.perturbation is not None:
            dx = dx + self.perturbation(x, t)
        return dx


# builtin perturbations -------------------------------------------------------

def _zero_perturbation(n: int) -> Perturbation:
    z = np.zeros(n)
    return Perturbation(lambda x, t: z, lambda t: 0.0, "2", {"builtin": "none"})


def _example2_perturbation() -> Perturbation:
    def w(x, t):
        return np.array([t ** 0.875, 100.0 * math.cos(t)])

    def envelope(t):
        return math.sqrt(t ** 1.75 + 100.0 ** 2 * math.cos(t) ** 2)

    return Perturbation(w, envelope, "2", {"builtin": "example2"})


def _oscillatory_perturbation(lam: float) -> Perturbation:
    def h(x, t):
        e = math.exp(t)
        return np.array([lam * math.sin(e), lam * math.cos(e)])

    return Perturbation(h, lambda t: lam, "2", {"builtin": "oscillatory"})


def _decaying_perturbation(n: int, rate: float) -> Perturbation:
    direction = np.ones(n) / math.sqrt(n)
    return Perturbation(lambda x, t: math.exp(-rate * t) * direction,
                        lambda t: math.exp(-rate * t), "2", {"builtin": "decay"})


def builtin_perturbation(name: str, n: int, params: Mapping[str, Any] | None = None) -> Perturbation | None:
    params = dict(params or {})
    if name in ("none", "zero"):
        return _zero_perturbation(n)
    if name == "example2":
        if n != 2:
            raise ScenarioError("the example2 perturbation is two-dimensional")
        return _example2_perturbation()
    if name in ("example3", "oscillatory"):
        if n != 2:
            raise ScenarioError("the oscillatory perturbation is two-dimensional")
        lam = float(params.get("lam", 1.0))
        if not lam > 0:
            raise ScenarioError(f"lam must be positive, got {lam}")
        return _oscillatory_perturbation(lam)
    if name == "decay":
        return _decaying_perturbation(n, float(params.get("rate", 1.0)))
    raise ScenarioError(f"unknown perturbation {name!r}")


# builtin matrix functions ---------------------------------------------------

def _beta(params: Mapping[str, Any]) -> tuple[Callable[[float], float], Any]:
    beta = params.get("beta", "t4")
    if isinstance(beta, str):
        key = beta.strip().lower().replace("^", "").replace("**", "")
        if key in ("t4", "t⁴"):
            return (lambda t: t ** 4), "t4"
        try:
            beta = float(key)
        except ValueError:
            raise ScenarioError(f"beta must be 't4' or a constant, got {beta!r}") from None
    c = float(beta)
    if not math.isfinite(c):
        raise ScenarioError("beta constant must be finite")
    return (lambda t: c), c


def _example2_matrix(params) -> MatrixFunction:
    beta, beta_tag = _beta(params)

    def A(t):
        b = beta(t)
        return np.array([[-(t + 1.0), b], [-b, -(3.0 + t + math.sin(t))]])

    return MatrixFunction(2, A, "builtin-scenario", {"builtin": "example2"})


def _example3_matrix(lam: float) -> MatrixFunction:
    def A(t):
        e = math.exp(t)
        return np.array([[-lam, e], [-e, -lam]])

    return MatrixFunction(2, A, "builtin-scenario", {"builtin": "example3"})


def _lam(params) -> float:
    lam = float(params.get("lam", 1.0))
    if not (lam > 0 and math.isfinite(lam)):
        raise ScenarioError(f"example3 needs lam > 0, got {lam}")
    return lam


def builtin_matrix(name: str, params: Mapping[str, Any]) -> MatrixFunction:
    if name == "example2":
        return _example2_matrix(params)
    if name == "example3":
        return _example3_matrix(_lam(params))
    raise ScenarioError(f"unknown builtin matrix function {name!r}")


def _example3_oracles(lam: float) -> dict:
    def phi(t):
        e = math.exp(t)
        s, c = math.sin(e), math.cos(e)
        return math.exp(-lam * t) * np.array([[s, -c], [c, s]])

    def x_star(t):
        e = math.exp(t)
        return (1.0 - math.exp(-lam * t)) * np.array([math.sin(e), math.cos(e)])

    return {"phi": phi, "x_star": x_star, "x_star_norm": lambda t: 1.0 - math.exp(-lam * t)}


def builtin_scenario(name: str, params: Mapping[str, Any] | None = None) -> Scenario:
    """Construct one of the builtin scenarios.

    ``example2``
        ``A(t) = [[-(t+1), beta(t)], [-beta(t), -(3+t+sin t)]]`` driven by
        ``w(t) = [t^(7/8), 100 cos t]``.  ``beta`` is ``"t4"`` (default) or
        a constant.
    ``example3``
        ``A(t) = [[-lam, e^t], [-e^t, -lam]]`` driven by
        ``lam [sin e^t, cos e^t]``, with closed-form oracles ``phi``,
        ``x_star`` and ``x_star_norm``.  Requires ``lam > 0``.
    ``lti_hurwitz``
        Constant ``matrix`` (default ``[[-1, 3], [-3, -2]]``) with
        perturbation ``none`` or ``decay``.
    ``custom-grid``
        Piecewise-linear ``A(t)`` from ``ts`` and ``entries``.
    """
    params = dict(params or {})
    if name == "example2":
        mf = _example2_matrix(params)
        _, beta_tag = _beta(params)
        return Scenario("example2", mf, _example2_perturbation(), {"beta": beta_tag},
                        default_x0=(-5.0, 2.0), sim_horizon=5.0)
    if name == "example3":
        lam = _lam(params)
        return Scenario("example3", _example3_matrix(lam), _oscillatory_perturbation(lam),
                        {"lam": lam}, _example3_oracles(lam), default_x0=(0.0, 0.0),
                        sim_horizon=4.0)
    if name == "lti_hurwitz":
        mf = constant_matrix(params.get("matrix", [[-1.0, 3.0], [-3.0, -2.0]]))
        pert_name = params.get("perturbation", "none")
        pert = builtin_perturbation(pert_name, mf.n, params)
        out = {"matrix": np.asarray(mf.source["constant"]).tolist(), "perturbation": pert_name}
        return Scenario("lti_hurwitz", mf, pert, out, default_x0=tuple([1.0] * mf.n))
    if name == "custom-grid":
        if "ts" not in params or "entries" not in params:
            raise ScenarioError("custom-grid needs 'ts' and 'entries'")
        mf = sampled_matrix(params["ts"], params["entries"])
        pert_name = params.get("perturbation", "none")
        return Scenario("custom-grid", mf, builtin_perturbation(pert_name, mf.n, params),
                        {"perturbation": pert_name}, default_x0=tuple([1.0] * mf.n),
                        sim_horizon=mf.t_max)
    raise ScenarioError(f"unknown scenario {name!r}; expected one of {', '.join(BUILTIN_SCENARIOS)}")


# JSON round trip -------------------------------------------------------------

def scenario_to_dict(sc: Scenario) -> dict:
    pert = {"builtin": "none"} if sc.perturbation is None else dict(sc.perturbation.source)
    params = {k: v for k, v in sc.params.items() if k not in ("matrix", "ts", "entries", "perturbation")}
    if sc.default_x0 is not None:
        params["x0"] = list(sc.default_x0)
    return {"name": sc.name, "n": sc.n, "matrix": dict(sc.matrix_function.source),
            "perturbation": pert, "params": params}


def scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    """Build a scenario from its JSON description; see the module docstring."""
    try:
        matrix = data["matrix"]
    except (KeyError, TypeError):
        raise ScenarioError("scenario needs a 'matrix' entry") from None
    params = dict(data.get("params") or {})
    pert_spec = data.get("perturbation") or {"builtin": "none"}
    pert_name = pert_spec.get("builtin", "none") if isinstance(pert_spec, Mapping) else str(pert_spec)
    name = str(data.get("name", "custom"))

    if "builtin" in matrix:
        mf = builtin_matrix(matrix["builtin"], params)
    elif "constant" in matrix:
        mf = constant_matrix(matrix["constant"])
    elif "grid" in matrix:
        mf = sampled_matrix(matrix["grid"]["ts"], matrix["grid"]["entries"])
    else:
        raise ScenarioError("matrix must be one of builtin, constant or grid")
    if "n" in data and int(data["n"]) != mf.n:
        raise ScenarioError(f"declared n={data['n']} but matrix is {mf.n}x{mf.n}")

    oracles = {}
    sim_horizon = mf.t_max if math.isfinite(mf.t_max) else None
    if matrix.get("builtin") == "example3":
        oracles = _example3_oracles(_lam(params))
        sim_horizon = 4.0
    elif matrix.get("builtin") == "example2":
        sim_horizon = 5.0
    x0 = params.pop("x0", None)
    if matrix.get("builtin") == "example2":
        params["beta"] = _beta(params)[1]
    if matrix.get("builtin") == "example3":
        params["lam"] = _lam(params)
    pert = builtin_perturbation(pert_name, mf.n, params)
    if x0 is not None:
        x0 = tuple(float(v) for v in as_vector(x0, "x0"))
        if len(x0) != mf.n:
            raise ScenarioError(f"x0 has length {len(x0)}, expected {mf.n}")
    return Scenario(name, mf, pert, params, oracles, x0, sim_horizon)


def load_scenario(source: str, params: Mapping[str, Any] | None = None) -> Scenario:
    """Builtin scenario by name, or a scenario JSON file by path."""
    if source in BUILTIN_SCENARIOS:
        return builtin_scenario(source, params)
    try:
        with open(source) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"{source!r} is neither a builtin scenario nor a readable file") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: invalid JSON ({exc})") from None
    if params:
        data.setdefault("params", {}).update(params)
    return scenario_from_dict(data)
