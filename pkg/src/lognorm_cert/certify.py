"""Robust-stability certificates for ``x' = A(t) x + w(x, t)``.

For a chosen vector norm the certificate checks, on a finite horizon,

* A1: the running integral of ``mu[A(s)]`` diverges to ``-inf``;
* A2: ``mu[A(t)] < 0`` on a tail window;
* A3: ``||w~(t)|| / |mu[A(t)]|`` tends to zero, where ``||w(x, t)|| <= ||w~(t)||``.

When all three hold every solution of the perturbed system is attracted to
the origin.  The same ingredients give the variation-of-constants envelope

    B(t) = ||x(0)|| e^{M(t)} + int_0^t e^{M(t) - M(s)} ||w~(s)|| ds,
    M(t) = int_0^t mu[A(s)] ds,

which bounds ``||x(t)||`` and is checked here against direct simulation.
Verdicts are "on horizon" statements under the documented rules, never
proofs of the limits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .funclass import BOUNDED_AWAY, TENDS_TO_ZERO, ProbeSeries, trend_verdict
from .linalg import NormKind, as_vector, log_norm, norm_equivalence, vec_norm
from .odesim import IntegratorSettings, integrate_ode
from .quadrature import CumulativeIntegral, cumulative_mu
from .system_model import MatrixFunction, Perturbation, Scenario, eval_matrix

__all__ = [
    "HOLDS",
    "FAILS",
    "INCONCLUSIVE",
    "CERTIFIED",
    "NOT_CERTIFIED",
    "CertifyConfig",
    "AssumptionVerdict",
    "CertificateReport",
    "SpotcheckReport",
    "check_A1",
    "check_A2",
    "check_A3",
    "envelope_bound",
    "envelope_in_kind",
    "certify",
    "envelope_spotcheck",
    "overall_verdict",
]

HOLDS = "holds-on-horizon"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"

CERTIFIED = "certified-on-horizon"
NOT_CERTIFIED = "not-certified"

_NUMERIC_ERRORS = (ValueError, ArithmeticError, FloatingPointError)


@dataclass(frozen=True)
class CertifyConfig:
    """Knobs for :func:`certify`; every default is the documented one."""

    horizon: float = 20.0
    steps: int = 200
    divergence_threshold: float = 50.0
    tail_fraction: float = 0.75
    a2_samples: int = 512
    a3_points: int = 512
    a3_slope_max: float = -0.05
    a3_delta: float = 1e-2
    simulate: bool = False
    x0: tuple | None = None
    random_x0: int = 0
    x0_radius: float = 10.0
    sim_horizon: float | None = None
    sim_points: int = 201
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    envelope_slack: float = 1e-3
    envelope_step: float = 0.005
    seed: int = 0


@dataclass
class AssumptionVerdict:
    """Outcome of one assumption check.

    ``columns`` holds the evidence series for CSV output (first column
    ``t``); ``parameters`` is a small JSON-ready summary.
    """

    id: str
    verdict: str
    rule: str
    evidence: ProbeSeries | CumulativeIntegral | None = None
    parameters: dict = field(default_factory=dict)
    columns: dict = field(default_factory=dict, repr=False)
    message: str = ""

    def to_dict(self, evidence_ref: str | None = None) -> dict:
        out = {"id": self.id, "verdict": self.verdict, "rule": self.rule,
               "evidence_ref": evidence_ref, "parameters": self.parameters}
        if self.message:
            out["message"] = self.message
        return out

    def write_csv(self, path) -> None:
        names = list(self.columns)
        cols = [np.asarray(self.columns[k], dtype=float) for k in names]
        with open(path, "w") as fh:
            fh.write(",".join(names) + "\n")
            for row in zip(*cols):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def overall_verdict(verdicts: Sequence[AssumptionVerdict]) -> str:
    states = [v.verdict for v in verdicts]
    if all(s == HOLDS for s in states):
        return CERTIFIED
    if any(s == FAILS for s in states):
        return NOT_CERTIFIED
    return INCONCLUSIVE


@dataclass
class CertificateReport:
    scenario: str
    kind: str
    assumptions: list
    overall: str
    simulation: dict | None = None

    def evidence_ref(self, v: AssumptionVerdict) -> str:
        return f"{self.scenario}_{self.kind}_{v.id}.csv"

    def to_dict(self) -> dict:
        sim = self.simulation or {"performed": False, "max_envelope_ratio": None, "tail_norm": None}
        return {
            "scenario": self.scenario,
            "kind": self.kind,
            "assumptions": [v.to_dict(self.evidence_ref(v)) for v in self.assumptions],
            "overall": self.overall,
            "simulation": sim,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _safe(x: float) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


# A1 ------------------------------------------------------------------------------

def check_A1(mf: MatrixFunction, kind: NormKind, T: float, divergence_threshold: float = 50.0,
             steps: int = 200) -> AssumptionVerdict:
    """Divergence of the running log-norm integral on ``[0, T]``.

    holds: ``M(T) <= -threshold`` and ``M`` strictly decreasing over the
    last quarter of the grid; fails: ``M(T) >= M(3T/4)``; inconclusive
    otherwise (decreasing but not yet past the threshold).
    """
    rule = (f"holds iff M(T) <= -{divergence_threshold:g} and M strictly decreasing on "
            f"[3T/4, T]; fails iff M(T) >= M(3T/4)")
    try:
        cum = cumulative_mu(mf, kind, T, steps)
    except _NUMERIC_ERRORS as exc:
        return AssumptionVerdict("A1", INCONCLUSIVE, rule, message=f"evaluation failed: {exc}")
    values = cum.values
    q = (3 * (values.size - 1)) // 4
    final_quarter = values[q:]
    decreasing = bool(np.all(np.diff(final_quarter) < 0))
    if not np.all(np.isfinite(values)):
        verdict = FAILS if not np.isfinite(values[-1]) and values[-1] > 0 else INCONCLUSIVE
    elif values[-1] <= -divergence_threshold and decreasing:
        verdict = HOLDS
    elif values[-1] >= values[q]:
        verdict = FAILS
    else:
        verdict = INCONCLUSIVE
    params = {"T": float(T), "threshold": float(divergence_threshold),
              "integral_at_T": _safe(values[-1]), "quadrature_error": _safe(cum.total_error),
              "decreasing_final_quarter": decreasing}
    return AssumptionVerdict("A1", verdict, rule, cum, params,
                             {"t": cum.ts, "integral_mu": values})


# A2 ------------------------------------------------------------------------------

def check_A2(mf: MatrixFunction, kind: NormKind, tail_window: Sequence[float],
             samples: int = 512) -> AssumptionVerdict:
    """Negativity of ``mu[A(t)]`` on ``samples`` points of the tail window."""
    T1, T2 = float(tail_window[0]), float(tail_window[1])
    if not 0 <= T1 < T2:
        raise ValueError("tail window needs 0 <= T1 < T2")
    rule = f"holds iff max mu[A(t)] < 0 over {samples} samples of [{T1:g}, {T2:g}]"
    ts = np.linspace(T1, T2, max(int(samples), 512))
    try:
        mus = np.array([log_norm(eval_matrix(mf, t), kind) for t in ts])
    except _NUMERIC_ERRORS as exc:
        return AssumptionVerdict("A2", INCONCLUSIVE, rule, message=f"evaluation failed: {exc}")
    worst = float(np.max(mus))
    verdict = HOLDS if worst < 0 else FAILS
    params = {"window": [T1, T2], "max_mu": worst, "argmax_t": float(ts[int(np.argmax(mus))])}
    return AssumptionVerdict("A2", verdict, rule, None, params, {"t": ts, "mu": mus})


# A3 ------------------------------------------------------------------------------

def envelope_in_kind(perturbation: Perturbation, kind: NormKind, n: int) -> Callable[[float], float]:
    """The perturbation envelope re-expressed as a bound in ``kind``."""
    if not perturbation.has_envelope:
        raise ValueError("perturbation has no bounding envelope")
    c = norm_equivalence(kind, NormKind.parse(perturbation.envelope_kind), n)
    env = perturbation.envelope
    return env if c == 1.0 else (lambda t: c * env(t))


def check_A3(perturbation: Perturbation | None, mf: MatrixFunction, kind: NormKind, t_grid,
             slope_max: float = -0.05, delta: float = 1e-2) -> AssumptionVerdict:
    """Decay of ``||w~(t)|| / |mu[A(t)]|`` on a grid.

    The diagnostic is the running tail maximum ``d_k = max_{j >= k} r_j``
    of the sampled ratios, a finite-horizon proxy for ``limsup r = 0``.
    Verdict from :func:`trend_verdict` with no absolute cut-off: holds when
    the log-log slope of ``d`` over the last half is below ``slope_max``,
    fails when ``d`` stays above ``delta``.  The grid is trimmed to the
    points after the last sample with ``mu >= 0``; if that leaves less than
    the last half, the ratio is ill-defined on the tail and the verdict is
    inconclusive.
    """
    rule = (f"tail-max of |envelope/mu| on grid; holds iff last-half log-log slope < {slope_max:g}; "
            f"fails iff last-half minimum > {delta:g}; requires mu < 0 on the last half")
    if perturbation is None:
        envelope = lambda t: 0.0  # noqa: E731
    else:
        try:
            envelope = envelope_in_kind(perturbation, kind, mf.n)
        except ValueError as exc:
            return AssumptionVerdict("A3", INCONCLUSIVE, rule, message=str(exc))
    ts = np.asarray(t_grid, dtype=float).reshape(-1)
    try:
        mus = np.array([log_norm(eval_matrix(mf, t), kind) for t in ts])
        env = np.array([envelope(t) for t in ts])
    except _NUMERIC_ERRORS as exc:
        return AssumptionVerdict("A3", INCONCLUSIVE, rule, message=f"evaluation failed: {exc}")

    nonneg = np.flatnonzero(mus >= 0)
    start = int(nonneg[-1]) + 1 if nonneg.size else 0
    if start > ts.size // 2 or ts.size - start < 2:
        params = {"max_mu_tail": float(np.max(mus[ts.size // 2:]))}
        return AssumptionVerdict("A3", INCONCLUSIVE, rule, None, params, {"t": ts, "mu": mus},
                                 "mu[A(t)] is not negative on the tail; ratio ill-defined")
    t_ok, ratio = ts[start:], env[start:] / np.abs(mus[start:])
    tail_max = np.maximum.accumulate(ratio[::-1])[::-1]
    state, slope = trend_verdict(t_ok, tail_max, eps_abs=math.inf, delta=delta, slope_max=slope_max)
    verdict = {TENDS_TO_ZERO: HOLDS, BOUNDED_AWAY: FAILS}.get(state, INCONCLUSIVE)
    probe = ProbeSeries("A3", t_ok, tail_max, state, slope,
                        params={"kind": str(kind), "slope_max": slope_max, "delta": delta})
    params = {"ratio_at_T": float(ratio[-1]), "tail_max_at_start_of_last_half": float(tail_max[t_ok.size // 2]),
              "trend_slope": slope, "grid": [float(ts[0]), float(ts[-1]), int(ts.size)]}
    return AssumptionVerdict("A3", verdict, rule, probe, params,
                             {"t": t_ok, "ratio": ratio, "tail_max": tail_max})


# envelope ---------------------------------------------------------------------

def _fine_grid(t_out: np.ndarray, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Refine ``[0, t_out...]`` with an even number of substeps per interval."""
    nodes = [np.array([0.0])]
    out_idx = []
    knots = t_out if t_out[0] == 0.0 else np.concatenate([[0.0], t_out])
    count = 0
    if t_out[0] == 0.0:
        out_idx.append(0)
    for a, b in zip(knots[:-1], knots[1:]):
        m = max(2, int(math.ceil((b - a) / step)))
        m += m % 2
        nodes.append(np.linspace(a, b, m + 1)[1:])
        count += m
        out_idx.append(count)
    return np.concatenate(nodes), np.asarray(out_idx)


def envelope_bound(scenario: Scenario, kind: NormKind, t_grid, x0_norm: float | None = None,
                   step: float = 0.005, tol: float = 1e-11) -> np.ndarray:
    """Variation-of-constants bound ``B(t)`` on ``t_grid``.

    Parameters
    ----------
    scenario : Scenario
        Its perturbation must carry an envelope (``None`` means ``w = 0``).
    kind : NormKind
    t_grid : array_like
        Increasing times ``>= 0``.
    x0_norm : float, optional
        ``||x(0)||`` in ``kind``; defaults to the norm of the scenario's
        default initial state.
    step : float
        Fine-grid spacing for the convolution term (composite Simpson).

    Notes
    -----
    One running integral ``M`` is computed on the fine grid.  The
    convolution is advanced panel by panel as
    ``C(s2) = e^{M(s2)-M(s0)} C(s0) + Simpson(e^{M(s2)-M(.)} ||w~||)``,
    so only differences of ``M`` are ever exponentiated.
    """
    t_out = np.asarray(t_grid, dtype=float).reshape(-1)
    if t_out.size == 0 or t_out[0] < 0 or np.any(np.diff(t_out) <= 0):
        raise ValueError("t_grid must be increasing and nonnegative")
    if x0_norm is None:
        x0 = scenario.default_x0 if scenario.default_x0 is not None else np.zeros(scenario.n)
        x0_norm = vec_norm(x0, kind) if np.any(np.asarray(x0) != 0) else 0.0
    pert = scenario.perturbation
    env = (lambda t: 0.0) if pert is None else envelope_in_kind(pert, kind, scenario.n)

    if t_out[-1] == 0.0:
        return np.array([float(x0_norm)])
    fine, out_idx = _fine_grid(t_out, step)
    M = cumulative_mu(scenario.matrix_function, kind, fine[-1], ts=fine, tol=tol).values
    w = np.array([env(t) for t in fine])

    # each output interval has an even number of substeps, so outputs sit on even nodes
    conv = np.zeros(fine.size)
    for k in range(0, fine.size - 2, 2):
        h = fine[k + 2] - fine[k]
        d0 = M[k + 2] - M[k]
        d1 = M[k + 2] - M[k + 1]
        with np.errstate(over="ignore"):
            e0, e1 = math.exp(min(d0, 709.0)), math.exp(min(d1, 709.0))
        conv[k + 2] = e0 * conv[k] + h / 6.0 * (e0 * w[k] + 4.0 * e1 * w[k + 1] + w[k + 2])
    with np.errstate(over="ignore"):
        hom = x0_norm * np.exp(M)
    B = hom + conv
    return B[out_idx]


# certify ------------------------------------------------------------------------

@dataclass
class SpotcheckReport:
    passed: bool
    samples: int
    witness: dict | None = None


def envelope_spotcheck(perturbation: Perturbation, n: int, sample_count: int = 1000,
                       t_range: Sequence[float] = (0.0, 20.0), x_radius: float = 10.0,
                       seed: int = 0, kind: NormKind = NormKind.TWO) -> SpotcheckReport:
    """Monte Carlo check of ``||w(x, t)|| <= envelope(t)``.

    ``x`` is drawn uniformly from the Euclidean ball of radius ``x_radius``
    and ``t`` uniformly from ``t_range``.  Stops at the first violation
    beyond ``1e-12`` and returns it as the witness.
    """
    envelope = envelope_in_kind(perturbation, kind, n)
    rng = np.random.default_rng(seed)
    t0, t1 = float(t_range[0]), float(t_range[1])
    for i in range(int(sample_count)):
        g = rng.standard_normal(n)
        x = x_radius * rng.random() ** (1.0 / n) * g / np.linalg.norm(g)
        t = t0 + (t1 - t0) * rng.random()
        size, bound = vec_norm(perturbation(x, t), kind), envelope(t)
        if size > bound + 1e-12:
            witness = {"x": x.tolist(), "t": t, "norm_w": size, "envelope": bound}
            return SpotcheckReport(False, i + 1, witness)
    return SpotcheckReport(True, int(sample_count))


def _simulate_against_envelope(scenario: Scenario, kind: NormKind, cfg: CertifyConfig) -> dict:
    horizon = cfg.sim_horizon or scenario.sim_horizon or cfg.horizon
    horizon = min(float(horizon), float(cfg.horizon))
    ts = np.linspace(0.0, horizon, cfg.sim_points)
    settings = IntegratorSettings(cfg.rel_tol, cfg.abs_tol)

    starts = []
    if cfg.x0 is not None:
        starts.append(as_vector(cfg.x0, "x0"))
    elif scenario.default_x0 is not None:
        starts.append(as_vector(scenario.default_x0, "x0"))
    else:
        starts.append(np.ones(scenario.n))
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.random_x0):
        g = rng.standard_normal(scenario.n)
        starts.append(cfg.x0_radius * rng.random() * g / np.linalg.norm(g))

    # below the integrator's absolute tolerance the simulated norm is noise,
    # so the envelope is compared no finer than that resolution
    floor = vec_norm(np.full(scenario.n, cfg.abs_tol), kind)
    worst, tail_norm, ok, failures = 0.0, None, True, []
    for x0 in starts:
        traj = integrate_ode(scenario.rhs, x0, (0.0, horizon), settings, t_eval=ts)
        if not traj.success:
            ok = False
            failures.append(traj.message)
        norms = np.array([vec_norm(x, kind) for x in traj.states])
        B = envelope_bound(scenario, kind, traj.ts, vec_norm(x0, kind), cfg.envelope_step)
        ratio = norms / np.maximum(B, floor)
        worst = max(worst, float(np.max(ratio)))
        if tail_norm is None:
            tail_norm = float(norms[-1])
    passed = ok and worst <= 1.0 + cfg.envelope_slack
    out = {"performed": True, "max_envelope_ratio": _safe(worst), "tail_norm": tail_norm,
           "horizon": horizon, "initial_states": len(starts), "resolution_floor": floor,
           "passed": passed}
    if failures:
        out["integrator_messages"] = failures
    return out


def certify(scenario: Scenario, kinds: Sequence[NormKind] = (NormKind.TWO,),
            config: CertifyConfig | None = None) -> list[CertificateReport]:
    """Run A1-A3 for each norm kind, optionally with a simulation cross-check.

    The report for a kind is ``certified-on-horizon`` iff all three checks
    hold, ``not-certified`` if any fails, ``inconclusive`` otherwise.  A
    failed simulation cross-check (trajectory above ``B(t) (1 + slack)`` or
    an integrator failure) downgrades a certified report to inconclusive.
    """
    cfg = config or CertifyConfig()
    T = float(cfg.horizon)
    mf = scenario.matrix_function
    if math.isfinite(mf.t_max):
        T = min(T, mf.t_max)
    reports = []
    for kind in kinds:
        a1 = check_A1(mf, kind, T, cfg.divergence_threshold, cfg.steps)
        a2 = check_A2(mf, kind, ((1.0 - cfg.tail_fraction) * T, T), cfg.a2_samples)
        a3 = check_A3(scenario.perturbation, mf, kind, np.linspace(0.0, T, cfg.a3_points),
                      cfg.a3_slope_max, cfg.a3_delta)
        verdicts = [a1, a2, a3]
        overall = overall_verdict(verdicts)
        sim = None
        if cfg.simulate:
            try:
                sim = _simulate_against_envelope(scenario, kind, cfg)
            except _NUMERIC_ERRORS as exc:
                sim = {"performed": True, "max_envelope_ratio": None, "tail_norm": None,
                       "passed": False, "error": str(exc)}
            if overall == CERTIFIED and not sim["passed"]:
                overall = INCONCLUSIVE
        reports.append(CertificateReport(scenario.name, str(kind), verdicts, overall, sim))
    return reports
