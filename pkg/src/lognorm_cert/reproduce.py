"""End-to-end reproductions of the worked examples, as expected-vs-computed checks."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .certify import CERTIFIED, FAILS, NOT_CERTIFIED, CertifyConfig, certify, envelope_bound
from .funclass import (BOUNDED_AWAY, TENDS_TO_ZERO, NeedleFunction, needle_peak, oscillatory,
                       probe_AD, probe_D, probe_V)
from .linalg import NormKind, log_norm, lyapunov_norm, mu_weighted_hurwitz
from .odesim import IntegratorSettings, fundamental_matrix, integrate_ode, write_trajectory_csv
from .system_model import builtin_scenario

__all__ = ["Check", "ITEMS", "run", "A1", "A2", "A3", "EXAMPLE1_VALUES"]

A1 = [[-11.0, 10.0], [2.0, -3.0]]
A2 = [[-11.0, 2.0], [10.0, -3.0]]
A3 = [[-1.0, 3.0], [-3.0, -2.0]]

# (matrix name, kind) -> published value
EXAMPLE1_VALUES = {
    ("A1", "1"): 7.0, ("A1", "2"): 0.2111, ("A1", "inf"): -1.0,
    ("A2", "1"): -1.0, ("A2", "2"): 0.2111, ("A2", "inf"): 7.0,
    ("A3", "1"): 2.0, ("A3", "2"): -1.0, ("A3", "inf"): 2.0,
}


@dataclass
class Check:
    name: str
    expected: object
    computed: object
    tolerance: float | None
    passed: bool


def _close(name, expected, computed, tol) -> Check:
    return Check(name, expected, float(computed), tol, bool(abs(computed - expected) <= tol))


def _is(name, expected, computed) -> Check:
    return Check(name, expected, computed, None, computed == expected)


def example1(out_dir=None) -> list[Check]:
    mats = {"A1": A1, "A2": A2, "A3": A3}
    checks = [_close(f"mu_{k}[{m}]", v, log_norm(mats[m], NormKind.parse(k)), 5e-5)
              for (m, k), v in EXAMPLE1_VALUES.items()]
    for m, A in mats.items():
        mu_h = mu_weighted_hurwitz(A)
        checks.append(Check(f"mu_H[{m}] < 0", "negative", mu_h, None, mu_h < 0))
        checks.append(_close(f"mu_H[{m}] two routes", mu_h, log_norm(A, lyapunov_norm(A)), 1e-9))
    return checks


def example2(out_dir=None) -> list[Check]:
    sc = builtin_scenario("example2", {"beta": "t4"})
    cfg = CertifyConfig(horizon=20.0)
    reports = {r.kind: r for r in certify(sc, [NormKind.TWO, NormKind.ONE, NormKind.INF], cfg)}
    two = reports["2"]
    checks = [
        _is("certify l2", CERTIFIED, two.overall),
        _close("int_0^20 mu_2 = -220", -220.0, two.assumptions[0].parameters["integral_at_T"], 220e-6),
        Check("A3 trend slope < 0", "negative", two.assumptions[2].parameters["trend_slope"], None,
              two.assumptions[2].parameters["trend_slope"] < 0),
        _is("certify l1", NOT_CERTIFIED, reports["1"].overall),
        _is("A1 l1", FAILS, reports["1"].assumptions[0].verdict),
        _is("certify linf", NOT_CERTIFIED, reports["inf"].overall),
        _is("A1 linf", FAILS, reports["inf"].assumptions[0].verdict),
    ]
    ts = np.linspace(0.0, 5.0, 501)
    x0 = np.array([-5.0, 2.0])
    traj = integrate_ode(sc.rhs, x0, (0.0, 5.0), IntegratorSettings(1e-9, 1e-12), t_eval=ts)
    norms = np.linalg.norm(traj.states, axis=1)
    B = envelope_bound(sc, NormKind.TWO, ts, float(np.linalg.norm(x0)))
    checks.append(Check("||x(t)|| <= B(t)(1+1e-3)", True, float(np.max(norms / B)), 1e-3,
                        bool(np.all(norms <= B * (1 + 1e-3)))))
    checks.append(Check("||x(5)||_2 < 1.5", True, float(norms[-1]), None, bool(norms[-1] < 1.5)))
    if out_dir:
        write_trajectory_csv(os.path.join(out_dir, "example2_trajectory.csv"), ts, traj.states,
                             {"envelope": B})
    return checks


def example3(out_dir=None) -> list[Check]:
    sc = builtin_scenario("example3", {"lam": 1.0})
    ts = np.linspace(0.0, 4.0, 401)
    traj = integrate_ode(sc.rhs, [0.0, 0.0], (0.0, 4.0), IntegratorSettings(1e-9, 1e-12), t_eval=ts)
    exact = 1.0 - np.exp(-ts)
    gap = float(np.max(np.abs(np.linalg.norm(traj.states, axis=1) - exact)))
    checks = [Check("| ||x*(t)|| - (1 - e^-t) | <= 1e-3", 0.0, gap, 1e-3, gap <= 1e-3)]

    phi = sc.oracles["phi"]
    grid = np.linspace(0.0, 4.0, 41)
    fm = fundamental_matrix(sc.matrix_function, grid, IntegratorSettings(1e-10, 1e-12))
    P0_inv = np.linalg.inv(phi(0.0))
    worst = max(float(np.max(np.abs(fm.phi[i] - phi(t) @ P0_inv))) for i, t in enumerate(grid))
    checks.append(Check("Phi vs closed form (entrywise)", 0.0, worst, 1e-4, worst <= 1e-4))

    report = certify(sc, [NormKind.TWO], CertifyConfig(horizon=20.0))[0]
    checks.append(_is("A3 fails", FAILS, report.assumptions[2].verdict))
    checks.append(_is("certify l2", NOT_CERTIFIED, report.overall))

    B = envelope_bound(sc, NormKind.TWO, ts, 0.0)
    tight = float(np.max(np.abs(B - exact)))
    checks.append(Check("envelope tight: |B(t) - (1 - e^-t)| <= 1e-6", 0.0, tight, 1e-6, tight <= 1e-6))
    if out_dir:
        write_trajectory_csv(os.path.join(out_dir, "example3_trajectory.csv"), ts, traj.states,
                             {"envelope": B})
    return checks


def lemma2(out_dir=None) -> list[Check]:
    h = oscillatory()
    starts = np.linspace(0.0, 4.0, 50)
    ad = probe_AD(h, starts)
    worst_ad = float(np.max(np.abs(ad.values - 1.0)))
    checks = [Check("oscillatory: int_t^{t+1} ||h|| = 1", 1.0, worst_ad, 1e-6, worst_ad <= 1e-6)]
    d = probe_D(h, starts)
    bound = math.sqrt(32.0) * np.exp(-starts)
    checks.append(Check("oscillatory: sup_eta ||int h|| <= sqrt(32) e^-t", True,
                        float(np.max(d.values / bound)), None, bool(np.all(d.values <= bound))))
    grid = np.arange(0.0, 9.0)
    checks.append(_is("oscillatory in D", TENDS_TO_ZERO, probe_D(h, grid).verdict))
    checks.append(_is("oscillatory not in AD", BOUNDED_AWAY, probe_AD(h, grid).verdict))

    needle = NeedleFunction(2)
    windows = np.arange(0.0, 1000.0)
    nad = probe_AD(needle, windows)
    exact = [1.0 / (2 * n) for n in range(1, 51)]
    checks.append(Check("needle: window integral = 1/(2n), n <= 50", True, None, 0.0,
                        all(nad.values[n - 1] == exact[n - 1] for n in range(1, 51))))
    peaks = [needle_peak(n) for n in range(1, 201)]
    nv = probe_V(needle, peaks)
    checks.append(Check("needle: value at apexes = 1", True, None, 0.0, bool(np.all(nv.values == 1.0))))
    checks.append(_is("needle in AD", TENDS_TO_ZERO, nad.verdict))
    checks.append(_is("needle not in V", BOUNDED_AWAY, nv.verdict))
    if out_dir:
        for name, probe in (("oscillatory_AD", ad), ("oscillatory_D", d),
                            ("needle_AD", nad), ("needle_V", nv)):
            probe.write(os.path.join(out_dir, f"probe_{name}.csv"),
                        os.path.join(out_dir, f"probe_{name}.json"))
    return checks


ITEMS: dict[str, Callable] = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "lemma2": lemma2,
}


def run(item: str, out_dir=None) -> list[Check]:
    try:
        fn = ITEMS[item]
    except KeyError:
        raise ValueError(f"unknown item {item!r}; expected one of {', '.join(ITEMS)}") from None
    return fn(out_dir)


def as_records(checks: list[Check]) -> list[dict]:
    return [asdict(c) for c in checks]
