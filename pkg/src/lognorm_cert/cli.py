"""``lognorm-cert`` command line.

Exit codes: 0 ok / certified, 2 usage or configuration error, 3 not
certified (or a reproduction mismatch), 4 inconclusive, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from typing import Sequence

import numpy as np

from . import reproduce as repro
from .certify import CERTIFIED, INCONCLUSIVE, CertifyConfig, certify, envelope_bound
from .funclass import BUILTIN_FUNCTIONS, NeedleFunction, needle_peak, probe_AD, probe_D, probe_V
from .linalg import ConvergenceError, NormKind, NotHurwitzError, as_matrix, log_norm, lyapunov_norm, \
    mat_induced_norm, vec_norm
from .odesim import IntegratorSettings, integrate_ode, write_trajectory_csv
from .system_model import ScenarioError, load_scenario, scenario_to_dict

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CERTIFIED = 3
EXIT_INCONCLUSIVE = 4
EXIT_NUMERIC = 5

DEFAULT_OUT = "lognorm-out"
CLASSES = ("V", "AD", "D")


class UsageError(Exception):
    pass


# argument helpers ------------------------------------------------------------

def _parse_tol(text: str) -> tuple[float, float | None]:
    parts = text.split(",")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance {text!r}; expected REL[,ABS]") from None
    if len(vals) > 2 or any(not (v > 0) for v in vals):
        raise argparse.ArgumentTypeError(f"bad tolerance {text!r}; expected positive REL[,ABS]")
    return vals[0], (vals[1] if len(vals) == 2 else None)


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _kinds(text: str, allow_lyap: bool = False) -> list[str]:
    out = []
    for k in (p.strip() for p in text.split(",")):
        if k in ("1", "2", "inf") or (allow_lyap and k == "lyap"):
            out.append(k)
        else:
            raise UsageError(f"unknown norm kind {k!r}; expected 1, 2, inf" + (" or lyap" if allow_lyap else ""))
    if not out:
        raise UsageError("no norm kinds given")
    return out


def _params(items: Sequence[str] | None) -> dict:
    out = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _json_or_file(text: str, what: str):
    if os.path.isfile(text):
        with open(text) as fh:
            body = fh.read()
        try:
            return json.loads(body)
        except json.JSONDecodeError:
            try:
                return np.loadtxt(text, delimiter="," if "," in body else None, ndmin=2).tolist()
            except ValueError as exc:
                raise UsageError(f"{what}: cannot parse {text}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what}: not valid JSON and not a file: {exc}") from None


def _vector(text: str | None, n: int):
    if text is None:
        return None
    x = np.asarray(_json_or_file(text, "--x0"), dtype=float).reshape(-1)
    if x.size != n:
        raise UsageError(f"--x0 has {x.size} entries, scenario dimension is {n}")
    return x


def _out_dir(args) -> str:
    path = os.environ.get("LOGNORM_OUT") or args.out
    os.makedirs(path, exist_ok=True)
    return path


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "scenario"


def _settings(args) -> IntegratorSettings:
    rel, abs_ = args.tol if args.tol else (1e-9, None)
    return IntegratorSettings(rel, abs_ if abs_ is not None else rel * 1e-3)


def _write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _g(x) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def _load(args):
    sc = load_scenario(args.scenario, _params(args.param))
    if args.dump_scenario:
        _write_json(args.dump_scenario, scenario_to_dict(sc))
    return sc


# commands --------------------------------------------------------------------

def cmd_mu(args) -> int:
    A = as_matrix(_json_or_file(args.matrix, "--matrix"), "matrix")
    rows = []
    for k in _kinds(args.kinds, allow_lyap=True):
        kind = lyapunov_norm(A) if k == "lyap" else NormKind.parse(k)
        rows.append({"kind": k, "induced_norm": mat_induced_norm(A, kind), "log_norm": log_norm(A, kind)})
    if args.json:
        print(json.dumps({"matrix": A.tolist(), "results": rows}, indent=2, sort_keys=True))
    else:
        print(f"{'kind':<6}{'||A||':>14}{'mu[A]':>14}")
        for r in rows:
            print(f"{r['kind']:<6}{_g(r['induced_norm']):>14}{_g(r['log_norm']):>14}")
    return EXIT_OK


def cmd_certify(args) -> int:
    sc = _load(args)
    kinds = [NormKind.parse(k) for k in _kinds(args.kinds)]
    rel, abs_ = args.tol if args.tol else (1e-9, 1e-12)
    cfg = CertifyConfig(
        horizon=args.horizon or 20.0,
        simulate=args.simulate,
        x0=None if args.x0 is None else tuple(_vector(args.x0, sc.n)),
        random_x0=args.random_x0,
        rel_tol=rel,
        abs_tol=abs_ if abs_ is not None else rel * 1e-3,
        seed=args.seed,
    )
    out = _out_dir(args)
    reports = certify(sc, kinds, cfg)
    for rep in reports:
        for v in rep.assumptions:
            v.write_csv(os.path.join(out, _slug(rep.evidence_ref(v))))
        _write_json(os.path.join(out, _slug(f"{rep.scenario}_{rep.kind}_certificate.json")), rep.to_dict())
    summary = [rep.to_dict() for rep in reports]
    _write_json(os.path.join(out, _slug(f"{sc.name}_certificate.json")), summary)

    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for rep in reports:
            print(f"{rep.scenario} [{rep.kind}]: {rep.overall}")
            for v in rep.assumptions:
                print(f"  {v.id}: {v.verdict}" + (f" ({v.message})" if v.message else ""))
            if rep.simulation:
                s = rep.simulation
                print(f"  simulation: passed={s.get('passed')} max ratio={_g(s.get('max_envelope_ratio'))}")
    overall = [r.overall for r in reports]
    if CERTIFIED in overall:
        return EXIT_OK
    if INCONCLUSIVE in overall:
        return EXIT_INCONCLUSIVE
    return EXIT_NOT_CERTIFIED


def cmd_simulate(args) -> int:
    sc = _load(args)
    kind = NormKind.parse(args.kind)
    x0 = _vector(args.x0, sc.n)
    if x0 is None:
        x0 = np.asarray(sc.default_x0 if sc.default_x0 is not None else np.ones(sc.n), dtype=float)
    tf = args.tf if args.tf is not None else (args.horizon or sc.sim_horizon or 20.0)
    if tf < 0:
        raise UsageError("--tf must be >= 0")
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if math.isfinite(sc.matrix_function.t_max) and tf > sc.matrix_function.t_max:
        raise UsageError(f"--tf {tf} is beyond the scenario's last sample time {sc.matrix_function.t_max}")
    if args.envelope and (sc.perturbation is not None and not sc.perturbation.has_envelope):
        raise UsageError("this scenario's perturbation has no envelope; --envelope unavailable")

    ts = np.array([0.0]) if tf == 0 else np.linspace(0.0, tf, max(args.points, 2))
    traj = integrate_ode(sc.rhs, x0, (0.0, tf), _settings(args), t_eval=ts)
    extra = {}
    if args.envelope and traj.ts.size:
        extra["envelope"] = envelope_bound(sc, kind, traj.ts, vec_norm(x0, kind))
    out = _out_dir(args)
    stem = _slug(f"{sc.name}_trajectory")
    write_trajectory_csv(os.path.join(out, stem + ".csv"), traj.ts, traj.states, extra)
    meta = {"scenario": sc.name, "x0": x0.tolist(), "tf": tf, "complete": traj.success,
            "message": traj.message, "rows": int(traj.ts.size), "accepted_steps": traj.accepted,
            "rejected_steps": traj.rejected, "kind": str(kind)}
    _write_json(os.path.join(out, stem + ".json"), meta)

    final = traj.states[-1] if traj.ts.size else x0
    if args.json:
        print(json.dumps({**meta, "final_state": final.tolist(),
                          "final_norm": vec_norm(final, kind)}, indent=2, sort_keys=True))
    else:
        print(f"{sc.name}: t={_g(float(traj.ts[-1]) if traj.ts.size else 0.0)} "
              f"||x||_{kind}={_g(vec_norm(final, kind))} rows={traj.ts.size}")
    if not traj.success:
        print(f"integrator failure: {traj.message} (partial CSV written)", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _samples_function(path):
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    if data.shape[1] < 2 or data.shape[0] < 2:
        raise UsageError("--samples needs columns t,h1[,h2,...] and at least two rows")
    ts, hs = data[:, 0], data[:, 1:]
    if np.any(np.diff(ts) <= 0) or ts[0] < 0:
        raise UsageError("--samples times must be nonnegative and strictly increasing")

    def h(t):
        return np.array([np.interp(t, ts, hs[:, j]) for j in range(hs.shape[1])])
    return h, ts


def _default_grids(name, h, horizon, sample_ts):
    """Per-class window starts for a named function."""
    if sample_ts is not None:
        starts = np.arange(sample_ts[0], sample_ts[-1] - 1.0 + 1e-12, 1.0)
        return {"V": sample_ts, "AD": starts, "D": starts}
    if isinstance(h, NeedleFunction):
        horizon = horizon or 1000.0
        return {"V": np.array([needle_peak(n) for n in range(1, int(horizon) + 1)]),
                "AD": np.arange(0.0, float(int(horizon))), "D": np.arange(0.0, float(int(horizon)))}
    horizon = horizon or {"oscillatory": 8.0, "example2-perturbation": 20.0}.get(name, 10.0)
    windows = np.arange(0.0, math.floor(horizon) + 1.0)
    return {"V": np.linspace(0.0, horizon, int(4 * horizon) + 1), "AD": windows, "D": windows}


def cmd_classify(args) -> int:
    if (args.fn is None) == (args.samples is None):
        raise UsageError("give exactly one of --fn or --samples")
    classes = [c.strip().upper() for c in args.classes.split(",")]
    bad = [c for c in classes if c not in CLASSES]
    if bad:
        raise UsageError(f"unknown classes {bad}; expected V, AD, D")
    kind = NormKind.parse(args.kind)
    if args.fn is not None:
        if args.fn not in BUILTIN_FUNCTIONS:
            raise UsageError(f"unknown function {args.fn!r}; expected one of {', '.join(BUILTIN_FUNCTIONS)}")
        params = _params(args.param)
        h = BUILTIN_FUNCTIONS[args.fn](**params) if params else BUILTIN_FUNCTIONS[args.fn]()
        name, sample_ts = args.fn, None
    else:
        h, sample_ts = _samples_function(args.samples)
        name = _slug(os.path.splitext(os.path.basename(args.samples))[0])
    grids = _default_grids(name, h, args.horizon, sample_ts)
    probes = {"V": probe_V, "AD": probe_AD, "D": probe_D}
    out = _out_dir(args)
    results = {}
    for c in classes:
        if grids[c].size == 0:
            raise UsageError(f"sample range too short for class {c} (needs a unit window)")
        p = probes[c](h, grids[c], kind=kind)
        stem = os.path.join(out, _slug(f"classify_{name}_{c}"))
        p.write(stem + ".csv", stem + ".json")
        results[c] = p.sidecar()
    _write_json(os.path.join(out, _slug(f"classify_{name}.json")), {"function": name, "results": results})
    if args.json:
        print(json.dumps({"function": name, "results": results}, indent=2, sort_keys=True))
    else:
        for c in classes:
            print(f"{c}: {results[c]['verdict']} (slope={_g(results[c]['trend_slope'])})")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out = os.path.join(_out_dir(args), f"reproduce_{args.item}")
    os.makedirs(out, exist_ok=True)
    error = None
    try:
        checks = repro.run(args.item, out)
    except (ArithmeticError, ValueError, FloatingPointError) as exc:
        checks, error = [], str(exc)
    records = repro.as_records(checks)
    passed = error is None and all(c.passed for c in checks)
    _write_json(os.path.join(out, "summary.json"),
                {"item": args.item, "passed": passed, "error": error, "checks": records})
    if args.json:
        print(json.dumps({"item": args.item, "passed": passed, "error": error, "checks": records},
                         indent=2, sort_keys=True, default=str))
    else:
        for c in checks:
            exp = c.expected if isinstance(c.expected, str) else _g(c.expected) if isinstance(c.expected, float) else c.expected
            comp = _g(c.computed) if isinstance(c.computed, float) else c.computed
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: expected {exp}, computed {comp}")
        if error:
            print(f"ERROR  {error}")
        print(f"{args.item}: {'reproduced' if passed else 'MISMATCH'}")
    if error is not None:
        return EXIT_NUMERIC
    return EXIT_OK if passed else EXIT_NOT_CERTIFIED


# parser ----------------------------------------------------------------------

def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = p.add_argument_group("global options")
    g.add_argument("--out", metavar="DIR", default=d(DEFAULT_OUT),
                   help=f"output directory (default {DEFAULT_OUT}; env LOGNORM_OUT overrides)")
    g.add_argument("--tol", metavar="REL[,ABS]", type=_parse_tol, default=d(None),
                   help="integrator tolerances (default 1e-9,1e-12)")
    g.add_argument("--horizon", metavar="T", type=_positive, default=d(None),
                   help="certification horizon (default 20) or probe range for classify")
    g.add_argument("--seed", metavar="N", type=int, default=d(0), help="seed for random initial states (default 0)")
    g.add_argument("--json", action="store_true", default=d(False), help="print machine-readable JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lognorm-cert",
                                     description="Logarithmic-norm stability certificates for x' = A(t)x + w(x,t).")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _add_globals(p, suppress=True)
        return p

    p = add("mu", "print induced and logarithmic norms of a constant matrix")
    p.add_argument("--matrix", required=True, help="inline JSON (e.g. \"[[-1,3],[-3,-2]]\") or a file")
    p.add_argument("--kinds", default="1,2,inf", help="comma list of 1, 2, inf, lyap (default 1,2,inf)")
    p.set_defaults(func=cmd_mu)

    def scenario_args(p):
        p.add_argument("--scenario", required=True, help="builtin name or scenario JSON file")
        p.add_argument("--param", action="append", metavar="KEY=VALUE", help="scenario parameter (repeatable)")
        p.add_argument("--dump-scenario", metavar="PATH", help="write the resolved scenario JSON here")

    p = add("certify", "check the three certificate assumptions per norm kind")
    scenario_args(p)
    p.add_argument("--kinds", default="2", help="comma list of 1, 2, inf (default 2)")
    p.add_argument("--simulate", action="store_true", help="cross-check the envelope against simulation")
    p.add_argument("--x0", help="initial state for --simulate (JSON list)")
    p.add_argument("--random-x0", type=int, default=0, metavar="N", help="extra random initial states")
    p.set_defaults(func=cmd_certify)

    p = add("simulate", "integrate the perturbed system and write a trajectory CSV")
    scenario_args(p)
    p.add_argument("--x0", help="initial state (JSON list); default is the scenario's")
    p.add_argument("--tf", type=float, help="final time (default: scenario horizon)")
    p.add_argument("--points", type=int, default=201, help="output samples (default 201)")
    p.add_argument("--envelope", action="store_true", help="append the envelope bound B(t)")
    p.add_argument("--kind", default="2", choices=["1", "2", "inf"], help="norm for the envelope (default 2)")
    p.set_defaults(func=cmd_simulate)

    p = add("classify", "probe a function for membership in V, AD and D")
    p.add_argument("--fn", help=f"builtin function: {', '.join(BUILTIN_FUNCTIONS)}")
    p.add_argument("--samples", help="CSV with columns t,h1,...,hn (linear interpolation)")
    p.add_argument("--classes", default="V,AD,D", help="comma list of V, AD, D (default all)")
    p.add_argument("--kind", default="2", choices=["1", "2", "inf"], help="vector norm (default 2)")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="function parameter, e.g. lam=2")
    p.set_defaults(func=cmd_classify)

    p = add("reproduce", "rerun a worked example and compare against the published values")
    p.add_argument("item", choices=sorted(repro.ITEMS))
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ScenarioError, NotHurwitzError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
