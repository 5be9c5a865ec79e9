"""Command line: solve, verify, transform, recover and bench.

Exit codes: 0 solved/certified, 1 not optimal, 2 infeasible, 3 malformed input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import applications as apps
from .constants import EPS_FEAS, TOL_CERT
from .errors import CertificateFailure, InfeasibleInstance, InfeasiblePoint, RapError
from .instances import dumps, instance_from_dict, instance_to_dict, random_instance
from .model import Domain, Kind, ObjectiveSpec, check_feasibility, verify_condition1
from .reduction import SOLVERS, solve_quadratic, solve_separable

EXIT_OK, EXIT_NOT_OPTIMAL, EXIT_INFEASIBLE, EXIT_MALFORMED = 0, 1, 2, 3


def _read_json(path: str):
    if path == "-":
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _read_vector(path: str) -> np.ndarray:
    raw = _read_json(path)
    if isinstance(raw, dict):
        raw = raw["x"]
    return np.asarray(raw, dtype=float)


def _fail(exc: Exception) -> int:
    print(str(exc), file=sys.stderr)
    if isinstance(exc, (InfeasibleInstance, InfeasiblePoint)):
        for k, v in getattr(exc, "details", {}).items():
            print(f"  {k}: {v}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if isinstance(exc, CertificateFailure):
        return EXIT_NOT_OPTIMAL
    return EXIT_MALFORMED


def cmd_solve(args) -> int:
    obj, cons, dom = instance_from_dict(_read_json(args.path))
    t0 = time.perf_counter()
    sol = solve_separable(obj, cons, dom, args.solver, args.tol)
    wall = (time.perf_counter() - t0) * 1e3
    out = {"x": sol.x.tolist(), "objective": sol.objective_value, "lambda": sol.lam,
           "certified": sol.certified, "tight_sets": [j + 1 for j in sol.tight_sets],
           "solver": sol.solver, "wall_ms": wall}
    print(dumps(out))
    return EXIT_OK if sol.certified else EXIT_NOT_OPTIMAL


def cmd_verify(args) -> int:
    obj, cons, dom = instance_from_dict(_read_json(args.path))
    x = _read_vector(args.solution)
    feas = check_feasibility(cons, x, EPS_FEAS)
    if not feas.feasible:
        print(dumps({"feasible": False, "violations": [
            {"what": v.what, "index": v.index + 1 if v.index >= 0 else None,
             "residual": v.residual} for v in feas.violations]}))
        return EXIT_INFEASIBLE
    cert = verify_condition1(obj, cons, x, dom, args.tol)
    report = {"feasible": True, "optimal": cert.optimal,
              "witness": None if cert.witness is None else [i + 1 for i in cert.witness],
              "margin": cert.margin, "exact_derivatives": cert.exact_derivatives}
    print(dumps(report))
    return EXIT_OK if cert.optimal else EXIT_NOT_OPTIMAL


def _build_app(name: str, d: dict) -> apps.AppProblem:
    if name == "channel":
        return apps.channel_power_to_rap(d["B"], d["c"], d["P_tot"], d.get("P_bar"))
    if name == "mse":
        return apps.mse_power_to_rap(d["w"], d["A"], d["D"], d["P_tot"], d.get("P_bar"))
    if name == "storage":
        return apps.storage_to_rap(apps.StorageSpec(**d))
    if name == "strata":
        return apps.stratified_to_rap(d["N"], d["S2"], d["R"], d.get("lo"), d.get("hi"))
    if name == "vessel":
        extra = {"fuel_exponent": d.pop("fuel_exponent")} if "fuel_exponent" in d else {}
        return apps.vessel_to_rap(apps.RouteSpec(**d), **extra)
    if name == "speed":
        extra = {"power_exponent": d.pop("power_exponent")} if "power_exponent" in d else {}
        return apps.speedscale_to_rap(apps.TaskSpec(**d), **extra)
    raise ValueError(f"unknown application {name!r}; known: {', '.join(apps.APPS)}")


def cmd_transform(args) -> int:
    prob = _build_app(args.app, dict(_read_json(args.path)))
    out = instance_to_dict(prob.objective, prob.constraints, prob.domain)
    out["recovery"] = prob.descriptor()
    print(dumps(out))
    return EXIT_OK


def cmd_recover(args) -> int:
    inst = _read_json(args.path)
    if "recovery" not in inst:
        raise ValueError("instance file carries no recovery descriptor")
    rec = inst["recovery"]
    print(dumps(apps.recover(rec["app"], rec["data"], _read_vector(args.solution))))
    return EXIT_OK


def bench_rows(kinds, sizes, seed: int, repetitions: int, solver: str = "auto",
               density: int = 10):
    """Time one solve per (kind, size, repetition) on seeded random instances.

    Certification runs after the clock stops.
    """
    for kind in kinds:
        for n in sizes:
            for rep in range(repetitions):
                rng = np.random.default_rng([seed, n, rep, list(Kind).index(Kind(kind))])
                a, b, cons = random_instance(kind, n, rng, m=max(1, n // density),
                                             prefix=True)
                t0 = time.perf_counter()
                sol = solve_quadratic(a, b, cons, Domain.CONTINUOUS, solver, certify=False)
                wall = (time.perf_counter() - t0) * 1e3
                ok = verify_condition1(ObjectiveSpec(a, b), cons, sol.x).optimal
                yield {"kind": Kind(kind).value, "n": n, "m": cons.m, "solver": sol.solver,
                       "wall_ms": round(wall, 3), "certified": ok}


def cmd_bench(args) -> int:
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    sizes = [int(float(s)) for s in args.sizes.split(",") if s.strip()]
    rows = bench_rows(kinds, sizes, args.seed, args.repetitions, args.solver)
    if args.format == "json":
        print(dumps(list(rows)))
    else:
        w = csv.DictWriter(sys.stdout, ["kind", "n", "m", "solver", "wall_ms", "certified"])
        w.writeheader()
        for r in rows:
            w.writerow(r)
            sys.stdout.flush()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rapreduce", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("path")
    s.add_argument("--solver", choices=SOLVERS, default="auto")
    s.add_argument("--tol", type=float, default=TOL_CERT)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a candidate solution")
    v.add_argument("path")
    v.add_argument("solution")
    v.add_argument("--tol", type=float, default=TOL_CERT)
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("transform", help="turn application data into an instance file")
    t.add_argument("app")
    t.add_argument("path")
    t.set_defaults(func=cmd_transform)

    r = sub.add_parser("recover", help="map a solution back to application quantities")
    r.add_argument("path", help="instance file produced by transform")
    r.add_argument("solution")
    r.set_defaults(func=cmd_recover)

    b = sub.add_parser("bench", help="time solvers on random instances")
    b.add_argument("--kinds", default="nested")
    b.add_argument("--sizes", default="1e3,1e4")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--repetitions", type=int, default=1)
    b.add_argument("--solver", choices=SOLVERS, default="auto")
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RapError as exc:
        return _fail(exc)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"MALFORMED_INPUT: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
