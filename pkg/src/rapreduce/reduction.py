"""Solving any (a,b,f)-separable instance through its quadratic counterpart.

An optimum of ``sum a_i f(x_i/a_i + b_i)`` over a laminar feasible set is
obtained by solving the same constraints with ``f(y) = y^2/2``.  The
quadratic solution is then re-certified under the requested ``f``.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from . import qbox
from .constants import TOL_CERT
from .errors import CertificateFailure, MalformedFamily, NotStrictlyConvex
from .laminar import certified_solution, solve_gbc, solve_laminar, solve_nested_fast
from .model import (
    QUADRATIC,
    ConstraintSpec,
    ConvexFunction,
    Domain,
    Kind,
    ObjectiveSpec,
    Solution,
    evaluate_objective,
    validate_instance,
    verify_condition1,
)

# ---------------------------------------------------------------------------
# catalog


def _exp(y):
    return np.exp(y)


EXP = ConvexFunction("exp", _exp, _exp, _exp, strict=True)

NEG_LOG = ConvexFunction(
    "neg_log", lambda y: -np.log(y), lambda y: -1.0 / y, lambda y: -1.0 / y,
    lo=0.0, strict=True)

RECIPROCAL = ConvexFunction(
    "reciprocal", lambda y: 1.0 / y, lambda y: -1.0 / (y * y), lambda y: -1.0 / (y * y),
    lo=0.0, strict=True)

ABS = ConvexFunction(
    "abs", np.abs,
    lambda y: np.where(y > 0, 1.0, -1.0),
    lambda y: np.where(y < 0, -1.0, 1.0),
    kinks=(0.0,))

POWER4 = ConvexFunction("power4", lambda y: y ** 4, lambda y: 4 * y ** 3,
                        lambda y: 4 * y ** 3, strict=True)


def threshold(M: float = 0.0, g: Callable | None = None,
              dg: Callable | None = None) -> ConvexFunction:
    """``0`` up to ``M`` and ``g(y)`` beyond it.

    ``g`` must be convex, non-decreasing and vanish at ``M``; the default is
    ``(y - M)^2``.  Without ``dg`` the derivatives fall back to finite
    differences and the certificate is marked inexact.
    """
    M = float(M)
    if g is None:
        def g(y):
            return (y - M) ** 2

        def dg(y):
            return 2 * (y - M)

    def value(y):
        return np.where(y > M, g(np.maximum(y, M)), 0.0)

    left = right = None
    if dg is not None:
        def left(y):
            return np.where(y > M, dg(np.maximum(y, M)), 0.0)

        def right(y):
            return np.where(y >= M, dg(np.maximum(y, M)), 0.0)

    return ConvexFunction("threshold", value, left, right, kinks=(M,), params={"M": M})


THRESHOLD = threshold()


def reciprocal_power(k: float) -> ConvexFunction:
    """``y^(-k)`` on ``y > 0``.

    This is the travel-time cost ``x * p(1/x)`` for ``p(s) = s^(k+1)``, and
    ``d * c(d/x)`` reduces to it for ``c(v) = v^k``.
    """
    k = float(k)
    if not k > 0:
        raise ValueError("exponent must be positive")
    return ConvexFunction(
        "recip_power", lambda y: y ** -k, lambda y: -k * y ** (-k - 1),
        lambda y: -k * y ** (-k - 1), lo=0.0, strict=True, params={"k": k})


def perspective(p: Callable, dp: Callable, name: str = "perspective",
                strict: bool = False) -> ConvexFunction:
    """``q(y) = y p(1/y)`` on ``y > 0`` for a convex non-decreasing ``p``."""
    def value(y):
        return y * p(1.0 / y)

    def deriv(y):
        s = 1.0 / y
        return p(s) - s * dp(s)

    return ConvexFunction(name, value, deriv, deriv, lo=0.0, strict=strict)


_CATALOG = {
    "quadratic": lambda: QUADRATIC,
    "exp": lambda: EXP,
    "neg_log": lambda: NEG_LOG,
    "reciprocal": lambda: RECIPROCAL,
    "abs": lambda: ABS,
    "power4": lambda: POWER4,
    "threshold": lambda M=0.0: threshold(M),
    "recip_power": lambda k: reciprocal_power(k),
}

CATALOG_NAMES = tuple(_CATALOG)


def catalog(name: str, **params) -> ConvexFunction:
    try:
        make = _CATALOG[name.lower()]
    except KeyError:
        raise KeyError(f"unknown function {name!r}; known: {', '.join(CATALOG_NAMES)}") from None
    return make(**params)


# ---------------------------------------------------------------------------
# solving

SOLVERS = ("auto", "breakpoint", "fixing", "laminar", "nested-fast", "gbc")


def solve_quadratic(a, b, cons: ConstraintSpec, dom: Domain = Domain.CONTINUOUS,
                    solver: str = "auto", *, certify: bool = True) -> Solution:
    """Solve ``sum x_i^2/(2a_i) + b_i x_i`` under ``cons`` with the chosen method.

    ``auto`` picks the breakpoint search for boxes, the group search for
    partitions, the prefix decomposition for chains and the general
    decomposition otherwise.
    """
    dom = Domain(dom)
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    kind = cons.kind
    if solver == "auto":
        solver = {Kind.BOX: "breakpoint", Kind.GBC: "gbc",
                  Kind.NC: "nested-fast", Kind.LC: "laminar"}[kind]
    if solver in ("breakpoint", "fixing"):
        if kind is not Kind.BOX:
            raise MalformedFamily(f"solver {solver} handles box constraints only")
        l, u = cons.effective_bounds()
        if dom is Domain.INTEGER:
            raw = qbox.solve_qbox_integer(a, b, l, u, cons.R)
            name = "integer"
        elif solver == "fixing":
            raw, name = qbox.solve_qbox_variable_fixing(a, b, l, u, cons.R), "fixing"
        else:
            raw, name = qbox.solve_qbox_continuous(a, b, l, u, cons.R), "breakpoint"
        return certified_solution(a, b, cons, dom, raw.x, raw.lam, name, certify)
    if solver == "gbc":
        return solve_gbc(a, b, cons, dom, certify=certify)
    if solver == "nested-fast":
        if kind is not Kind.NC:
            raise MalformedFamily("nested-fast needs a single chain of sets")
        return solve_nested_fast(a, b, cons, dom, certify=certify)
    return solve_laminar(a, b, cons, dom, certify=certify)


def solve_separable(obj: ObjectiveSpec, cons: ConstraintSpec,
                    dom: Domain = Domain.CONTINUOUS, solver: str = "auto",
                    tol: float = TOL_CERT) -> Solution:
    """Minimize ``sum a_i f(x_i/a_i + b_i)`` by solving the quadratic instance.

    The returned point is the quadratic optimum; its objective value is
    recomputed under ``f`` and it is certified under ``f`` before return.
    """
    dom = Domain(dom)
    validate_instance(obj, cons, dom)
    sol = solve_quadratic(obj.a, obj.b, cons, dom, solver)
    if obj.is_quadratic:
        return sol
    cert = verify_condition1(obj, cons, sol.x, dom, tol)
    if not cert.optimal:
        i, k = cert.witness
        raise CertificateFailure(
            f"quadratic optimum fails the {obj.f.name} exchange test at pair "
            f"({i + 1},{k + 1}), margin {cert.margin:.3e}",
            witness=cert.witness, margin=cert.margin, x=sol.x)
    sol.objective_value = evaluate_objective(obj, sol.x)
    sol.info["certificate"] = cert
    return sol


def check_strict_equivalence(obj_f: ObjectiveSpec, obj_fbar: ObjectiveSpec,
                             cons: ConstraintSpec, tol: float = 1e-7) -> bool:
    """Solve under two strictly convex functions and compare the optima."""
    for obj in (obj_f, obj_fbar):
        if not obj.f.strict:
            raise NotStrictlyConvex(f"{obj.f.name} is not strictly convex")
    x1 = solve_separable(obj_f, cons, Domain.CONTINUOUS).x
    x2 = solve_separable(obj_fbar, cons, Domain.CONTINUOUS).x
    return bool(np.max(np.abs(x1 - x2), initial=0.0) <= tol)


__all__ = [
    "ABS",
    "CATALOG_NAMES",
    "EXP",
    "NEG_LOG",
    "POWER4",
    "QUADRATIC",
    "RECIPROCAL",
    "SOLVERS",
    "THRESHOLD",
    "catalog",
    "check_strict_equivalence",
    "perspective",
    "reciprocal_power",
    "solve_quadratic",
    "solve_separable",
    "threshold",
]
