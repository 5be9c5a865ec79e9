"""Instances, objective evaluation, feasibility and the exchange certificate."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import structure
from .constants import EPS_FEAS, FD_STEP, TOL_CERT
from .errors import (
    DimensionMismatch,
    DomainViolation,
    InfeasibleInstance,
    InfeasiblePoint,
    MalformedFamily,
    NonpositiveScale,
)


class Kind(str, Enum):
    BOX = "box"
    GBC = "gbc"
    NC = "nested"
    LC = "laminar"


class Domain(str, Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"


# ---------------------------------------------------------------------------
# convex functions


@dataclass(frozen=True, eq=False)
class ConvexFunction:
    """A convex function of one variable with its one-sided derivatives.

    ``left``/``right`` may be omitted, in which case derivatives come from
    finite differences and ``certifying`` is False.  ``lo``/``hi`` describe
    the interval on which the function is finite; ``kinks`` lists points
    where the finite-difference fallback must stay one-sided.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    left: Callable[[np.ndarray], np.ndarray] | None = None
    right: Callable[[np.ndarray], np.ndarray] | None = None
    lo: float = -math.inf
    hi: float = math.inf
    lo_open: bool = True
    hi_open: bool = True
    strict: bool = False
    kinks: tuple[float, ...] = ()
    params: dict = field(default_factory=dict)

    @property
    def certifying(self) -> bool:
        return self.left is not None and self.right is not None

    def eval(self, y):
        return self.value(np.asarray(y, dtype=float))

    def _fd(self, y, side: int):
        y = np.asarray(y, dtype=float)
        h = FD_STEP
        central = (self.value(y + h) - self.value(y - h)) / (2 * h)
        if not self.kinks:
            return central
        near = np.zeros(y.shape, dtype=bool)
        for k in self.kinks:
            near |= np.abs(y - k) < h
        if side < 0:
            one = (self.value(y) - self.value(y - h)) / h
        else:
            one = (self.value(y + h) - self.value(y)) / h
        return np.where(near, one, central)

    def left_deriv(self, y):
        if self.left is None:
            return self._fd(y, -1)
        return self.left(np.asarray(y, dtype=float))

    def right_deriv(self, y):
        if self.right is None:
            return self._fd(y, +1)
        return self.right(np.asarray(y, dtype=float))

    def in_domain(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        ok_lo = (y > self.lo) if self.lo_open else (y >= self.lo)
        ok_hi = (y < self.hi) if self.hi_open else (y <= self.hi)
        return ok_lo & ok_hi & ~np.isnan(y)

    def covers(self, lo, hi) -> np.ndarray:
        """Whether each closed interval ``[lo, hi]`` lies inside the domain."""
        return self.in_domain(lo) & self.in_domain(hi)


def _half_square(y):
    return 0.5 * y * y


def _identity(y):
    return np.array(y, dtype=float)


QUADRATIC = ConvexFunction("quadratic", _half_square, _identity, _identity, strict=True)


# ---------------------------------------------------------------------------
# objective


class ObjectiveSpec:
    """Separable objective ``sum_i a_i f(x_i / a_i + b_i)``.

    With ``f`` the quadratic marker the constant-free form
    ``x_i^2 / (2 a_i) + b_i x_i`` is used for values.
    """

    def __init__(self, a, b, f: ConvexFunction = QUADRATIC):
        self.a = np.asarray(a, dtype=float).ravel()
        self.b = np.asarray(b, dtype=float).ravel()
        self.f = f

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def is_quadratic(self) -> bool:
        return self.f is QUADRATIC

    def with_function(self, f: ConvexFunction) -> ObjectiveSpec:
        return ObjectiveSpec(self.a, self.b, f)

    def transform(self, x, idx=None):
        a, b = (self.a, self.b) if idx is None else (self.a[idx], self.b[idx])
        return np.asarray(x, dtype=float) / a + b

    def terms(self, x, idx=None) -> np.ndarray:
        """Per-coordinate cost ``phi_i(x_i)``."""
        a, b = (self.a, self.b) if idx is None else (self.a[idx], self.b[idx])
        x = np.asarray(x, dtype=float)
        if self.is_quadratic:
            return x * x / (2 * a) + b * x
        return a * self.f.eval(x / a + b)

    def left(self, x, idx=None) -> np.ndarray:
        return self.f.left_deriv(self.transform(x, idx))

    def right(self, x, idx=None) -> np.ndarray:
        return self.f.right_deriv(self.transform(x, idx))

    def __repr__(self) -> str:
        return f"ObjectiveSpec(n={self.n}, f={self.f.name})"


# ---------------------------------------------------------------------------
# constraints


def _vec(v, n: int, fill: float, what: str) -> np.ndarray:
    if v is None:
        return np.full(n, fill, dtype=float)
    arr = np.asarray(v, dtype=float).ravel()
    if arr.shape == (1,) and n != 1:
        arr = np.full(n, arr[0])
    if len(arr) != n:
        raise DimensionMismatch(f"{what} has length {len(arr)}, expected {n}")
    return arr


class ConstraintSpec:
    """Resource total ``R`` plus box bounds and an optional family of sets.

    ``sets`` holds 0-based index arrays.  Nested chains whose sets are
    prefixes of the index order may instead be given by ``prefix_sizes``,
    which avoids materializing the sets for long chains.
    """

    def __init__(self, n: int, R: float, kind: Kind = Kind.BOX, l=None, u=None,
                 sets: Sequence[Sequence[int]] | None = None, L=None, U=None,
                 prefix_sizes=None):
        self.n = int(n)
        self.R = float(R)
        self.kind = Kind(kind)
        self.l = _vec(l, self.n, -math.inf, "l")
        self.u = _vec(u, self.n, math.inf, "u")
        self.prefix_sizes = None
        self._sets = None
        if prefix_sizes is not None:
            ps = np.asarray(prefix_sizes, dtype=np.int64).ravel()
            if np.any(np.diff(ps) <= 0) or (len(ps) and (ps[0] < 1 or ps[-1] > self.n)):
                raise MalformedFamily("prefix sizes must increase strictly within 1..n")
            self.prefix_sizes = ps
            m = len(ps)
        else:
            clean = []
            for j, S in enumerate(sets or ()):
                arr = np.asarray(list(S), dtype=np.int64)
                if arr.size == 0:
                    raise MalformedFamily(f"set {j + 1} is empty")
                if arr.min() < 0 or arr.max() >= self.n:
                    raise MalformedFamily(f"set {j + 1} has an index outside 1..{self.n}")
                arr = np.sort(arr)
                if np.any(np.diff(arr) == 0):
                    raise MalformedFamily(f"set {j + 1} repeats an index")
                clean.append(arr)
            self._sets = tuple(clean)
            m = len(clean)
        self.L = _vec(L, m, -math.inf, "L")
        self.U = _vec(U, m, math.inf, "U")
        self._tree = None

    # constructors -----------------------------------------------------

    @classmethod
    def box(cls, l, u, R) -> ConstraintSpec:
        l = np.asarray(l, dtype=float)
        return cls(len(l), R, Kind.BOX, l, u)

    @classmethod
    def gbc(cls, l, u, groups, L, U, R) -> ConstraintSpec:
        l = np.asarray(l, dtype=float)
        return cls(len(l), R, Kind.GBC, l, u, groups, L, U)

    @classmethod
    def nested(cls, l, u, chain, L, U, R) -> ConstraintSpec:
        l = np.asarray(l, dtype=float)
        return cls(len(l), R, Kind.NC, l, u, chain, L, U)

    @classmethod
    def nested_prefix(cls, l, u, sizes, L, U, R) -> ConstraintSpec:
        l = np.asarray(l, dtype=float)
        return cls(len(l), R, Kind.NC, l, u, L=L, U=U, prefix_sizes=sizes)

    @classmethod
    def laminar(cls, n, sets, L, U, R, l=None, u=None) -> ConstraintSpec:
        return cls(n, R, Kind.LC, l, u, sets, L, U)

    # accessors --------------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.L)

    @property
    def sets(self) -> tuple[np.ndarray, ...]:
        if self._sets is None:
            self._sets = tuple(np.arange(k) for k in self.prefix_sizes)
        return self._sets

    def set_size(self, j: int) -> int:
        if self.prefix_sizes is not None:
            return int(self.prefix_sizes[j])
        return len(self._sets[j])

    def tree(self) -> structure.LaminarTree:
        if self._tree is None:
            self._tree = structure.build_tree(self)
        return self._tree

    def set_sums(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.prefix_sizes is not None:
            return np.cumsum(x)[self.prefix_sizes - 1] if self.m else np.zeros(0)
        t = self.tree()
        sums = t.node_sums(x)
        return sums[t.node_of_set]

    def effective_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Box bounds intersected with the bounds of singleton sets."""
        l, u = self.l.copy(), self.u.copy()
        if self.prefix_sizes is not None:
            if self.m and self.prefix_sizes[0] == 1:
                l[0] = max(l[0], self.L[0])
                u[0] = min(u[0], self.U[0])
            return l, u
        for j, S in enumerate(self.sets):
            if len(S) == 1:
                i = int(S[0])
                l[i] = max(l[i], self.L[j])
                u[i] = min(u[i], self.U[j])
        return l, u

    def tight_sets(self, x, tol: float = EPS_FEAS) -> tuple[int, ...]:
        s = self.set_sums(x)
        hit = (np.abs(s - self.L) <= tol) | (np.abs(s - self.U) <= tol)
        return tuple(int(j) for j in np.flatnonzero(hit))

    def __repr__(self) -> str:
        return f"ConstraintSpec(kind={self.kind.value}, n={self.n}, m={self.m}, R={self.R})"


# ---------------------------------------------------------------------------
# results


@dataclass
class Solution:
    x: np.ndarray
    objective_value: float
    lam: float | None = None
    tight_sets: tuple[int, ...] = ()
    certified: bool = False
    solver: str = ""
    info: dict = field(default_factory=dict)


@dataclass
class ExchangeGraph:
    pairs: list[tuple[int, int]]
    eps_max: dict[tuple[int, int], float]

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.eps_max

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class Violation:
    what: str          # "resource", "lower", "upper" or "set"
    index: int         # variable or set index (0-based); -1 for the resource
    residual: float    # positive above an upper bound, negative below a lower one


@dataclass
class FeasibilityReport:
    feasible: bool
    violations: list[Violation]

    def residual(self, what: str, index: int = -1) -> float:
        for v in self.violations:
            if v.what == what and v.index == index:
                return v.residual
        return 0.0


@dataclass
class Certificate:
    optimal: bool
    witness: tuple[int, int] | None = None
    margin: float = 0.0
    exact_derivatives: bool = True


@dataclass
class Instance:
    objective: ObjectiveSpec
    constraints: ConstraintSpec
    domain: Domain
    tree: structure.LaminarTree


# ---------------------------------------------------------------------------
# operations


def _check_structure(cons: ConstraintSpec, tree: structure.LaminarTree) -> None:
    kind = cons.kind
    if kind is Kind.BOX and cons.m:
        raise MalformedFamily("box constraints take no sets")
    if kind is Kind.GBC:
        if any(tree.parent[v] != 0 for v in range(1, tree.num_nodes)) or len(tree.direct[0]):
            raise MalformedFamily("groups must partition the index set")
    if kind is Kind.NC:
        if any(len(ch) > 1 for ch in tree.children):
            raise MalformedFamily("nested sets must form a single chain")


def _is_integral(v: np.ndarray) -> bool:
    fin = v[np.isfinite(v)]
    return bool(np.all(fin == np.round(fin)))


def validate_instance(obj: ObjectiveSpec, cons: ConstraintSpec,
                      dom: Domain = Domain.CONTINUOUS) -> Instance:
    """Check shapes, scales, family structure, domain coverage and feasibility.

    Returns the instance together with its interval-tightened tree.
    """
    dom = Domain(dom)
    if len(obj.a) != cons.n or len(obj.b) != cons.n:
        raise DimensionMismatch(
            f"objective has {len(obj.a)}/{len(obj.b)} entries, constraints have n={cons.n}")
    if np.any(~(obj.a > 0)):
        i = int(np.flatnonzero(~(obj.a > 0))[0])
        raise NonpositiveScale(f"a[{i + 1}] = {obj.a[i]} is not positive")
    if not np.all(np.isfinite(obj.b)):
        raise DimensionMismatch("b must be finite")
    if np.any(cons.L > cons.U):
        j = int(np.flatnonzero(cons.L > cons.U)[0])
        raise InfeasibleInstance(f"set {j + 1} has L > U")
    tree = cons.tree()
    _check_structure(cons, tree)
    if dom is Domain.INTEGER:
        for name, v in (("l", cons.l), ("u", cons.u), ("L", cons.L), ("U", cons.U),
                        ("R", np.array([cons.R]))):
            if not _is_integral(v):
                raise DomainViolation(f"integer instance needs integral {name}")
    l, u = cons.effective_bounds()
    tree = tree.with_intervals(tree.lower, tree.upper, l, u)
    tight = structure.propagate_bounds(tree)
    if not obj.is_quadratic:
        ylo = tight.leaf_lower / obj.a + obj.b
        yhi = tight.leaf_upper / obj.a + obj.b
        bad = np.flatnonzero(~obj.f.covers(ylo, yhi))
        if len(bad):
            i = int(bad[0])
            raise DomainViolation(
                f"{obj.f.name} is undefined somewhere on x[{i + 1}] in "
                f"[{tight.leaf_lower[i]}, {tight.leaf_upper[i]}]")
    return Instance(obj, cons, dom, tight)


def evaluate_objective(obj: ObjectiveSpec, x) -> float:
    x = np.asarray(x, dtype=float)
    if not obj.is_quadratic:
        y = obj.transform(x)
        bad = np.flatnonzero(~obj.f.in_domain(y))
        if len(bad):
            raise DomainViolation(f"x[{bad[0] + 1}] maps outside the domain of {obj.f.name}")
    return math.fsum(obj.terms(x))


def check_feasibility(cons: ConstraintSpec, x, tol: float = EPS_FEAS) -> FeasibilityReport:
    x = np.asarray(x, dtype=float)
    if len(x) != cons.n:
        raise DimensionMismatch(f"x has length {len(x)}, expected {cons.n}")
    viol: list[Violation] = []
    r = math.fsum(x) - cons.R
    if abs(r) > tol:
        viol.append(Violation("resource", -1, r))
    for i in np.flatnonzero(x < cons.l - tol):
        viol.append(Violation("lower", int(i), float(x[i] - cons.l[i])))
    for i in np.flatnonzero(x > cons.u + tol):
        viol.append(Violation("upper", int(i), float(x[i] - cons.u[i])))
    if cons.m:
        s = cons.set_sums(x)
        for j in np.flatnonzero(s > cons.U + tol):
            viol.append(Violation("set", int(j), float(s[j] - cons.U[j])))
        for j in np.flatnonzero(s < cons.L - tol):
            viol.append(Violation("set", int(j), float(s[j] - cons.L[j])))
    viol.sort(key=lambda v: -abs(v.residual))
    return FeasibilityReport(not viol, viol)


def _step(dom: Domain) -> float:
    return 1.0 if Domain(dom) is Domain.INTEGER else 0.0


def _slack_threshold(dom: Domain, tol: float) -> float:
    return tol if Domain(dom) is Domain.CONTINUOUS else 1.0 - tol


def exchangeable_pairs(cons: ConstraintSpec, x, dom: Domain = Domain.CONTINUOUS,
                       tol: float = EPS_FEAS) -> ExchangeGraph:
    """All ordered pairs ``(i, k)`` along which ``x + eps (e_k - e_i)`` stays feasible.

    Works from the explicit set-membership matrix, so it costs
    ``O(n^2 m)``; meant for verification at moderate sizes.
    """
    x = np.asarray(x, dtype=float)
    if not check_feasibility(cons, x, tol).feasible:
        raise InfeasiblePoint("x is not feasible")
    n, m = cons.n, cons.m
    thr = _slack_threshold(dom, tol)
    down = x - cons.l
    up = cons.u - x
    if m:
        M = np.zeros((m, n), dtype=bool)
        for j, S in enumerate(cons.sets):
            M[j, S] = True
        s = M.astype(float) @ x
        low_slack = s - cons.L
        up_slack = cons.U - s
    pairs, eps = [], {}
    for i in range(n):
        if not down[i] > thr:
            continue
        cap = np.minimum(np.full(n, down[i]), up)
        if m:
            only_i = M[:, i][:, None] & ~M                 # sets with i but not k
            only_k = M & ~M[:, i][:, None]                 # sets with k but not i
            cap = np.minimum(cap, np.where(only_i, low_slack[:, None], np.inf).min(axis=0))
            cap = np.minimum(cap, np.where(only_k, up_slack[:, None], np.inf).min(axis=0))
        for k in np.flatnonzero(cap > thr):
            if k != i:
                pairs.append((i, int(k)))
                eps[(i, int(k))] = float(cap[k])
    return ExchangeGraph(pairs, eps)


def marginals(obj: ObjectiveSpec, x, dom: Domain) -> tuple[np.ndarray, np.ndarray]:
    """Marginal value of lowering and of raising each coordinate.

    Continuous: one-sided derivatives ``phi_i^-`` and ``phi_i^+``.
    Integer: unit differences ``phi_i(x_i) - phi_i(x_i - 1)`` and
    ``phi_i(x_i + 1) - phi_i(x_i)``.
    """
    x = np.asarray(x, dtype=float)
    if Domain(dom) is Domain.INTEGER:
        if obj.is_quadratic:
            down = (x - 0.5) / obj.a + obj.b
            up = (x + 0.5) / obj.a + obj.b
        else:
            with np.errstate(all="ignore"):
                here = obj.terms(x)
                down = here - obj.terms(x - 1)
                up = obj.terms(x + 1) - here
        return down, up
    return obj.left(x), obj.right(x)


def verify_condition1(obj: ObjectiveSpec, cons: ConstraintSpec, x,
                      dom: Domain = Domain.CONTINUOUS, tol: float = TOL_CERT,
                      feas_tol: float = EPS_FEAS) -> Certificate:
    """Exchange optimality certificate.

    ``x`` is optimal iff no exchangeable pair ``(i, k)`` has
    ``phi_k^+(x_k) < phi_i^-(x_i)``; comparisons allow a slack of
    ``tol * max(1, |phi_i^-|, |phi_k^+|)``.  Runs in one pass over the tree
    of the family, so it scales to large instances.
    """
    dom = Domain(dom)
    x = np.asarray(x, dtype=float)
    if not check_feasibility(cons, x, feas_tol).feasible:
        raise InfeasiblePoint("x is not feasible")
    if not obj.is_quadratic:
        y = obj.transform(x)
        if not np.all(obj.f.in_domain(y)):
            raise DomainViolation(f"x leaves the domain of {obj.f.name}")
    thr = _slack_threshold(dom, feas_tol)
    tree = cons.tree()
    l, u = cons.effective_bounds()
    down_val, up_val = marginals(obj, x, dom)
    dec = np.where(x - l > thr, down_val, -np.inf)
    inc = np.where(u - x > thr, up_val, np.inf)
    sums = tree.node_sums(x)
    node_dec_ok = (sums - tree.lower) > thr
    node_inc_ok = (tree.upper - sums) > thr
    worst = structure.scan_exchange(tree, dec, inc, node_dec_ok, node_inc_ok, tol)
    exact = obj.f.certifying or dom is Domain.INTEGER
    if worst is None:
        return Certificate(True, None, 0.0, exact)
    margin, i, k = worst
    return Certificate(False, (i, k), margin, exact)
