"""Slow reference solvers used to cross-check the fast ones on small inputs."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .constants import EPS_FEAS
from .errors import BudgetExceeded, GreedyUnsafe, InfeasibleInstance
from .model import ConstraintSpec, Domain, ObjectiveSpec, Solution, validate_instance
from .structure import sample_feasible_point

# relative slack when comparing objective values computed from different points
VALUE_RTOL = 1e-12


@dataclass(frozen=True)
class OracleBudget:
    max_points: int = 10_000_000
    grid_step: float = 1.0

    def __post_init__(self):
        if self.max_points > 10 ** 8:
            raise BudgetExceeded("enumeration cap above 1e8")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")


def _membership(cons: ConstraintSpec) -> np.ndarray:
    M = np.zeros((cons.m, cons.n), dtype=bool)
    for j, S in enumerate(cons.sets):
        M[j, S] = True
    return M


def values_equal(p: float, q: float, rtol: float = VALUE_RTOL) -> bool:
    return abs(p - q) <= rtol * max(1.0, abs(p), abs(q))


def brute_force_integer(obj: ObjectiveSpec, cons: ConstraintSpec,
                        budget: OracleBudget = OracleBudget(),
                        chunk: int = 1 << 18) -> Solution:
    """Enumerate every integer point of the box and keep the best feasible one.

    Points are visited in lexicographic order, so among minimizers the
    lexicographically smallest wins.
    """
    l, u = cons.effective_bounds()
    if not (np.all(np.isfinite(l)) and np.all(np.isfinite(u))):
        raise BudgetExceeded("brute force needs a finite box")
    lo = np.ceil(l - EPS_FEAS).astype(np.int64)
    hi = np.floor(u + EPS_FEAS).astype(np.int64)
    if np.any(hi < lo):
        raise InfeasibleInstance("empty integer box")
    radix = hi - lo + 1
    total = math.prod(int(r) for r in radix)
    if total > budget.max_points:
        raise BudgetExceeded(f"{total} points exceed the cap of {budget.max_points}")
    M = _membership(cons)
    # place values: first coordinate most significant
    place = np.ones(cons.n, dtype=np.int64)
    for i in range(cons.n - 2, -1, -1):
        place[i] = place[i + 1] * radix[i + 1]
    best_val, best_x = math.inf, None
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk), dtype=np.int64)
        X = (lo + (flat[:, None] // place) % radix).astype(float)
        ok = np.abs(X.sum(axis=1) - cons.R) <= EPS_FEAS
        if cons.m:
            S = X @ M.T.astype(float)
            ok &= np.all((S >= cons.L - EPS_FEAS) & (S <= cons.U + EPS_FEAS), axis=1)
        if not ok.any():
            continue
        X = X[ok]
        with np.errstate(all="ignore"):
            vals = obj.terms(X).sum(axis=1)
        vals = np.where(np.isnan(vals), np.inf, vals)
        cand = np.flatnonzero(vals <= vals.min() + 1e-9 * max(1.0, abs(vals.min())))
        for c in cand:
            v = math.fsum(obj.terms(X[c]))
            if best_x is None or (v < best_val and not values_equal(v, best_val)):
                best_val, best_x = v, X[c].copy()
    if best_x is None:
        raise InfeasibleInstance("no integer point meets every constraint")
    return Solution(best_x, best_val, None, cons.tight_sets(best_x), False, "brute-force")


def greedy_integer(obj: ObjectiveSpec, cons: ConstraintSpec) -> Solution:
    """Unit-step greedy from the lower bounds.

    Each step raises the variable whose next unit is cheapest (lowest index
    on ties) among those whose box and enclosing upper set bounds still have
    room.  Exact when lower set bounds are implied by the box.
    """
    validate_instance(obj, cons, Domain.INTEGER)
    l, u = cons.effective_bounds()
    if not np.all(np.isfinite(l)):
        raise GreedyUnsafe("greedy starts from the lower bounds, which must be finite")
    for j, S in enumerate(cons.sets):
        if cons.L[j] > l[S].sum():
            raise GreedyUnsafe(f"lower bound of set {j + 1} is not implied by the box")
    tree = cons.tree()
    x = l.copy()
    sums = tree.node_sums(x)
    steps = cons.R - x.sum()
    if steps < 0:
        raise InfeasibleInstance("resource below the sum of lower bounds")
    paths = [tree.path_to_root(i)[:-1] for i in range(cons.n)]

    def unit(i):
        return float(obj.terms(x[i:i + 1] + 1, [i])[0] - obj.terms(x[i:i + 1], [i])[0])

    heap = [(unit(i), i) for i in range(cons.n) if x[i] + 1 <= u[i]]
    heapq.heapify(heap)
    for _ in range(int(round(steps))):
        while heap:
            _, i = heapq.heappop(heap)
            if x[i] + 1 <= u[i] and all(sums[v] + 1 <= tree.upper[v] + EPS_FEAS
                                        for v in paths[i]):
                break
        else:
            raise InfeasibleInstance("no variable can take another unit")
        x[i] += 1
        for v in paths[i]:
            sums[v] += 1
        if x[i] + 1 <= u[i]:
            heapq.heappush(heap, (unit(i), i))
    return Solution(x, math.fsum(obj.terms(x)), None, cons.tight_sets(x), False, "greedy")


def _pair_capacity(x, l, u, M, s, L, U, i, k):
    """Largest amount that can move from ``x_i`` to ``x_k`` feasibly."""
    cap = min(x[i] - l[i], u[k] - x[k])
    if len(M):
        only_i = M[:, i] & ~M[:, k]
        only_k = M[:, k] & ~M[:, i]
        if only_i.any():
            cap = min(cap, float(np.min(s[only_i] - L[only_i])))
        if only_k.any():
            cap = min(cap, float(np.min(U[only_k] - s[only_k])))
    return max(cap, 0.0)


def grid_refine_continuous(obj: ObjectiveSpec, cons: ConstraintSpec,
                           budget: OracleBudget = OracleBudget(),
                           seed: int = 0, rounds: int = 6,
                           max_sweeps: int = 2000) -> Solution:
    """Pairwise-exchange descent with a step grid refined tenfold per round.

    Starts from a random feasible point.  For each ordered pair the amount
    moved is chosen on multiples of the current step (plus the capacity
    endpoint) by ternary search on the convex one-dimensional restriction.
    """
    if cons.n > 4:
        raise BudgetExceeded("grid oracle is limited to n <= 4")
    inst = validate_instance(obj, cons, Domain.CONTINUOUS)
    tree = inst.tree
    if not (np.all(np.isfinite(tree.leaf_lower)) and np.all(np.isfinite(tree.leaf_upper))):
        raise BudgetExceeded("grid oracle needs finite box bounds")
    x = sample_feasible_point(tree, np.random.default_rng(seed))
    l, u = tree.leaf_lower, tree.leaf_upper
    M = _membership(cons)
    n = cons.n

    def cost(i, k, xi, xk):
        return float(obj.terms(np.array([xi]), [i])[0] + obj.terms(np.array([xk]), [k])[0])

    def best_move(i, k, cap, h):
        base = cost(i, k, x[i], x[k])
        f = lambda t: cost(i, k, x[i] - t, x[k] + t)
        steps = int(min(cap / h, 1e12))
        lo_s, hi_s = 0, steps
        while hi_s - lo_s > 2:
            m1 = lo_s + (hi_s - lo_s) // 3
            m2 = hi_s - (hi_s - lo_s) // 3
            if f(m1 * h) <= f(m2 * h):
                hi_s = m2
            else:
                lo_s = m1
        cands = [s * h for s in range(lo_s, hi_s + 1)] + [cap]
        vals = [f(t) for t in cands]
        j = int(np.argmin(vals))
        return cands[j], base - vals[j]

    h = budget.grid_step
    for _ in range(rounds):
        for _ in range(max_sweeps):
            improved = False
            for i in range(n):
                for k in range(n):
                    if i == k:
                        continue
                    s = M.astype(float) @ x if len(M) else np.zeros(0)
                    cap = _pair_capacity(x, l, u, M, s, cons.L, cons.U, i, k)
                    if cap <= 0:
                        continue
                    t, gain = best_move(i, k, cap, h)
                    if t > 0 and gain > 1e-15 * max(1.0, abs(cost(i, k, x[i], x[k]))):
                        x[i] -= t
                        x[k] += t
                        improved = True
            if not improved:
                break
        h /= 10
    return Solution(x, math.fsum(obj.terms(x)), None, cons.tight_sets(x), False, "grid")
