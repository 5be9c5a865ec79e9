"""Quadratic solvers for group, nested and general laminar constraints.

All three reduce the problem to box subproblems solved by ``qbox``.  The
nested solver solves the box relaxation, pins the most violated prefix to
the bound it violates and recurses on both sides of it.  The general solver
walks the tree of the family top-down and fixes every set's total by a price
search over its subtree.  Every result is re-checked with the exchange
certificate.
"""

from __future__ import annotations

import math

import numpy as np

from . import qbox
from .constants import EPS_FEAS
from .errors import CertificateFailure, InfeasibleInstance, MalformedFamily
from .model import (
    ConstraintSpec,
    Domain,
    Kind,
    ObjectiveSpec,
    Solution,
    verify_condition1,
)
from .structure import propagate_bounds


def _box_solver(dom: Domain):
    if Domain(dom) is Domain.INTEGER:
        return qbox.solve_qbox_integer
    return qbox.solve_qbox_continuous


def certified_solution(a, b, cons: ConstraintSpec, dom, x, lam, solver: str,
            certify: bool, info: dict | None = None) -> Solution:
    obj = ObjectiveSpec(a, b)
    value = math.fsum(obj.terms(x))
    sol = Solution(x, value, lam, cons.tight_sets(x), False, solver, info or {})
    if certify:
        cert = verify_condition1(obj, cons, x, dom)
        if not cert.optimal:
            i, k = cert.witness
            raise CertificateFailure(
                f"{solver} output fails the exchange test at pair ({i + 1},{k + 1}), "
                f"margin {cert.margin:.3e}", witness=cert.witness)
        sol.certified = True
    return sol


def _tightened(cons: ConstraintSpec):
    l, u = cons.effective_bounds()
    tree = cons.tree()
    return propagate_bounds(tree.with_intervals(tree.lower, tree.upper, l, u))


# ---------------------------------------------------------------------------
# general laminar families


class _Responses:
    """Totals the box allocation gives every node of a subtree at one price.

    A node's total sums its own variables plus each child's total clamped
    into the child's interval.  The map is non-decreasing in the price.
    """

    def __init__(self, a, b, tree, l, u, integer: bool):
        self.a, self.b, self.l, self.u = a, b, l, u
        self.tree = tree
        self.alloc = qbox._count if integer else qbox.allocation
        order, stack = [], [0]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(tree.children[v]))
        self.order = np.asarray(order, dtype=np.int64)
        self.pos = np.empty(len(order), dtype=np.int64)
        self.pos[self.order] = np.arange(len(order))
        size = np.ones(len(order), dtype=np.int64)
        for v in order[:0:-1]:
            size[tree.parent[v]] += size[v]
        self.size = size

    def __call__(self, v: int, price: float):
        """Unclamped totals of the subtree nodes, indexed by ``local(v, w)``."""
        t = self.tree
        idx = t.members(v)
        xs = self.alloc(self.a[idx], self.b[idx], self.l[idx], self.u[idx], price)
        p0 = self.pos[v]
        acc = np.bincount(self.pos[t.owner[idx]] - p0, weights=xs, minlength=self.size[v])
        nodes = self.order[p0:p0 + self.size[v]]
        for j in range(len(nodes) - 1, 0, -1):
            w = nodes[j]
            acc[self.pos[t.parent[w]] - p0] += min(max(acc[j], t.lower[w]), t.upper[w])
        return acc, idx, xs

    def local(self, v: int, w: int) -> int:
        return int(self.pos[w] - self.pos[v])

    def bracket(self, v: int, target: float):
        """Adjacent prices ``lo <= hi`` with ``total(lo) < target <= total(hi)``."""
        idx = self.tree.members(v)
        a, b, l, u = self.a[idx], self.b[idx], self.l[idx], self.u[idx]
        ends = np.concatenate([b + (l - 0.5) / a, b + (u + 0.5) / a])
        ends = ends[np.isfinite(ends)]
        lo = float(ends.min()) - 1.0 if len(ends) else -1.0
        hi = float(ends.max()) + 1.0 if len(ends) else 1.0

        def total(p):
            return self(v, p)[0][0]

        span = 1.0
        while total(lo) >= target and np.any(np.isneginf(l)):
            lo -= span
            span *= 2
        span = 1.0
        while total(hi) < target:
            hi += span
            span *= 2
        if total(lo) >= target:
            return lo, lo
        while True:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                return lo, hi
            if total(mid) >= target:
                hi = mid
            else:
                lo = mid


def solve_laminar(a, b, cons: ConstraintSpec, dom: Domain = Domain.CONTINUOUS,
                  *, certify: bool = True, tol: float = EPS_FEAS) -> Solution:
    """Decomposition over the tree of the family, one price per subproblem.

    For a subproblem with a given total, a price search finds the point
    where the subtree's clamped box totals reach that total.  Each child
    set is then fixed at its own clamped total (pinned to a bound when the
    clamp is active) and solved as a smaller instance; the node's own
    variables take their box allocation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dom = Domain(dom)
    tree = _tightened(cons)
    l, u = tree.leaf_lower, tree.leaf_upper
    resp = _Responses(a, b, tree, l, u, dom is Domain.INTEGER)
    x = np.zeros(cons.n)
    lam = None
    frames = pins = 0
    stack = [(0, float(cons.R), None)]
    while stack:
        v, target, window = stack.pop()
        frames += 1
        lo = hi = None
        if window is not None:
            # an unclamped child shares its parent's price window
            acc_lo, idx, xs_lo = resp(v, window[0])
            acc_hi, _, xs_hi = resp(v, window[1])
            if acc_lo[0] <= target <= acc_hi[0]:
                lo, hi = window
        if lo is None:
            lo, hi = resp.bracket(v, target)
            acc_lo, idx, xs_lo = resp(v, lo)
            acc_hi, _, xs_hi = resp(v, hi)
        if v == 0:
            lam = hi
        own = tree.owner[idx] == v
        kids = tree.children[v]
        at = [resp.local(v, c) for c in kids]
        kid_lo = np.array([min(max(acc_lo[j], tree.lower[c]), tree.upper[c]) for j, c in zip(at, kids)])
        kid_hi = np.array([min(max(acc_hi[j], tree.lower[c]), tree.upper[c]) for j, c in zip(at, kids)])
        base = np.concatenate([xs_lo[own], kid_lo])
        room = np.concatenate([xs_hi[own], kid_hi]) - base
        need = target - base.sum()
        share = np.zeros(len(base))
        for j in np.flatnonzero(room > 0):
            if need <= 0:
                break
            share[j] = min(need, room[j])
            need -= share[j]
        parts = base + share
        k = int(own.sum())
        x[idx[own]] = parts[:k]
        if abs(parts.sum() - target) > tol * max(1.0, abs(target)):
            raise CertificateFailure("subproblem totals do not add up to the parent total")
        for c, t in zip(kids, parts[k:]):
            if t in (tree.lower[c], tree.upper[c]) and tree.lower[c] != tree.upper[c]:
                pins += 1
            stack.append((c, float(t), (lo, hi)))
    return certified_solution(a, b, cons, dom, x, lam, "laminar", certify,
                              {"frames": frames, "pins": pins})


# ---------------------------------------------------------------------------
# nested chains


def _chain_order(cons: ConstraintSpec):
    """Permutation making every chain set a prefix, plus the prefix lengths
    and the chain index of each prefix in ascending size."""
    if cons.prefix_sizes is not None:
        return np.arange(cons.n), np.asarray(cons.prefix_sizes), np.arange(cons.m)
    sizes = np.array([len(S) for S in cons.sets], dtype=np.int64)
    order = np.argsort(sizes, kind="stable")
    first = np.full(cons.n, len(order), dtype=np.int64)
    prev = set()
    for rank, j in enumerate(order):
        S = cons.sets[j]
        if not prev.issubset(set(S.tolist())):
            raise MalformedFamily("nested sets must form a single chain")
        prev = set(S.tolist())
        new = first[S] == len(order)
        first[S[new]] = rank
    perm = np.lexsort((np.arange(cons.n), first))
    return perm, sizes[order], order


def _chain_intervals(c, L, U, l, u, R, tol):
    """Tighten prefix-sum intervals along a chain (forward then backward)."""
    m = len(c)
    edges = np.concatenate([[0], c, [len(l)]])
    blo = np.array([l[edges[j]:edges[j + 1]].sum() for j in range(m + 1)])
    bhi = np.array([u[edges[j]:edges[j + 1]].sum() for j in range(m + 1)])
    lo = np.concatenate([[0.0], L, [R]]).astype(float)
    hi = np.concatenate([[0.0], U, [R]]).astype(float)
    for j in range(1, m + 2):
        lo[j] = max(lo[j], lo[j - 1] + blo[j - 1])
        hi[j] = min(hi[j], hi[j - 1] + bhi[j - 1])
        if lo[j] > hi[j] + tol:
            what = "the resource total" if j == m + 1 else f"prefix {j}"
            raise InfeasibleInstance(f"{what} cannot be met", prefix=j)
    for j in range(m, 0, -1):
        lo[j] = max(lo[j], lo[j + 1] - bhi[j])
        hi[j] = min(hi[j], hi[j + 1] - blo[j])
        if lo[j] > hi[j] + tol:
            raise InfeasibleInstance(f"prefix {j} cannot be met", prefix=j)
    return lo[1:m + 1], hi[1:m + 1]


def solve_nested_fast(a, b, cons: ConstraintSpec, dom: Domain = Domain.CONTINUOUS,
                      *, certify: bool = True, tol: float = EPS_FEAS) -> Solution:
    """Decomposition specialised to a chain of nested sets.

    After reordering so every set is a prefix, the most violated prefix of
    a relaxation is read off one cumulative sum, and each frame is a
    contiguous slice with a contiguous range of chain constraints.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dom = Domain(dom)
    n, m = cons.n, cons.m
    perm, c, chain_ids = _chain_order(cons)
    l0, u0 = cons.effective_bounds()
    ap, bp, lp, up = a[perm], b[perm], l0[perm], u0[perm]
    Lc, Uc = _chain_intervals(c, cons.L[chain_ids], cons.U[chain_ids], lp, up, cons.R, tol)
    box = _box_solver(dom)
    eps = 0.0 if dom is Domain.INTEGER else tol
    xp = np.zeros(n)
    lam = None
    pins = 0
    # frame: start, end, total, first chain index, end chain index, shift, depth, root line
    stack = [(0, n, float(cons.R), 0, m, 0.0, 0, True)]
    while stack:
        s, e, total, j0, j1, shift, depth, root_line = stack.pop()
        if depth > m + 1:
            raise CertificateFailure("decomposition exceeded its depth bound")
        if e <= s:
            continue
        sol = box(ap[s:e], bp[s:e], lp[s:e], up[s:e], total)
        xp[s:e] = sol.x
        if j1 <= j0:
            if root_line:
                lam = sol.lam
            continue
        cs = np.cumsum(sol.x)
        pos = c[j0:j1] - s - 1
        sums = cs[pos]
        res = np.where(sums > Uc[j0:j1] - shift + eps, sums - (Uc[j0:j1] - shift),
                       np.where(sums < Lc[j0:j1] - shift - eps, sums - (Lc[j0:j1] - shift), 0.0))
        if not np.any(res):
            if root_line:
                lam = sol.lam
            continue
        pins += 1
        r = int(np.argmax(np.abs(res)))
        j = j0 + r
        B = (Uc[j] if res[r] > 0 else Lc[j]) - shift
        cut = int(c[j])
        if not (lp[s:cut].sum() - tol <= B <= up[s:cut].sum() + tol):
            raise InfeasibleInstance(f"prefix {int(chain_ids[j]) + 1} cannot be pinned")
        stack.append((s, cut, B, j0, j, shift, depth + 1, False))
        stack.append((cut, e, total - B, j + 1, j1, shift + B, depth + 1, root_line))
    x = np.empty(n)
    x[perm] = xp
    return certified_solution(a, b, cons, dom, x, lam, "nested-fast", certify, {"pins": pins})


# ---------------------------------------------------------------------------
# generalized bound constraints (partition into groups)


def _group_limits(cons: ConstraintSpec, l, u):
    groups = list(cons.sets)
    lo = np.array([max(cons.L[j], l[g].sum()) for j, g in enumerate(groups)])
    hi = np.array([min(cons.U[j], u[g].sum()) for j, g in enumerate(groups)])
    bad = np.flatnonzero(lo > hi + EPS_FEAS)
    if len(bad):
        raise InfeasibleInstance(f"group {bad[0] + 1} cannot meet its bounds")
    if cons.R < lo.sum() - EPS_FEAS or cons.R > hi.sum() + EPS_FEAS:
        raise InfeasibleInstance(
            f"resource {cons.R} outside the reachable range [{lo.sum()}, {hi.sum()}]")
    return groups, lo, np.maximum(hi, lo)


def solve_gbc(a, b, cons: ConstraintSpec, dom: Domain = Domain.CONTINUOUS,
              *, certify: bool = True) -> Solution:
    """Two-level multiplier search for a partition into bounded groups.

    For a global multiplier each group takes the total its box allocation
    would give, clamped into the group's reachable bounds.  The summed
    clamped totals are non-decreasing in the multiplier, so one search fixes
    every group total; each group is then solved as a box problem.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dom = Domain(dom)
    if cons.kind is not Kind.GBC:
        raise MalformedFamily("solve_gbc needs a partition into groups")
    l, u = cons.effective_bounds()
    groups, glo, ghi = _group_limits(cons, l, u)
    if dom is Domain.INTEGER:
        totals, lam = _gbc_integer_totals(a, b, l, u, groups, glo, ghi, cons.R)
    else:
        totals, lam = _gbc_continuous_totals(a, b, l, u, groups, glo, ghi, cons.R)
    box = _box_solver(dom)
    x = np.zeros(cons.n)
    for g, t in zip(groups, totals):
        x[g] = box(a[g], b[g], l[g], u[g], t).x
    return certified_solution(a, b, cons, dom, x, lam, "gbc", certify)


def _gbc_continuous_totals(a, b, l, u, groups, glo, ghi, R):
    def group_totals(lam):
        t = np.array([qbox.allocation(a[g], b[g], l[g], u[g], lam).sum() for g in groups])
        return np.clip(t, glo, ghi)

    bps = [b + l / a, b + u / a]
    for g, lo, hi in zip(groups, glo, ghi):
        for t in (lo, hi):
            if np.isfinite(t):
                bps.append(np.array([qbox.solve_qbox_continuous(a[g], b[g], l[g], u[g], t).lam]))
    bps = np.concatenate(bps)
    bps = np.unique(bps[np.isfinite(bps)])

    def G(lam):
        return group_totals(lam).sum()

    left, right = 0, len(bps)
    while left < right:
        mid = (left + right) // 2
        if G(bps[mid]) >= R:
            right = mid
        else:
            left = mid + 1
    k = left
    if k < len(bps) and G(bps[k]) == R:
        lam = bps[k]
    else:
        lo = bps[k - 1] if k > 0 else bps[0] - 1.0
        hi = bps[k] if k < len(bps) else bps[-1] + 1.0
        if k == 0:
            lo = hi - 1.0
        g_lo, g_hi = G(lo), G(hi)
        if g_hi == g_lo:
            lam = lo
        else:
            lam = lo + (R - g_lo) * (hi - lo) / (g_hi - g_lo)
    totals = group_totals(lam)
    # push rounding drift into a group with room
    drift = R - totals.sum()
    if drift != 0:
        room = (ghi - totals) if drift > 0 else (totals - glo)
        j = int(np.argmax(room))
        totals[j] += drift
    return totals, float(lam)


def _gbc_integer_totals(a, b, l, u, groups, glo, ghi, R):
    def counts(lam):
        t = np.array([qbox._count(a[g], b[g], l[g], u[g], lam).sum() for g in groups])
        return np.clip(t, glo, ghi)

    fin_l = np.where(np.isfinite(l), l, 0.0)
    fin_u = np.where(np.isfinite(u), u, 0.0)
    lo = float(np.min(b + (fin_l - 0.5) / a)) - 1.0
    hi = float(np.max(b + (fin_u + 0.5) / a)) + 1.0
    span = 1.0
    while counts(lo).sum() >= R and counts(lo).sum() > glo.sum():
        lo -= span
        span *= 2
    span = 1.0
    while counts(hi).sum() < R:
        hi += span
        span *= 2
    if counts(lo).sum() >= R:
        return counts(lo), None
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if counts(mid).sum() >= R:
            hi = mid
        else:
            lo = mid
    base, top = counts(lo), counts(hi)
    need = int(round(R - base.sum()))
    totals = base.copy()
    for j in np.flatnonzero(top > base):
        if need <= 0:
            break
        step = min(need, int(top[j] - base[j]))
        totals[j] += step
        need -= step
    return totals, float(hi)
