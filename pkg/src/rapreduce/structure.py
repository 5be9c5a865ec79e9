"""Laminar families as trees.

Covers tree construction, interval propagation, the pairwise-exchange
decomposition of ``z - x`` for two feasible points, and the cross-free
companion family with its membership test.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .constants import EPS_FEAS
from .errors import InfeasibleInstance, InfeasiblePoint, MalformedFamily


class LaminarTree:
    """Forest of a laminar family hanging below an implicit root.

    Node 0 is the root and holds every index with interval ``[R, R]``.
    Node ``v >= 1`` stands for family set ``source[v]``.  Nodes are
    numbered so that a subset always has a larger number than each of its
    supersets.  Each variable hangs below the deepest node containing it
    (``direct[v]``) and keeps its own box interval as a leaf.
    """

    def __init__(self, n: int, parent, source, direct, lower, upper,
                 leaf_lower, leaf_upper):
        self.n = int(n)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.source = np.asarray(source, dtype=np.int64)
        self.direct = [np.asarray(d, dtype=np.int64) for d in direct]
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.leaf_lower = np.asarray(leaf_lower, dtype=float)
        self.leaf_upper = np.asarray(leaf_upper, dtype=float)
        V = len(self.parent)
        self.children: list[list[int]] = [[] for _ in range(V)]
        for v in range(1, V):
            self.children[int(self.parent[v])].append(v)
        self.node_of_set = np.zeros(V - 1, dtype=np.int64)
        for v in range(1, V):
            self.node_of_set[self.source[v]] = v
        self.owner = np.zeros(self.n, dtype=np.int64)
        for v, d in enumerate(self.direct):
            self.owner[d] = v
        self._members: list[np.ndarray] | None = None

    @property
    def num_nodes(self) -> int:
        return len(self.parent)

    def with_intervals(self, lower, upper, leaf_lower, leaf_upper) -> LaminarTree:
        return LaminarTree(self.n, self.parent, self.source, self.direct,
                           lower, upper, leaf_lower, leaf_upper)

    def members(self, v: int) -> np.ndarray:
        """Sorted indices of all variables below node ``v``."""
        if self._members is None:
            mem = [d for d in self.direct]
            for w in range(self.num_nodes - 1, 0, -1):
                p = int(self.parent[w])
                mem[p] = np.concatenate([mem[p], mem[w]])
            self._members = [np.sort(m) for m in mem]
        return self._members[v]

    def node_sums(self, x) -> np.ndarray:
        """Sum of ``x`` over every node, computed bottom-up."""
        x = np.asarray(x)
        sums = np.array([x[d].sum() for d in self.direct], dtype=float)
        for v in range(self.num_nodes - 1, 0, -1):
            sums[self.parent[v]] += sums[v]
        return sums

    def path_to_root(self, i: int) -> list[int]:
        out = []
        v = int(self.owner[i])
        while v >= 0:
            out.append(v)
            v = int(self.parent[v])
        return out


def build_tree(cons) -> LaminarTree:
    """Arrange the sets of ``cons`` as a tree below the full index set."""
    n, m = cons.n, cons.m
    if cons.prefix_sizes is not None:
        sizes = np.asarray(cons.prefix_sizes, dtype=np.int64)
        parent = [-1] + list(range(m))
        source = [-1] + list(range(m - 1, -1, -1))
        bounds = np.concatenate([[0], sizes, [n]])
        direct = [np.arange(sizes[-1] if m else 0, n)]
        for j in range(m - 1, -1, -1):
            direct.append(np.arange(bounds[j], bounds[j + 1]))
    else:
        sets = cons.sets
        order = sorted(range(m), key=lambda j: (-len(sets[j]), j))
        owner = np.zeros(n, dtype=np.int64)
        parent, source, sizes = [-1], [-1], [n]
        for j in order:
            S = sets[j]
            own = owner[S]
            p = int(own[0])
            if np.any(own != p):
                raise MalformedFamily(f"set {j + 1} crosses another set")
            if p != 0 and len(S) == sizes[p]:
                raise MalformedFamily(f"set {j + 1} duplicates set {source[p] + 1}")
            v = len(parent)
            parent.append(p)
            source.append(j)
            sizes.append(len(S))
            owner[S] = v
        V = len(parent)
        idx = np.argsort(owner, kind="stable")
        cuts = np.cumsum(np.bincount(owner, minlength=V))[:-1]
        direct = np.split(idx, cuts)
    src = np.asarray(source)
    L = np.asarray(cons.L, dtype=float)
    U = np.asarray(cons.U, dtype=float)
    lower = np.concatenate([[cons.R], L[src[1:]]]) if m else np.array([cons.R], float)
    upper = np.concatenate([[cons.R], U[src[1:]]]) if m else np.array([cons.R], float)
    return LaminarTree(n, parent, source, direct, lower, upper, cons.l, cons.u)


def _sum_excluding(vals: np.ndarray) -> np.ndarray:
    """For each entry, the sum of all other entries (infinities handled)."""
    if len(vals) == 0:
        return vals.copy()
    finite = np.isfinite(vals)
    n_inf = int((~finite).sum())
    fsum = vals[finite].sum()
    if n_inf == 0:
        return fsum - vals
    inf_val = vals[~finite][0]
    out = np.full(len(vals), inf_val, dtype=float)
    if n_inf == 1:
        out[~finite] = fsum
    return out


def _gap_tol(a: float, b: float, tol: float) -> float:
    scale = max(abs(a) if np.isfinite(a) else 0.0, abs(b) if np.isfinite(b) else 0.0)
    return tol + 1e-12 * scale


def propagate_bounds(tree: LaminarTree, tol: float = EPS_FEAS) -> LaminarTree:
    """Tighten every node and leaf interval to the range actually reachable.

    A bottom-up pass intersects each node with the sum of its children;
    a top-down pass then trims each child against its parent and siblings.
    Raises ``InfeasibleInstance`` naming the first node whose interval
    becomes empty.
    """
    V = tree.num_nodes
    llo = tree.leaf_lower.copy()
    lhi = tree.leaf_upper.copy()
    bad = np.flatnonzero(llo > lhi + tol)
    if len(bad):
        i = int(bad[0])
        raise InfeasibleInstance(f"variable {i + 1} has an empty box", variable=i)
    lo = tree.lower.copy()
    hi = tree.upper.copy()

    def describe(v):
        return "the resource total" if v == 0 else f"set {tree.source[v] + 1}"

    for v in range(V - 1, -1, -1):
        d = tree.direct[v]
        ch = tree.children[v]
        s_lo = llo[d].sum() + sum(lo[c] for c in ch)
        s_hi = lhi[d].sum() + sum(hi[c] for c in ch)
        a, b = max(lo[v], s_lo), min(hi[v], s_hi)
        if a > b + _gap_tol(a, b, tol):
            raise InfeasibleInstance(
                f"{describe(v)} cannot reach its bounds [{lo[v]}, {hi[v]}]; "
                f"reachable range is [{s_lo}, {s_hi}]",
                node=v, set_index=int(tree.source[v]))
        if a > b:
            a = b = 0.5 * (a + b)
        lo[v], hi[v] = a, b

    for v in range(V):
        d = tree.direct[v]
        ch = tree.children[v]
        item_lo = np.concatenate([lo[ch], llo[d]])
        item_hi = np.concatenate([hi[ch], lhi[d]])
        if len(item_lo) == 0:
            continue
        new_lo = np.maximum(item_lo, lo[v] - _sum_excluding(item_hi))
        new_hi = np.minimum(item_hi, hi[v] - _sum_excluding(item_lo))
        gap = new_lo - new_hi
        if np.any(gap > tol):
            raise InfeasibleInstance(f"{describe(v)} leaves no room for its parts", node=v,
                                     set_index=int(tree.source[v]))
        squeeze = gap > 0
        mid = 0.5 * (new_lo + new_hi)
        new_lo = np.where(squeeze, mid, new_lo)
        new_hi = np.where(squeeze, mid, new_hi)
        k = len(ch)
        lo[ch], hi[ch] = new_lo[:k], new_hi[:k]
        llo[d], lhi[d] = new_lo[k:], new_hi[k:]
    return tree.with_intervals(lo, hi, llo, lhi)


def tree_feasible(tree: LaminarTree, x, tol: float = EPS_FEAS) -> bool:
    x = np.asarray(x, dtype=float)
    if np.any(x < tree.leaf_lower - tol) or np.any(x > tree.leaf_upper + tol):
        return False
    s = tree.node_sums(x)
    return bool(np.all(s >= tree.lower - tol) and np.all(s <= tree.upper + tol))


def scan_exchange(tree: LaminarTree, dec, inc, node_dec_ok, node_inc_ok,
                  tol: float):
    """Search for an exchange ``i -> k`` that lowers cost.

    ``dec[i]`` is the marginal gain of lowering ``x_i`` (or ``-inf`` when its
    box forbids it) and ``inc[k]`` the marginal cost of raising ``x_k`` (or
    ``+inf``).  ``node_dec_ok[v]`` says whether node ``v``'s sum may drop,
    ``node_inc_ok[v]`` whether it may grow.  A pair counts only if every
    node on the path from ``i`` up to (not including) the lowest node
    holding both allows the decrease, and likewise for ``k``.

    Returns ``(margin, i, k)`` for the worst violating pair, where a
    violation means ``dec[i] - inc[k]`` exceeds ``tol * max(1, |dec|, |inc|)``;
    returns ``None`` when there is none.
    """
    V = tree.num_nodes
    best_dec = np.full(V, -np.inf)
    arg_dec = np.full(V, -1, dtype=np.int64)
    best_inc = np.full(V, np.inf)
    arg_inc = np.full(V, -1, dtype=np.int64)
    worst = None

    for v in range(V - 1, -1, -1):
        d = tree.direct[v]
        # candidate items: (value, index, item id); leaves use negative ids
        dec_items, inc_items = [], []
        for c in tree.children[v]:
            dec_items.append((best_dec[c], int(arg_dec[c]), c))
            inc_items.append((best_inc[c], int(arg_inc[c]), c))
        if len(d):
            dv = dec[d]
            iv = inc[d]
            for pos in _top2(dv, largest=True):
                dec_items.append((dv[pos], int(d[pos]), -1 - int(d[pos])))
            for pos in _top2(iv, largest=False):
                inc_items.append((iv[pos], int(d[pos]), -1 - int(d[pos])))
        dec_items.sort(key=lambda t: -t[0])
        inc_items.sort(key=lambda t: t[0])
        dec_items = dec_items[:2]
        inc_items = inc_items[:2]
        for dv_, di, dit in dec_items:
            for iv_, ii, iit in inc_items:
                if dit == iit or not np.isfinite(dv_) or not np.isfinite(iv_):
                    continue
                margin = dv_ - iv_
                if margin > tol * max(1.0, abs(dv_), abs(iv_)):
                    if worst is None or margin > worst[0]:
                        worst = (float(margin), di, ii)
        if dec_items and node_dec_ok[v]:
            best_dec[v], arg_dec[v] = dec_items[0][0], dec_items[0][1]
        if inc_items and node_inc_ok[v]:
            best_inc[v], arg_inc[v] = inc_items[0][0], inc_items[0][1]
    return worst


def _top2(vals: np.ndarray, largest: bool) -> list[int]:
    if len(vals) <= 2:
        return list(range(len(vals)))
    w = -vals if largest else vals
    first = int(np.argmin(w))
    saved = w[first]
    w = w.copy()
    w[first] = np.inf
    second = int(np.argmin(w))
    w[first] = saved
    return [first, second]


def exchangeable_matrix(tree: LaminarTree, x, step: float = 0.0,
                        tol: float = EPS_FEAS) -> np.ndarray:
    """Boolean ``n x n`` matrix of exchangeable pairs, walking tree paths.

    ``step`` is 0 for continuous variables (slack must exceed ``tol``) and 1
    for integer variables (slack must be at least one unit).
    """
    x = np.asarray(x, dtype=float)
    n = tree.n
    sums = tree.node_sums(x)
    thr = tol if step == 0 else step - tol
    node_down = (sums - tree.lower) > thr
    node_up = (tree.upper - sums) > thr
    leaf_down = (x - tree.leaf_lower) > thr
    leaf_up = (tree.leaf_upper - x) > thr
    paths = [tree.path_to_root(i) for i in range(n)]
    out = np.zeros((n, n), dtype=bool)
    for i in range(n):
        if not leaf_down[i]:
            continue
        pi = paths[i]
        for k in range(n):
            if k == i or not leaf_up[k]:
                continue
            pk = paths[k]
            common = set(pi) & set(pk)
            ok = all(node_down[v] for v in pi if v not in common)
            ok = ok and all(node_up[v] for v in pk if v not in common)
            out[i, k] = ok
    return out


def sample_feasible_point(tree: LaminarTree, rng: np.random.Generator,
                          grid: float | None = None) -> np.ndarray:
    """Draw a feasible point by splitting node totals top-down.

    ``tree`` should already be tightened by ``propagate_bounds`` and all
    intervals must be finite.  With ``grid`` set and every bound a multiple
    of it, the returned point lies on that grid.
    """
    V = tree.num_nodes
    target = np.zeros(V)
    x = np.zeros(tree.n)
    lo, hi = tree.lower, tree.upper
    target[0] = lo[0]
    for v in range(V):
        ch = tree.children[v]
        d = tree.direct[v]
        ids = [("n", c) for c in ch] + [("x", int(i)) for i in d]
        ilo = np.array([lo[c] for c in ch] + list(tree.leaf_lower[d]), dtype=float)
        ihi = np.array([hi[c] for c in ch] + list(tree.leaf_upper[d]), dtype=float)
        order = rng.permutation(len(ids))
        remaining = target[v]
        rest_lo = ilo.sum()
        rest_hi = ihi.sum()
        for pos, idx in enumerate(order):
            rest_lo -= ilo[idx]
            rest_hi -= ihi[idx]
            if pos == len(order) - 1:
                val = remaining
            else:
                a = max(ilo[idx], remaining - rest_hi)
                b = min(ihi[idx], remaining - rest_lo)
                if grid:
                    ka, kb = np.ceil(a / grid - 1e-9), np.floor(b / grid + 1e-9)
                    val = grid * rng.integers(int(ka), int(kb) + 1) if kb >= ka else a
                else:
                    val = rng.uniform(a, b) if b > a else a
            remaining -= val
            kind, ref = ids[idx]
            if kind == "n":
                target[ref] = val
            else:
                x[ref] = val
    return x


# ---------------------------------------------------------------------------
# pairwise-exchange decomposition of z - x


@dataclass
class ConicDecomposition:
    """Non-negative pair weights with ``z - x = sum w[i,k] (e_k - e_i)``."""

    weights: np.ndarray
    trace: list[tuple[int, int, int, int, Fraction]]
    blocks: list[tuple[int, int, int]]
    exact: dict[tuple[int, int], Fraction] = field(default_factory=dict)


def conic_decompose(tree: LaminarTree, x, z, tol: float = EPS_FEAS) -> ConicDecomposition:
    """Write ``z - x`` as a non-negative combination of exchange directions.

    Sets are visited from the deepest to the root.  Inside the current set
    the smallest index with surplus ``xbar_i > z_i`` is paired with the
    smallest index with deficit ``xbar_k < z_k`` and the smaller of the two
    gaps is moved.  Arithmetic is exact (rationals), so the final point is
    ``z`` exactly whenever ``x`` and ``z`` have the same total.

    Each trace entry is ``(t, node, i, k, amount)``; ``blocks`` lists
    ``(node, first_t, end_t)`` for every visited set.
    """
    if not (tree_feasible(tree, x, tol) and tree_feasible(tree, z, tol)):
        raise InfeasiblePoint("both points must be feasible")
    n = tree.n
    xbar = [Fraction(float(v)) for v in x]
    zf = [Fraction(float(v)) for v in z]
    weights = np.zeros((n, n))
    exact: dict[tuple[int, int], Fraction] = {}
    trace = []
    blocks = []
    t = 0
    for v in range(tree.num_nodes - 1, -1, -1):
        mem = [int(i) for i in tree.members(v)]
        start = t
        pi = pk = 0
        while True:
            while pi < len(mem) and xbar[mem[pi]] <= zf[mem[pi]]:
                pi += 1
            while pk < len(mem) and xbar[mem[pk]] >= zf[mem[pk]]:
                pk += 1
            if pi >= len(mem) or pk >= len(mem):
                break
            i, k = mem[pi], mem[pk]
            amount = min(xbar[i] - zf[i], zf[k] - xbar[k])
            xbar[i] -= amount
            xbar[k] += amount
            exact[(i, k)] = exact.get((i, k), Fraction(0)) + amount
            weights[i, k] = float(exact[(i, k)])
            trace.append((t, v, i, k, amount))
            t += 1
        blocks.append((v, start, t))
    return ConicDecomposition(weights, trace, blocks, exact)


@dataclass
class DecompositionReport:
    checks: dict[str, bool]
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def check_lemma_properties(tree: LaminarTree, x, z, dec: ConicDecomposition,
                           step: float = 0.0) -> DecompositionReport:
    """Replay a decomposition and test its structural guarantees.

    Checks, all in exact arithmetic along the replayed sequence of points:
    constant total; every coordinate moves monotonically from ``x_i``
    towards ``z_i`` and stays once it arrives; each set is one-signed
    relative to ``z`` after its block; no pair is used twice; every set sum
    is unchanged before its block starts; the weights reconstruct
    ``z - x``; each pair with positive weight is exchangeable at ``x`` and
    its source never receives while its sink never gives; at most
    ``n - 1`` moves per block and ``n * (#sets + 1)`` moves overall.
    """
    n = tree.n
    xf = [Fraction(float(v)) for v in x]
    zf = [Fraction(float(v)) for v in z]
    cur = list(xf)
    total0 = sum(xf)
    checks = {k: True for k in (
        "total_invariant", "monotone_convergence", "one_signed_after_block",
        "pair_used_once", "set_sum_frozen_before_block", "reconstruction",
        "exchangeable_sources", "source_sink_partition", "trace_length")}
    notes = []
    members = [set(int(i) for i in tree.members(v)) for v in range(tree.num_nodes)]
    block_of_t = {}
    block_start = {}
    block_end = {}
    for v, s, e in dec.blocks:
        block_start[v], block_end[v] = s, e
        for t in range(s, e):
            block_of_t[t] = v
        if e - s > max(n - 1, 0):
            checks["trace_length"] = False
    if len(dec.trace) > n * tree.num_nodes:
        checks["trace_length"] = False

    def set_sum(pt, v):
        return sum(pt[i] for i in members[v])

    init_sums = [set_sum(xf, v) for v in range(tree.num_nodes)]
    seen = set()
    recon = [Fraction(0)] * n
    for v, s, e in dec.blocks:
        for (t, _, i, k, amount) in dec.trace[s:e]:
            if amount <= 0:
                checks["monotone_convergence"] = False
            if (i, k) in seen:
                checks["pair_used_once"] = False
                notes.append(f"pair ({i + 1},{k + 1}) used twice")
            seen.add((i, k))
            prev = list(cur)
            cur[i] -= amount
            cur[k] += amount
            recon[i] -= amount
            recon[k] += amount
            if sum(cur) != total0:
                checks["total_invariant"] = False
            for j in (i, k):
                lo_, hi_ = sorted((xf[j], zf[j]))
                if not (lo_ <= cur[j] <= hi_) or abs(cur[j] - zf[j]) > abs(prev[j] - zf[j]):
                    checks["monotone_convergence"] = False
                if prev[j] == zf[j] and cur[j] != zf[j]:
                    checks["monotone_convergence"] = False
            for w in range(tree.num_nodes):
                if t + 1 <= block_end.get(w, -1) and set_sum(cur, w) != init_sums[w]:
                    checks["set_sum_frozen_before_block"] = False
        signs = {(cur[j] > zf[j]) - (cur[j] < zf[j]) for j in members[v]}
        if 1 in signs and -1 in signs:
            checks["one_signed_after_block"] = False
    if any(recon[j] != zf[j] - xf[j] for j in range(n)):
        checks["reconstruction"] = False
        notes.append("weights do not reconstruct z - x")
    # the float weight matrix must agree with the exact trace
    dense = np.zeros((n, n))
    for (i, k), w in dec.exact.items():
        dense[i, k] = float(w)
    if not np.array_equal(dense, dec.weights) or np.any(dec.weights < 0):
        checks["reconstruction"] = False
        notes.append("weight matrix disagrees with the trace")
    ex = exchangeable_matrix(tree, np.asarray(x, dtype=float), step=step)
    sources = {i for (i, k), w in dec.exact.items() if w > 0}
    sinks = {k for (i, k), w in dec.exact.items() if w > 0}
    for (i, k), w in dec.exact.items():
        if w > 0 and not ex[i, k]:
            checks["exchangeable_sources"] = False
            notes.append(f"pair ({i + 1},{k + 1}) is not exchangeable at x")
    if sources & sinks:
        checks["source_sink_partition"] = False
    return DecompositionReport(checks, notes)


# ---------------------------------------------------------------------------
# cross-free companion family


@dataclass
class CrossFreeFamily:
    n: int
    R: float
    sets: list[frozenset]
    bound: list[float]
    crossfree: bool

    def contains(self, x, tol: float = EPS_FEAS) -> bool:
        """Membership in ``{x : x(X) <= r(X) for X in family, sum(x) = R}``."""
        x = np.asarray(x, dtype=float)
        if abs(x.sum() - self.R) > tol:
            return False
        for S, r in zip(self.sets, self.bound):
            if x[list(S)].sum() > r + tol:
                return False
        return True


def crosses(X: frozenset, Y: frozenset, n: int) -> bool:
    """True when all four regions ``X&Y, X-Y, Y-X`` and outside both are non-empty."""
    inter = len(X & Y)
    return inter > 0 and len(X) > inter and len(Y) > inter and len(X | Y) < n


def is_crossfree(family: Sequence[frozenset], n: int) -> bool:
    fam = list(family)
    return not any(crosses(fam[p], fam[q], n)
                   for p in range(len(fam)) for q in range(p + 1, len(fam)))


def laminar_to_crossfree(cons) -> CrossFreeFamily:
    """Upper-bound-only description of a laminar feasible set.

    Each set contributes itself with bound ``U_j`` and its complement with
    bound ``R - L_j``.  Finite box bounds are treated as singleton sets.
    Repeated sets keep the smallest bound.
    """
    build_tree(cons)  # rejects non-laminar input
    n = cons.n
    base = [frozenset(int(i) for i in S) for S in cons.sets]
    lows = list(np.asarray(cons.L, dtype=float))
    ups = list(np.asarray(cons.U, dtype=float))
    for i in range(n):
        if np.isfinite(cons.l[i]) or np.isfinite(cons.u[i]):
            base.append(frozenset([i]))
            lows.append(float(cons.l[i]))
            ups.append(float(cons.u[i]))
    full = frozenset(range(n))
    order: list[frozenset] = []
    bound: dict[frozenset, float] = {}

    def add(S, r):
        if S not in bound:
            order.append(S)
            bound[S] = r
        else:
            bound[S] = min(bound[S], r)

    for S, r in zip(base, ups):
        add(S, float(r))
    for S, lo in zip(base, lows):
        add(full - S, float(cons.R - lo))
    sets = order
    return CrossFreeFamily(n, float(cons.R), sets, [bound[S] for S in sets],
                           is_crossfree(sets, n))
