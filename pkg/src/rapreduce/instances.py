"""JSON instance files and seeded random instances.

Files use 1-based set indices.  Infinite bounds are written as ``null``.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import MalformedFamily
from .model import QUADRATIC, ConstraintSpec, Domain, Kind, ObjectiveSpec
from .reduction import catalog

# ---------------------------------------------------------------------------
# file format


def _num(v: float):
    return None if not math.isfinite(v) else float(v)


def _vec_out(v) -> list:
    return [_num(float(t)) for t in v]


def _vec_in(raw, n: int, fill: float, what: str) -> np.ndarray:
    if raw is None:
        return np.full(n, fill)
    if not isinstance(raw, list):
        raise MalformedFamily(f"{what} must be a list")
    if len(raw) != n:
        raise MalformedFamily(f"{what} has {len(raw)} entries, expected {n}")
    return np.array([fill if t is None else float(t) for t in raw])


def instance_to_dict(obj: ObjectiveSpec, cons: ConstraintSpec,
                     dom: Domain = Domain.CONTINUOUS) -> dict:
    o = {"type": "quadratic" if obj.is_quadratic else "catalog",
         "a": _vec_out(obj.a), "b": _vec_out(obj.b)}
    if not obj.is_quadratic:
        o["f"] = obj.f.name
        o["f_params"] = dict(obj.f.params)
    c = {"kind": cons.kind.value, "R": float(cons.R),
         "l": _vec_out(cons.l), "u": _vec_out(cons.u)}
    if cons.m:
        c["sets"] = [[int(i) + 1 for i in S] for S in cons.sets]
        c["L"] = _vec_out(cons.L)
        c["U"] = _vec_out(cons.U)
    return {"objective": o, "constraints": c, "domain": Domain(dom).value}


def instance_from_dict(d: dict) -> tuple[ObjectiveSpec, ConstraintSpec, Domain]:
    try:
        o, c = d["objective"], d["constraints"]
        a = np.asarray(o["a"], dtype=float)
        b = np.asarray(o["b"], dtype=float)
        f = QUADRATIC
        if o.get("type", "quadratic") == "catalog":
            f = catalog(o["f"], **o.get("f_params", {}))
        kind = Kind(c.get("kind", "box"))
        n = len(a)
        sets = [[int(i) - 1 for i in S] for S in c.get("sets", [])]
        m = len(sets)
        cons = ConstraintSpec(
            n, float(c["R"]), kind,
            _vec_in(c.get("l"), n, -math.inf, "l"), _vec_in(c.get("u"), n, math.inf, "u"),
            sets, _vec_in(c.get("L"), m, -math.inf, "L"), _vec_in(c.get("U"), m, math.inf, "U"))
        dom = Domain(d.get("domain", "continuous"))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFamily(f"bad instance file: {exc}") from exc
    return ObjectiveSpec(a, b, f), cons, dom


def load_instance(path: str):
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def dumps(obj) -> str:
    """JSON text; Python's float repr already round-trips doubles exactly."""
    return json.dumps(obj, allow_nan=False)


# ---------------------------------------------------------------------------
# random instances


def _laminar_sets(n: int, m: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Up to ``m`` random laminar sets, built as nested intervals of a permutation."""
    perm = rng.permutation(n)
    sets: list[tuple[int, int]] = []
    spans = [(0, n)]
    while spans and len(sets) < m:
        lo, hi = spans.pop(int(rng.integers(len(spans))))
        if hi - lo < 2:
            continue
        k = int(rng.integers(1, 4))
        cuts = np.sort(rng.choice(np.arange(lo, hi + 1), size=min(2 * k, hi - lo + 1),
                                  replace=False))
        for s, e in zip(cuts[0::2], cuts[1::2]):
            if e > s and (s, e) != (lo, hi) and len(sets) < m:
                sets.append((int(s), int(e)))
                spans.append((int(s), int(e)))
    return [np.sort(perm[s:e]) for s, e in sets]


def _perturb(s, rng, integer: bool, spread: float):
    down = rng.exponential(spread, len(s))
    up = rng.exponential(spread, len(s))
    if integer:
        down, up = np.floor(down), np.floor(up)
    L = np.where(rng.random(len(s)) < 0.2, -math.inf, s - down)
    U = np.where(rng.random(len(s)) < 0.2, math.inf, s + up)
    return L, U


def random_instance(kind: Kind | str, n: int, rng: np.random.Generator,
                    dom: Domain = Domain.CONTINUOUS, m: int | None = None,
                    spread: float = 2.0, box_width: float = 10.0,
                    prefix: bool = False) -> tuple[np.ndarray, np.ndarray, ConstraintSpec]:
    """Feasible-by-construction random instance ``(a, b, cons)``.

    ``a ~ U(0.1, 10)``, ``b ~ U(-5, 5)``.  Box bounds are sorted uniform
    draws; the resource and set bounds come from a random point inside the
    box, with set bounds pushed outward by exponential amounts.
    """
    kind = Kind(kind)
    dom = Domain(dom)
    integer = dom is Domain.INTEGER
    a = rng.uniform(0.1, 10.0, n)
    b = rng.uniform(-5.0, 5.0, n)
    ends = np.sort(rng.uniform(-box_width, box_width, (n, 2)), axis=1)
    l, u = ends[:, 0], ends[:, 1]
    if integer:
        l, u = np.floor(l), np.ceil(u)
    x0 = rng.uniform(l, u)
    if integer:
        x0 = np.clip(np.round(x0), l, u)
    R = float(x0.sum())
    if m is None:
        m = max(1, n // 3)
    if kind is Kind.BOX:
        return a, b, ConstraintSpec.box(l, u, R)
    if kind is Kind.GBC:
        g = max(1, min(m, n))
        labels = np.concatenate([np.arange(g), rng.integers(0, g, n - g)])
        rng.shuffle(labels)
        groups = [np.flatnonzero(labels == j) for j in range(g)]
        L, U = _perturb(np.array([x0[G].sum() for G in groups]), rng, integer, spread)
        return a, b, ConstraintSpec.gbc(l, u, groups, L, U, R)
    if kind is Kind.NC:
        m = min(m, n - 1)
        sizes = np.sort(rng.choice(np.arange(1, n), size=m, replace=False)) if m > 0 \
            else np.zeros(0, dtype=np.int64)
        cs = np.cumsum(x0)
        L, U = _perturb(cs[sizes - 1] if m else np.zeros(0), rng, integer, spread)
        if prefix:
            return a, b, ConstraintSpec.nested_prefix(l, u, sizes, L, U, R)
        perm = rng.permutation(n)
        # element perm[t] plays the role of prefix position t
        ls, us, as_, bs = (np.empty(n) for _ in range(4))
        ls[perm], us[perm], as_[perm], bs[perm] = l, u, a, b
        chain = [np.sort(perm[:k]) for k in sizes]
        order = rng.permutation(m)
        return as_, bs, ConstraintSpec.nested(ls, us, [chain[j] for j in order],
                                              L[order], U[order], R)
    sets = _laminar_sets(n, m, rng)
    L, U = _perturb(np.array([x0[S].sum() for S in sets]), rng, integer, spread)
    return a, b, ConstraintSpec.laminar(n, sets, L, U, R, l, u)
