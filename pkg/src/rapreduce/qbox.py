"""Quadratic resource allocation over a box: ``min sum x_i^2/(2a_i) + b_i x_i``
subject to ``sum x_i = R`` and ``l <= x <= u``.

Every coordinate of the optimum has the form ``clamp(a_i (lam - b_i), l_i, u_i)``
for one multiplier ``lam``; the solvers differ in how they find it.
"""

from __future__ import annotations

import math

import numpy as np

from .constants import EPS_FEAS
from .errors import InfeasibleInstance
from .model import Solution


def _prep(a, b, l, u):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    return a, b, l, u


def _check_range(l, u, R, tol=EPS_FEAS):
    lo, hi = l.sum(), u.sum()
    if R < lo - tol or R > hi + tol:
        raise InfeasibleInstance(
            f"resource {R} lies outside the reachable range [{lo}, {hi}]",
            residual=float(R - (lo if R < lo else hi)))
    return lo, hi


def allocation(a, b, l, u, lam) -> np.ndarray:
    """``x(lam) = clamp(a (lam - b), l, u)``."""
    return np.clip(a * (lam - b), l, u)


def _objective(a, b, x) -> float:
    return math.fsum(x * x / (2 * a) + b * x)


def solve_qbox_continuous(a, b, l, u, R) -> Solution:
    """Breakpoint search.

    The map ``lam -> sum clamp(a (lam - b), l, u)`` is piecewise linear and
    non-decreasing with kinks at ``b + l/a`` and ``b + u/a``.  After sorting
    the kinks, a binary search finds the segment that reaches ``R`` and the
    multiplier follows from the linear equation on that segment.  When the
    multiplier is not unique the smallest valid one is returned.
    """
    a, b, l, u = _prep(a, b, l, u)
    R = float(R)
    n = len(a)
    if n == 0:
        if abs(R) > EPS_FEAS:
            raise InfeasibleInstance("no variables but a nonzero resource")
        return Solution(np.zeros(0), 0.0, None, solver="breakpoint")
    _check_range(l, u, R)
    lo_bp = b + l / a
    hi_bp = b + u / a
    bps = np.concatenate([lo_bp, hi_bp])
    bps = np.sort(bps[np.isfinite(bps)])

    def total(lam):
        return allocation(a, b, l, u, lam).sum()

    # first breakpoint whose total reaches R
    left, right = 0, len(bps)
    while left < right:
        mid = (left + right) // 2
        if total(bps[mid]) >= R:
            right = mid
        else:
            left = mid + 1
    k = left
    if k < len(bps) and total(bps[k]) == R:
        lam = bps[k]
    else:
        seg_lo = bps[k - 1] if k > 0 else -math.inf
        seg_hi = bps[k] if k < len(bps) else math.inf
        lam = _solve_segment(a, b, l, u, R, lo_bp, hi_bp, seg_lo, seg_hi)
    x = allocation(a, b, l, u, lam)
    return Solution(x, _objective(a, b, x), float(lam), solver="breakpoint")


def _solve_segment(a, b, l, u, R, lo_bp, hi_bp, seg_lo, seg_hi):
    """Multiplier on the open segment ``(seg_lo, seg_hi)`` where the total is linear."""
    free = (lo_bp <= seg_lo) & (hi_bp >= seg_hi) & (lo_bp < hi_bp)
    at_upper = hi_bp <= seg_lo
    at_lower = ~free & ~at_upper
    slope = a[free].sum()
    if slope <= 0:
        # flat segment: R already met by the fixed part, take its left end
        return seg_lo if np.isfinite(seg_lo) else seg_hi
    fixed = u[at_upper].sum() + l[at_lower].sum()
    return (R - fixed + (a[free] * b[free]).sum()) / slope


def solve_qbox_variable_fixing(a, b, l, u, R) -> Solution:
    """Variable fixing.

    Solve the problem without bounds on the active set, where
    ``lam = (R_active + sum a_i b_i) / sum a_i``.  If the total overshoot
    below lower bounds outweighs the overshoot above upper bounds, the
    variables under their lower bound are fixed there, otherwise those
    above their upper bound are fixed; then repeat on the rest.
    """
    a, b, l, u = _prep(a, b, l, u)
    R = float(R)
    n = len(a)
    _check_range(l, u, R)
    x = np.empty(n)
    active = l < u
    x[~active] = l[~active]
    lam = None
    while active.any():
        idx = np.flatnonzero(active)
        rest = R - x[~active].sum()
        aa, bb = a[idx], b[idx]
        lam = (rest + (aa * bb).sum()) / aa.sum()
        trial = aa * (lam - bb)
        below = trial < l[idx]
        above = trial > u[idx]
        if not below.any() and not above.any():
            x[idx] = trial
            break
        under = (l[idx][below] - trial[below]).sum()
        over = (trial[above] - u[idx][above]).sum()
        if below.any() and under >= over:
            fix = idx[below]
            x[fix] = l[fix]
            active[fix] = False
        if above.any() and over >= under:
            fix = idx[above]
            x[fix] = u[fix]
            active[fix] = False
    return Solution(x, _objective(a, b, x), None if lam is None else float(lam),
                    solver="fixing")


def _count(a, b, l, u, lam):
    """Integer allocation ``clamp(floor(a (lam - b) + 1/2), l, u)``."""
    return np.clip(np.floor(a * (lam - b) + 0.5), l, u)


def solve_qbox_integer(a, b, l, u, R) -> Solution:
    """Integer box solver by a threshold on unit marginal costs.

    Raising ``x_i`` from ``v`` to ``v + 1`` costs ``(v + 1/2)/a_i + b_i``.
    All unit steps cheaper than a threshold are taken; the threshold is
    located by bisection on the monotone step count, and the last few units
    go to the tied variables in ascending index order.
    """
    a, b, l, u = _prep(a, b, l, u)
    R = float(R)
    n = len(a)
    _check_range(l, u, R, tol=0.0)
    if n == 0:
        return Solution(np.zeros(0), 0.0, None, solver="integer")

    def total(lam):
        return _count(a, b, l, u, lam).sum()

    # bracket the threshold
    fin_l = np.where(np.isfinite(l), l, 0.0)
    fin_u = np.where(np.isfinite(u), u, 0.0)
    lo = float(np.min(b + (fin_l - 0.5) / a)) - 1.0
    hi = float(np.max(b + (fin_u + 0.5) / a)) + 1.0
    span = 1.0
    while total(lo) >= R and np.any(np.isneginf(l)):
        lo -= span
        span *= 2
    span = 1.0
    while total(hi) < R:
        hi += span
        span *= 2
    if total(lo) >= R:
        # R equals sum(l): nothing to distribute
        x = l.copy()
        return Solution(x, _objective(a, b, x), None, solver="integer")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if total(mid) >= R:
            hi = mid
        else:
            lo = mid
    base = _count(a, b, l, u, lo)
    top = _count(a, b, l, u, hi)
    need = int(round(R - base.sum()))
    x = base.copy()
    for i in np.flatnonzero(top > base):
        if need <= 0:
            break
        step = min(need, int(top[i] - base[i]))
        x[i] += step
        need -= step
    return Solution(x, _objective(a, b, x), _last_marginal(a, b, l, x), solver="integer")


def _last_marginal(a, b, l, x) -> float | None:
    """Largest unit cost actually paid, i.e. the threshold multiplier."""
    raised = x > l
    if not raised.any():
        return None
    return float(np.max((x[raised] - 0.5) / a[raised] + b[raised]))
