"""Adapters from application models to allocation instances and back.

Each ``*_to_rap`` function returns an :class:`AppProblem` holding the
instance plus the raw data needed to turn a solution back into domain
quantities with :func:`recover`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import EPS_FEAS
from .errors import DomainViolation
from .model import (
    QUADRATIC,
    ConstraintSpec,
    ConvexFunction,
    Domain,
    ObjectiveSpec,
    Solution,
    validate_instance,
)
from .reduction import (
    ABS,
    NEG_LOG,
    RECIPROCAL,
    reciprocal_power,
    solve_separable,
    threshold,
)


def _pos(name, v):
    v = np.asarray(v, dtype=float).ravel()
    if np.any(~(v > 0)):
        raise ValueError(f"{name} must be positive")
    return v


@dataclass
class AppProblem:
    app: str
    objective: ObjectiveSpec
    constraints: ConstraintSpec
    domain: Domain
    data: dict = field(default_factory=dict)

    def descriptor(self) -> dict:
        """JSON-ready record from which :func:`recover` rebuilds the report."""
        return {"app": self.app, "data": _jsonable(self.data)}


def _jsonable(d):
    if isinstance(d, dict):
        return {k: _jsonable(v) for k, v in d.items()}
    if isinstance(d, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in d]
    if isinstance(d, (np.floating, np.integer)):
        return d.item()
    return d


# ---------------------------------------------------------------------------
# channel power


def channel_power_to_rap(B, c, P_tot: float, P_bar=None) -> AppProblem:
    """Capacity maximization ``max sum B_i log(1 + c_i x_i)`` over a power budget.

    Up to a constant the negated capacity equals ``sum B_i f(x_i/B_i + 1/(B_i c_i))``
    with ``f = -log``.
    """
    B, c = _pos("B", B), _pos("c", c)
    if len(B) != len(c):
        raise ValueError("B and c differ in length")
    cap = np.full(len(B), math.inf) if P_bar is None else np.asarray(P_bar, dtype=float)
    obj = ObjectiveSpec(B, 1.0 / (B * c), NEG_LOG)
    cons = ConstraintSpec.box(np.zeros(len(B)), cap, P_tot)
    validate_instance(obj, cons)
    return AppProblem("channel", obj, cons, Domain.CONTINUOUS,
                      {"B": B, "c": c, "P_tot": P_tot, "P_bar": cap})


def mse_power_to_rap(w, A, D, P_tot: float, P_bar=None, check_points: int = 5) -> AppProblem:
    """Power split minimizing ``sum w_i / (A_i x_i + D_i)``."""
    w, A, D = _pos("w", w), _pos("A", A), _pos("D", D)
    if not len(w) == len(A) == len(D):
        raise ValueError("w, A and D differ in length")
    a = np.sqrt(w / A)
    b = D / np.sqrt(w * A)
    obj = ObjectiveSpec(a, b, RECIPROCAL)
    xs = np.linspace(0.0, max(float(P_tot), 1.0), check_points)[:, None]
    direct = w / (A * xs + D)
    if not np.allclose(obj.terms(xs), direct, rtol=1e-9, atol=0.0):
        raise DomainViolation("scaled form does not reproduce w / (A x + D)")
    cap = np.full(len(w), math.inf) if P_bar is None else np.asarray(P_bar, dtype=float)
    cons = ConstraintSpec.box(np.zeros(len(w)), cap, P_tot)
    validate_instance(obj, cons)
    return AppProblem("mse", obj, cons, Domain.CONTINUOUS,
                      {"w": w, "A": A, "D": D, "P_tot": P_tot, "P_bar": cap})


# ---------------------------------------------------------------------------
# storage


@dataclass
class StorageSpec:
    p: list                  # baseline consumption per interval
    dt: float
    capacity: float
    S_start: float
    S_end: float
    X_min: float
    X_max: float
    objective: str = "flatten"    # flatten | autarky | peak
    M: float = 0.0

    def __post_init__(self):
        if not (0 <= self.S_start <= self.capacity and 0 <= self.S_end <= self.capacity):
            raise ValueError("storage levels must lie in [0, capacity]")
        if self.X_min > self.X_max:
            raise ValueError("X_min exceeds X_max")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.objective not in ("flatten", "autarky", "peak"):
            raise ValueError(f"unknown storage objective {self.objective!r}")


def storage_function(spec: StorageSpec) -> ConvexFunction:
    return {"flatten": QUADRATIC, "autarky": ABS,
            "peak": threshold(spec.M)}[spec.objective]


def storage_to_rap(spec: StorageSpec) -> AppProblem:
    """Charging rates ``x`` with storage level kept in ``[0, capacity]``.

    The level after interval ``j`` is ``S_start + dt * (x_1 + ... + x_j)``,
    so each prefix sum is bounded; the last one is fixed by ``S_end``.
    """
    p = np.asarray(spec.p, dtype=float)
    n = len(p)
    lo = -spec.S_start / spec.dt
    hi = (spec.capacity - spec.S_start) / spec.dt
    sizes = np.arange(1, n)
    obj = ObjectiveSpec(np.ones(n), p, storage_function(spec))
    cons = ConstraintSpec.nested_prefix(
        np.full(n, spec.X_min), np.full(n, spec.X_max), sizes,
        np.full(n - 1, lo), np.full(n - 1, hi), (spec.S_end - spec.S_start) / spec.dt)
    return AppProblem("storage", obj, cons, Domain.CONTINUOUS, asdict(spec))


# ---------------------------------------------------------------------------
# stratified sampling


def stratified_to_rap(N_sizes, S2, R: int, lo=None, hi=None) -> AppProblem:
    """Sample sizes minimizing ``sum N_i^2 S_i^2 / x_i`` with ``sum x = R``.

    The weight ``N_i^2 S_i^2`` enters as ``a_i^2`` because
    ``a f(x/a) = a^2 / x`` for ``f = 1/y``.  Strata with zero variance are
    fixed at their lower bound and left out of the instance.
    """
    N = np.asarray(N_sizes, dtype=float)
    S2 = np.asarray(S2, dtype=float)
    lo = np.ones(len(N)) if lo is None else np.asarray(lo, dtype=float)
    hi = N.copy() if hi is None else np.asarray(hi, dtype=float)
    if np.any(N < 1) or np.any(S2 < 0):
        raise ValueError("strata need N >= 1 and S^2 >= 0")
    if np.any(lo > hi) or np.any(hi > N):
        raise ValueError("sample bounds must satisfy lo <= hi <= N")
    weight = N * N * S2
    live = weight > 0
    if np.any(lo[live] < 1):
        i = int(np.flatnonzero(live & (lo < 1))[0])
        raise DomainViolation(f"stratum {i + 1} needs at least one sample")
    fixed = float(lo[~live].sum())
    obj = ObjectiveSpec(np.sqrt(weight[live]), np.zeros(int(live.sum())), RECIPROCAL)
    cons = ConstraintSpec.box(lo[live], hi[live], R - fixed)
    validate_instance(obj, cons, Domain.INTEGER)
    return AppProblem("strata", obj, cons, Domain.INTEGER,
                      {"N": N, "S2": S2, "R": R, "lo": lo, "hi": hi})


# ---------------------------------------------------------------------------
# vessel speed


@dataclass
class RouteSpec:
    d: list                   # leg distances, one per leg
    A: list                   # window opening at each intermediate port
    D: list                   # window closing at each intermediate port
    t_start: float
    t_end: float
    v_min: float
    v_max: float

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if np.any(~(d > 0)):
            raise ValueError("leg distances must be positive")
        if len(self.A) != len(d) - 1 or len(self.D) != len(d) - 1:
            raise ValueError("need one time window per intermediate port")
        if np.any(np.asarray(self.A) > np.asarray(self.D)):
            raise ValueError("a time window opens after it closes")
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")


def vessel_to_rap(route: RouteSpec, fuel_exponent: float = 2.0) -> AppProblem:
    """Leg travel times ``x_i = d_i / v_i`` under port time windows.

    Fuel per unit distance ``c(v) = v^k`` gives the cost ``d_i g(x_i / d_i)``
    with ``g(y) = y^(-k)``.
    """
    d = np.asarray(route.d, dtype=float)
    n = len(d)
    obj = ObjectiveSpec(d, np.zeros(n), reciprocal_power(fuel_exponent))
    cons = ConstraintSpec.nested_prefix(
        d / route.v_max, d / route.v_min, np.arange(1, n),
        np.asarray(route.A, dtype=float) - route.t_start,
        np.asarray(route.D, dtype=float) - route.t_start,
        route.t_end - route.t_start)
    return AppProblem("vessel", obj, cons, Domain.CONTINUOUS,
                      {**asdict(route), "fuel_exponent": fuel_exponent})


# ---------------------------------------------------------------------------
# speed scaling


@dataclass
class TaskSpec:
    w: list
    A: list
    D: list
    s_max: float

    def __post_init__(self):
        w, A, D = (np.asarray(v, dtype=float) for v in (self.w, self.A, self.D))
        if not len(w) == len(A) == len(D):
            raise ValueError("w, A and D differ in length")
        if np.any(~(w > 0)) or np.any(~(D > A)):
            raise ValueError("tasks need positive work and D > A")
        if np.any(np.diff(A) < 0) or np.any(np.diff(D) < 0):
            raise ValueError("tasks must be listed with agreeable arrivals and deadlines")
        if not self.s_max > 0:
            raise ValueError("s_max must be positive")


def speedscale_to_rap(tasks: TaskSpec, power_exponent: float = 3.0) -> AppProblem:
    """Execution times ``x_i = w_i / s_i`` for back-to-back tasks from time 0.

    Power ``p(s) = s^k`` gives the energy ``w_i g(x_i / w_i)`` with
    ``g(y) = y^(1-k)``.
    """
    w, A, D = (np.asarray(v, dtype=float) for v in (tasks.w, tasks.A, tasks.D))
    n = len(w)
    if power_exponent <= 1:
        raise ValueError("power exponent must exceed 1")
    obj = ObjectiveSpec(w, np.zeros(n), reciprocal_power(power_exponent - 1))
    cons = ConstraintSpec.nested_prefix(w / tasks.s_max, D - A, np.arange(1, n),
                                        A[1:], D[:-1], D[-1])
    return AppProblem("speed", obj, cons, Domain.CONTINUOUS,
                      {**asdict(tasks), "power_exponent": power_exponent})


# ---------------------------------------------------------------------------
# recovery


def recover(app: str, data: dict, x) -> dict:
    """Map an instance solution back to domain quantities with a compliance report."""
    x = np.asarray(x, dtype=float)
    return _RECOVER[app](data, x)


def _rec_channel(data, x):
    B, c = np.asarray(data["B"], float), np.asarray(data["c"], float)
    rate = B * np.log1p(c * x)
    return {"power": x.tolist(), "rate": rate.tolist(), "capacity": math.fsum(rate)}


def _rec_mse(data, x):
    w, A, D = (np.asarray(data[k], float) for k in ("w", "A", "D"))
    err = w / (A * x + D)
    return {"power": x.tolist(), "error": err.tolist(), "total_error": math.fsum(err)}


def _rec_storage(data, x):
    p = np.asarray(data["p"], float)
    level = data["S_start"] + data["dt"] * np.cumsum(x)
    ok = bool(np.all(level >= -EPS_FEAS) and np.all(level <= data["capacity"] + EPS_FEAS)
              and abs(level[-1] - data["S_end"]) <= EPS_FEAS * max(1.0, data["capacity"])
              and np.all(x >= data["X_min"] - EPS_FEAS) and np.all(x <= data["X_max"] + EPS_FEAS))
    return {"rate": x.tolist(), "level": level.tolist(), "load": (x + p).tolist(),
            "peak_load": float(np.max(x + p)), "feasible": ok}


def _rec_strata(data, x):
    N, S2 = np.asarray(data["N"], float), np.asarray(data["S2"], float)
    lo = np.asarray(data["lo"], float)
    live = N * N * S2 > 0
    full = lo.copy()
    full[live] = x
    var = math.fsum(N[live] ** 2 * S2[live] / full[live] - N[live] * S2[live])
    return {"samples": [int(round(v)) for v in full], "variance": var,
            "feasible": bool(round(full.sum()) == data["R"])}


def _rec_vessel(data, x):
    d = np.asarray(data["d"], float)
    v = d / x
    t = data["t_start"] + np.concatenate([[0.0], np.cumsum(x)])
    A, D = np.asarray(data["A"], float), np.asarray(data["D"], float)
    inner = t[1:-1]
    tol = EPS_FEAS * max(1.0, abs(data["t_end"]))
    windows = bool(np.all(inner >= A - tol) and np.all(inner <= D + tol))
    speeds = bool(np.all(v >= data["v_min"] * (1 - 1e-9)) and
                  np.all(v <= data["v_max"] * (1 + 1e-9)))
    return {"speed": v.tolist(), "arrival": t.tolist(), "windows_met": windows,
            "speed_limits_met": speeds,
            "on_time": bool(abs(t[-1] - data["t_end"]) <= tol)}


def _rec_speed(data, x):
    w, A, D = (np.asarray(data[k], float) for k in ("w", "A", "D"))
    s = w / x
    start = np.concatenate([[0.0], np.cumsum(x)[:-1]])
    end = start + x
    tol = EPS_FEAS * max(1.0, float(D[-1]))
    return {"speed": s.tolist(), "start": start.tolist(), "finish": end.tolist(),
            "deadlines_met": bool(np.all(end <= D + tol)),
            "arrivals_met": bool(np.all(start >= A - tol)),
            "speed_limit_met": bool(np.all(s <= data["s_max"] * (1 + 1e-9))),
            "note": "schedule assumes no idle time and starts at time 0"}


_RECOVER = {"channel": _rec_channel, "mse": _rec_mse, "storage": _rec_storage,
            "strata": _rec_strata, "vessel": _rec_vessel, "speed": _rec_speed}

APPS = tuple(_RECOVER)


def solve_app(problem: AppProblem, solver: str = "auto") -> tuple[Solution, dict]:
    """Solve through the quadratic instance and return the domain report."""
    sol = solve_separable(problem.objective, problem.constraints, problem.domain, solver)
    return sol, recover(problem.app, problem.data, sol.x)
