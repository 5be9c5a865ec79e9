import numpy as np
import pytest

from rapreduce.instances import random_instance
from rapreduce.model import Domain

KINDS = ("box", "gbc", "nested", "laminar")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def small_instances(seed, count, n_range=(2, 7), dom=Domain.CONTINUOUS, **kw):
    """Deterministic stream of (kind, a, b, cons) cycling over all kinds."""
    rng = np.random.default_rng(seed)
    for t in range(count):
        kind = KINDS[t % len(KINDS)]
        n = int(rng.integers(*n_range))
        m = int(rng.integers(1, n + 2))
        a, b, cons = random_instance(kind, n, rng, dom, m=m, **kw)
        yield kind, a, b, cons


def random_route(rng, n=None):
    """Route whose windows are built around one feasible voyage."""
    from rapreduce.applications import RouteSpec
    n = int(rng.integers(2, 12)) if n is None else n
    d = rng.uniform(20, 200, n)
    v_min, v_max = 8.0, 20.0
    v = rng.uniform(v_min, v_max, n)
    t = np.concatenate([[0.0], np.cumsum(d / v)])
    slack = rng.uniform(0, 3, (2, n - 1))
    return RouteSpec(d.tolist(), (t[1:-1] - slack[0]).tolist(), (t[1:-1] + slack[1]).tolist(),
                     0.0, float(t[-1]), v_min, v_max)


def random_tasks(rng, n=None):
    """Agreeable task set that admits a back-to-back schedule from time 0."""
    from rapreduce.applications import TaskSpec
    n = int(rng.integers(1, 12)) if n is None else n
    w = rng.uniform(1, 10, n)
    s_max = 5.0
    x = w / rng.uniform(1.0, s_max, n)
    finish = np.cumsum(x)
    start = finish - x
    A = start - rng.uniform(0, 1, n) * start
    A = np.maximum.accumulate(A)
    D = np.maximum.accumulate(finish + rng.uniform(0, 2, n))
    return TaskSpec(w.tolist(), A.tolist(), D.tolist(), s_max)


def random_storage(rng, n=None, objective="flatten"):
    from rapreduce.applications import StorageSpec
    n = int(rng.integers(2, 24)) if n is None else n
    p = rng.uniform(0, 5, n)
    cap = float(rng.uniform(5, 20))
    s0, s1 = (float(v) for v in rng.uniform(0, cap, 2))
    # the straight path from s0 to s1 keeps every level inside [0, cap]
    reach = abs(s1 - s0) / n
    return StorageSpec(p.tolist(), 1.0, cap, s0, s1, -3.0 - reach, 3.0 + reach,
                       objective, M=float(np.median(p)))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one verdict line per acceptance criterion."""
    def emit(label, ok, detail):
        line = f"{label:<28} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
