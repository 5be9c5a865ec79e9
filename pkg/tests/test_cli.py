import json
import math
import subprocess
import sys

import numpy as np

from rapreduce.cli import bench_rows, main
from rapreduce.instances import instance_from_dict, instance_to_dict, random_instance
from rapreduce.model import Domain, ObjectiveSpec
from rapreduce.reduction import EXP, threshold


def write(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


CHAIN = {"objective": {"type": "quadratic", "a": [1, 1, 1], "b": [0, 0, 0]},
         "constraints": {"kind": "nested", "R": 3, "l": [0, 0, 0], "u": [3, 3, 3],
                         "sets": [[1]], "L": [None], "U": [0.5]},
         "domain": "continuous"}


def test_solve_and_verify(tmp_path, capsys):
    inst = write(tmp_path, "chain.json", CHAIN)
    code, out, _ = run(capsys, "solve", inst)
    res = json.loads(out)
    assert code == 0 and res["certified"] and res["tight_sets"] == [1]
    assert np.allclose(res["x"], [0.5, 1.25, 1.25], atol=1e-12)
    sol = write(tmp_path, "sol.json", res)
    code, out, _ = run(capsys, "verify", inst, sol)
    assert code == 0 and json.loads(out)["optimal"]


def test_verify_flags_perturbed_point(tmp_path, capsys):
    inst = write(tmp_path, "chain.json", CHAIN)
    sol = write(tmp_path, "sol.json", [0.5, 1.0, 1.5])
    code, out, _ = run(capsys, "verify", inst, sol)
    rep = json.loads(out)
    assert code == 1 and not rep["optimal"] and sorted(rep["witness"]) == [2, 3]


def test_verify_infeasible_point(tmp_path, capsys):
    inst = write(tmp_path, "chain.json", CHAIN)
    sol = write(tmp_path, "sol.json", [1, 1, 1])
    code, out, _ = run(capsys, "verify", inst, sol)
    rep = json.loads(out)
    assert code == 2 and rep["violations"][0] == {"what": "set", "index": 1, "residual": 0.5}


def test_infeasible_instance_exit_code(tmp_path, capsys):
    bad = json.loads(json.dumps(CHAIN))
    bad["constraints"]["R"] = 20
    code, _, err = run(capsys, "solve", write(tmp_path, "bad.json", bad))
    assert code == 2 and "INFEASIBLE" in err


def test_malformed_inputs(tmp_path, capsys):
    crossing = json.loads(json.dumps(CHAIN))
    crossing["constraints"].update(kind="laminar", sets=[[1, 2], [2, 3]], L=[0, 0], U=[5, 5])
    code, _, err = run(capsys, "solve", write(tmp_path, "x.json", crossing))
    assert code == 3 and "MALFORMED_FAMILY" in err
    code, _, _ = run(capsys, "solve", write(tmp_path, "y.json", {"objective": {}}))
    assert code == 3
    code, _, _ = run(capsys, "solve", str(tmp_path / "missing.json"))
    assert code == 3


def test_catalog_objective_file(tmp_path, capsys):
    inst = {"objective": {"type": "catalog", "f": "threshold", "f_params": {"M": 0.5},
                          "a": [1, 1], "b": [0, 1]},
            "constraints": {"kind": "box", "R": 2, "l": [-3, -3], "u": [3, 3]}}
    code, out, _ = run(capsys, "solve", write(tmp_path, "t.json", inst))
    assert code == 0 and np.allclose(json.loads(out)["x"], [1.5, 0.5])


def test_transform_solve_recover(tmp_path, capsys):
    route = {"d": [50, 50, 50], "A": [0, 0], "D": [100, 100], "t_start": 0, "t_end": 15,
             "v_min": 5, "v_max": 20}
    code, out, _ = run(capsys, "transform", "vessel", write(tmp_path, "route.json", route))
    assert code == 0
    inst = write(tmp_path, "inst.json", json.loads(out))
    code, out, _ = run(capsys, "solve", inst)
    sol = write(tmp_path, "sol.json", json.loads(out))
    code, out, _ = run(capsys, "recover", inst, sol)
    rep = json.loads(out)
    assert code == 0 and np.allclose(rep["speed"], 10) and rep["windows_met"]


def test_transform_unknown_app(tmp_path, capsys):
    code, _, err = run(capsys, "transform", "routing", write(tmp_path, "r.json", {}))
    assert code == 3 and "unknown application" in err


def test_bench_is_deterministic():
    rows1 = list(bench_rows(["box", "nested"], [200, 400], seed=3, repetitions=2))
    rows2 = list(bench_rows(["box", "nested"], [200, 400], seed=3, repetitions=2))
    strip = [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows1]
    assert strip == [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows2]
    assert all(r["certified"] for r in rows1) and len(rows1) == 8


def test_bench_csv(capsys):
    code, out, _ = run(capsys, "bench", "--kinds", "laminar", "--sizes", "100", "--seed", "1")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "kind,n,m,solver,wall_ms,certified"
    assert lines[1].startswith("laminar,100,") and lines[1].endswith("True")


def test_instance_round_trip():
    rng = np.random.default_rng(0)
    for kind in ("box", "gbc", "nested", "laminar"):
        a, b, cons = random_instance(kind, 9, rng, Domain.INTEGER, m=3)
        for f in (None, EXP, threshold(2.0)):
            obj = ObjectiveSpec(a, b) if f is None else ObjectiveSpec(a, b, f)
            d = json.loads(json.dumps(instance_to_dict(obj, cons, Domain.INTEGER)))
            obj2, cons2, dom2 = instance_from_dict(d)
            assert dom2 is Domain.INTEGER and obj2.f.name == obj.f.name
            assert np.array_equal(obj2.a, a) and np.array_equal(obj2.b, b)
            assert np.array_equal(cons2.l, cons.l) and np.array_equal(cons2.u, cons.u)
            assert np.array_equal(cons2.L, cons.L) and np.array_equal(cons2.U, cons.U)
            assert [list(S) for S in cons2.sets] == [list(S) for S in cons.sets]
            assert cons2.R == cons.R and cons2.kind is cons.kind


def test_float_output_round_trips(tmp_path, capsys):
    inst = json.loads(json.dumps(CHAIN))
    inst["objective"]["a"] = [1 / 3, math.pi, 0.1]
    code, out, _ = run(capsys, "solve", write(tmp_path, "f.json", inst))
    x = json.loads(out)["x"]
    assert code == 0 and all(float(repr(v)) == v for v in x)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rapreduce", "--help"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "solve" in res.stdout
