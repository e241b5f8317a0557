import csv
import json

import pytest

from ccopf.cli import main
from ccopf.linpoint import merit_order_dispatch
from ccopf.network import load_network

from _util import case_path


def _solve(tmp_path, *args, name="case5.json", sub="out"):
    out = tmp_path / sub
    code = main(["solve", "--case", case_path(name), "--out", str(out), *args])
    return code, out


def test_usage_error_exits_one(tmp_path):
    code, _ = _solve(tmp_path, "--eps", "0.6")
    assert code == 1
    assert main(["solve", "--case", str(tmp_path / "nope.json")]) == 1


def test_det_objective_against_merit_order(tmp_path):
    code, out = _solve(tmp_path, "--model", "det")
    assert code == 0
    doc = json.loads((out / "solution.json").read_text())
    net = load_network(case_path("case5.json"))
    p_G = doc["primal"]["p_G"]
    # with only the dispatch bounds active, the OPF is the merit order at its own total
    p, _ = merit_order_dispatch(net, sum(p_G))
    cost = sum(g.cost(pi) for g, pi in zip(net.generators, p))
    assert doc["objective"] == pytest.approx(cost, rel=1e-6)
    # linearized losses stay close to the nonlinear power-flow losses
    assert sum(p_G) == pytest.approx(sum(doc["operating_point"]["p_G"]), abs=1e-2)
    header = (out / "prices.csv").read_text().splitlines()[0]
    assert header == "bus,lmp_p,lmp_q,chi_tilde,y_q,y_v,y_fp,y_fq"


def test_zero_penalty_va_matches_eqv(tmp_path):
    objs = {}
    for model in ("eqv-cc", "va-cc"):
        code, out = _solve(tmp_path, "--model", model, "--psi", "0", sub=model)
        assert code == 0
        objs[model] = json.loads((out / "solution.json").read_text())["objective"]
    assert objs["va-cc"] == pytest.approx(objs["eqv-cc"], rel=1e-6)


def test_infeasible_reserve_exits_two(tmp_path):
    code, _ = _solve(tmp_path, "--model", "gen-cc", "--rel-std", "50", name="case2.json")
    assert code == 2


def test_validate_is_reproducible(tmp_path):
    code, out = _solve(tmp_path, "--model", "eqv-cc", name="mc5.json")
    assert code == 0
    sol = str(out / "solution.json")
    texts = []
    for k in range(2):
        dest = tmp_path / f"val{k}"
        code = main(["validate", "--solution", sol, "--seed", "5", "--samples", "2000",
                     "--out", str(dest)])
        assert code == 0
        texts.append((dest / "validation.json").read_bytes())
    assert texts[0] == texts[1]
    assert json.loads(texts[0])["schema_version"] == 1


def test_validate_flags_unprotected_schedule(tmp_path):
    # the deterministic schedule sits on its limits, so about half the draws violate them
    code, out = _solve(tmp_path, "--model", "det", name="mc5.json")
    assert code == 0
    code = main(["validate", "--solution", str(out / "solution.json"), "--seed", "1",
                 "--samples", "2000"])
    assert code == 3


def test_validate_without_solution(tmp_path):
    assert main(["validate", "--solution", str(tmp_path / "missing.json"), "--seed", "1"]) == 1
    doc = tmp_path / "failed.json"
    code, out = _solve(tmp_path, "--model", "det")
    data = json.loads((out / "solution.json").read_text())
    del data["policy"]
    data["status"] = "Numerical failure"
    doc.write_text(json.dumps(data))
    assert main(["validate", "--solution", str(doc), "--seed", "1"]) == 1


def test_sweep_table(tmp_path):
    out = tmp_path / "sweep"
    args = ["sweep", "--case", case_path("case2.json"), "--out", str(out),
            "--eps", "0.1", "--eps", "0.01"]
    for psi in ("0.1", "1", "10", "100", "1000"):
        args += ["--psi", psi]
    assert main(args) == 0
    lines = (out / "table.csv").read_text().splitlines()
    assert lines[0] == "# schema_version=1"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 2 * (3 + 5)
    assert [r["model"] for r in rows[:8]] == ["det", "gen-cc", "eqv-cc"] + ["va-cc"] * 5
    assert all(r["status"] == "Optimal" for r in rows)
    tidy = (out / "prices_tidy.csv").read_text().splitlines()
    assert tidy[0] == "bus,quantity,model,value"


def test_linpoint_command_feeds_solve(tmp_path):
    point = tmp_path / "point.json"
    assert main(["linpoint", "--case", case_path("case5.json"), "--out", str(point)]) == 0
    code, out = _solve(tmp_path, "--model", "det", "--lin-point", str(point))
    assert code == 0
    doc = json.loads((out / "solution.json").read_text())
    assert doc["operating_point"] == json.loads(point.read_text())


def test_solver_log_flag(tmp_path):
    code, out = _solve(tmp_path, "--model", "gen-cc", "--solver-log")
    assert code == 0
    lines = (out / "solver.jsonl").read_text().splitlines()
    assert lines and "r_dual" in json.loads(lines[0])
