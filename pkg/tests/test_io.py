import csv
import json

import numpy as np
import pytest

from covsteer.io import (
    checkpoint_report,
    dumps_json,
    file_digest,
    load_json,
    load_solution,
    save_solution,
    solution_from_dict,
    solution_to_dict,
    write_paths_csv,
    write_solution_csv,
)
from covsteer.matcore import unvech
from covsteer.model import SteeringProblem


def test_json_uses_17_digits():
    text = dumps_json({"x": 0.1, "y": [1, 2.5], "z": None, "ok": True})
    assert '"x": 0.10000000000000001' in text
    assert json.loads(text) == {"x": 0.1, "y": [1, 2.5], "z": None, "ok": True}


def test_json_nonfinite_and_types():
    assert json.loads(dumps_json([float("nan")])) == [None]
    with pytest.raises(TypeError):
        dumps_json({"x": object()})


def test_solution_roundtrip(tmp_path, di_fit):
    path = tmp_path / "solution.json"
    save_solution(path, di_fit.solution_, p0=di_fit.p0_, trace=di_fit.trace_,
                  stm_residuals=di_fit.blocks_.residuals, problem_hash="sha256:abc")
    text = path.read_text(encoding="utf-8")
    assert dumps_json(load_json(path)) == text
    sol, extras = load_solution(path)
    for name in ("grid", "P", "Sigma", "K"):
        assert np.array_equal(getattr(sol, name), getattr(di_fit.solution_, name))
    assert sol.terminal_cost == di_fit.solution_.terminal_cost
    assert extras["problemHash"] == "sha256:abc" and extras["iterations"] == di_fit.n_iter_
    again = solution_to_dict(sol, p0=unvech(extras["p0"], 2),
                             trace=di_fit.trace_, stm_residuals=extras["stmResiduals"],
                             problem_hash=extras["problemHash"])
    assert dumps_json(again) == text


def test_solution_roundtrip_with_means(tmp_path, di_problem):
    from covsteer.estimator import CovarianceSteering

    p = SteeringProblem(di_problem.system, 0, 1, di_problem.sigma0, di_problem.sigmad,
                        mu0=[1.0, 0.0], mud=[0.0, 1.0])
    sol = CovarianceSteering(grid_steps=200).fit(p).solution_
    sol2, _ = solution_from_dict(json.loads(dumps_json(solution_to_dict(sol))))
    for name in ("mu", "z", "v"):
        assert np.array_equal(getattr(sol2, name), getattr(sol, name))


def test_solution_format_checked():
    with pytest.raises(ValueError):
        solution_from_dict({"format": "other"})


def test_solution_csv(tmp_path, di_fit):
    path = tmp_path / "solution.csv"
    write_solution_csv(path, di_fit.solution_)
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "P0", "P1", "P2", "Sigma0", "Sigma1", "Sigma2", "K1_1", "K1_2"]
    assert len(rows) == len(di_fit.solution_.grid) + 1
    assert float(rows[-1][4]) == di_fit.solution_.Sigma[-1][0, 0]


def test_paths_csv_and_report(tmp_path, di_fit):
    batch = di_fit.sample(5, dt=5e-4, seed=0)
    path = tmp_path / "paths.csv"
    write_paths_csv(path, batch)
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["path", "t", "x1", "x2", "u1"]
    assert len(rows) == 1 + 5 * 2001
    report = checkpoint_report(batch, di_fit.solution_)
    assert [c["t"] for c in report["checkpoints"]] == [0.0, 0.5, 1.0]
    assert "relativeGap" in report["checkpoints"][-1]
    single = checkpoint_report(di_fit.sample(1, dt=1e-2))
    assert "sampleCov" not in single["checkpoints"][0]


def test_file_digest(tmp_path):
    path = tmp_path / "x.txt"
    path.write_bytes(b"abc")
    assert file_digest(path) == (
        "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
