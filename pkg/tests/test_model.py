import json
import warnings

import numpy as np
import pytest

from covsteer.exceptions import OutOfHorizon
from covsteer.model import (
    CW_ORBITAL_RATE,
    LtvSystem,
    ProblemFileError,
    SolverConfig,
    SteeringProblem,
    dump_problem,
    eval_system,
    load_problem,
    make_clohessy_wiltshire,
    make_double_integrator,
    problem_from_dict,
    problem_to_dict,
    validate,
)


def codes(problem):
    return [v.code for v in validate(problem)]


def test_double_integrator_data(di_problem):
    sys = di_problem.system
    assert (sys.n, sys.m) == (2, 1)
    np.testing.assert_array_equal(sys.A[0], [[0, 1], [0, 0]])
    np.testing.assert_array_equal(sys.B[0], [[0], [1]])
    np.testing.assert_array_equal(sys.Q[0], np.eye(2))
    np.testing.assert_array_equal(di_problem.sigma0, [[4.7295, 1.9951], [1.9951, 3.6157]])
    np.testing.assert_array_equal(di_problem.sigmad, [[1.1189, 0.7780], [0.7780, 1.7407]])
    assert (di_problem.t0, di_problem.t1) == (0.0, 1.0)
    assert validate(di_problem) == []


def test_clohessy_wiltshire_data(cw_problem):
    A = cw_problem.system.A[0]
    nu = CW_ORBITAL_RATE
    assert (cw_problem.system.n, cw_problem.system.m) == (6, 3)
    assert A[3, 0] == pytest.approx(3 * nu**2) and A[3, 0] == pytest.approx(3.8144e-6, rel=1e-4)
    assert A[3, 4] == pytest.approx(2 * nu)
    assert A[4, 3] == pytest.approx(-2 * nu)
    assert A[5, 2] == pytest.approx(-(nu**2))
    np.testing.assert_array_equal(A[:3, 3:], np.eye(3))
    np.testing.assert_array_equal(cw_problem.system.B[0], np.vstack([np.zeros((3, 3)), np.eye(3)]))
    assert validate(cw_problem) == []


def test_constructors_deterministic():
    for make in (make_double_integrator, make_clohessy_wiltshire):
        a, b = problem_to_dict(make()), problem_to_dict(make())
        assert json.dumps(a) == json.dumps(b)


def test_validate_negative_q(di_problem):
    sys = LtvSystem.lti(di_problem.system.A[0], di_problem.system.B[0], -np.eye(2))
    p = SteeringProblem(sys, 0, 1, di_problem.sigma0, di_problem.sigmad)
    assert "QNotPsd" in codes(p)


def test_validate_zero_sigma0(di_problem):
    p = SteeringProblem(di_problem.system, 0, 1, np.zeros((2, 2)), di_problem.sigmad)
    assert codes(p) == ["Sigma0NotPd"]


@pytest.mark.parametrize("kw, code", [
    ({"t1": 0.0}, "HorizonInvalid"),
    ({"sigmad": np.eye(3)}, "SigmadShape"),
    ({"sigmad": [[1.0, 0.5], [0.0, 1.0]]}, "SigmadAsymmetric"),
    ({"mu0": [0.0, 1.0]}, "MeanMismatch"),
    ({"mu0": [0.0], "mud": [1.0]}, "MeanShape"),
])
def test_validate_codes(di_problem, kw, code):
    base = dict(system=di_problem.system, t0=0.0, t1=1.0, sigma0=di_problem.sigma0,
                sigmad=di_problem.sigmad)
    base.update(kw)
    assert code in codes(SteeringProblem(**base))


def test_validate_uncontrollable():
    sys = LtvSystem.lti(np.zeros((2, 2)), [[1.0], [0.0]], np.eye(2))
    assert codes(SteeringProblem(sys, 0, 1, np.eye(2), np.eye(2))) == ["NotControllable"]


def test_validate_idempotent(di_problem):
    assert validate(di_problem) == validate(di_problem) == []


def _ramp_system():
    return LtvSystem([0.0, 1.0], [np.zeros((2, 2)), np.eye(2)], [np.eye(2)[:, :1]] * 2, [np.eye(2)] * 2)


def test_validate_warns_for_time_varying():
    p = SteeringProblem(_ramp_system(), 0, 1, np.eye(2), np.eye(2))
    with pytest.warns(UserWarning, match="controllability"):
        assert validate(p) == []


def test_validate_grid_coverage():
    p = SteeringProblem(_ramp_system(), 0, 2, np.eye(2), np.eye(2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert "GridNotCovering" in codes(p)


def test_eval_system_lti(di_problem):
    A, B, Q = eval_system(di_problem.system, 0.37)
    np.testing.assert_array_equal(A, di_problem.system.A[0])


def test_eval_system_interpolates():
    A, _, _ = eval_system(_ramp_system(), 0.5)
    np.testing.assert_allclose(A, 0.5 * np.eye(2), atol=0)


def test_eval_system_out_of_horizon():
    with pytest.raises(OutOfHorizon):
        eval_system(_ramp_system(), 1.1)


def test_system_is_read_only(di_problem):
    with pytest.raises(ValueError):
        di_problem.system.A[0, 0, 0] = 1.0


def test_problem_file_roundtrip(tmp_path, cw_problem):
    cfg = SolverConfig(tol=1e-9, seed=3)
    path = tmp_path / "p.json"
    dump_problem(cw_problem, path, cfg)
    loaded, lcfg = load_problem(path)
    assert lcfg == cfg
    np.testing.assert_array_equal(loaded.system.A, cw_problem.system.A)
    np.testing.assert_array_equal(loaded.sigma0, cw_problem.sigma0)


def test_problem_file_grid_kind(tmp_path):
    p = SteeringProblem(_ramp_system(), 0, 1, np.eye(2), 2 * np.eye(2), mu0=[1, 0], mud=[0, 0])
    loaded, cfg = problem_from_dict(json.loads(json.dumps(problem_to_dict(p))))
    assert cfg is None and not loaded.system.is_lti and loaded.has_means
    np.testing.assert_array_equal(loaded.system.A, p.system.A)


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["system"].update(C=[[1.0]]),
    lambda d: d.update(solver={"tolerance": 1e-3}),
    lambda d: d["system"].update(kind="nonlinear"),
    lambda d: d.update(sigma0=[[1.0, 0.0]]),
    lambda d: d.pop("sigmad"),
])
def test_problem_file_rejections(di_problem, mutate):
    d = problem_to_dict(di_problem)
    mutate(d)
    with pytest.raises(ProblemFileError):
        problem_from_dict(d)


def test_load_problem_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ProblemFileError):
        load_problem(path)


@pytest.mark.parametrize("kw", [{"tol": 0}, {"tol": 1.5}, {"max_iter": 0}, {"criterion": "max"},
                                {"seed": -1}, {"rcond_floor": 0}])
def test_solver_config_rejects(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)
