import json
import math

import numpy as np
import pytest

from lognorm_cert.system_model import (ScenarioError, builtin_perturbation, builtin_scenario, constant_matrix,
                                       eval_matrix, load_scenario, sampled_matrix, scenario_from_dict,
                                       scenario_to_dict)

A1 = [[-11.0, 10.0], [2.0, -3.0]]


def test_example2_at_zero():
    sc = builtin_scenario("example2", {"beta": "t4"})
    assert np.array_equal(eval_matrix(sc.matrix_function, 0.0), [[-1.0, 0.0], [0.0, -3.0]])


def test_example2_entries():
    sc = builtin_scenario("example2")
    t = math.pi / 2
    A = eval_matrix(sc.matrix_function, t)
    assert A[1, 1] == pytest.approx(-(4 + math.pi / 2), abs=1e-15)
    assert A[0, 1] == pytest.approx(t ** 4) and A[1, 0] == pytest.approx(-t ** 4)


def test_example2_constant_beta():
    A = eval_matrix(builtin_scenario("example2", {"beta": 2.5}).matrix_function, 3.0)
    assert A[0, 1] == 2.5 and A[1, 0] == -2.5


def test_example2_envelope_is_exact():
    sc = builtin_scenario("example2")
    for t in np.linspace(0, 20, 41):
        w = sc.perturbation(np.zeros(2), t)
        assert np.linalg.norm(w) == pytest.approx(math.sqrt(t ** 1.75 + 1e4 * math.cos(t) ** 2), rel=1e-14)
        assert sc.perturbation.envelope(t) == pytest.approx(np.linalg.norm(w), rel=1e-14)


def test_example3_oracles():
    sc = builtin_scenario("example3", {"lam": 1.0})
    phi = sc.oracles["phi"]
    s1, c1 = math.sin(1.0), math.cos(1.0)
    assert np.allclose(phi(0.0), [[s1, -c1], [c1, s1]], atol=1e-15)
    for t in np.linspace(0, 4, 9):
        P = phi(t)
        assert np.allclose(P @ np.linalg.inv(P), np.eye(2), atol=1e-10)
        # central difference residual of Phi' = A Phi
        h = 1e-6
        dP = (phi(t + h) - phi(max(t - h, 0.0))) / (t + h - max(t - h, 0.0))
        assert np.abs(dP - eval_matrix(sc.matrix_function, t) @ P).max() <= 1e-4


def test_example3_rejects_nonpositive_lambda():
    with pytest.raises(ScenarioError):
        builtin_scenario("example3", {"lam": -1.0})


def test_unknown_scenario():
    with pytest.raises(ScenarioError):
        builtin_scenario("nope")


def test_constant_and_negative_time():
    mf = constant_matrix(A1)
    assert np.array_equal(eval_matrix(mf, 17.0), A1)
    with pytest.raises(ValueError):
        eval_matrix(mf, -0.5)


def test_sampled_grid():
    ts = [0.0, 4.0, 10.0]
    entries = [[[0.0, 1.0], [2.0, 3.0]], [[4.0, 5.0], [6.0, 7.0]], [[-1.0, 0.0], [0.0, -1.0]]]
    mf = sampled_matrix(ts, entries)
    for t, E in zip(ts, entries):
        assert np.array_equal(eval_matrix(mf, t), E)
    assert np.allclose(eval_matrix(mf, 2.0), [[2.0, 3.0], [4.0, 5.0]])
    with pytest.raises(ValueError):
        eval_matrix(mf, 11.0)
    with pytest.raises(ValueError):
        sampled_matrix([0.0, 0.0], entries[:2])


def test_perturbation_dimension_and_names():
    assert builtin_perturbation("none", 3, {}) is None or np.array_equal(
        builtin_perturbation("none", 3, {})(np.ones(3), 1.0), np.zeros(3))
    with pytest.raises(ScenarioError):
        builtin_perturbation("unknown", 2, {})


@pytest.mark.parametrize("name, params", [
    ("example2", {"beta": "t4"}),
    ("example2", {"beta": 1.5}),
    ("example3", {"lam": 2.0}),
    ("lti_hurwitz", {}),
    ("custom-grid", {"ts": [0.0, 1.0, 3.0], "entries": [[[-1.0]], [[-2.0]], [[-0.5]]]}),
])
def test_round_trip(tmp_path, name, params):
    sc = builtin_scenario(name, params)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario_to_dict(sc)))
    back = load_scenario(str(path))
    assert back.n == sc.n
    grid = np.linspace(0.0, min(3.0, sc.matrix_function.t_max), 31)
    x = np.linspace(-1, 1, sc.n)
    for t in grid:
        assert np.array_equal(eval_matrix(back.matrix_function, t), eval_matrix(sc.matrix_function, t))
        assert np.array_equal(back.rhs(t, x), sc.rhs(t, x))
    assert back.default_x0 == sc.default_x0


def test_from_dict_validation():
    with pytest.raises(ScenarioError):
        scenario_from_dict({"name": "x"})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"name": "x", "n": 3, "matrix": {"constant": A1}})
    sc = scenario_from_dict({"name": "x", "matrix": {"constant": A1}, "perturbation": "none"})
    assert sc.n == 2


def test_load_missing_file():
    with pytest.raises(ScenarioError):
        load_scenario("/nonexistent/scenario.json")
