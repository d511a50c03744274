import importlib.util

import pytest

from hybrid_aoi.lpformat import export_lp, parse_lp, read_lp, write_lp
from hybrid_aoi.milp import build_milp, induced_assignment
from hybrid_aoi.model import ObjectiveConfig, Schedule, derive_endogenous, evaluate_schedule
from hybrid_aoi.scenario import GenerationConfig, generate_scenario
from hybrid_aoi.solver import solve_bnb, solve_bruteforce, solve_milp

from conftest import build_scenario, random_feasible_schedule, tiny_instance


def _one_message(tau):
    return build_scenario(1, 1, 1, [(0, 1, 0, 0, 0)], links=[(0, 0, 1, None)], enabled=(0,), tau=tau)


@pytest.mark.parametrize("alpha", [(0.5, 0.0, 0.5), (0.9, 0.0, 0.1), (0.2, 0.0, 0.8), (0.99, 0.0, 0.01)])
@pytest.mark.parametrize("tau", [2, 5])
def test_one_variable_model(alpha, tau):
    s = _one_message(tau)
    cfg = ObjectiveConfig.for_scenario(s, alpha)
    model = build_milp(s, cfg)
    assert model.n_variables == 1 and len(model.x_variables()) == 1
    s1, _, s3 = cfg.normalization
    send = alpha[2] * (tau - 1) / s3 > alpha[0] * 80 / s1
    sol = solve_milp(s, cfg)
    assert (len(sol.schedule) == 1) == send
    assert (len(solve_bnb(s, cfg).schedule) == 1) == send
    parsed = parse_lp(write_lp(model))
    assert parsed.binaries == ["x_0_1_0_0"] and parsed.n_variables == 1


def test_no_feasible_links_gives_alpha3():
    s = build_scenario(2, 1, 5, [(0, 2, 0, 0, 2), (2, 1, 1, 1, 3)], n_types=2)
    cfg = ObjectiveConfig.for_scenario(s, (0.1, 0.1, 0.8))
    model = build_milp(s, cfg)
    assert not model.x_variables()
    assert solve_milp(s, cfg).total == pytest.approx(0.8, abs=1e-12)


def test_model_matches_evaluator(rng):
    for seed in range(5):
        s = generate_scenario(GenerationConfig(n_nodes=3, n_aps=2, horizon=20, thresholds=(0.9, 0.9),
                                               budget_range=(100, 400)), seed)
        cfg = ObjectiveConfig.for_scenario(s, (0.2, 0.3, 0.5))
        model = build_milp(s, cfg)
        for _ in range(10):
            x = random_feasible_schedule(s, rng)
            vals = induced_assignment(model, s, x)
            assert model.violated(vals) == []
            assert model.evaluate_objective(vals) == pytest.approx(evaluate_schedule(s, x, cfg).total, abs=1e-9)
            z = sum(vals[i] for i, v in enumerate(model.variables) if v.role[0] == "z")
            assert z == derive_endogenous(s, x).switch_count


def test_infeasible_assignment_violates_rows():
    s = build_scenario(3, 0, 3, [(0, 1, 0, 0, 0), (0, 2, 0, 0, 0)], links=[(0, 0, 1, None), (0, 0, 2, None)])
    cfg = ObjectiveConfig.for_scenario(s)
    model = build_milp(s, cfg)
    vals = induced_assignment(model, s, Schedule([(0, 1, 0, 0), (0, 2, 0, 0)]))
    assert any(name.startswith("deg_out") for name in model.violated(vals))


@pytest.mark.parametrize("seed", range(15))
def test_milp_optimum_equals_bruteforce(seed):
    s, alpha = tiny_instance(seed)
    cfg = ObjectiveConfig.for_scenario(s, alpha)
    assert solve_milp(s, cfg).total == pytest.approx(solve_bruteforce(s, cfg).total, abs=1e-9)


def test_lp_round_trip_structure(tmp_path):
    s = generate_scenario(GenerationConfig(n_nodes=4, n_aps=2, thresholds=(0.9, 0.9)), 2)
    model = build_milp(s, ObjectiveConfig.for_scenario(s))
    export_lp(model, tmp_path / "m.lp")
    parsed = read_lp(tmp_path / "m.lp")
    assert parsed.n_variables == model.n_variables
    assert parsed.n_constraints == model.n_constraints
    assert sorted(parsed.objective.values()) == sorted(model.objective.values())
    assert parsed.objective_constant == model.objective_constant
    assert max(len(line) for line in (tmp_path / "m.lp").read_text().splitlines()) <= 255
    row = {c.name: c for c in model.constraints}
    for name, coeffs, sense, rhs in parsed.constraints:
        assert sense == row[name].sense and rhs == row[name].rhs
        assert sorted(coeffs.values()) == sorted(row[name].coeffs.values())


def test_parse_exponents_and_wrapping():
    text = "Minimize\n obj: 1e-05 x + 2.5E+3 y\n - 3 z + 4\nSubject To\n c1: x + y\n   >= 1\nBounds\n 0 <= z <= 5\nBinaries\n x y\nEnd\n"
    p = parse_lp(text)
    assert p.objective == {"x": 1e-05, "y": 2500.0, "z": -3.0}
    assert p.objective_constant == 4.0
    assert p.constraints == [("c1", {"x": 1.0, "y": 1.0}, ">=", 1.0)]
    assert p.bounds["z"] == (0.0, 5.0)


@pytest.mark.skipif(importlib.util.find_spec("highspy") is None, reason="highspy not installed")
@pytest.mark.parametrize("seed", range(5))
def test_external_solver_on_exported_file(tmp_path, seed):
    import highspy

    s, alpha = tiny_instance(100 + seed)
    cfg = ObjectiveConfig.for_scenario(s, alpha)
    model = build_milp(s, cfg)
    export_lp(model, tmp_path / "m.lp")
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(tmp_path / "m.lp"))
    h.run()
    value = h.getInfo().objective_function_value
    assert value == pytest.approx(solve_bruteforce(s, cfg).total, abs=1e-6)
