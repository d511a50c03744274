import numpy as np
import pytest

from hybrid_aoi.model import (
    ConstraintId,
    InfeasibleScheduleError,
    ObjectiveConfig,
    Schedule,
    check_constraints,
    derive_endogenous,
    energy_usage,
    evaluate_schedule,
    load_schedule,
    normalization_coefficients,
    save_schedule,
)
from hybrid_aoi.scenario import GenerationConfig, generate_scenario

from conftest import build_scenario, random_feasible_schedule


@pytest.fixture
def window345():
    # one message 0 -> 2 over {3, 4, 5}, all links open
    return build_scenario(2, 1, 8, [(0, 2, 0, 3, 5)], links=[(0, 0, 2, None), (1, 0, 2, None)])


def test_delta_at_window_start(window345):
    st = derive_endogenous(window345, Schedule([(0, 2, 0, 3)]))
    assert st.delta[(0, 2, 3)] == 1
    assert st.delta[(0, 2, 4)] == st.delta[(0, 2, 5)] == window345.tau


def test_delta_mid_window(window345):
    tau = window345.tau
    st = derive_endogenous(window345, Schedule([(0, 2, 0, 4)]))
    assert (st.delta[(0, 2, 3)], st.delta[(0, 2, 4)], st.delta[(0, 2, 5)]) == (tau, 2, tau)
    assert st.sent == (True,)
    assert st.send_step == (4,) and st.send_tech == (0,)


def test_empty_schedule_state(window345):
    st = derive_endogenous(window345, Schedule.empty())
    assert set(st.delta.values()) == {window345.tau}
    assert not st.register.any()
    assert st.sent == (False,)
    assert st.switch_count == 0


def test_transmission_outside_windows_raises(window345):
    with pytest.raises(ValueError):
        derive_endogenous(window345, Schedule([(0, 2, 0, 1)]))


def test_register_switches_per_device():
    s = build_scenario(2, 1, 10, [(0, 1, 0, 2, 2), (0, 2, 0, 5, 5), (0, 1, 0, 7, 7)],
                       links=[(0, 0, 1, None), (1, 0, 2, None)])
    st = derive_endogenous(s, Schedule([(0, 1, 0, 2), (0, 2, 1, 5)]))
    reg0 = np.concatenate([[0], st.register[0]])
    assert int(np.abs(np.diff(reg0)).sum()) == 1
    assert st.register[0].tolist() == [0] * 5 + [1] * 5
    st = derive_endogenous(s, Schedule([(0, 1, 0, 2), (0, 2, 1, 5), (0, 1, 0, 7)]))
    reg0 = np.concatenate([[0], st.register[0]])
    assert int(np.abs(np.diff(reg0)).sum()) == 2
    # the AP joins once (RF -> OC) and never returns
    assert st.switch_count == 3


def test_normalization_examples():
    s = build_scenario(8, 5, 20, [(0, 8, 0, 2 * f, 2 * f) for f in range(10)])
    s1, s2, _ = normalization_coefficients(s, (80.0, 107.0))
    assert s1 == 1070 and s2 == 260
    s = build_scenario(1, 1, 40, [(0, 1, 0, 5 * f, 5 * f + 2) for f in range(7)] + [(1, 0, 0, 0, 3), (1, 0, 0, 10, 14 - 2)],
                       tau=5)
    assert s.total_window_slots == 7 * 3 + 4 + 3
    s = build_scenario(1, 1, 40, [(0, 1, 0, 4 * f, 4 * f + 2) for f in range(10)], tau=5)
    assert normalization_coefficients(s, (80.0, 107.0))[2] == 150


def test_normalization_rejects_empty():
    s = build_scenario(1, 1, 4, [])
    with pytest.raises(ValueError):
        normalization_coefficients(s)


def test_alpha_must_sum_to_one():
    with pytest.raises(ValueError):
        ObjectiveConfig((0.5, 0.5, 0.5), (80.0, 107.0), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        ObjectiveConfig((1.2, -0.2, 0.0), (80.0, 107.0), (1.0, 1.0, 1.0))


def test_empty_schedule_total_is_alpha3(window345):
    cfg = ObjectiveConfig.for_scenario(window345, (0.2, 0.3, 0.5))
    ob = evaluate_schedule(window345, Schedule.empty(), cfg)
    assert ob.delay_norm == 1.0
    assert ob.total == pytest.approx(0.5, abs=1e-15)


def test_single_rf_transmission_energy_only():
    s = build_scenario(1, 1, 3, [(0, 1, 0, 0, 0)], links=[(0, 0, 1, None)], enabled=(0,))
    cfg = ObjectiveConfig((1.0, 0.0, 0.0), (80.0, 107.0), (80.0, 6.0, 2.0))
    assert evaluate_schedule(s, Schedule([(0, 1, 0, 0)]), cfg).total == 1.0


def test_total_identity(rng):
    s = generate_scenario(GenerationConfig(n_nodes=4, n_aps=2, thresholds=(0.9, 0.9)), 11)
    cfg = ObjectiveConfig.for_scenario(s, (0.3, 0.2, 0.5))
    for _ in range(20):
        x = random_feasible_schedule(s, rng)
        ob = evaluate_schedule(s, x, cfg)
        s1, s2, s3 = cfg.normalization
        assert ob.total == pytest.approx(0.3 * ob.energy / s1 + 0.2 * ob.switching / s2 + 0.5 * ob.delay / s3,
                                         rel=1e-12, abs=1e-15)
        assert float(cfg.exact_total(ob.tech_counts, ob.switching, ob.delay)) == pytest.approx(ob.total, abs=1e-12)


def test_infeasible_schedule_raises_with_report(window345):
    cfg = ObjectiveConfig.for_scenario(window345)
    with pytest.raises(InfeasibleScheduleError) as err:
        evaluate_schedule(window345, Schedule([(0, 2, 0, 3), (0, 2, 1, 4)]), cfg)
    assert ConstraintId.AT_MOST_ONCE in err.value.report.families()


def test_empty_schedule_feasible(window345):
    assert check_constraints(window345, Schedule.empty()).feasible


def test_two_sends_same_step():
    s = build_scenario(3, 0, 4, [(0, 1, 0, 1, 1), (0, 2, 0, 1, 1)], links=[(0, 0, 1, None), (0, 0, 2, None)])
    report = check_constraints(s, Schedule([(0, 1, 0, 1), (0, 2, 0, 1)]))
    deg = report.of(ConstraintId.DEGREE)
    assert len(deg) == 1 and deg[0].indices["i"] == 0 and deg[0].indices["k"] == 1
    assert report.families() == {ConstraintId.DEGREE}


def test_low_visibility_oc_link():
    s = build_scenario(1, 1, 3, [(0, 1, 0, 0, 2)], links=[(0, 0, 1, None)])
    vis = s.visibility.copy()
    vis[1, 0, 1, 1] = vis[1, 1, 0, 1] = 0.5
    s = type(s)(**{**s.__dict__, "visibility": vis})
    report = check_constraints(s, Schedule([(0, 1, 1, 1)]))
    assert report.families() == {ConstraintId.VISIBILITY}
    assert report.of(ConstraintId.VISIBILITY)[0].indices["v"] == 0.5


def test_disabled_technology_is_a_visibility_violation():
    s = build_scenario(1, 1, 3, [(0, 1, 0, 0, 2)], links=[(1, 0, 1, None)], enabled=(0,))
    report = check_constraints(s, Schedule([(0, 1, 1, 0)]))
    assert report.families() == {ConstraintId.VISIBILITY}
    assert report.of(ConstraintId.VISIBILITY)[0].indices["enabled"] is False


def test_send_while_receiving():
    s = build_scenario(3, 0, 3, [(0, 1, 0, 0, 0), (1, 2, 0, 0, 0)], links=[(0, 0, 1, None), (0, 1, 2, None)])
    report = check_constraints(s, Schedule([(0, 1, 0, 0), (1, 2, 0, 0)]))
    assert report.families() == {ConstraintId.SEND_RECEIVE}


def test_energy_sender_pays_both_and_split():
    msgs = [(0, 1, 0, k, k) for k in range(4)]
    x = Schedule([(0, 1, 0, k) for k in range(4)])
    s = build_scenario(1, 1, 4, msgs, links=[(0, 0, 1, None)], budget=300.0)
    used = energy_usage(s, x)
    assert used[0, 0] == 320 and used[0, 1] == 0
    assert check_constraints(s, x).families() == {ConstraintId.ENERGY}
    s = build_scenario(1, 1, 4, msgs, links=[(0, 0, 1, None)], budget=300.0, split_energy=True)
    used = energy_usage(s, x)
    assert used[0, 0] == 280 and used[0, 1] == 40
    assert check_constraints(s, x).feasible


def test_removal_keeps_feasibility(rng):
    s = generate_scenario(GenerationConfig(n_nodes=4, n_aps=2, thresholds=(0.9, 0.9), budget_range=(100, 300)), 4)
    for _ in range(10):
        x = random_feasible_schedule(s, rng)
        for tx in x:
            assert check_constraints(s, x.remove(tx)).feasible


def test_schedule_round_trip(tmp_path, window345):
    x = Schedule([(0, 2, 1, 4)])
    save_schedule(x, tmp_path / "x.json")
    assert load_schedule(tmp_path / "x.json") == x
    assert Schedule.from_dense(x.to_dense(window345)) == x
    assert x.order_key == ((4, 0, 2, 1),)
