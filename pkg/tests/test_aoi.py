import itertools

import numpy as np
import pytest

from hybrid_aoi.aoi import AoITrajectory, StreamKey, Update, aoi_trajectory, mean_aoi, peak_aoi, system_metrics
from hybrid_aoi.model import Schedule, candidate_transmissions, check_constraints, derive_endogenous
from hybrid_aoi.scenario import GenerationConfig, generate_scenario

from conftest import build_scenario, random_feasible_schedule


def _traj(values, pre_ages=()):
    return AoITrajectory(StreamKey(0, 0), tuple(values), tuple(Update(k, p, 0, 0) for k, p in enumerate(pre_ages)))


def test_single_update_trace():
    s = build_scenario(1, 1, 8, [(0, 1, 0, 3, 3)], links=[(0, 0, 1, None)])
    traj = aoi_trajectory(s, Schedule([(0, 1, 0, 3)]), StreamKey(1, 0))
    assert list(traj.values) == [1, 2, 3, 1, 2, 3, 4, 5]
    assert [(u.step, u.pre_age) for u in traj.updates] == [(3, 4)]


def test_no_traffic_linear_growth():
    s = build_scenario(1, 1, 6, [(0, 1, 0, 2, 3)], links=[(0, 0, 1, None)])
    traj = aoi_trajectory(s, Schedule.empty(), StreamKey(1, 0))
    assert list(traj.values) == [1, 2, 3, 4, 5, 6]
    assert mean_aoi(traj) == pytest.approx(3.5)
    assert peak_aoi(traj) == 6


def test_two_receptions():
    s = build_scenario(1, 1, 8, [(0, 1, 0, 2, 2), (0, 1, 0, 4, 5)], links=[(0, 0, 1, None)])
    traj = aoi_trajectory(s, Schedule([(0, 1, 0, 2), (0, 1, 0, 5)]), StreamKey(1, 0))
    assert traj.values[5] == 2
    assert traj.updates[-1].step == 5 and traj.updates[-1].pre_age == 4


def test_unknown_stream():
    s = build_scenario(1, 1, 4, [(0, 1, 0, 0, 1)])
    with pytest.raises(ValueError):
        aoi_trajectory(s, Schedule.empty(), StreamKey(0, 0))


def test_mean_examples():
    assert mean_aoi(_traj([1, 2, 3, 4])) == 2.5
    assert mean_aoi(_traj([1] * 7)) == 1
    t = 9
    assert mean_aoi(_traj(range(1, t + 1))) == pytest.approx((t + 1) / 2)


def test_peak_examples():
    assert peak_aoi(_traj([1, 2, 3, 1], pre_ages=(3, 4))) == 3.5
    assert peak_aoi(_traj([1, 2], pre_ages=(5,))) == 5
    no_updates = _traj(range(1, 11))
    assert peak_aoi(no_updates) == 10 == max(no_updates.values)


def test_single_stream_system_metrics():
    s = build_scenario(1, 1, 8, [(0, 1, 0, 3, 3)], links=[(0, 0, 1, None)])
    x = Schedule([(0, 1, 0, 3)])
    metrics = system_metrics(s, x)
    traj = aoi_trajectory(s, x, StreamKey(1, 0))
    assert (metrics.mean_aoi, metrics.peak_aoi) == (mean_aoi(traj), peak_aoi(traj))


def test_symmetric_types():
    msgs = [(0, 2, 0, 1, 2), (1, 2, 1, 1, 2)]
    s = build_scenario(2, 1, 6, msgs, links=[(0, 0, 2, None), (0, 1, 2, None)], n_types=2)
    assert system_metrics(s, Schedule([(0, 2, 0, 1)])).per_type[0] == \
        system_metrics(s, Schedule([(1, 2, 0, 1)])).per_type[1]
    metrics = system_metrics(s, Schedule([(0, 2, 0, 1), (1, 2, 0, 2)]))
    per = metrics.per_type
    assert metrics.mean_aoi == pytest.approx((per[0][0] + per[1][0]) / 2)
    assert metrics.peak_aoi == pytest.approx((per[0][1] + per[1][1]) / 2)


def test_streams_merge_senders():
    s = build_scenario(2, 1, 6, [(0, 2, 0, 0, 1), (1, 2, 0, 3, 4)], links=[(0, 0, 2, None), (0, 1, 2, None)])
    metrics = system_metrics(s, Schedule([(0, 2, 0, 0), (1, 2, 0, 3)]))
    assert list(metrics.per_stream) == [StreamKey(2, 0)]
    assert list(metrics.trajectories[StreamKey(2, 0)].values) == [1, 2, 3, 1, 2, 3]
    split = system_metrics(s, Schedule.empty(), per_sender=True)
    assert len(split.per_stream) == 2


def test_zero_messages_rejected():
    s = build_scenario(1, 1, 4, [])
    with pytest.raises(ValueError):
        system_metrics(s, Schedule.empty())


@pytest.mark.parametrize("seed", range(10))
def test_reset_matches_delta(seed, rng):
    s = generate_scenario(GenerationConfig(n_nodes=4, n_aps=2, n_types=2, thresholds=(0.9, 0.9)), seed)
    x = random_feasible_schedule(s, rng)
    state = derive_endogenous(s, x)
    metrics = system_metrics(s, x)
    for key, traj in metrics.trajectories.items():
        for u in traj.updates:
            i, j, _, _ = next(t for t in x if t[3] == u.step and t[1] == key.receiver and t[0] == u.sender)
            assert traj.values[u.step] == state.delta[(i, j, u.step)]
            assert u.pre_age == (traj.values[u.step - 1] + 1 if u.step else 1)
        pre_points = [u.pre_age for u in traj.updates]
        if pre_points:
            assert max(pre_points) == max(traj.values[u.step - 1] + 1 if u.step else 1 for u in traj.updates)


def _sent_set_schedules(s):
    cands = candidate_transmissions(s)
    out = []
    for r in range(len(cands) + 1):
        for combo in itertools.combinations(cands, r):
            x = Schedule(combo)
            if check_constraints(s, x).feasible:
                out.append(x)
    return out


@pytest.mark.parametrize("seed", range(6))
def test_window_start_is_best(seed):
    rng = np.random.default_rng(seed)
    msgs = []
    for f in range(3):
        start = 3 * f + int(rng.integers(0, 2))
        msgs.append((int(rng.integers(0, 2)), 2, 0, start, start + 1))
    s = build_scenario(2, 1, 9, msgs, links=[(0, 0, 2, None), (0, 1, 2, None)])
    by_set: dict = {}
    for x in _sent_set_schedules(s):
        state = derive_endogenous(s, x)
        sent = tuple(state.sent)
        by_set.setdefault(sent, []).append((x, state))
    for options in by_set.values():
        at_start = [x for x, st in options
                    if all(k < 0 or k == s.messages[f].window_start for f, k in enumerate(st.send_step))]
        if not at_start:
            continue
        best = min(system_metrics(s, x).mean_aoi for x, _ in options)
        assert system_metrics(s, at_start[0]).mean_aoi == best


@pytest.mark.parametrize("seed", range(10))
def test_adding_transmission_never_ages(seed, rng):
    s = generate_scenario(GenerationConfig(n_nodes=4, n_aps=2, thresholds=(0.9, 0.9)), 50 + seed)
    x = random_feasible_schedule(s, rng, p=0.4)
    before = system_metrics(s, x).trajectories
    for tx in candidate_transmissions(s):
        y = x.add(tx)
        if tx in x.transmissions or not check_constraints(s, y).feasible:
            continue
        after = system_metrics(s, y).trajectories
        for key in before:
            assert all(a <= b for a, b in zip(after[key].values, before[key].values))
