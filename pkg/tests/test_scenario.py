import json

import numpy as np
import pytest
from scipy import stats

from hybrid_aoi.scenario import (
    GenerationConfig,
    Message,
    ScenarioError,
    Technology,
    derive_demand,
    dumps_scenario,
    generate_scenario,
    load_scenario,
    sample_truncated_normal,
    save_scenario,
    scenario_to_dict,
)

from conftest import build_scenario


def test_technology_ids():
    assert list(Technology) == [Technology.RF, Technology.OC]
    assert int(Technology.RF) == 0 and int(Technology.OC) == 1


def test_default_generation_shape():
    s = generate_scenario(GenerationConfig(n_nodes=8, n_aps=5, horizon=20), seed=1)
    assert s.n_devices == 13
    assert s.horizon == 20
    assert s.visibility.shape == (2, 13, 13, 20)
    assert s.kind(7).value == "IoTNode" and s.kind(8).value == "AccessPoint"


@pytest.mark.parametrize("seed", range(20))
def test_generated_invariants(seed):
    cfg = GenerationConfig(n_nodes=4, n_aps=3, horizon=20, pair_probability=0.8)
    s = generate_scenario(cfg, seed)
    s.validate()
    v = s.visibility
    assert np.array_equal(v, v.transpose(0, 2, 1, 3))
    assert not v[Technology.OC, :4, :4].any()
    assert not v[:, 4:, 4:].any()
    assert v.min() >= 0 and v.max() <= 1
    assert s.tau == max(m.length for m in s.messages) + 1
    assert np.all((s.energy_budget >= 500) & (s.energy_budget <= 700))
    by_pair = {}
    for m in s.messages:
        by_pair.setdefault((m.sender, m.receiver), []).append(m)
        assert 1 <= m.length <= cfg.max_window
    for msgs in by_pair.values():
        assert 1 <= len(msgs) <= 5
        slots = [k for m in msgs for k in m.slots]
        assert len(slots) == len(set(slots))


def test_empty_message_config_is_valid():
    s = generate_scenario(GenerationConfig(n_nodes=3, n_aps=1, messages_per_pair=(0, 0)), seed=7)
    assert s.messages == ()
    assert not derive_demand(s).any()


def test_same_seed_identical_bytes():
    cfg = GenerationConfig()
    assert dumps_scenario(generate_scenario(cfg, 42)) == dumps_scenario(generate_scenario(cfg, 42))
    assert generate_scenario(cfg, 42) != generate_scenario(cfg, 43)


def test_unpackable_windows_name_the_pair():
    cfg = GenerationConfig(n_nodes=1, n_aps=1, horizon=3, messages_per_pair=(5, 5), max_window=4,
                           pair_probability=1.0)
    with pytest.raises(ValueError, match=r"pair \(0, 1\)"):
        generate_scenario(cfg, 0)


def test_truncated_normal_matches_scipy():
    rng = np.random.default_rng(0)
    draws = sample_truncated_normal(rng, 0.85, 0.1, 10_000)
    assert draws.min() >= 0 and draws.max() <= 1
    oracle = stats.truncnorm((0 - 0.85) / 0.1, (1 - 0.85) / 0.1, loc=0.85, scale=0.1)
    assert abs(draws.mean() - oracle.mean()) < 0.02
    assert abs(draws.mean() - 0.85) < 0.02
    # distribution shape, not only the mean
    assert stats.kstest(draws, oracle.cdf).pvalue > 1e-3


def test_generated_rf_visibility_mean():
    cfg = GenerationConfig(n_nodes=8, n_aps=5)
    s = generate_scenario(cfg, 3)
    i, j = np.triu_indices(13, k=1)
    keep = i < 8  # AP-AP pairs are structurally zero
    vals = s.visibility[Technology.RF][i[keep], j[keep]].ravel()
    assert len(vals) >= 1000
    oracle = stats.truncnorm(-8.5, 1.5, loc=0.85, scale=0.1)
    assert abs(vals.mean() - oracle.mean()) < 0.02


def test_demand_example():
    s = build_scenario(2, 1, 8, [(0, 2, 0, 3, 5)])
    rho = derive_demand(s)
    assert rho[0, 2].tolist() == [0, 0, 0, 1, 1, 1, 0, 0]
    assert rho.sum() == 3


def test_demand_counts_window_slots():
    s = build_scenario(1, 1, 6, [(0, 1, 0, 0, 1), (0, 1, 0, 4, 4)])
    assert derive_demand(s)[0, 1].sum() == 3


def test_round_trip(tmp_path):
    s = generate_scenario(GenerationConfig(n_nodes=4, n_aps=2, split_energy=True), 5).with_technologies([0])
    save_scenario(s, tmp_path / "s.json")
    t = load_scenario(tmp_path / "s.json")
    assert t == s
    assert t.enabled == frozenset([Technology.RF])
    assert t.split_energy


def _tamper(tmp_path, s, fn):
    doc = scenario_to_dict(s)
    fn(doc)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    return path


def test_reject_oc_between_nodes(tmp_path):
    s = build_scenario(2, 1, 4, [(0, 2, 0, 0, 1)], links=[(0, 0, 2, None)])

    def poke(doc):
        vis = doc["visibility"]["data"]
        vis[1][0][1][2] = 0.99
        vis[1][1][0][2] = 0.99

    with pytest.raises(ScenarioError) as err:
        load_scenario(_tamper(tmp_path, s, poke))
    assert err.value.invariant == "oc_node_node"


def test_reject_overlapping_windows(tmp_path):
    s = build_scenario(2, 1, 6, [(0, 2, 0, 0, 1), (0, 2, 0, 3, 4)])

    def poke(doc):
        doc["messages"][1]["window_start"] = 1

    with pytest.raises(ScenarioError) as err:
        load_scenario(_tamper(tmp_path, s, poke))
    assert err.value.invariant == "window_disjoint"


@pytest.mark.parametrize("poke,invariant", [
    (lambda d: d.update(schema_version=99), "schema_version"),
    (lambda d: d.update(tau=1), "tau"),
    (lambda d: d["visibility"].update(shape=[2, 3, 3, 5]), "shape"),
    (lambda d: d.pop("messages"), "format"),
    (lambda d: d["energy_budget"]["data"][0].__setitem__(0, -1.0), "energy_nonnegative"),
])
def test_malformed_files(tmp_path, poke, invariant):
    s = build_scenario(2, 1, 4, [(0, 2, 0, 0, 1)])
    with pytest.raises(ScenarioError) as err:
        load_scenario(_tamper(tmp_path, s, poke))
    assert err.value.invariant == invariant


def test_invalid_json(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "x.json")


def test_ap_to_ap_rejected():
    with pytest.raises(ScenarioError) as err:
        build_scenario(1, 2, 4, [], links=[(0, 1, 2, None)])
    assert err.value.invariant == "ap_ap"


def test_message_fields():
    m = Message(0, 1, 0, 1, 2, 4)
    assert m.length == 3 and list(m.slots) == [2, 3, 4]
