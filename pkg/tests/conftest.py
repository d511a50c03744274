import dataclasses

import numpy as np
import pytest

from hybrid_aoi.model import Schedule, candidate_transmissions, check_constraints
from hybrid_aoi.scenario import GenerationConfig, Message, Scenario, generate_scenario


def build_scenario(n_nodes, n_aps, horizon, messages, links=(), budget=1000.0, tau=None, n_types=1,
                   thresholds=(0.97, 0.97), split_energy=False, enabled=(0, 1), send_cost=(70.0, 100.0),
                   receive_cost=(10.0, 7.0)):
    """Hand-built scenario.

    ``messages``: (sender, receiver, data_type, start, end) tuples.
    ``links``: (m, i, j, k) slots made fully visible; ``k=None`` opens every step.
    """
    n = n_nodes + n_aps
    vis = np.zeros((2, n, n, horizon))
    for m, i, j, k in links:
        ks = slice(None) if k is None else k
        vis[m, i, j, ks] = 1.0
        vis[m, j, i, ks] = 1.0
    msgs = []
    ordinals = {}
    for snd, rcv, l, a, b in messages:
        o = ordinals.get((snd, rcv), 0)
        ordinals[(snd, rcv)] = o + 1
        msgs.append(Message(snd, rcv, o, l, a, b))
    if tau is None:
        tau = max((m.length for m in msgs), default=0) + 1
    return Scenario(
        n_nodes=n_nodes, n_aps=n_aps, n_types=n_types, horizon=horizon, messages=tuple(msgs), visibility=vis,
        energy_budget=np.full((2, n), float(budget)), send_cost=send_cost, receive_cost=receive_cost,
        thresholds=thresholds, tau=tau, enabled=frozenset(enabled), split_energy=split_energy,
    )


def tiny_instance(seed: int):
    """Random instance with at most 4 devices, 6 steps and 4 messages; budgets small enough to bind."""
    rng = np.random.default_rng(seed)
    n_aps = int(rng.integers(1, 3))
    n_nodes = int(rng.integers(1, 5 - n_aps))
    cfg = GenerationConfig(
        n_nodes=n_nodes, n_aps=n_aps, n_types=2, horizon=int(rng.integers(3, 7)),
        thresholds=(0.9, 0.9), budget_range=(60.0, 300.0), messages_per_pair=(1, 1), max_window=3,
        pair_probability=0.6, split_energy=bool(rng.random() < 0.3),
    )
    s = generate_scenario(cfg, int(rng.integers(2**32)))
    msgs = list(s.messages)
    if len(msgs) > 4:
        keep = sorted(rng.choice(len(msgs), size=4, replace=False))
        msgs = [msgs[k] for k in keep]
    if not msgs:
        msgs = [Message(0, n_nodes, 0, 0, 0, min(1, cfg.horizon - 1))]
    s = dataclasses.replace(s, messages=tuple(msgs), tau=max(m.length for m in msgs) + 1)
    alpha = rng.dirichlet(np.ones(3))
    alpha = tuple(float(a) for a in alpha / alpha.sum())
    alpha = (alpha[0], alpha[1], 1.0 - alpha[0] - alpha[1])
    return s, alpha


def random_feasible_schedule(s: Scenario, rng: np.random.Generator, p: float = 0.7) -> Schedule:
    cands = candidate_transmissions(s)
    order = rng.permutation(len(cands))
    x = Schedule.empty()
    for idx in order:
        if rng.random() > p:
            continue
        y = x.add(cands[idx])
        if check_constraints(s, y).feasible:
            x = y
    return x


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" | {detail}" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
