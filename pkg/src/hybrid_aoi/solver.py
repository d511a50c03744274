"""Optimizers over the schedule space.

All solvers search over the transmission tensor only: the technology
register, delays and the full objective are deterministic functions of it.
Among schedules with equal objective the one with the smallest
:attr:`Schedule.order_key` wins, so every exact solver returns the same
schedule.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .milp import build_milp
from .model import (
    ObjectiveBreakdown,
    ObjectiveConfig,
    Schedule,
    breakdown_from_counts,
    candidate_transmissions,
    check_constraints,
    evaluate_schedule,
)
from .scenario import Scenario

TIE_TOL = 1e-9


class Proof(str, enum.Enum):
    OPTIMAL = "Optimal"
    GAP_BOUNDED = "GapBounded"
    HEURISTIC = "Heuristic"


class SearchSpaceExceeded(RuntimeError):
    pass


class SolverLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class Solution:
    schedule: Schedule
    objective: ObjectiveBreakdown
    proof: Proof
    gap: float = 0.0
    nodes: int = 0
    elapsed: float = 0.0
    best_bound: float = float("nan")
    history: tuple[tuple[int, float], ...] = field(default=(), repr=False)

    @property
    def total(self) -> float:
        return self.objective.total


@dataclass(frozen=True)
class SolverOptions:
    gap_target: float = 0.0
    node_limit: int | None = None
    time_limit: float | None = None

    def __post_init__(self):
        if self.gap_target < 0:
            raise ValueError("gap_target must be non-negative")


def relative_gap(incumbent: float, bound: float) -> float:
    return max(0.0, incumbent - bound) / max(abs(incumbent), 1e-12)


def better(cfg: ObjectiveConfig, a: ObjectiveBreakdown, a_key, b: ObjectiveBreakdown | None, b_key) -> bool:
    """True if ``a`` beats ``b`` under (objective, tie-break key) ordering."""
    if b is None:
        return True
    if a.total < b.total - TIE_TOL:
        return True
    if a.total > b.total + TIE_TOL:
        return False
    ea = cfg.exact_total(a.tech_counts, a.switching, a.delay)
    eb = cfg.exact_total(b.tech_counts, b.switching, b.delay)
    if ea != eb:
        return ea < eb
    return a_key < b_key


# --------------------------------------------------------------------------
# Shared problem tables
# --------------------------------------------------------------------------


@dataclass
class _Candidate:
    i: int
    j: int
    m: int
    k: int
    f: int
    gain: float  # objective change from sending, switching excluded
    saving: int  # tau - delta at this slot
    sender_cost: float
    receiver_cost: float


class _Tables:
    def __init__(self, s: Scenario, cfg: ObjectiveConfig):
        self.s, self.cfg = s, cfg
        self.n, self.t = s.n_devices, s.horizon
        w1, self.w2, w3 = cfg.weights
        se = cfg.transmission_energy
        lookup = s.slot_message
        self.by_step: list[list[_Candidate]] = [[] for _ in range(self.t)]
        for i, j, m, k in candidate_transmissions(s):
            f = lookup[(i, j, k)]
            saving = s.tau - (k - s.messages[f].window_start + 1)
            if s.split_energy:
                sc, rc = s.send_cost[m], s.receive_cost[m]
            else:
                sc, rc = s.send_cost[m] + s.receive_cost[m], 0.0
            gain = w1 * se[m] - w3 * saving
            if gain > 1e-12:
                # removing it is always feasible and never adds switches
                continue
            self.by_step[k].append(_Candidate(i, j, m, k, f, gain, saving, sc, rc))
        self.base = w3 * s.tau * s.total_window_slots
        self.base_delay = s.tau * s.total_window_slots
        # optimistic remaining gain per message and technology from step k on
        best = [[[0.0, 0.0] for _ in range(self.t + 1)] for _ in s.messages]
        for k in range(self.t - 1, -1, -1):
            for f in range(len(s.messages)):
                best[f][k] = list(best[f][k + 1])
            for c in self.by_step[k]:
                best[c.f][k][c.m] = min(best[c.f][k][c.m], c.gain)
        self.future: list[list[tuple]] = []
        for k in range(self.t + 1):
            row = []
            for f, msg in enumerate(s.messages):
                rf, oc = best[f][k]
                if min(rf, oc) < 0:
                    row.append((f, msg.sender, msg.receiver, min(rf, oc), rf, oc))
            self.future.append(row)
        self.last_step = max((k for k in range(self.t) if self.by_step[k]), default=-1)
        self.energy0 = tuple(float(v) for v in s.energy_budget.reshape(-1))

    def optimistic(self, k: int, sent: int, regs=None) -> float:
        """Lower bound on the cost still to come from step ``k``.

        Each unsent message contributes its best remaining gain. With
        switching weighted, a device that never leaves its current register
        restricts its messages to that technology; each device therefore adds
        at least ``min(w2, half the summed loss of its messages)``.
        """
        total = 0.0
        penalty: dict[int, float] = {}
        use_regs = regs is not None and self.w2 > 0
        for f, i, j, both, rf, oc in self.future[k]:
            if (sent >> f) & 1:
                continue
            total += both
            if use_regs:
                for d in (i, j):
                    loss = (oc if regs[d] else rf) - both
                    if loss > 0:
                        penalty[d] = penalty.get(d, 0.0) + loss / 2
        for p in penalty.values():
            total += min(self.w2, p)
        return total

    def available(self, k: int, sent: int, energy) -> list[_Candidate]:
        n = self.n
        out = []
        for c in self.by_step[k]:
            if (sent >> c.f) & 1:
                continue
            if energy[c.m * n + c.i] < c.sender_cost - 1e-9:
                continue
            if c.receiver_cost and energy[c.m * n + c.j] < c.receiver_cost - 1e-9:
                continue
            out.append(c)
        return out


def _matchings(cands: list[_Candidate]) -> Iterator[list[_Candidate]]:
    """Device-disjoint subsets of ``cands`` in tie-break order, empty set last."""
    chosen: list[_Candidate] = []
    busy: set[int] = set()

    def rec(idx: int):
        if idx == len(cands):
            yield list(chosen)
            return
        c = cands[idx]
        if c.i not in busy and c.j not in busy:
            chosen.append(c)
            busy.update((c.i, c.j))
            yield from rec(idx + 1)
            chosen.pop()
            busy.difference_update((c.i, c.j))
        yield from rec(idx + 1)

    yield from rec(0)


# --------------------------------------------------------------------------
# Greedy
# --------------------------------------------------------------------------


def solve_greedy(s: Scenario, cfg: ObjectiveConfig) -> Solution:
    """Earliest-deadline-first admission of strictly improving transmissions."""
    start = time.perf_counter()
    tab = _Tables(s, cfg)
    n = tab.n
    energy = list(tab.energy0)
    regs = [0] * n
    sent = 0
    txs = []
    for k in range(tab.t):
        busy: set[int] = set()
        by_msg: dict[int, list[_Candidate]] = {}
        for c in tab.available(k, sent, energy):
            by_msg.setdefault(c.f, []).append(c)
        order = sorted(by_msg, key=lambda f: (s.messages[f].window_end, s.messages[f].sender, s.messages[f].receiver))
        for f in order:
            best, best_cost = None, 0.0
            for c in by_msg[f]:
                if c.i in busy or c.j in busy:
                    continue
                if energy[c.m * n + c.i] < c.sender_cost - 1e-9:
                    continue
                if c.receiver_cost and energy[c.m * n + c.j] < c.receiver_cost - 1e-9:
                    continue
                cost = c.gain + tab.w2 * ((regs[c.i] != c.m) + (regs[c.j] != c.m))
                if cost < best_cost - 1e-15:
                    best, best_cost = c, cost
            if best is None:
                continue
            busy.update((best.i, best.j))
            energy[best.m * n + best.i] -= best.sender_cost
            energy[best.m * n + best.j] -= best.receiver_cost
            regs[best.i] = regs[best.j] = best.m
            sent |= 1 << f
            txs.append((best.i, best.j, best.m, k))
    schedule = Schedule(tuple(txs))
    objective = evaluate_schedule(s, schedule, cfg)
    return Solution(
        schedule, objective, Proof.HEURISTIC, gap=relative_gap(objective.total, tab.base + tab.optimistic(0, 0, (0,) * n)),
        nodes=0, elapsed=time.perf_counter() - start, best_bound=tab.base + tab.optimistic(0, 0, (0,) * n),
    )


# --------------------------------------------------------------------------
# Branch and bound
# --------------------------------------------------------------------------


@dataclass
class _Node:
    k: int
    cost: float
    bound: float
    sent: int
    energy: tuple
    regs: tuple
    partial: tuple  # transmissions so far in (k, i, j, m) order
    counts: tuple  # (n_rf, n_oc, switches, savings)


def _key_excludes(partial: tuple, inc_key: tuple) -> bool:
    """True if every completion of ``partial`` sorts after ``inc_key``."""
    for a, b in zip(partial, inc_key):
        if a != b:
            return a > b
    return len(partial) > len(inc_key)


def solve_bnb(s: Scenario, cfg: ObjectiveConfig, opts: SolverOptions | None = None,
              trace: list | None = None) -> Solution:
    """Depth-first branch and bound over time steps.

    Each level branches on the device-disjoint sets of transmissions at one
    step. The node bound is the cost so far plus, for each unsent message,
    its best remaining per-message gain, plus a per-device switching floor
    (see ``_Tables.optimistic``). When
    ``trace`` is a list, ``(step, partial_key, bound)`` is appended for every node.
    """
    opts = opts or SolverOptions()
    start = time.perf_counter()
    tab = _Tables(s, cfg)
    n, t = tab.n, tab.t
    w2 = tab.w2

    greedy = solve_greedy(s, cfg)
    inc_obj = greedy.objective
    inc_sched = greedy.schedule
    inc_key = inc_sched.order_key
    history = [(0, inc_obj.total)]

    root = _Node(0, tab.base, tab.base + tab.optimistic(0, 0, (0,) * n), 0, tab.energy0, (0,) * n, (), (0, 0, 0, 0))
    stack = [root]
    nodes = 0
    gap_pruned = math.inf
    limit_hit = False

    def prune(bound: float, partial: tuple) -> bool:
        nonlocal gap_pruned
        inc = inc_obj.total
        if bound > inc + TIE_TOL:
            return True
        if bound >= inc - TIE_TOL:
            return opts.gap_target > 0 or _key_excludes(partial, inc_key)
        if opts.gap_target > 0 and relative_gap(inc, bound) <= opts.gap_target:
            gap_pruned = min(gap_pruned, bound)
            return True
        return False

    while stack:
        if (opts.node_limit is not None and nodes >= opts.node_limit) or (
            opts.time_limit is not None and time.perf_counter() - start > opts.time_limit
        ):
            limit_hit = True
            break
        node = stack.pop()
        nodes += 1
        if trace is not None:
            trace.append((node.k, node.partial, node.bound))
        if prune(node.bound, node.partial):
            continue

        k = node.k
        cands: list[_Candidate] = []
        while k <= tab.last_step and k < t:
            if tab.future[k]:
                cands = tab.available(k, node.sent, node.energy)
            if cands:
                break
            k += 1
        if not cands or node.bound >= node.cost - 1e-15:
            # no improving transmission can follow: stop sending
            n_rf, n_oc, sw, sav = node.counts
            leaf = breakdown_from_counts(cfg, (n_rf, n_oc), sw, tab.base_delay - sav)
            key = node.partial
            if better(cfg, leaf, key, inc_obj, inc_key):
                inc_obj, inc_key = leaf, key
                inc_sched = Schedule(tuple((i, j, m, kk) for kk, i, j, m in key))
                history.append((nodes, leaf.total))
            continue

        children = []
        for order, match in enumerate(_matchings(cands)):
            cost = node.cost
            sent = node.sent
            energy = list(node.energy)
            regs = list(node.regs)
            n_rf, n_oc, sw, sav = node.counts
            added = []
            for c in match:
                cost += c.gain
                for dev in (c.i, c.j):
                    if regs[dev] != c.m:
                        cost += w2
                        sw += 1
                        regs[dev] = c.m
                energy[c.m * n + c.i] -= c.sender_cost
                energy[c.m * n + c.j] -= c.receiver_cost
                sent |= 1 << c.f
                if c.m:
                    n_oc += 1
                else:
                    n_rf += 1
                sav += c.saving
                added.append((k, c.i, c.j, c.m))
            bound = cost + tab.optimistic(k + 1, sent, regs)
            children.append((bound, order, _Node(k + 1, cost, bound, sent, tuple(energy), tuple(regs),
                                                 node.partial + tuple(added), (n_rf, n_oc, sw, sav))))
        children.sort(key=lambda c: (c[0], c[1]))
        stack.extend(child for _, _, child in reversed(children))

    open_bound = min((nd.bound for nd in stack), default=math.inf)
    global_bound = min(inc_obj.total, gap_pruned, open_bound)
    gap = relative_gap(inc_obj.total, global_bound)
    exhausted = not limit_hit
    if exhausted and global_bound >= inc_obj.total - TIE_TOL:
        proof, gap, global_bound = Proof.OPTIMAL, 0.0, inc_obj.total
    else:
        proof = Proof.GAP_BOUNDED
    objective = evaluate_schedule(s, inc_sched, cfg)
    return Solution(inc_sched, objective, proof, gap=gap, nodes=nodes, elapsed=time.perf_counter() - start,
                    best_bound=global_bound, history=tuple(history))


# --------------------------------------------------------------------------
# Brute force oracle
# --------------------------------------------------------------------------


def _step_matchings(cands: list[tuple]) -> list[list[tuple]]:
    out: list[list[tuple]] = []

    def rec(idx: int, chosen: list, busy: frozenset):
        if idx == len(cands):
            out.append(list(chosen))
            return
        i, j, m, k = cands[idx]
        if i not in busy and j not in busy:
            rec(idx + 1, chosen + [cands[idx]], busy | {i, j})
        rec(idx + 1, chosen, busy)

    rec(0, [], frozenset())
    return out


def search_space_size(s: Scenario) -> int:
    """Number of leaves the exhaustive search visits (product of per-step matching counts)."""
    per_step: dict[int, list] = {}
    for tx in candidate_transmissions(s):
        per_step.setdefault(tx[3], []).append(tx)
    size = 1
    for cands in per_step.values():
        size *= len(_step_matchings(cands))
    return size


def solve_bruteforce(s: Scenario, cfg: ObjectiveConfig, max_leaves: int = 200_000) -> Solution:
    """Evaluate every per-step matching combination; infeasible leaves are dropped by the checker."""
    start = time.perf_counter()
    size = search_space_size(s)
    if size > max_leaves:
        raise SearchSpaceExceeded(f"search space of {size} schedules exceeds the cap {max_leaves}; use solve_bnb")
    per_step: dict[int, list] = {}
    for tx in candidate_transmissions(s):
        per_step.setdefault(tx[3], []).append(tx)
    options = [_step_matchings(per_step[k]) for k in sorted(per_step)]

    best_obj, best_sched = None, None
    leaves = 0

    def rec(level: int, acc: list):
        nonlocal best_obj, best_sched, leaves
        if level == len(options):
            leaves += 1
            sched = Schedule(tuple(acc))
            if not check_constraints(s, sched).feasible:
                return
            obj = evaluate_schedule(s, sched, cfg, check=False)
            if better(cfg, obj, sched.order_key, best_obj, best_sched.order_key if best_sched else None):
                best_obj, best_sched = obj, sched
            return
        for choice in options[level]:
            rec(level + 1, acc + choice)

    rec(0, [])
    return Solution(best_sched, best_obj, Proof.OPTIMAL, nodes=leaves, elapsed=time.perf_counter() - start,
                    best_bound=best_obj.total)


# --------------------------------------------------------------------------
# External MILP route (HiGHS through scipy) on the linearized model
# --------------------------------------------------------------------------


def solve_milp(s: Scenario, cfg: ObjectiveConfig, time_limit: float | None = None,
               gap_target: float = 0.0) -> Solution:
    from scipy.optimize import Bounds, LinearConstraint, milp

    start = time.perf_counter()
    model = build_milp(s, cfg)
    if model.n_variables == 0:
        objective = evaluate_schedule(s, Schedule.empty(), cfg)
        return Solution(Schedule.empty(), objective, Proof.OPTIMAL, gap=0.0, nodes=0,
                        elapsed=time.perf_counter() - start, best_bound=objective.total)
    c, a, lo, hi, (lb, ub), integrality = model.to_arrays()
    constraints = [LinearConstraint(a, lo, hi)] if model.n_constraints else []
    options = {"mip_rel_gap": gap_target}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(c, constraints=constraints, bounds=Bounds(lb, ub), integrality=integrality, options=options)
    if res.x is None:
        raise SolverLimitError(f"MILP solver returned no solution: {res.message}")
    schedule = model.schedule_from_values(np.round(res.x))
    objective = evaluate_schedule(s, schedule, cfg)
    bound = getattr(res, "mip_dual_bound", None)
    bound = objective.total if bound is None else float(bound) + model.objective_constant
    proof = Proof.OPTIMAL if res.status == 0 and gap_target == 0 else Proof.GAP_BOUNDED
    return Solution(schedule, objective, proof, gap=relative_gap(objective.total, bound), nodes=int(getattr(res, "mip_node_count", 0) or 0),
                    elapsed=time.perf_counter() - start, best_bound=bound)


METHODS = ("bnb", "greedy", "bruteforce", "milp")


def solve(s: Scenario, cfg: ObjectiveConfig, method: str = "bnb", opts: SolverOptions | None = None) -> Solution:
    opts = opts or SolverOptions()
    if method == "bnb":
        return solve_bnb(s, cfg, opts)
    if method == "greedy":
        return solve_greedy(s, cfg)
    if method == "bruteforce":
        return solve_bruteforce(s, cfg)
    if method == "milp":
        return solve_milp(s, cfg, time_limit=opts.time_limit, gap_target=opts.gap_target)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
