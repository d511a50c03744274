"""Schedules, derived state, objective evaluation and feasibility checking."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .scenario import SCHEMA_VERSION, Scenario, ScenarioError, Technology, derive_demand

Transmission = tuple[int, int, int, int]  # (sender, receiver, technology, step)


@dataclass(frozen=True)
class Schedule:
    """Sparse binary decision tensor ``x[i][j][m][k]`` stored as a sorted tuple of transmissions."""

    transmissions: tuple[Transmission, ...] = ()

    def __post_init__(self):
        txs = tuple(sorted({tuple(int(v) for v in tx) for tx in self.transmissions}))
        object.__setattr__(self, "transmissions", txs)

    @classmethod
    def empty(cls) -> "Schedule":
        return cls(())

    def __len__(self) -> int:
        return len(self.transmissions)

    def __iter__(self):
        return iter(self.transmissions)

    def __contains__(self, tx) -> bool:
        return tuple(tx) in set(self.transmissions)

    def add(self, *txs: Transmission) -> "Schedule":
        return Schedule(self.transmissions + tuple(txs))

    def remove(self, tx: Transmission) -> "Schedule":
        return Schedule(t for t in self.transmissions if t != tuple(tx))

    @property
    def order_key(self) -> tuple[tuple[int, int, int, int], ...]:
        """Tie-break key: earlier step, lower sender, lower receiver, RF before OC."""
        return tuple(sorted((k, i, j, m) for i, j, m, k in self.transmissions))

    def to_dense(self, s: Scenario) -> np.ndarray:
        x = np.zeros((s.n_devices, s.n_devices, 2, s.horizon), dtype=np.int8)
        for i, j, m, k in self.transmissions:
            x[i, j, m, k] = 1
        return x

    @classmethod
    def from_dense(cls, x: np.ndarray) -> "Schedule":
        return cls(tuple(map(tuple, np.argwhere(np.asarray(x) > 0.5))))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "schedule",
            "fields": ["sender", "receiver", "technology", "step"],
            "transmissions": [list(tx) for tx in self.transmissions],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Schedule":
        if doc.get("kind") != "schedule":
            raise ScenarioError("format", "document kind must be 'schedule'")
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ScenarioError("schema_version", f"unsupported schema version {doc.get('schema_version')!r}")
        rows = doc.get("transmissions", [])
        if any(len(r) != 4 for r in rows):
            raise ScenarioError("format", "each transmission must be a 4-tuple")
        return cls(tuple(tuple(r) for r in rows))


def save_schedule(x: Schedule, path: str | Path) -> None:
    Path(path).write_text(json.dumps(x.to_dict(), indent=1) + "\n")


def load_schedule(path: str | Path) -> Schedule:
    return Schedule.from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# Endogenous state
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EndogenousState:
    """State fully determined by a schedule.

    ``register[i, k]`` is the technology register (0 RF, 1 OC) after step k;
    ``delta`` maps every window slot ``(i, j, k)`` to its delay value;
    ``send_step[f]`` / ``send_tech[f]`` give where message f went out (-1 if never).
    """

    register: np.ndarray
    delta: dict[tuple[int, int, int], int]
    sent: tuple[bool, ...]
    send_step: tuple[int, ...]
    send_tech: tuple[int, ...]

    @property
    def switch_count(self) -> int:
        padded = np.concatenate([np.zeros((self.register.shape[0], 1), dtype=int), self.register], axis=1)
        return int(np.sum(np.diff(padded, axis=1) ** 2))


def derive_endogenous(s: Scenario, x: Schedule) -> EndogenousState:
    n, t = s.n_devices, s.horizon
    lookup = s.slot_message
    delta = {slot: s.tau for slot in lookup}
    counts = [0] * len(s.messages)
    send_step = [-1] * len(s.messages)
    send_tech = [-1] * len(s.messages)
    active = np.full((n, t), -1, dtype=int)
    for i, j, m, k in x.transmissions:
        f = lookup.get((i, j, k))
        if f is None:
            raise ValueError(f"transmission {(i, j, m, k)} lies outside every message window")
        msg = s.messages[f]
        delta[(i, j, k)] = k - msg.window_start + 1
        counts[f] += 1
        send_step[f], send_tech[f] = k, m
        for dev in (i, j):
            active[dev, k] = max(active[dev, k], m)

    register = np.zeros((n, t), dtype=int)
    prev = np.zeros(n, dtype=int)
    for k in range(t):
        cur = np.where(active[:, k] >= 0, active[:, k], prev)
        register[:, k] = cur
        prev = cur
    sent = tuple(c == 1 for c in counts)
    return EndogenousState(register, delta, sent, tuple(send_step), tuple(send_tech))


# --------------------------------------------------------------------------
# Objective
# --------------------------------------------------------------------------


def normalization_coefficients(s: Scenario, transmission_energy=None) -> tuple[float, float, float]:
    """Upper bounds used to scale the three sub-objectives.

    Energy: every message sent with the costliest technology. Switching: one
    switch per device per step. Delay: every window slot at ``tau``.
    """
    if not s.messages:
        raise ValueError("scenario has no messages; the objective is undefined")
    se = s.transmission_energy if transmission_energy is None else tuple(transmission_energy)
    s1 = len(s.messages) * max(se)
    s2 = s.n_devices * s.horizon
    s3 = s.tau * s.total_window_slots
    if min(s1, s2, s3) <= 0:
        raise ValueError(f"normalization coefficients must be positive, got {(s1, s2, s3)}")
    return float(s1), float(s2), float(s3)


@dataclass(frozen=True)
class ObjectiveConfig:
    alpha: tuple[float, float, float]
    transmission_energy: tuple[float, float]
    normalization: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "transmission_energy", tuple(float(e) for e in self.transmission_energy))
        object.__setattr__(self, "normalization", tuple(float(v) for v in self.normalization))
        if len(self.alpha) != 3 or min(self.alpha) < 0 or abs(sum(self.alpha) - 1.0) > 1e-9:
            raise ValueError(f"alpha must be three non-negative weights summing to 1, got {self.alpha}")
        if min(self.normalization) <= 0:
            raise ValueError("normalization coefficients must be positive")

    @classmethod
    def for_scenario(cls, s: Scenario, alpha=(0.1, 0.1, 0.8)) -> "ObjectiveConfig":
        se = s.transmission_energy
        return cls(tuple(alpha), se, normalization_coefficients(s, se))

    @property
    def weights(self) -> tuple[float, float, float]:
        """Per-unit weights of energy, switch count and delay in the total."""
        a, norm = self.alpha, self.normalization
        return a[0] / norm[0], a[1] / norm[1], a[2] / norm[2]

    def total(self, energy: float, switching: float, delay: float) -> float:
        w1, w2, w3 = self.weights
        return w1 * energy + w2 * switching + w3 * delay

    def exact_total(self, tech_counts: tuple[int, int], switching: int, delay: int) -> Fraction:
        """Exact rational total; used to break float ties deterministically."""
        a = [Fraction(v) for v in self.alpha]
        norm = [Fraction(v) for v in self.normalization]
        energy = sum(Fraction(e) * c for e, c in zip(self.transmission_energy, tech_counts))
        return a[0] * energy / norm[0] + a[1] * switching / norm[1] + a[2] * delay / norm[2]


@dataclass(frozen=True)
class ObjectiveBreakdown:
    energy: float
    switching: int
    delay: int
    energy_norm: float
    switching_norm: float
    delay_norm: float
    total: float
    tech_counts: tuple[int, int] = (0, 0)

    def as_dict(self) -> dict:
        return {
            "energy": self.energy,
            "switching": self.switching,
            "delay": self.delay,
            "energy_norm": self.energy_norm,
            "switching_norm": self.switching_norm,
            "delay_norm": self.delay_norm,
            "total": self.total,
        }


def breakdown_from_counts(cfg: ObjectiveConfig, tech_counts, switching: int, delay: int) -> ObjectiveBreakdown:
    se = cfg.transmission_energy
    energy = se[0] * tech_counts[0] + se[1] * tech_counts[1]
    n1, n2, n3 = cfg.normalization
    return ObjectiveBreakdown(
        energy=energy,
        switching=int(switching),
        delay=int(delay),
        energy_norm=energy / n1,
        switching_norm=switching / n2,
        delay_norm=delay / n3,
        total=cfg.total(energy, switching, delay),
        tech_counts=(int(tech_counts[0]), int(tech_counts[1])),
    )


def delay_sum(s: Scenario, x: Schedule) -> int:
    """Sum of delay values over all window slots."""
    return sum(derive_endogenous(s, x).delta.values())


def evaluate_schedule(s: Scenario, x: Schedule, cfg: ObjectiveConfig, check: bool = True) -> ObjectiveBreakdown:
    if check:
        report = check_constraints(s, x)
        if not report.feasible:
            raise InfeasibleScheduleError(report)
    state = derive_endogenous(s, x)
    counts = [0, 0]
    for _, _, m, _ in x.transmissions:
        counts[m] += 1
    return breakdown_from_counts(cfg, tuple(counts), state.switch_count, sum(state.delta.values()))


# --------------------------------------------------------------------------
# Feasibility
# --------------------------------------------------------------------------


class ConstraintId(enum.IntEnum):
    DEGREE = 2
    DEMAND = 3
    VISIBILITY = 4
    SELF_LOOP = 5
    SEND_RECEIVE = 6
    ENERGY = 7
    AT_MOST_ONCE = 8


@dataclass(frozen=True)
class Violation:
    constraint: ConstraintId
    indices: dict

    def to_dict(self) -> dict:
        return {"constraint": int(self.constraint), "name": self.constraint.name.lower(), "indices": self.indices}


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def families(self) -> set[ConstraintId]:
        return {v.constraint for v in self.violations}

    def of(self, cid: ConstraintId) -> list[Violation]:
        return [v for v in self.violations if v.constraint == cid]

    def to_list(self) -> list[dict]:
        return [v.to_dict() for v in self.violations]

    def __str__(self) -> str:
        if self.feasible:
            return "feasible"
        return "; ".join(f"({int(v.constraint)}) {v.constraint.name.lower()} {v.indices}" for v in self.violations)


class InfeasibleScheduleError(ValueError):
    def __init__(self, report: FeasibilityReport):
        self.report = report
        super().__init__(f"infeasible schedule: {report}")


def energy_usage(s: Scenario, x: Schedule) -> np.ndarray:
    """Energy drawn from each ``[technology, device]`` pool by ``x``."""
    used = np.zeros((2, s.n_devices))
    for i, j, m, _ in x.transmissions:
        if s.split_energy:
            used[m, i] += s.send_cost[m]
            used[m, j] += s.receive_cost[m]
        else:
            used[m, i] += s.send_cost[m] + s.receive_cost[m]
    return used


def check_constraints(s: Scenario, x: Schedule) -> FeasibilityReport:
    n, t = s.n_devices, s.horizon
    for i, j, m, k in x.transmissions:
        if not (0 <= i < n and 0 <= j < n and m in (0, 1) and 0 <= k < t):
            raise ValueError(f"transmission {(i, j, m, k)} does not fit the scenario dimensions")
    rho = derive_demand(s)
    out: list[Violation] = []
    outgoing: dict[tuple[int, int], int] = {}
    incoming: dict[tuple[int, int], int] = {}
    for i, j, m, k in x.transmissions:
        outgoing[(i, k)] = outgoing.get((i, k), 0) + 1
        incoming[(j, k)] = incoming.get((j, k), 0) + 1

    for (i, k), c in sorted(outgoing.items()):
        if c > 1:
            out.append(Violation(ConstraintId.DEGREE, {"i": i, "k": k, "direction": "out", "count": c}))
    for (j, k), c in sorted(incoming.items()):
        if c > 1:
            out.append(Violation(ConstraintId.DEGREE, {"j": j, "k": k, "direction": "in", "count": c}))
    for i, j, m, k in x.transmissions:
        if not rho[i, j, k]:
            out.append(Violation(ConstraintId.DEMAND, {"i": i, "j": j, "m": m, "k": k}))
        if not s.technology_enabled(m) or s.visibility[m, i, j, k] < s.thresholds[m]:
            out.append(Violation(ConstraintId.VISIBILITY, {
                "i": i, "j": j, "m": m, "k": k,
                "v": float(s.visibility[m, i, j, k]), "sigma": s.thresholds[m],
                "enabled": s.technology_enabled(m),
            }))
        if i == j:
            out.append(Violation(ConstraintId.SELF_LOOP, {"i": i, "m": m, "k": k}))
    for (j, k) in sorted(set(incoming) & set(outgoing)):
        out.append(Violation(ConstraintId.SEND_RECEIVE, {"j": j, "k": k}))
    used = energy_usage(s, x)
    for m, i in zip(*np.nonzero(used > s.energy_budget + 1e-9)):
        out.append(Violation(ConstraintId.ENERGY, {
            "i": int(i), "m": int(m), "used": float(used[m, i]), "budget": float(s.energy_budget[m, i]),
        }))
    per_message: dict[int, int] = {}
    lookup = s.slot_message
    for i, j, m, k in x.transmissions:
        f = lookup.get((i, j, k))
        if f is not None:
            per_message[f] = per_message.get(f, 0) + 1
    for f, c in sorted(per_message.items()):
        if c > 1:
            msg = s.messages[f]
            out.append(Violation(ConstraintId.AT_MOST_ONCE, {"message": f, "i": msg.sender, "j": msg.receiver, "count": c}))
    return FeasibilityReport(out)


def is_feasible(s: Scenario, x: Schedule) -> bool:
    return check_constraints(s, x).feasible


def candidate_transmissions(s: Scenario) -> list[Transmission]:
    """Every single transmission that passes demand, visibility and technology checks."""
    out = []
    for msg in s.messages:
        for k in msg.slots:
            for m in (Technology.RF, Technology.OC):
                if s.link_feasible(m, msg.sender, msg.receiver, k):
                    out.append((msg.sender, msg.receiver, int(m), k))
    return sorted(out, key=lambda tx: (tx[3], tx[0], tx[1], tx[2]))
