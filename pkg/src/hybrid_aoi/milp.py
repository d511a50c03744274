"""Exact linearization of the scheduling problem as a 0-1 linear program.

Only ``x`` variables that pass the demand, visibility and technology checks
are created. Delays are substituted out exactly, the quadratic switch term is
replaced by binary ``z`` indicators, and the technology register ``s`` is
propagated with a linearized binary product ``w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ObjectiveConfig, Schedule, candidate_transmissions
from .scenario import Scenario, Technology

SENSES = ("<=", ">=", "=")


@dataclass
class Variable:
    name: str
    kind: str  # "binary" | "integer" | "continuous"
    lower: float
    upper: float
    role: tuple


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, float]
    sense: str
    rhs: float


@dataclass
class LinearModel:
    name: str = "hybrid_schedule"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    index: dict[str, int] = field(default_factory=dict)
    roles: dict[tuple, int] = field(default_factory=dict)

    def add_variable(self, name: str, kind: str, lower: float, upper: float, role: tuple) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name}")
        idx = len(self.variables)
        self.variables.append(Variable(name, kind, lower, upper, role))
        self.index[name] = idx
        self.roles[role] = idx
        return idx

    def add_constraint(self, name: str, coeffs: dict[int, float], sense: str, rhs: float) -> None:
        if sense not in SENSES:
            raise ValueError(f"bad sense {sense!r}")
        if any(not 0 <= v < len(self.variables) for v in coeffs):
            raise ValueError(f"constraint {name} references an unregistered variable")
        self.constraints.append(Constraint(name, {v: c for v, c in coeffs.items() if c != 0}, sense, float(rhs)))

    def add_objective(self, var: int, coeff: float) -> None:
        self.objective[var] = self.objective.get(var, 0.0) + coeff

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def x_variables(self) -> list[int]:
        return [idx for idx, v in enumerate(self.variables) if v.role[0] == "x"]

    def evaluate_objective(self, values) -> float:
        values = np.asarray(values, dtype=float)
        return self.objective_constant + sum(c * values[v] for v, c in self.objective.items())

    def violated(self, values, tol: float = 1e-9) -> list[str]:
        values = np.asarray(values, dtype=float)
        bad = []
        for idx, v in enumerate(self.variables):
            if values[idx] < v.lower - tol or values[idx] > v.upper + tol:
                bad.append(f"bound:{v.name}")
        for con in self.constraints:
            lhs = sum(c * values[v] for v, c in con.coeffs.items())
            if (con.sense == "<=" and lhs > con.rhs + tol) or (con.sense == ">=" and lhs < con.rhs - tol) or (
                con.sense == "=" and abs(lhs - con.rhs) > tol
            ):
                bad.append(con.name)
        return bad

    def to_arrays(self):
        """Dense ``(c, A, lower_rows, upper_rows, bounds, integrality)`` for array-based MILP solvers."""
        n = self.n_variables
        c = np.zeros(n)
        for v, coeff in self.objective.items():
            c[v] = coeff
        a = np.zeros((self.n_constraints, n))
        lo = np.full(self.n_constraints, -np.inf)
        hi = np.full(self.n_constraints, np.inf)
        for r, con in enumerate(self.constraints):
            for v, coeff in con.coeffs.items():
                a[r, v] = coeff
            if con.sense in ("<=", "="):
                hi[r] = con.rhs
            if con.sense in (">=", "="):
                lo[r] = con.rhs
        lb = np.array([v.lower for v in self.variables])
        ub = np.array([v.upper for v in self.variables])
        integrality = np.array([0 if v.kind == "continuous" else 1 for v in self.variables])
        return c, a, lo, hi, (lb, ub), integrality

    def schedule_from_values(self, values) -> Schedule:
        values = np.asarray(values)
        txs = []
        for idx in self.x_variables():
            if values[idx] > 0.5:
                _, i, j, m, k = self.variables[idx].role
                txs.append((i, j, m, k))
        return Schedule(tuple(txs))


def build_milp(s: Scenario, cfg: ObjectiveConfig) -> LinearModel:
    if not s.messages:
        raise ValueError("scenario has no messages; the objective is undefined")
    model = LinearModel()
    w_energy, w_switch, w_delay = cfg.weights
    se = cfg.transmission_energy
    lookup = s.slot_message

    # x variables, with delay substitution folded into the objective
    involving: dict[tuple[int, int], dict[int, list[int]]] = {}
    for i, j, m, k in candidate_transmissions(s):
        msg = s.messages[lookup[(i, j, k)]]
        idx = model.add_variable(f"x_{i}_{j}_{m}_{k}", "binary", 0, 1, ("x", i, j, m, k))
        saving = s.tau - (k - msg.window_start + 1)
        model.add_objective(idx, w_energy * se[m] - w_delay * saving)
        for dev in (i, j):
            involving.setdefault((dev, k), {0: [], 1: []})[m].append(idx)
    model.objective_constant = w_delay * s.tau * s.total_window_slots

    by_role = model.roles

    # (2) degree bounds
    for (dev, k), per_tech in sorted(involving.items()):
        outs = [v for m in (0, 1) for v in per_tech[m] if model.variables[v].role[1] == dev]
        ins = [v for m in (0, 1) for v in per_tech[m] if model.variables[v].role[2] == dev]
        if len(outs) > 1:
            model.add_constraint(f"deg_out_{dev}_{k}", {v: 1.0 for v in outs}, "<=", 1)
        if len(ins) > 1:
            model.add_constraint(f"deg_in_{dev}_{k}", {v: 1.0 for v in ins}, "<=", 1)
        # (6) no send while receiving; with (2) this is total activity <= 1
        if outs and ins:
            model.add_constraint(f"act_{dev}_{k}", {v: 1.0 for v in outs + ins}, "<=", 1)

    # (7) per-technology energy budget
    for dev in range(s.n_devices):
        for m in (0, 1):
            coeffs: dict[int, float] = {}
            for (d, k), per_tech in involving.items():
                if d != dev:
                    continue
                for v in per_tech[m]:
                    _, i, j, _, _ = model.variables[v].role
                    if s.split_energy:
                        cost = s.send_cost[m] if i == dev else s.receive_cost[m]
                    else:
                        cost = s.send_cost[m] + s.receive_cost[m] if i == dev else 0.0
                    if cost:
                        coeffs[v] = cost
            if coeffs and sum(coeffs.values()) > s.energy_budget[m, dev]:
                model.add_constraint(f"energy_{dev}_{m}", dict(sorted(coeffs.items())), "<=", s.energy_budget[m, dev])

    # (8) each message at most once
    for f, msg in enumerate(s.messages):
        vs = [by_role[("x", msg.sender, msg.receiver, m, k)] for k in msg.slots for m in (0, 1)
              if ("x", msg.sender, msg.receiver, m, k) in by_role]
        if len(vs) > 1:
            model.add_constraint(f"once_{f}", {v: 1.0 for v in vs}, "<=", 1)

    # technology register propagation and switch indicators; with no switching
    # weight they affect neither feasibility nor cost and are left out
    devices = sorted({dev for dev, _ in involving}) if w_switch > 0 else []
    for dev in devices:
        prev = None
        for k in range(s.horizon):
            per_tech = involving.get((dev, k), {0: [], 1: []})
            a_rf, a_oc = per_tech[Technology.RF], per_tech[Technology.OC]
            sv = model.add_variable(f"s_{dev}_{k}", "binary", 0, 1, ("s", dev, k))
            zv = model.add_variable(f"z_{dev}_{k}", "binary", 0, 1, ("z", dev, k))
            model.add_objective(zv, w_switch)
            if prev is None:
                # register before the first step is RF
                model.add_constraint(f"sdef_{dev}_{k}", {sv: 1.0, **{v: -1.0 for v in a_oc}}, "=", 0)
                model.add_constraint(f"zpos_{dev}_{k}", {zv: 1.0, sv: -1.0}, ">=", 0)
            else:
                wv = model.add_variable(f"w_{dev}_{k}", "binary", 0, 1, ("w", dev, k))
                act = {v: 1.0 for v in a_rf + a_oc}
                model.add_constraint(f"sdef_{dev}_{k}", {sv: 1.0, wv: -1.0, **{v: -1.0 for v in a_oc}}, "=", 0)
                model.add_constraint(f"wact_{dev}_{k}", {wv: 1.0, **act}, "<=", 1)
                model.add_constraint(f"wprev_{dev}_{k}", {wv: 1.0, prev: -1.0}, "<=", 0)
                model.add_constraint(f"wlow_{dev}_{k}", {wv: 1.0, prev: -1.0, **act}, ">=", 0)
                model.add_constraint(f"zpos_{dev}_{k}", {zv: 1.0, sv: -1.0, prev: 1.0}, ">=", 0)
                model.add_constraint(f"zneg_{dev}_{k}", {zv: 1.0, sv: 1.0, prev: -1.0}, ">=", 0)
            prev = sv
    return model


def induced_assignment(model: LinearModel, s: Scenario, x: Schedule) -> np.ndarray:
    """Values of every model variable implied by schedule ``x``."""
    values = np.zeros(model.n_variables)
    txs = set(x.transmissions)
    activity: dict[tuple[int, int], tuple[int, int]] = {}
    for i, j, m, k in txs:
        role = ("x", i, j, m, k)
        if role not in model.roles:
            raise ValueError(f"transmission {(i, j, m, k)} has no model variable")
        values[model.roles[role]] = 1.0
        for dev in (i, j):
            rf, oc = activity.get((dev, k), (0, 0))
            activity[(dev, k)] = (rf + (m == 0), oc + (m == 1))
    registers: dict[int, int] = {}
    for idx, var in enumerate(model.variables):
        if var.role[0] != "s":
            continue
        _, dev, k = var.role
        prev = registers.get(dev, 0)
        rf, oc = activity.get((dev, k), (0, 0))
        inactive = 1 - rf - oc
        cur = oc + inactive * prev
        values[idx] = cur
        values[model.roles[("z", dev, k)]] = abs(cur - prev)
        if k > 0:
            values[model.roles[("w", dev, k)]] = inactive * prev
        registers[dev] = cur
    return values
