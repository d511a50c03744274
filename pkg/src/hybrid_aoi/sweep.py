"""Weight sensitivity analysis.

``pareto_sweep_alpha1`` traces the energy/delay trade-off of a single
technology as the energy weight grows. ``grid_search_alpha2`` picks switching
weights for the hybrid system whose sub-objectives stay close to the values
each attains when optimized on its own.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from ._pool import ordered_map
from .model import ObjectiveConfig, derive_endogenous, energy_usage
from .scenario import GenerationConfig, Scenario, Technology, generate_scenario
from .solver import Solution, SolverOptions, solve

DEFAULT_ALPHA1_GRID = tuple(round(0.025 * i, 3) for i in range(13))
DEFAULT_ALPHA2_GRID = tuple(round(0.05 * i, 2) for i in range(11))
RECOMMENDED_ALPHA = (0.1, 0.1, 0.8)


@dataclass(frozen=True)
class ParetoPoint:
    alpha1: float
    avg_energy_pct: float
    avg_delay_pct: float
    n_scheduled: float  # mean over seeds
    zero_delay: bool

    def as_row(self) -> dict:
        return {
            "alpha1": self.alpha1,
            "energy_pct": self.avg_energy_pct,
            "delay_pct": self.avg_delay_pct,
            "n_scheduled": self.n_scheduled,
            "zero_delay": int(self.zero_delay),
        }


def energy_pct(s: Scenario, x, technology: int) -> float:
    """Consumed share of the technology's total budget, in percent."""
    budget = float(s.energy_budget[technology].sum())
    if budget <= 0:
        return 0.0
    return 100.0 * float(energy_usage(s, x)[technology].sum()) / budget


def delay_pct(s: Scenario, x) -> tuple[float, bool]:
    """Mean per-message delay on a 0-100 scale and whether every sent message left at its window start.

    A message sent at its window start scores 0, an unsent one 100.
    """
    state = derive_endogenous(s, x)
    scale = max(s.tau - 1, 1)
    vals = []
    at_start = True
    for f, msg in enumerate(s.messages):
        k = state.send_step[f]
        d = s.tau if k < 0 else k - msg.window_start + 1
        if k >= 0 and d != 1:
            at_start = False
        vals.append(100.0 * (d - 1) / scale)
    return float(np.mean(vals)), at_start


def _solve_single(item, base_config: GenerationConfig, technology: int, method: str, opts: SolverOptions):
    alpha1, seed = item
    s = generate_scenario(base_config, seed).with_technologies([technology])
    cfg = ObjectiveConfig.for_scenario(s, (alpha1, 0.0, 1.0 - alpha1))
    sol = solve(s, cfg, method, opts)
    dpct, at_start = delay_pct(s, sol.schedule)
    return energy_pct(s, sol.schedule, technology), dpct, len(sol.schedule), at_start


def pareto_sweep_alpha1(base_config: GenerationConfig, technology: int, alpha1_grid: Sequence[float] = DEFAULT_ALPHA1_GRID,
                        seeds: Sequence[int] = (0,), opts: SolverOptions | None = None, method: str = "bnb",
                        workers: int = 1) -> list[ParetoPoint]:
    """One point per weight: metrics averaged over the seeded single-technology instances."""
    technology = Technology(technology)
    grid = [float(a) for a in alpha1_grid]
    if any(not 0.0 <= a <= 1.0 for a in grid):
        raise ValueError("alpha1 grid values must lie in [0, 1]")
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    items = [(a, seed) for a in grid for seed in seeds]
    fn = partial(_solve_single, base_config=base_config, technology=technology, method=method,
                 opts=opts or SolverOptions())
    results = ordered_map(fn, items, workers)
    points = []
    for idx, a in enumerate(grid):
        chunk = results[idx * len(seeds):(idx + 1) * len(seeds)]
        e, d, n, z = zip(*chunk)
        points.append(ParetoPoint(a, float(np.mean(e)), float(np.mean(d)), float(np.mean(n)), all(z)))
    return points


# --------------------------------------------------------------------------
# Switching weight grid search
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Alpha2Result:
    alpha2: float
    accepted: bool
    dev_energy: float
    dev_switch: float
    dev_delay: float
    skipped: bool = False
    note: str = ""
    recommended: bool = False

    def as_row(self) -> dict:
        return {
            "alpha2": self.alpha2,
            "dev_energy": self.dev_energy,
            "dev_switch": self.dev_switch,
            "dev_delay": self.dev_delay,
            "accepted": int(self.accepted),
            "skipped": int(self.skipped),
            "recommended": int(self.recommended),
            "note": self.note,
        }


def _normalized_terms(item, base_config: GenerationConfig, method: str, opts: SolverOptions):
    alpha, seed = item
    s = generate_scenario(base_config, seed)
    cfg = ObjectiveConfig.for_scenario(s, alpha)
    sol: Solution = solve(s, cfg, method, opts)
    ob = sol.objective
    return ob.energy_norm, ob.switching_norm, ob.delay_norm


def grid_search_alpha2(base_config: GenerationConfig, alpha1: float = 0.1, threshold_pct: float = 5.0,
                       alpha2_grid: Sequence[float] = DEFAULT_ALPHA2_GRID, seeds: Sequence[int] = (0,),
                       opts: SolverOptions | None = None, method: str = "bnb", workers: int = 1) -> list[Alpha2Result]:
    """Accept a switching weight when no normalized sub-objective drifts more than
    ``threshold_pct`` percentage points above its stand-alone optimum.

    Deviations are averaged over the seeds. With ``alpha2 = 0`` the switching
    term is outside the objective and its deviation does not affect acceptance.
    """
    if threshold_pct <= 0:
        raise ValueError("threshold_pct must be positive")
    if not 0.0 <= alpha1 <= 1.0:
        raise ValueError("alpha1 must lie in [0, 1]")
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    opts = opts or SolverOptions()
    grid = [float(a) for a in alpha2_grid]
    runnable = [a for a in grid if alpha1 + a <= 1.0 + 1e-12]

    refs = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
    alphas = refs + [(alpha1, a, max(0.0, 1.0 - alpha1 - a)) for a in runnable]
    items = [(alpha, seed) for alpha in alphas for seed in seeds]
    fn = partial(_normalized_terms, base_config=base_config, method=method, opts=opts)
    results = ordered_map(fn, items, workers)

    def block(idx):
        return np.array(results[idx * len(seeds):(idx + 1) * len(seeds)])

    ref = np.array([block(t)[:, t] for t in range(3)]).T  # seeds x 3, each term at its own optimum
    out = []
    pos = 3
    for a in grid:
        if a not in runnable:
            out.append(Alpha2Result(a, False, float("nan"), float("nan"), float("nan"), skipped=True,
                                    note=f"alpha1 + alpha2 = {alpha1 + a:g} exceeds 1"))
            continue
        dev = 100.0 * (block(pos) - ref).mean(axis=0)
        pos += 1
        checked = dev if a > 0 else dev[[0, 2]]
        accepted = bool(np.all(checked <= threshold_pct))
        recommended = accepted and np.isclose(alpha1, RECOMMENDED_ALPHA[0]) and np.isclose(a, RECOMMENDED_ALPHA[1])
        note = "switching term not weighted" if a == 0 else ""
        out.append(Alpha2Result(a, accepted, float(dev[0]), float(dev[1]), float(dev[2]), note=note,
                                recommended=bool(recommended)))
    return out


def write_pareto_csv(curves: dict[str, Sequence[ParetoPoint]], path: str | Path) -> None:
    """One row per (technology, alpha1) point."""
    fields = ["technology", "alpha1", "energy_pct", "delay_pct", "n_scheduled", "zero_delay"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for name, points in curves.items():
            for p in points:
                row = {"technology": name, **p.as_row()}
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_alpha2_csv(rows: Sequence[Alpha2Result], path: str | Path) -> None:
    fields = ["alpha2", "dev_energy", "dev_switch", "dev_delay", "accepted", "skipped", "recommended", "note"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.as_row().items()})
