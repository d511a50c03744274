"""Monte-Carlo experiment campaigns.

A campaign draws ``iterations`` scenarios per sweep point (seed
``seed_base + t`` for iteration ``t``), solves each under one technology mode
and records objective, AoI and resource metrics. ``compare_modes`` runs
several campaigns on the same seeds and reports paired per-seed deltas.
Everything written to CSV is a deterministic function of the configuration;
wall-clock timings are kept out of the files.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from ._pool import ordered_map
from .aoi import system_metrics
from .model import ObjectiveConfig, energy_usage
from .scenario import GenerationConfig, Technology, generate_scenario
from .solver import METHODS, SolverOptions, solve

MODES = {
    "RFOnly": (Technology.RF,),
    "OCOnly": (Technology.OC,),
    "Hybrid": (Technology.RF, Technology.OC),
}

CSV_FORMAT_VERSION = 1


class CampaignError(RuntimeError):
    pass


def _desk_generation() -> GenerationConfig:
    return GenerationConfig(n_nodes=9, n_aps=2)


@dataclass(frozen=True)
class ExperimentConfig:
    generation: GenerationConfig = field(default_factory=_desk_generation)
    mode: str = "Hybrid"
    alpha: tuple[float, float, float] = (0.1, 0.1, 0.8)
    method: str = "bnb"
    gap_target: float = 0.02
    node_limit: int | None = 100_000
    time_limit: float | None = None
    iterations: int = 100
    seed_base: int = 0
    vary_nodes: tuple[int, ...] | None = None
    vary_aps: tuple[int, ...] | None = None
    workers: int = 1
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        for axis in ("vary_nodes", "vary_aps"):
            vals = getattr(self, axis)
            if vals is not None:
                vals = tuple(int(v) for v in vals)
                if not vals:
                    raise ValueError(f"{axis} must not be empty")
                object.__setattr__(self, axis, vals)
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {sorted(MODES)}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.seed_base < 2**64:
            raise ValueError("seed_base must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if len(self.alpha) != 3 or min(self.alpha) < 0 or not math.isclose(sum(self.alpha), 1.0, abs_tol=1e-9):
            raise ValueError("alpha must be three non-negative weights summing to 1")

    @property
    def label(self) -> str:
        return self.name or self.mode

    @property
    def solver_options(self) -> SolverOptions:
        return SolverOptions(gap_target=self.gap_target, node_limit=self.node_limit, time_limit=self.time_limit)

    def points(self) -> list[tuple[int, int]]:
        """Sweep points as ``(n_nodes, n_aps)`` pairs."""
        nodes = self.vary_nodes or (self.generation.n_nodes,)
        aps = self.vary_aps or (self.generation.n_aps,)
        return list(itertools.product(nodes, aps))

    def seeds(self) -> list[int]:
        return [self.seed_base + t for t in range(self.iterations)]

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["generation"] = self.generation.to_dict()
        for k in ("alpha", "vary_nodes", "vary_aps"):
            if out[k] is not None:
                out[k] = list(out[k])
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown experiment parameters: {sorted(unknown)}")
        data = dict(data)
        if "generation" in data:
            gen = data["generation"]
            data["generation"] = gen if isinstance(gen, GenerationConfig) else GenerationConfig.from_dict(gen)
        return cls(**data)


# --------------------------------------------------------------------------
# Per-iteration records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IterationRecord:
    config: str
    mode: str
    n_nodes: int
    n_aps: int
    iteration: int
    seed: int
    status: str
    metrics: dict[str, float] = field(default_factory=dict)
    proof: str = ""
    trajectories: tuple = field(default=(), repr=False)  # (receiver, data_type, values)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def point(self) -> tuple[int, int]:
        return (self.n_nodes, self.n_aps)


METRICS = (
    "total", "energy_norm", "switching_norm", "delay_norm", "gap", "nodes",
    "n_messages", "n_sent", "n_rf", "n_oc", "switch_count",
    "transmission_rate", "energy_rate", "energy_consumed",
    "mean_aoi", "peak_aoi",
)


def metric_names(n_types: int) -> list[str]:
    names = list(METRICS)
    for l in range(n_types):
        names += [f"mean_aoi_t{l}", f"peak_aoi_t{l}"]
    return names


def _run_iteration(item, cfg: ExperimentConfig) -> IterationRecord:
    (n_nodes, n_aps), t = item
    seed = cfg.seed_base + t
    gen = dataclasses.replace(cfg.generation, n_nodes=n_nodes, n_aps=n_aps)
    base = dict(config=cfg.label, mode=cfg.mode, n_nodes=n_nodes, n_aps=n_aps, iteration=t, seed=seed)
    try:
        s = generate_scenario(gen, seed).with_technologies(MODES[cfg.mode])
        ocfg = ObjectiveConfig.for_scenario(s, cfg.alpha)
        sol = solve(s, ocfg, cfg.method, cfg.solver_options)
        aoi = system_metrics(s, sol.schedule)
    except Exception as exc:  # recorded, never fatal for the campaign
        return IterationRecord(**base, status=f"error:{type(exc).__name__}: {exc}")

    x = sol.schedule
    used = energy_usage(s, x)
    techs = [int(m) for m in MODES[cfg.mode]]
    consumed = used[techs].sum(axis=0)
    budget = s.energy_budget[techs].sum(axis=0)
    has_budget = budget > 0
    n_rf, n_oc = sol.objective.tech_counts
    m = {
        "total": sol.objective.total,
        "energy_norm": sol.objective.energy_norm,
        "switching_norm": sol.objective.switching_norm,
        "delay_norm": sol.objective.delay_norm,
        "gap": float(sol.gap),
        "nodes": sol.nodes,
        "n_messages": len(s.messages),
        "n_sent": len(x),
        "n_rf": n_rf,
        "n_oc": n_oc,
        "switch_count": sol.objective.switching,
        "transmission_rate": len(x) / len(s.messages),
        "energy_rate": float(np.mean(consumed[has_budget] / budget[has_budget])) if has_budget.any() else 0.0,
        "energy_consumed": float(consumed.mean()),
        "mean_aoi": aoi.mean_aoi,
        "peak_aoi": aoi.peak_aoi,
    }
    for l in range(s.n_types):
        mm, pp = aoi.per_type.get(l, (math.nan, math.nan))
        m[f"mean_aoi_t{l}"], m[f"peak_aoi_t{l}"] = mm, pp
    trajs = tuple((key.receiver, key.data_type, tr.values) for key, tr in aoi.trajectories.items())
    return IterationRecord(**base, status="ok", metrics=m, proof=sol.proof.value, trajectories=trajs)


# --------------------------------------------------------------------------
# Results
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Aggregate:
    config: str
    mode: str
    n_nodes: int
    n_aps: int
    metric: str
    mean: float
    std: float
    count: int


def aggregate(records: Sequence[IterationRecord], n_types: int) -> list[Aggregate]:
    """Mean, sample standard deviation and count per config, point and metric over successful iterations.

    NaN values (a data type absent from a scenario) are left out of the count.
    """
    groups: dict[tuple, list[IterationRecord]] = {}
    for r in records:
        groups.setdefault((r.config, r.mode, r.n_nodes, r.n_aps), []).append(r)
    out = []
    for (label, mode, nn, na), recs in groups.items():
        ok = [r for r in recs if r.ok]
        for name in metric_names(n_types):
            vals = np.array([r.metrics[name] for r in ok], dtype=float)
            vals = np.sort(vals[~np.isnan(vals)])  # sorted so the sum is order independent
            count = len(vals)
            mean = float(math.fsum(vals) / count) if count else math.nan
            std = float(np.std(vals, ddof=1)) if count > 1 else (0.0 if count else math.nan)
            out.append(Aggregate(label, mode, nn, na, name, mean, std, count))
    return out


@dataclass
class CampaignResult:
    config: ExperimentConfig
    records: list[IterationRecord]
    aggregates: list[Aggregate]

    @property
    def label(self) -> str:
        return self.config.label

    def ok_records(self, point: tuple[int, int] | None = None) -> list[IterationRecord]:
        return [r for r in self.records if r.ok and (point is None or r.point == point)]

    def values(self, metric: str, point: tuple[int, int] | None = None) -> np.ndarray:
        return np.array([r.metrics[metric] for r in self.ok_records(point)], dtype=float)

    def aggregate_of(self, metric: str, point: tuple[int, int] | None = None) -> Aggregate:
        point = point or self.config.points()[0]
        for a in self.aggregates:
            if a.metric == metric and (a.n_nodes, a.n_aps) == point:
                return a
        raise KeyError(f"no aggregate for {metric} at {point}")


def run_campaign(cfg: ExperimentConfig) -> CampaignResult:
    items = [(p, t) for p in cfg.points() for t in range(cfg.iterations)]
    records = ordered_map(partial(_run_iteration, cfg=cfg), items, cfg.workers)
    if not any(r.ok for r in records):
        raise CampaignError(f"all {len(records)} iterations failed; first error: {records[0].status}")
    return CampaignResult(cfg, records, aggregate(records, cfg.generation.n_types))


# --------------------------------------------------------------------------
# Paired comparison
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Delta:
    config: str
    baseline: str
    n_nodes: int
    n_aps: int
    iteration: int
    seed: int
    metric: str
    delta: float


@dataclass
class ComparisonTable:
    results: list[CampaignResult]
    paired_seeds: bool
    deltas: list[Delta]

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.results]

    def result(self, label: str) -> CampaignResult:
        for r in self.results:
            if r.label == label:
                return r
        raise KeyError(label)

    def deltas_for(self, metric: str, point: tuple[int, int] | None = None, config: str | None = None) -> np.ndarray:
        return np.array([d.delta for d in self.deltas if d.metric == metric
                         and (point is None or (d.n_nodes, d.n_aps) == point)
                         and (config is None or d.config == config)])

    def sign_summary(self, metric: str, point: tuple[int, int] | None = None, config: str | None = None) -> dict:
        d = self.deltas_for(metric, point, config)
        return {
            "n": int(len(d)),
            "negative": int(np.sum(d < 0)),
            "zero": int(np.sum(d == 0)),
            "positive": int(np.sum(d > 0)),
            "mean": float(d.mean()) if len(d) else math.nan,
        }


_PAIRING_FIELDS = ("generation", "alpha", "method", "gap_target", "node_limit", "time_limit")


def _check_comparable(cfgs: Sequence[ExperimentConfig], paired_seeds: bool) -> None:
    if len(cfgs) < 1:
        raise ValueError("at least one configuration is required")
    first = cfgs[0]
    for c in cfgs[1:]:
        if c.points() != first.points():
            raise ValueError(f"mismatched sweep axes: {c.label} has {c.points()}, {first.label} has {first.points()}")
        for f in _PAIRING_FIELDS:
            if getattr(c, f) != getattr(first, f):
                raise ValueError(f"configurations {first.label} and {c.label} differ in {f}, not only in mode")
        if paired_seeds and (c.seed_base, c.iterations) != (first.seed_base, first.iterations):
            raise ValueError("paired comparison needs identical seed_base and iterations")


def _unique_labels(cfgs: Sequence[ExperimentConfig]) -> list[ExperimentConfig]:
    seen: dict[str, int] = {}
    out = []
    for c in cfgs:
        n = seen.get(c.label, 0) + 1
        seen[c.label] = n
        out.append(c if n == 1 else dataclasses.replace(c, name=f"{c.label}#{n}"))
    return out


def paired_deltas(results: Sequence[CampaignResult]) -> list[Delta]:
    """``config - baseline`` per seed and metric, with the first result as baseline."""
    base = results[0]
    n_types = base.config.generation.n_types
    index = {(r.point, r.iteration): r for r in base.records if r.ok}
    out = []
    for res in results[1:]:
        for r in res.records:
            b = index.get((r.point, r.iteration))
            if not r.ok or b is None:
                continue
            for name in metric_names(n_types):
                out.append(Delta(res.label, base.label, r.n_nodes, r.n_aps, r.iteration, r.seed, name,
                                 r.metrics[name] - b.metrics[name]))
    return out


def compare_modes(cfgs: Sequence[ExperimentConfig], paired_seeds: bool = True) -> ComparisonTable:
    _check_comparable(cfgs, paired_seeds)
    cfgs = _unique_labels(cfgs)
    results = [run_campaign(c) for c in cfgs]
    return ComparisonTable(results, paired_seeds, paired_deltas(results) if paired_seeds else [])


def trend_deltas(result: CampaignResult, metric: str, axis: str = "n_aps") -> list[np.ndarray]:
    """Per-seed change of ``metric`` between consecutive sweep points along ``axis``."""
    points = sorted(result.config.points(), key=lambda p: p[1] if axis == "n_aps" else p[0])
    out = []
    for a, b in zip(points, points[1:]):
        va = {r.iteration: r.metrics[metric] for r in result.ok_records(a)}
        vb = {r.iteration: r.metrics[metric] for r in result.ok_records(b)}
        out.append(np.array([vb[t] - va[t] for t in sorted(set(va) & set(vb))]))
    return out


# --------------------------------------------------------------------------
# Output files
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _results_of(obj) -> tuple[list[CampaignResult], ComparisonTable | None]:
    if isinstance(obj, ComparisonTable):
        return obj.results, obj
    if isinstance(obj, CampaignResult):
        return [obj], None
    raise TypeError(f"cannot emit outputs for {type(obj).__name__}")


def manifest(obj) -> dict:
    results, table = _results_of(obj)
    return {
        "artifact": "hybrid_aoi",
        "version": __version__,
        "csv_format": CSV_FORMAT_VERSION,
        "kind": "comparison" if table is not None else "campaign",
        "paired_seeds": table.paired_seeds if table is not None else False,
        "configs": [r.config.to_dict() for r in results],
        "seeds": {r.label: r.config.seeds() for r in results},
    }


def emit_outputs(obj, out_dir: str | Path, figures: bool = True) -> list[Path]:
    """Write CSV tables, the run manifest and (optionally) PNG figures; returns written paths."""
    results, table = _results_of(obj)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_types = results[0].config.generation.n_types
    names = metric_names(n_types)
    written = []

    head = ["config", "mode", "n_nodes", "n_aps", "iteration", "seed", "status", "proof"] + names
    rows = []
    for res in results:
        for r in res.records:
            rows.append([r.config, r.mode, r.n_nodes, r.n_aps, r.iteration, r.seed, r.status, r.proof]
                        + [r.metrics.get(n, math.nan) for n in names])
    _write_csv(out / "iterations.csv", head, rows)
    written.append(out / "iterations.csv")

    rows = [[a.config, a.mode, a.n_nodes, a.n_aps, a.metric, a.mean, a.std, a.count]
            for res in results for a in res.aggregates]
    _write_csv(out / "aggregates.csv", ["config", "mode", "n_nodes", "n_aps", "metric", "mean", "std", "count"], rows)
    written.append(out / "aggregates.csv")

    def traj_rows():
        for res in results:
            for r in res.records:
                for receiver, dtype, values in r.trajectories:
                    for k, age in enumerate(values):
                        yield [r.config, r.mode, r.n_nodes, r.n_aps, r.iteration, r.seed, receiver, dtype, k, age]

    _write_csv(out / "aoi_trajectories.csv",
               ["config", "mode", "n_nodes", "n_aps", "iteration", "seed", "receiver", "data_type", "step", "age"],
               traj_rows())
    written.append(out / "aoi_trajectories.csv")

    if table is not None and table.paired_seeds:
        rows = [[d.config, d.baseline, d.n_nodes, d.n_aps, d.iteration, d.seed, d.metric, d.delta]
                for d in table.deltas]
        _write_csv(out / "deltas.csv",
                   ["config", "baseline", "n_nodes", "n_aps", "iteration", "seed", "metric", "delta"], rows)
        written.append(out / "deltas.csv")

    (out / "manifest.json").write_text(json.dumps(manifest(obj), indent=1) + "\n")
    written.append(out / "manifest.json")

    if figures:
        from . import report

        written += report.campaign_figures(results, out / "figures")
    return written


def configs_from_doc(doc) -> tuple[list[ExperimentConfig], bool]:
    """Experiments held in a parsed JSON document.

    Accepted shapes: a single config object, ``{"configs": [...], "paired_seeds": ...}``
    (which is also what a manifest looks like), or a bare list of configs.
    """
    if isinstance(doc, list):
        return [ExperimentConfig.from_dict(d) for d in doc], True
    if not isinstance(doc, dict):
        raise ValueError("experiment file must hold a JSON object or list")
    if "configs" in doc:
        return [ExperimentConfig.from_dict(d) for d in doc["configs"]], bool(doc.get("paired_seeds", True))
    return [ExperimentConfig.from_dict(doc)], True


def load_configs(path: str | Path) -> tuple[list[ExperimentConfig], bool]:
    return configs_from_doc(json.loads(Path(path).read_text()))


def rerun(path: str | Path):
    """Re-execute the run described by a manifest."""
    doc = json.loads(Path(path).read_text())
    cfgs, paired = load_configs(path)
    if doc.get("kind") == "comparison":
        return compare_modes(cfgs, paired)
    return run_campaign(cfgs[0])
