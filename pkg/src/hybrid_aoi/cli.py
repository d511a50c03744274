"""Command line interface.

Every subcommand accepts ``--config FILE`` (JSON). Its keys use the long flag
names with dashes replaced by underscores; flags given on the command line
override the file. Exit status: 0 success, 1 usage error, 2 invalid or
infeasible input, 3 solver or search limit reached.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .aoi import system_metrics
from .campaign import MODES, CampaignError, ExperimentConfig, compare_modes, configs_from_doc, emit_outputs, run_campaign
from .lpformat import export_lp
from .milp import build_milp
from .model import InfeasibleScheduleError, ObjectiveConfig, check_constraints, evaluate_schedule, load_schedule
from .scenario import GenerationConfig, ScenarioError, Technology, generate_scenario, load_scenario, save_scenario
from .solver import METHODS, SearchSpaceExceeded, SolverLimitError, SolverOptions, solve
from .sweep import (
    DEFAULT_ALPHA1_GRID,
    DEFAULT_ALPHA2_GRID,
    grid_search_alpha2,
    pareto_sweep_alpha1,
    write_alpha2_csv,
    write_pareto_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_LIMIT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# Option resolution: defaults < config file < command line
# --------------------------------------------------------------------------


def _read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("format", f"{path} is not valid JSON: {exc}") from exc


def _resolve(args: argparse.Namespace, defaults: dict[str, Any]) -> dict[str, Any]:
    opts = dict(defaults)
    if getattr(args, "config", None):
        doc = _read_json(args.config)
        if not isinstance(doc, dict):
            raise UsageError(f"config file {args.config} must hold a JSON object")
        unknown = set(doc) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}; allowed: {sorted(defaults)}")
        opts.update(doc)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def _generation(opts: dict) -> GenerationConfig:
    gen = opts.get("generation") or {}
    if isinstance(gen, str):
        gen = _read_json(gen)
    gen = dict(gen)
    for key in ("n_nodes", "n_aps", "n_types", "horizon", "pair_probability"):
        if opts.get(key) is not None:
            gen[key] = opts[key]
    return GenerationConfig.from_dict(gen)


def _scenario(opts: dict):
    if opts.get("scenario"):
        s = load_scenario(opts["scenario"])
    else:
        if opts.get("seed") is None:
            raise UsageError("give --scenario FILE, or --seed (with optional --generation FILE) to draw one")
        s = generate_scenario(_generation(opts), int(opts["seed"]))
    if opts.get("mode"):
        s = s.with_technologies(MODES[opts["mode"]])
    return s


def _print(doc: Any) -> None:
    print(json.dumps(doc, indent=1, default=str))


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

SCENARIO_KEYS = {"scenario": None, "generation": None, "seed": None, "mode": None,
                 "n_nodes": None, "n_aps": None, "n_types": None, "horizon": None, "pair_probability": None}
SOLVE_KEYS = {**SCENARIO_KEYS, "alpha": [0.1, 0.1, 0.8], "method": "bnb", "gap": 0.0, "node_limit": None,
              "time_limit": None, "out": None}


def cmd_scenario_gen(args) -> int:
    opts = _resolve(args, {**SCENARIO_KEYS, "seed": 0, "out": None})
    s = generate_scenario(_generation(opts), int(opts["seed"]))
    if opts.get("mode"):
        s = s.with_technologies(MODES[opts["mode"]])
    if opts["out"]:
        save_scenario(s, opts["out"])
    _print({"seed": s.seed, "n_devices": s.n_devices, "n_messages": len(s.messages), "tau": s.tau, "out": opts["out"]})
    return EXIT_OK


def cmd_solve(args) -> int:
    opts = _resolve(args, SOLVE_KEYS)
    s = _scenario(opts)
    cfg = ObjectiveConfig.for_scenario(s, opts["alpha"])
    sol = solve(s, cfg, opts["method"], SolverOptions(opts["gap"], opts["node_limit"], opts["time_limit"]))
    doc = sol.schedule.to_dict()
    doc.update(objective=sol.objective.as_dict(), proof=sol.proof.value, gap=sol.gap, nodes=sol.nodes,
               best_bound=sol.best_bound)
    if opts["out"]:
        Path(opts["out"]).write_text(json.dumps(doc, indent=1) + "\n")
    _print({k: v for k, v in doc.items() if k != "transmissions"} | {"n_transmissions": len(sol.schedule)})
    return EXIT_OK


def cmd_check(args) -> int:
    opts = _resolve(args, {**SCENARIO_KEYS, "schedule": None, "alpha": [0.1, 0.1, 0.8]})
    if not opts["schedule"]:
        raise UsageError("--schedule is required")
    s = _scenario(opts)
    x = load_schedule(opts["schedule"])
    report = check_constraints(s, x)
    doc: dict[str, Any] = {"feasible": report.feasible, "violations": report.to_list()}
    if report.feasible and s.messages:
        doc["objective"] = evaluate_schedule(s, x, ObjectiveConfig.for_scenario(s, opts["alpha"])).as_dict()
    _print(doc)
    return EXIT_OK if report.feasible else EXIT_INPUT


def cmd_aoi(args) -> int:
    opts = _resolve(args, {**SCENARIO_KEYS, "schedule": None, "per_sender": False, "out": None, "figures": True})
    if not opts["schedule"]:
        raise UsageError("--schedule is required")
    s = _scenario(opts)
    x = load_schedule(opts["schedule"])
    report = check_constraints(s, x)
    if not report.feasible:
        raise InfeasibleScheduleError(report)
    metrics = system_metrics(s, x, per_sender=bool(opts["per_sender"]))
    if opts["out"]:
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "aoi_streams.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "receiver", "data_type", "sender", "mean_aoi", "peak_aoi"])
            for key, (m, p) in sorted(metrics.per_stream.items(), key=lambda kv: str(kv[0])):
                w.writerow([s.seed, key.receiver, key.data_type, "" if key.sender is None else key.sender, repr(m), repr(p)])
        with open(out / "aoi_trajectories.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["receiver", "data_type", "sender", "step", "age"])
            for key, tr in metrics.trajectories.items():
                for k, age in enumerate(tr.values):
                    w.writerow([key.receiver, key.data_type, "" if key.sender is None else key.sender, k, age])
        if opts["figures"]:
            import numpy as np

            from .report import plot_trajectories

            per_type: dict[int, list] = {}
            for key, tr in metrics.trajectories.items():
                per_type.setdefault(key.data_type, []).append(tr.values)
            plot_trajectories({"schedule": {l: np.mean(v, axis=0) for l, v in per_type.items()}},
                              out / "aoi_trajectories.png")
    _print({"mean_aoi": metrics.mean_aoi, "peak_aoi": metrics.peak_aoi,
            "per_type": {str(l): {"mean_aoi": m, "peak_aoi": p} for l, (m, p) in metrics.per_type.items()}})
    return EXIT_OK


SWEEP_KEYS = {"generation": None, "n_nodes": None, "n_aps": None, "n_types": None, "horizon": None,
              "pair_probability": None, "seed": 0, "iterations": 5, "seeds": None, "method": "bnb",
              "gap": 0.0, "node_limit": None, "time_limit": None, "workers": 1, "out": None, "figures": True}


def _sweep_common(opts):
    seeds = opts["seeds"] if opts["seeds"] is not None else [int(opts["seed"]) + t for t in range(int(opts["iterations"]))]
    return _generation(opts), seeds, SolverOptions(opts["gap"], opts["node_limit"], opts["time_limit"])


def cmd_sweep_alpha1(args) -> int:
    opts = _resolve(args, {**SWEEP_KEYS, "technology": ["RF", "OC"], "grid": list(DEFAULT_ALPHA1_GRID)})
    gen, seeds, sopts = _sweep_common(opts)
    curves = {}
    for name in opts["technology"]:
        try:
            tech = Technology[name]
        except KeyError:
            raise UsageError(f"unknown technology {name!r}; expected RF or OC") from None
        curves[name] = pareto_sweep_alpha1(gen, tech, opts["grid"], seeds, sopts, opts["method"], int(opts["workers"]))
    if opts["out"]:
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        write_pareto_csv(curves, out / "pareto.csv")
        if opts["figures"]:
            from .report import plot_pareto

            plot_pareto(curves, out / "pareto.png")
    _print({name: [dataclasses.asdict(p) for p in pts] for name, pts in curves.items()})
    return EXIT_OK


def cmd_sweep_alpha2(args) -> int:
    opts = _resolve(args, {**SWEEP_KEYS, "gap": 0.02, "alpha1": 0.1, "threshold": 5.0,
                           "grid": list(DEFAULT_ALPHA2_GRID)})
    gen, seeds, sopts = _sweep_common(opts)
    rows = grid_search_alpha2(gen, float(opts["alpha1"]), float(opts["threshold"]), opts["grid"], seeds, sopts,
                              opts["method"], int(opts["workers"]))
    if opts["out"]:
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        write_alpha2_csv(rows, out / "alpha2_search.csv")
        if opts["figures"]:
            from .report import plot_alpha2

            plot_alpha2(rows, float(opts["threshold"]), out / "alpha2_search.png")
    _print([r.as_row() for r in rows])
    return EXIT_OK


def _experiment_overrides(args) -> dict:
    over = {}
    if args.seed is not None:
        over["seed_base"] = args.seed
    for key in ("iterations", "workers", "gap_target", "node_limit"):
        if getattr(args, key, None) is not None:
            over[key] = getattr(args, key)
    return over


def _load_experiments(paths: list[str]) -> tuple[list[ExperimentConfig], bool, dict]:
    # "out" and "figures" may sit next to the experiment fields in a config file
    cfgs, paired, extra = [], True, {}
    for p in paths:
        doc = _read_json(p)
        if isinstance(doc, dict):
            extra.update({k: doc.pop(k) for k in ("out", "figures") if k in doc})
        cfg_list, paired_here = configs_from_doc(doc)
        cfgs += cfg_list
        paired = paired and paired_here
    return cfgs, paired, extra


def cmd_campaign_run(args) -> int:
    if args.config:
        cfgs, _, extra = _load_experiments(args.config)
    else:
        cfgs, extra = [ExperimentConfig()], {}
    if len(cfgs) != 1:
        raise UsageError("campaign run takes exactly one experiment; use campaign compare for several")
    over = _experiment_overrides(args)
    if args.mode:
        over["mode"] = args.mode
    cfg = dataclasses.replace(cfgs[0], **over)
    result = run_campaign(cfg)
    out = args.out or extra.get("out")
    if out:
        emit_outputs(result, out, figures=extra.get("figures", True) and not args.no_figures)
    _print({"config": cfg.label, "iterations": len(result.records), "ok": len(result.ok_records()),
            "mean_aoi": result.aggregate_of("mean_aoi").mean, "peak_aoi": result.aggregate_of("peak_aoi").mean,
            "out": out})
    return EXIT_OK


def cmd_campaign_compare(args) -> int:
    if args.config:
        cfgs, paired, extra = _load_experiments(args.config)
    else:
        cfgs, paired, extra = [ExperimentConfig()], True, {}
    if args.modes:
        if len(cfgs) != 1:
            raise UsageError("--modes expands a single experiment; pass one --config")
        cfgs = [dataclasses.replace(cfgs[0], mode=m, name=None) for m in args.modes]
    if len(cfgs) < 2:
        raise UsageError("campaign compare needs at least two configurations (several --config or --modes)")
    over = _experiment_overrides(args)
    cfgs = [dataclasses.replace(c, **over) for c in cfgs]
    if args.unpaired:
        paired = False
    table = compare_modes(cfgs, paired_seeds=paired)
    out = args.out or extra.get("out")
    if out:
        emit_outputs(table, out, figures=extra.get("figures", True) and not args.no_figures)
    summary = {}
    if paired:
        for label in table.labels[1:]:
            for metric in ("mean_aoi", "peak_aoi", "transmission_rate", "energy_consumed"):
                summary[f"{label}-{table.labels[0]}:{metric}"] = table.sign_summary(metric, config=label)
    _print({"configs": table.labels, "paired_seeds": paired, "paired_deltas": summary, "out": out})
    return EXIT_OK


def cmd_export_lp(args) -> int:
    opts = _resolve(args, {**SCENARIO_KEYS, "alpha": [0.1, 0.1, 0.8], "out": None})
    if not opts["out"]:
        raise UsageError("--out is required")
    s = _scenario(opts)
    model = build_milp(s, ObjectiveConfig.for_scenario(s, opts["alpha"]))
    export_lp(model, opts["out"])
    _print({"variables": model.n_variables, "constraints": model.n_constraints, "out": opts["out"]})
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _scenario_flags(p, with_file: bool = True):
    if with_file:
        p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--seed", type=int, help="generation seed (draws a scenario when --scenario is absent)")
    p.add_argument("--generation", help="generation parameters JSON file")
    p.add_argument("--mode", choices=sorted(MODES), help="restrict the enabled technologies")
    p.add_argument("--n-nodes", type=int)
    p.add_argument("--n-aps", type=int)
    p.add_argument("--n-types", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--pair-probability", type=float)


def _alpha(p):
    p.add_argument("--alpha", type=float, nargs=3, metavar=("A1", "A2", "A3"), help="objective weights")


def _sweep_flags(p):
    p.add_argument("--config")
    p.add_argument("--generation", help="generation parameters JSON file")
    p.add_argument("--n-nodes", type=int)
    p.add_argument("--n-aps", type=int)
    p.add_argument("--n-types", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--pair-probability", type=float)
    p.add_argument("--seed", type=int, help="first seed; seeds are seed..seed+iterations-1")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seeds", type=int, nargs="+", help="explicit seed list")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--gap", type=float)
    p.add_argument("--node-limit", type=int)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)


def _campaign_flags(p):
    p.add_argument("--config", action="append", help="experiment JSON or run manifest (repeatable for compare)")
    p.add_argument("--seed", type=int, help="seed_base override")
    p.add_argument("--iterations", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--gap", dest="gap_target", type=float)
    p.add_argument("--node-limit", type=int)
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybrid-aoi", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    scen = sub.add_parser("scenario", help="scenario files").add_subparsers(dest="action", required=True,
                                                                            parser_class=_Parser)
    p = scen.add_parser("gen", help="draw a random scenario")
    p.add_argument("--config")
    _scenario_flags(p, with_file=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario_gen)

    p = sub.add_parser("solve", help="optimize a schedule")
    p.add_argument("--config")
    _scenario_flags(p)
    _alpha(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--gap", type=float, help="relative gap target (0 = prove optimality)")
    p.add_argument("--node-limit", type=int)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--out", help="solution JSON file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="check a schedule against every constraint")
    p.add_argument("--config")
    _scenario_flags(p)
    _alpha(p)
    p.add_argument("--schedule")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("aoi", help="AoI metrics of a schedule")
    p.add_argument("--config")
    _scenario_flags(p)
    p.add_argument("--schedule")
    p.add_argument("--per-sender", action="store_const", const=True)
    p.add_argument("--out")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)
    p.set_defaults(func=cmd_aoi)

    sw = sub.add_parser("sweep", help="weight sensitivity analysis").add_subparsers(dest="action", required=True,
                                                                                   parser_class=_Parser)
    p = sw.add_parser("alpha1", help="energy/delay Pareto sweep per technology")
    _sweep_flags(p)
    p.add_argument("--technology", nargs="+", choices=["RF", "OC"])
    p.add_argument("--grid", type=float, nargs="+")
    p.set_defaults(func=cmd_sweep_alpha1)
    p = sw.add_parser("alpha2", help="switching weight grid search")
    _sweep_flags(p)
    p.add_argument("--alpha1", type=float)
    p.add_argument("--threshold", type=float, help="accepted deviation in percentage points")
    p.add_argument("--grid", type=float, nargs="+")
    p.set_defaults(func=cmd_sweep_alpha2)

    camp = sub.add_parser("campaign", help="Monte-Carlo campaigns").add_subparsers(dest="action", required=True,
                                                                                   parser_class=_Parser)
    p = camp.add_parser("run", help="run one experiment")
    _campaign_flags(p)
    p.add_argument("--mode", choices=sorted(MODES))
    p.set_defaults(func=cmd_campaign_run)
    p = camp.add_parser("compare", help="run experiments on paired seeds")
    _campaign_flags(p)
    p.add_argument("--modes", nargs="+", choices=sorted(MODES), help="expand one experiment into these modes")
    p.add_argument("--unpaired", action="store_true")
    p.set_defaults(func=cmd_campaign_compare)

    exp = sub.add_parser("export", help="model export").add_subparsers(dest="action", required=True,
                                                                       parser_class=_Parser)
    p = exp.add_parser("lp", help="write the linearized model in CPLEX LP format")
    p.add_argument("--config")
    _scenario_flags(p)
    _alpha(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_lp)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hybrid-aoi: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SearchSpaceExceeded, SolverLimitError, CampaignError) as exc:
        print(f"hybrid-aoi: limit reached: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except InfeasibleScheduleError as exc:
        print(f"hybrid-aoi: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ScenarioError, ValueError, KeyError, TypeError, FileNotFoundError) as exc:
        print(f"hybrid-aoi: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
