"""PNG figures for campaign, sweep and AoI outputs (matplotlib, headless)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "figure.figsize": (6.4, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.dpi": 120,
}
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_pareto(curves: dict[str, Sequence], path: str | Path) -> Path:
    """Energy versus delay, one curve per technology; stars mark zero-delay points."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for name, points in curves.items():
            d = [p.avg_delay_pct for p in points]
            e = [p.avg_energy_pct for p in points]
            (line,) = ax.plot(d, e, marker="o", ms=4, label=name)
            stars = [p for p in points if p.zero_delay and p.n_scheduled > 0]
            if stars:
                ax.plot([p.avg_delay_pct for p in stars], [p.avg_energy_pct for p in stars], "*",
                        ms=12, color=line.get_color())
            for p in points:
                ax.annotate(f"{p.alpha1:g}", (p.avg_delay_pct, p.avg_energy_pct), fontsize=6,
                            xytext=(3, 3), textcoords="offset points")
        ax.set_xlabel("Avg. delay (%)")
        ax.set_ylabel("Avg. consumed energy (%)")
        ax.legend()
        return _save(fig, Path(path))


def plot_alpha2(rows: Sequence, threshold: float, path: str | Path) -> Path:
    rows = [r for r in rows if not r.skipped]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        a2 = [r.alpha2 for r in rows]
        for attr, name in (("dev_energy", "energy"), ("dev_switch", "switching"), ("dev_delay", "delay")):
            ax.plot(a2, [getattr(r, attr) for r in rows], marker="o", ms=4, label=name)
        ax.axhline(threshold, color="k", ls="--", lw=0.8)
        ax.set_xlabel("alpha2")
        ax.set_ylabel("Deviation from stand-alone optimum (pp)")
        ax.legend()
        return _save(fig, Path(path))


def plot_trajectories(series: dict[str, dict[int, np.ndarray]], path: str | Path, title: str = "") -> Path:
    """``series[label][data_type]`` holds the stream-mean age per step."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, len(series), sharey=True, squeeze=False,
                                 figsize=(4.2 * len(series), 3.6))
        for ax, (label, per_type) in zip(axes[0], series.items()):
            for l, values in sorted(per_type.items()):
                ax.step(np.arange(len(values)), values, where="post", label=f"type {l + 1}")
            ax.set_title(label)
            ax.set_xlabel("Time step")
        axes[0][0].set_ylabel("AoI")
        axes[0][0].legend()
        if title:
            fig.suptitle(title)
        return _save(fig, Path(path))


def plot_axis_trend(results, metric: str, axis: str, path: str | Path) -> Path:
    idx = 0 if axis == "n_nodes" else 1
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for res in results:
            pts = sorted(res.config.points(), key=lambda p: p[idx])
            means = [res.aggregate_of(metric, p).mean for p in pts]
            stds = [res.aggregate_of(metric, p).std for p in pts]
            xs = [p[idx] for p in pts]
            ax.errorbar(xs, means, yerr=stds, marker="o", ms=4, capsize=3, label=res.label)
        ax.set_xlabel("Number of APs" if axis == "n_aps" else "Number of IoT nodes")
        ax.set_ylabel(metric)
        ax.legend()
        return _save(fig, Path(path))


def _mean_trajectory(record) -> dict[int, np.ndarray]:
    per_type: dict[int, list] = {}
    for _, dtype, values in record.trajectories:
        per_type.setdefault(dtype, []).append(values)
    return {l: np.mean(np.array(v, dtype=float), axis=0) for l, v in per_type.items()}


def campaign_figures(results, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    written = []
    series = {}
    for res in results:
        first = next((r for r in res.records if r.ok), None)
        if first is not None:
            series[res.label] = _mean_trajectory(first)
    if series:
        written.append(plot_trajectories(series, out / "aoi_trajectories.png", "First iteration, stream-mean AoI"))
    points = results[0].config.points()
    if len(points) > 1:
        axis = "n_aps" if len({p[1] for p in points}) > 1 else "n_nodes"
        for metric in ("mean_aoi", "peak_aoi", "transmission_rate", "energy_consumed"):
            written.append(plot_axis_trend(results, metric, axis, out / f"{metric}_vs_{axis}.png"))
    return written
