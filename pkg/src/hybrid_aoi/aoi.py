"""Age-of-Information trajectories and the mean / peak AoI metrics.

Ages are measured in steps and include the unit transmission delay, so a
message received in the step it was generated resets the age to 1. Before
the first reception the age at step k is ``k + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import EndogenousState, Schedule, derive_endogenous
from .scenario import Scenario


@dataclass(frozen=True, order=True)
class StreamKey:
    receiver: int
    data_type: int
    sender: int | None = None

    def matches(self, msg) -> bool:
        return (
            msg.receiver == self.receiver
            and msg.data_type == self.data_type
            and (self.sender is None or msg.sender == self.sender)
        )


@dataclass(frozen=True)
class Update:
    step: int
    pre_age: int  # age just before the reception
    generated: int
    sender: int


@dataclass(frozen=True)
class AoITrajectory:
    key: StreamKey
    values: tuple[int, ...]
    updates: tuple[Update, ...]

    @property
    def horizon(self) -> int:
        return len(self.values)


def aoi_trajectory(s: Scenario, x: Schedule, key: StreamKey, state: EndogenousState | None = None) -> AoITrajectory:
    matching = [f for f, msg in enumerate(s.messages) if key.matches(msg)]
    if not matching:
        raise ValueError(f"no message matches stream {key}")
    state = state or derive_endogenous(s, x)
    arrivals: dict[int, tuple[int, int]] = {}
    for f in matching:
        k = state.send_step[f]
        if k >= 0:
            msg = s.messages[f]
            # a receiver takes at most one message per step
            arrivals[k] = (msg.window_start, msg.sender)

    values, updates = [], []
    age = 0
    for k in range(s.horizon):
        pre = age + 1
        age = pre
        if k in arrivals:
            generated, sender = arrivals[k]
            fresh = k - generated + 1
            if fresh < pre:
                updates.append(Update(k, pre, generated, sender))
                age = fresh
        values.append(age)
    return AoITrajectory(key, tuple(values), tuple(updates))


def mean_aoi(traj: AoITrajectory) -> float:
    """Rectangle-rule time average of the age over the horizon."""
    return float(sum(traj.values)) / len(traj.values)


def peak_aoi(traj: AoITrajectory) -> float:
    """Average age just before each update; the final age if nothing arrived."""
    if not traj.updates:
        return float(traj.values[-1])
    return float(sum(u.pre_age for u in traj.updates)) / len(traj.updates)


@dataclass(frozen=True)
class AoIMetrics:
    mean_aoi: float
    peak_aoi: float
    per_type: dict[int, tuple[float, float]]
    per_stream: dict[StreamKey, tuple[float, float]]
    trajectories: dict[StreamKey, AoITrajectory] = field(default_factory=dict, repr=False)

    def records(self) -> list[dict]:
        return [
            {"receiver": key.receiver, "data_type": key.data_type, "mean_aoi": m, "peak_aoi": p}
            for key, (m, p) in sorted(self.per_stream.items())
        ]


def stream_keys(s: Scenario, per_sender: bool = False) -> list[StreamKey]:
    if per_sender:
        keys = {StreamKey(m.receiver, m.data_type, m.sender) for m in s.messages}
    else:
        keys = {StreamKey(m.receiver, m.data_type) for m in s.messages}
    return sorted(keys, key=lambda k: (k.receiver, k.data_type, -1 if k.sender is None else k.sender))


def system_metrics(s: Scenario, x: Schedule, per_sender: bool = False) -> AoIMetrics:
    """Per-stream metrics aggregated by unweighted means per data type and overall."""
    if not s.messages:
        raise ValueError("scenario has no messages; AoI metrics are undefined")
    state = derive_endogenous(s, x)
    per_stream, trajectories = {}, {}
    for key in stream_keys(s, per_sender):
        traj = aoi_trajectory(s, x, key, state)
        trajectories[key] = traj
        per_stream[key] = (mean_aoi(traj), peak_aoi(traj))
    per_type = {}
    for l in sorted({k.data_type for k in per_stream}):
        vals = np.array([v for k, v in per_stream.items() if k.data_type == l])
        per_type[l] = (float(vals[:, 0].mean()), float(vals[:, 1].mean()))
    allv = np.array(list(per_stream.values()))
    return AoIMetrics(float(allv[:, 0].mean()), float(allv[:, 1].mean()), per_type, per_stream, trajectories)
