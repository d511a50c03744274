"""Problem instances for hybrid RF/optical IoT scheduling.

A :class:`Scenario` bundles the devices, per-technology visibility tensor,
message windows and energy budgets of one network over a discrete horizon.
Scenarios are immutable; :func:`generate_scenario` draws random instances and
:func:`save_scenario` / :func:`load_scenario` persist them as JSON documents
with dense, dimension-labelled tensors.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1


class Technology(enum.IntEnum):
    RF = 0
    OC = 1


TECHNOLOGIES = (Technology.RF, Technology.OC)


class DeviceKind(enum.Enum):
    NODE = "IoTNode"
    AP = "AccessPoint"


class ScenarioError(ValueError):
    """Raised when a scenario (or its file) violates a structural invariant.

    ``invariant`` is a short machine-readable name such as ``"oc_node_node"``.
    """

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        self.detail = detail
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


@dataclass(frozen=True, order=True)
class Message:
    sender: int
    receiver: int
    ordinal: int
    data_type: int
    window_start: int
    window_end: int

    @property
    def length(self) -> int:
        return self.window_end - self.window_start + 1

    @property
    def slots(self) -> range:
        return range(self.window_start, self.window_end + 1)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class Scenario:
    """One problem instance.

    ``visibility`` has shape ``(2, N, N, T)`` indexed ``[m, i, j, k]``;
    ``energy_budget`` has shape ``(2, N)``. Devices ``0..n_nodes-1`` are IoT
    nodes, the remaining ``n_aps`` are access points.
    """

    n_nodes: int
    n_aps: int
    n_types: int
    horizon: int
    messages: tuple[Message, ...]
    visibility: np.ndarray
    energy_budget: np.ndarray
    send_cost: tuple[float, float]
    receive_cost: tuple[float, float]
    thresholds: tuple[float, float]
    tau: int
    enabled: frozenset = frozenset(TECHNOLOGIES)
    split_energy: bool = False
    seed: int | None = None
    validate_on_init: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        object.__setattr__(self, "enabled", frozenset(Technology(m) for m in self.enabled))
        vis = np.asarray(self.visibility, dtype=float)
        vis.setflags(write=False)
        object.__setattr__(self, "visibility", vis)
        budget = np.asarray(self.energy_budget, dtype=float)
        budget.setflags(write=False)
        object.__setattr__(self, "energy_budget", budget)
        for name in ("send_cost", "receive_cost", "thresholds"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.validate_on_init:
            self.validate()

    # ------------------------------------------------------------------ basics
    @property
    def n_devices(self) -> int:
        return self.n_nodes + self.n_aps

    def kind(self, i: int) -> DeviceKind:
        return DeviceKind.NODE if i < self.n_nodes else DeviceKind.AP

    def is_ap(self, i: int) -> bool:
        return i >= self.n_nodes

    @property
    def transmission_energy(self) -> tuple[float, float]:
        """Energy of one complete transmission per technology (send + receive)."""
        return tuple(s + r for s, r in zip(self.send_cost, self.receive_cost))

    @property
    def total_window_slots(self) -> int:
        return sum(msg.length for msg in self.messages)

    def technology_enabled(self, m: int) -> bool:
        return Technology(m) in self.enabled

    def link_feasible(self, m: int, i: int, j: int, k: int) -> bool:
        return self.technology_enabled(m) and self.visibility[m, i, j, k] >= self.thresholds[m]

    @cached_property
    def slot_message(self) -> dict[tuple[int, int, int], int]:
        """Map ``(sender, receiver, step)`` to the index of the message whose window covers it."""
        out = {}
        for idx, msg in enumerate(self.messages):
            for k in msg.slots:
                out[(msg.sender, msg.receiver, k)] = idx
        return out

    def with_technologies(self, technologies: Iterable[int]) -> "Scenario":
        return dataclasses.replace(self, enabled=frozenset(Technology(m) for m in technologies))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and self.n_aps == other.n_aps
            and self.n_types == other.n_types
            and self.horizon == other.horizon
            and self.messages == other.messages
            and self.send_cost == other.send_cost
            and self.receive_cost == other.receive_cost
            and self.thresholds == other.thresholds
            and self.tau == other.tau
            and self.enabled == other.enabled
            and self.split_energy == other.split_energy
            and self.seed == other.seed
            and np.array_equal(self.visibility, other.visibility)
            and np.array_equal(self.energy_budget, other.energy_budget)
        )

    __hash__ = None

    # -------------------------------------------------------------- invariants
    def validate(self) -> None:
        n, t = self.n_devices, self.horizon
        if self.n_nodes < 0 or self.n_aps < 0 or n < 1 or t < 1 or self.n_types < 1:
            raise ScenarioError("dimensions", f"N_d={self.n_nodes} N_APs={self.n_aps} T={t} L={self.n_types}")
        if self.visibility.shape != (2, n, n, t):
            raise ScenarioError("shape", f"visibility has shape {self.visibility.shape}, expected {(2, n, n, t)}")
        if self.energy_budget.shape != (2, n):
            raise ScenarioError("shape", f"energy budget has shape {self.energy_budget.shape}, expected {(2, n)}")
        vis = self.visibility
        if not np.all(np.isfinite(vis)) or vis.min(initial=0.0) < 0.0 or vis.max(initial=0.0) > 1.0:
            raise ScenarioError("visibility_range", "visibility values must lie in [0, 1]")
        if not np.array_equal(vis, vis.transpose(0, 2, 1, 3)):
            raise ScenarioError("visibility_symmetric", "v[m][i][j][k] must equal v[m][j][i][k]")
        if np.any(vis[:, np.arange(n), np.arange(n), :] != 0):
            raise ScenarioError("self_link", "v[m][i][i][k] must be 0")
        nodes, aps = slice(0, self.n_nodes), slice(self.n_nodes, n)
        if np.any(vis[Technology.OC, nodes, nodes, :] != 0):
            raise ScenarioError("oc_node_node", "IoT nodes cannot talk to each other over OC")
        if np.any(vis[:, aps, aps, :] != 0):
            raise ScenarioError("ap_ap", "AP-to-AP links are not modelled")
        if np.any(self.energy_budget < 0) or min(self.send_cost + self.receive_cost) < 0:
            raise ScenarioError("energy_nonnegative", "energy budgets and costs must be non-negative")
        if any(not 0.0 <= s <= 1.0 for s in self.thresholds):
            raise ScenarioError("threshold_range", f"thresholds {self.thresholds} outside [0, 1]")

        longest = 0
        by_pair: dict[tuple[int, int], list[Message]] = {}
        for msg in self.messages:
            if not (0 <= msg.sender < n and 0 <= msg.receiver < n) or msg.sender == msg.receiver:
                raise ScenarioError("device_index", f"bad endpoints in {msg}")
            if not 0 <= msg.data_type < self.n_types:
                raise ScenarioError("data_type", f"data type out of range in {msg}")
            if not 0 <= msg.window_start <= msg.window_end < t:
                raise ScenarioError("window_bounds", f"window outside [0, {t}) in {msg}")
            longest = max(longest, msg.length)
            by_pair.setdefault((msg.sender, msg.receiver), []).append(msg)
        for pair, msgs in by_pair.items():
            msgs = sorted(msgs, key=lambda m: m.window_start)
            for a, b in zip(msgs, msgs[1:]):
                if b.window_start <= a.window_end:
                    raise ScenarioError("window_disjoint", f"overlapping windows for pair {pair}")
        if self.tau <= longest:
            raise ScenarioError("tau", f"tau={self.tau} must exceed the longest window ({longest})")


def derive_demand(s: Scenario) -> np.ndarray:
    """Binary demand tensor ``rho[i, j, k]``: 1 exactly on message-window slots."""
    rho = np.zeros((s.n_devices, s.n_devices, s.horizon), dtype=np.int8)
    for msg in s.messages:
        rho[msg.sender, msg.receiver, msg.window_start : msg.window_end + 1] = 1
    return rho


# --------------------------------------------------------------------------
# Random generation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerationConfig:
    n_nodes: int = 8
    n_aps: int = 5
    n_types: int = 2
    horizon: int = 20
    visibility_mean: tuple[float, float] = (0.85, 0.9)
    visibility_std: float = 0.1
    thresholds: tuple[float, float] = (0.97, 0.97)
    send_cost: tuple[float, float] = (70.0, 100.0)
    receive_cost: tuple[float, float] = (10.0, 7.0)
    budget_range: tuple[float, float] = (500.0, 700.0)
    messages_per_pair: tuple[int, int] = (1, 5)
    max_window: int = 4
    pair_probability: float = 0.3
    split_energy: bool = False

    def __post_init__(self):
        for name in ("visibility_mean", "thresholds", "send_cost", "receive_cost", "budget_range", "messages_per_pair"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        lo, hi = self.messages_per_pair
        checks = [
            (self.n_nodes >= 0 and self.n_aps >= 0 and self.n_nodes + self.n_aps >= 1, "device counts"),
            (self.n_types >= 1 and self.horizon >= 1, "n_types and horizon must be positive"),
            (self.visibility_std > 0, "visibility_std must be positive"),
            (all(0.0 <= v <= 1.0 for v in self.visibility_mean), "visibility means must lie in [0, 1]"),
            (0 <= lo <= hi, "messages_per_pair must be an ordered non-negative range"),
            (self.max_window >= 1, "max_window must be >= 1"),
            (0 <= self.budget_range[0] <= self.budget_range[1], "budget_range must be ordered and non-negative"),
            (0.0 <= self.pair_probability <= 1.0, "pair_probability must lie in [0, 1]"),
        ]
        for ok, what in checks:
            if not ok:
                raise ValueError(f"invalid generation config: {what}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GenerationConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown generation parameters: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}


def sample_truncated_normal(rng: np.random.Generator, mean: float, std: float, size: int,
                            low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Rejection-sample ``Normal(mean, std)`` restricted to ``[low, high]``."""
    out = rng.normal(mean, std, size)
    bad = (out < low) | (out > high)
    while bad.any():
        out[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = (out < low) | (out > high)
    return out


def _place_windows(rng: np.random.Generator, lengths: Sequence[int], horizon: int) -> list[tuple[int, int]]:
    # uniform weak composition of the free slots into len(lengths)+1 gaps
    free = horizon - sum(lengths)
    n = len(lengths)
    bars = np.sort(rng.choice(free + n, size=n, replace=False))
    gaps = np.diff(np.concatenate(([-1], bars))) - 1
    windows, pos = [], 0
    for gap, length in zip(gaps, lengths):
        pos += int(gap)
        windows.append((pos, pos + length - 1))
        pos += length
    return windows


def generate_scenario(config: GenerationConfig, seed: int) -> Scenario:
    """Draw a random scenario. The same ``(config, seed)`` always yields the same scenario."""
    rng = np.random.default_rng(seed)
    nd, n, t = config.n_nodes, config.n_nodes + config.n_aps, config.horizon

    iu, ju = np.triu_indices(n, k=1)
    vis = np.zeros((2, n, n, t))
    for m in TECHNOLOGIES:
        draws = sample_truncated_normal(rng, config.visibility_mean[m], config.visibility_std, len(iu) * t)
        draws = draws.reshape(len(iu), t)
        vis[m, iu, ju, :] = draws
        vis[m, ju, iu, :] = draws
    vis[Technology.OC, :nd, :nd, :] = 0.0
    vis[:, nd:, nd:, :] = 0.0

    budget = rng.uniform(config.budget_range[0], config.budget_range[1], size=(2, n))

    lo, hi = config.messages_per_pair
    messages: list[Message] = []
    for i in range(n):
        for j in range(n):
            if i == j or (i >= nd and j >= nd):
                continue
            if rng.random() >= config.pair_probability:
                continue
            count = int(rng.integers(lo, hi + 1))
            if count == 0:
                continue
            lengths = [int(v) for v in rng.integers(1, config.max_window + 1, size=count)]
            if sum(lengths) > t:
                raise ValueError(
                    f"cannot pack {count} disjoint windows of total length {sum(lengths)} "
                    f"into horizon {t} for pair ({i}, {j})"
                )
            for ordinal, (start, end) in enumerate(_place_windows(rng, lengths, t)):
                data_type = int(rng.integers(0, config.n_types))
                messages.append(Message(i, j, ordinal, data_type, start, end))

    tau = max((msg.length for msg in messages), default=0) + 1
    return Scenario(
        n_nodes=nd,
        n_aps=config.n_aps,
        n_types=config.n_types,
        horizon=t,
        messages=tuple(messages),
        visibility=vis,
        energy_budget=budget,
        send_cost=config.send_cost,
        receive_cost=config.receive_cost,
        thresholds=config.thresholds,
        tau=tau,
        split_energy=config.split_energy,
        seed=int(seed),
    )


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def _tensor(dims: list[str], arr: np.ndarray) -> dict:
    return {"dims": dims, "shape": list(arr.shape), "data": arr.tolist()}


def _read_tensor(doc: dict, name: str, dims: list[str]) -> np.ndarray:
    block = doc.get(name)
    if not isinstance(block, dict) or "data" not in block or "shape" not in block:
        raise ScenarioError("format", f"missing tensor block {name!r}")
    if block.get("dims") != dims:
        raise ScenarioError("format", f"tensor {name!r} must declare dims {dims}")
    try:
        arr = np.asarray(block["data"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError("format", f"tensor {name!r} is ragged or non-numeric") from exc
    if list(arr.shape) != list(block["shape"]):
        raise ScenarioError("shape", f"tensor {name!r} has shape {list(arr.shape)}, header says {block['shape']}")
    return arr


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "scenario",
        "n_nodes": s.n_nodes,
        "n_aps": s.n_aps,
        "n_types": s.n_types,
        "horizon": s.horizon,
        "tau": s.tau,
        "seed": s.seed,
        "enabled_technologies": [Technology(m).name for m in sorted(s.enabled)],
        "split_energy": s.split_energy,
        "thresholds": list(s.thresholds),
        "send_cost": list(s.send_cost),
        "receive_cost": list(s.receive_cost),
        "energy_budget": _tensor(["technology", "device"], s.energy_budget),
        "visibility": _tensor(["technology", "sender", "receiver", "step"], s.visibility),
        "messages": [msg.to_dict() for msg in s.messages],
    }


def scenario_from_dict(doc: dict) -> Scenario:
    if doc.get("kind") != "scenario":
        raise ScenarioError("format", "document kind must be 'scenario'")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"unsupported schema version {doc.get('schema_version')!r}")
    try:
        messages = tuple(Message(**{k: int(v) for k, v in m.items()}) for m in doc["messages"])
        return Scenario(
            n_nodes=int(doc["n_nodes"]),
            n_aps=int(doc["n_aps"]),
            n_types=int(doc["n_types"]),
            horizon=int(doc["horizon"]),
            messages=messages,
            visibility=_read_tensor(doc, "visibility", ["technology", "sender", "receiver", "step"]),
            energy_budget=_read_tensor(doc, "energy_budget", ["technology", "device"]),
            send_cost=doc["send_cost"],
            receive_cost=doc["receive_cost"],
            thresholds=doc["thresholds"],
            tau=int(doc["tau"]),
            enabled=frozenset(Technology[name] for name in doc["enabled_technologies"]),
            split_energy=bool(doc.get("split_energy", False)),
            seed=doc.get("seed"),
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError("format", f"missing or malformed field: {exc}") from exc


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=1)


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(s) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("format", f"not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)
