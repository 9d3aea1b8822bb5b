"""Random TUSP instances from a scenario configuration."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .yard import (
    Arrival, Departure, Instance, ServiceTask, Track, TrainUnit, Yard, yard_from_dict, yard_to_dict,
)


def default_yard() -> Yard:
    """Small service site: a gateway, three service tracks and three parking
    tracks, two of them dead-ended."""
    tracks = (
        Track(0, 36, "both_ends", frozenset(), is_gateway=True),
        Track(1, 12, "both_ends", frozenset({"cleaning"})),
        Track(2, 12, "both_ends", frozenset({"inspection_a", "inspection_b"})),
        Track(3, 12, "both_ends", frozenset({"cleaning", "inspection_a"})),
        Track(4, 16, "single_end", frozenset({"parking"})),
        Track(5, 16, "single_end", frozenset({"parking"})),
        Track(6, 12, "both_ends", frozenset({"parking"})),
    )
    adjacency = frozenset({(0, 1), (0, 2), (0, 3), (1, 4), (2, 5), (3, 6), (1, 2), (2, 3)})
    return Yard(tracks, adjacency)


@dataclass(frozen=True)
class ScenarioConfig:
    n_units: int = 8
    unit_type_mix: tuple[tuple[str, int, float], ...] = (
        ("SLT", 4, 0.3), ("SLT", 6, 0.2), ("VIRM", 4, 0.3), ("VIRM", 6, 0.2),
    )
    arrival_time_distribution: tuple[tuple[int, int, float], ...] = ((240, 540, 0.5), (540, 780, 0.5))
    departure_time_distribution: tuple[tuple[int, int, float], ...] = ((600, 1000, 0.6), (1000, 1300, 0.4))
    tasks_per_unit: tuple[tuple[str, int, float], ...] = (
        ("cleaning", 45, 0.45), ("inspection_a", 60, 0.35), ("inspection_b", 90, 0.2),
    )
    max_composition_length: int = 2
    seed: int = 0
    horizon: int = 1440
    yard: Yard = field(default_factory=default_yard)

    def __post_init__(self):
        if self.n_units < 1:
            raise ConfigurationError("n_units must be at least 1")
        if self.max_composition_length < 1:
            raise ConfigurationError("max_composition_length must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        for name in ("unit_type_mix", "tasks_per_unit", "arrival_time_distribution", "departure_time_distribution"):
            probs = [row[2] for row in getattr(self, name)]
            if not probs or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
                raise ConfigurationError(f"{name}: probabilities must be non-negative and sum to 1")
        for name in ("arrival_time_distribution", "departure_time_distribution"):
            for lo, hi, _ in getattr(self, name):
                if not 0 <= lo <= hi <= self.horizon:
                    raise ConfigurationError(f"{name}: window ({lo}, {hi}) outside [0, horizon]")
        earliest = min(lo for lo, _, p in self.arrival_time_distribution if p > 0)
        for lo, hi, p in self.departure_time_distribution:
            if p > 0 and hi <= earliest:
                raise ConfigurationError(
                    f"departure window ({lo}, {hi}) lies entirely before the earliest arrival window"
                )
        for kind, duration, p in self.tasks_per_unit:
            if duration <= 0:
                raise ConfigurationError(f"task {kind}: duration must be positive")
            if p > 0 and not self.yard.tracks_with(kind):
                raise ConfigurationError(f"task {kind}: no track in the yard offers it")


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "n_units": cfg.n_units,
        "unit_type_mix": [list(r) for r in cfg.unit_type_mix],
        "arrival_time_distribution": [list(r) for r in cfg.arrival_time_distribution],
        "departure_time_distribution": [list(r) for r in cfg.departure_time_distribution],
        "tasks_per_unit": [list(r) for r in cfg.tasks_per_unit],
        "max_composition_length": cfg.max_composition_length,
        "seed": cfg.seed,
        "horizon": cfg.horizon,
        "yard": yard_to_dict(cfg.yard),
    }


def config_from_dict(d: dict) -> ScenarioConfig:
    base = ScenarioConfig()
    kwargs = {}
    for key in ("unit_type_mix", "arrival_time_distribution", "departure_time_distribution", "tasks_per_unit"):
        if key in d:
            kwargs[key] = tuple(tuple(row) for row in d[key])
    for key in ("n_units", "max_composition_length", "seed", "horizon"):
        if key in d:
            kwargs[key] = int(d[key])
    if "yard" in d:
        kwargs["yard"] = yard_from_dict(d["yard"])
    try:
        return ScenarioConfig(**{**base.__dict__, **kwargs})
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc


def _sample_time(rng: np.random.Generator, windows) -> int:
    probs = np.array([w[2] for w in windows], dtype=float)
    lo, hi, _ = windows[rng.choice(len(windows), p=probs / probs.sum())]
    return int(rng.integers(lo, hi + 1))


def _chunks(rng: np.random.Generator, items: list, max_len: int) -> list[list]:
    out = []
    order = [items[i] for i in rng.permutation(len(items))]
    while order:
        size = int(rng.integers(1, max_len + 1))
        out.append(order[:size])
        order = order[size:]
    return out


def generate_instance(config: ScenarioConfig) -> Instance:
    """Draw an instance; a pure function of ``config`` (seed included).

    Unit (type, subtype) pairs are drawn from the mix, grouped per type into
    arriving trains of random length, and regrouped independently into
    departing trains, so both sides carry the same multiset by construction.
    Every unit receives one service task drawn from ``tasks_per_unit``.
    """
    rng = np.random.default_rng(config.seed)
    mix = config.unit_type_mix
    probs = np.array([m[2] for m in mix], dtype=float)
    keys = [(mix[j][0], int(mix[j][1])) for j in rng.choice(len(mix), size=config.n_units, p=probs / probs.sum())]

    by_type: dict[str, list[tuple[str, int]]] = {}
    for k in keys:
        by_type.setdefault(k[0], []).append(k)

    arriving = []
    for unit_type in sorted(by_type):
        for chunk in _chunks(rng, by_type[unit_type], config.max_composition_length):
            arriving.append((_sample_time(rng, config.arrival_time_distribution), chunk))
    departing = []
    for unit_type in sorted(by_type):
        for chunk in _chunks(rng, by_type[unit_type], config.max_composition_length):
            departing.append((_sample_time(rng, config.departure_time_distribution), chunk))

    arriving.sort(key=lambda a: (a[0], a[1]))
    departing.sort(key=lambda d: (d[0], d[1]))

    arrivals = []
    next_id = 0
    for time, chunk in arriving:
        units = []
        for unit_type, sub in chunk:
            units.append(TrainUnit(next_id, unit_type, sub))
            next_id += 1
        arrivals.append(Arrival(tuple(units), time))
    departures = tuple(Departure(tuple(chunk), time) for time, chunk in departing)

    task_probs = np.array([t[2] for t in config.tasks_per_unit], dtype=float)
    picks = rng.choice(len(config.tasks_per_unit), size=config.n_units, p=task_probs / task_probs.sum())
    tasks = tuple(
        ServiceTask(uid, config.tasks_per_unit[j][0], int(config.tasks_per_unit[j][1]))
        for uid, j in enumerate(picks)
    )
    return Instance(config.yard, tuple(arrivals), departures, tasks, config.horizon)
