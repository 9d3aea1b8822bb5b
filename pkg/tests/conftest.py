from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tusp.initial import build_initial_plan
from tusp.search import apply_operator
from tusp.yard import (
    Activity, Arrival, Departure, Instance, Plan, ServiceTask, Track, TrainUnit, Yard,
)

TYPES = (("A", 4), ("A", 6), ("B", 4))


def small_yard(rng: np.random.Generator) -> Yard:
    """Gateway plus two tracks with random capacity, approach and functions."""
    tracks = [Track(0, int(rng.integers(8, 20)), "both_ends", frozenset(), is_gateway=True)]
    pool = ["parking", "cleaning", "inspection_a"]
    for tid in (1, 2):
        funcs = {f for f in pool if rng.random() < 0.5}
        approach = "single_end" if rng.random() < 0.5 else "both_ends"
        tracks.append(Track(tid, int(rng.integers(6, 16)), approach, frozenset(funcs)))
    # every service kind and parking must exist somewhere
    need = {"parking", "cleaning", "inspection_a"} - set().union(*(t.functions for t in tracks))
    if need:
        t = tracks[1]
        tracks[1] = replace(t, functions=t.functions | need)
    adj = {(0, 1), (0, 2)} if rng.random() < 0.5 else {(0, 1), (1, 2)}
    if rng.random() < 0.3:
        adj.add((0, 2) if (0, 2) not in adj else (1, 2))
    return Yard(tuple(tracks), frozenset(adj))


def small_instance(rng: np.random.Generator, max_units: int = 3, max_tasks: int = 2) -> Instance:
    yard = small_yard(rng)
    n = int(rng.integers(1, max_units + 1))
    keys = [TYPES[i] for i in rng.integers(0, len(TYPES), size=n)]
    times = sorted(int(t) for t in rng.integers(0, 200, size=n))
    arrivals, units = [], []
    for uid, (key, t) in enumerate(zip(keys, times)):
        u = TrainUnit(uid, *key)
        units.append(u)
        arrivals.append(Arrival((u,), t))
    order = rng.permutation(n)
    departures = tuple(
        Departure((keys[j],), int(times[j] + rng.integers(40, 400))) for j in order
    )
    n_tasks = int(rng.integers(0, max_tasks + 1))
    tasks, seen = [], set()
    for _ in range(n_tasks):
        uid = int(rng.integers(0, n))
        kind = ("cleaning", "inspection_a")[int(rng.integers(0, 2))]
        if (uid, kind) not in seen:
            seen.add((uid, kind))
            tasks.append(ServiceTask(uid, kind, int(rng.integers(10, 60))))
    return Instance(yard, tuple(arrivals), departures, tuple(tasks), horizon=1440)


def perturb(instance: Instance, plan: Plan, rng: np.random.Generator) -> Plan:
    """Random structural-valid edits, including ones no operator makes."""
    uid = int(rng.choice(instance.unit_ids))
    acts = list(plan.activities[uid])
    i = int(rng.integers(0, len(acts)))
    a = acts[i]
    choice = rng.integers(0, 4)
    if choice == 0:  # move the whole activity in time
        d = int(rng.integers(-30, 31))
        acts[i] = replace(a, start=max(0, a.start + d), end=max(0, a.start + d) + a.duration)
    elif choice == 1 and a.kind not in ("movement",):  # relocate a stationary activity
        acts[i] = replace(a, track_id=int(rng.choice([t.id for t in instance.yard.tracks])))
    elif choice == 2:  # stretch
        acts[i] = replace(a, end=a.end + int(rng.integers(0, 40)))
    else:  # reassign the departure slot
        other = int(rng.choice(instance.unit_ids))
        m = dict(plan.matching)
        m[uid], m[other] = m[other], m[uid]
        return Plan(m, plan.activities)
    return plan.replace_units({uid: tuple(acts)})


def random_plan(instance: Instance, rng: np.random.Generator) -> Plan:
    plan = build_initial_plan(instance)
    for _ in range(int(rng.integers(0, 4))):
        if rng.random() < 0.6:
            plan = apply_operator(instance, plan, int(rng.integers(1, 9)), rng, 10).plan
        else:
            plan = perturb(instance, plan, rng)
    return plan


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def single_unit_instance(task: tuple[str, int] | None = None, dep_time: int = 300):
    from tusp.generator import default_yard

    u = TrainUnit(0, "SLT", 4)
    tasks = (ServiceTask(0, *task),) if task else ()
    return Instance(default_yard(), (Arrival((u,), 100),), (Departure((("SLT", 4),), dep_time),), tasks)


def line_yard(capacity: int = 10, approach: str = "both_ends") -> Yard:
    """Gateway 0 -- track 1 (parking) -- track 2 (cleaning)."""
    return Yard(
        (
            Track(0, 40, "both_ends", frozenset(), is_gateway=True),
            Track(1, capacity, approach, frozenset({"parking"})),
            Track(2, 12, "both_ends", frozenset({"cleaning"})),
        ),
        frozenset({(0, 1), (1, 2)}),
    )


def parked_chain(arr: int, enter: int, leave: int, dep: int, track: int = 1, move: int = 2):
    """arrival, move to ``track`` (1 hop), park, move back, depart."""
    return (
        Activity("arrival", arr, arr, 0),
        Activity("movement", enter - move, enter, track, route=(0, track)),
        Activity("parking", enter, leave, track),
        Activity("movement", leave, leave + move, 0, route=(track, 0)),
        Activity("departure", dep, dep, 0),
    )


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
