"""Yard topology, train units, instances, plans and the plan validator.

Yard mechanics used throughout the package:

* a unit occupies a track from the moment it gets there (arrival on the
  gateway, or the end of a movement) until it leaves (start of the next
  movement, or the end of its departure); occupancy intervals are half-open;
* while moving a unit occupies no track;
* on ``single_end`` tracks units must leave in reverse order of entry;
* a movement lasts ``move_minutes`` per traversed adjacency hop.
"""
from __future__ import annotations

from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping

from .errors import StructuralError

ACTIVITY_KINDS = (
    "arrival", "movement", "parking", "service", "split", "combine", "turn", "departure",
)
STATIONARY_KINDS = frozenset(ACTIVITY_KINDS) - {"movement"}
TASK_KINDS = ("cleaning", "inspection_a", "inspection_b")
TRACK_FUNCTIONS = ("parking",) + TASK_KINDS
APPROACHES = ("both_ends", "single_end")
VIOLATION_KINDS = (
    "track_capacity", "crossing_order", "facility_overlap", "task_unscheduled",
    "departure_late", "matching_type_mismatch", "route_invalid", "time_order",
)
DEFAULT_WEIGHTS: dict[str, float] = {kind: 1.0 for kind in VIOLATION_KINDS}
DEFAULT_WEIGHTS["departure_late"] = 5.0


@dataclass(frozen=True)
class TrainUnit:
    id: int
    unit_type: str
    subtype_carriages: int

    def __post_init__(self):
        if self.subtype_carriages <= 0:
            raise StructuralError(f"unit {self.id}: subtype_carriages must be positive")

    @property
    def length(self) -> int:
        return self.subtype_carriages

    @property
    def key(self) -> tuple[str, int]:
        return (self.unit_type, self.subtype_carriages)


@dataclass(frozen=True)
class Track:
    id: int
    capacity: int
    approach: str = "both_ends"
    functions: frozenset[str] = frozenset()
    is_gateway: bool = False

    def __post_init__(self):
        object.__setattr__(self, "functions", frozenset(self.functions))
        if self.capacity <= 0:
            raise StructuralError(f"track {self.id}: capacity must be positive")
        if self.approach not in APPROACHES:
            raise StructuralError(f"track {self.id}: unknown approach {self.approach!r}")
        unknown = self.functions - set(TRACK_FUNCTIONS)
        if unknown:
            raise StructuralError(f"track {self.id}: unknown functions {sorted(unknown)}")


@dataclass(frozen=True)
class Yard:
    tracks: tuple[Track, ...]
    adjacency: frozenset[tuple[int, int]]
    move_minutes: int = 2
    bookkeeping_minutes: int = 3

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(sorted(self.tracks, key=lambda t: t.id)))
        pairs = set()
        for a, b in self.adjacency:
            if a == b:
                raise StructuralError(f"self-adjacency on track {a}")
            pairs.add((min(a, b), max(a, b)))
        object.__setattr__(self, "adjacency", frozenset(pairs))
        ids = [t.id for t in self.tracks]
        if len(set(ids)) != len(ids):
            raise StructuralError("duplicate track ids")
        for a, b in pairs:
            if a not in self.by_id or b not in self.by_id:
                raise StructuralError(f"adjacency ({a}, {b}) references an unknown track")
        if sum(t.is_gateway for t in self.tracks) != 1:
            raise StructuralError("a yard needs exactly one gateway track")
        if len(self._hops[self.gateway.id]) != len(self.tracks):
            raise StructuralError("yard is not connected")
        if self.move_minutes <= 0 or self.bookkeeping_minutes <= 0:
            raise StructuralError("move and bookkeeping durations must be positive")

    @cached_property
    def by_id(self) -> dict[int, Track]:
        return {t.id: t for t in self.tracks}

    @cached_property
    def gateway(self) -> Track:
        return next(t for t in self.tracks if t.is_gateway)

    @cached_property
    def neighbors(self) -> dict[int, tuple[int, ...]]:
        nb: dict[int, list[int]] = {t.id: [] for t in self.tracks}
        for a, b in self.adjacency:
            nb[a].append(b)
            nb[b].append(a)
        return {k: tuple(sorted(v)) for k, v in nb.items()}

    @cached_property
    def _hops(self) -> dict[int, dict[int, int]]:
        out = {}
        for src in self.by_id:
            dist = {src: 0}
            queue = deque([src])
            while queue:
                cur = queue.popleft()
                for nxt in self.neighbors[cur]:
                    if nxt not in dist:
                        dist[nxt] = dist[cur] + 1
                        queue.append(nxt)
            out[src] = dist
        return out

    def is_adjacent(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.adjacency

    def hops(self, a: int, b: int) -> int:
        return self._hops[a][b]

    def shortest_route(self, a: int, b: int) -> tuple[int, ...]:
        """Deterministic shortest route; ties go to the lowest neighbour id."""
        route = [a]
        cur = a
        while cur != b:
            cur = next(n for n in self.neighbors[cur] if self._hops[n][b] == self._hops[cur][b] - 1)
            route.append(cur)
        return tuple(route)

    def tracks_with(self, function: str) -> tuple[int, ...]:
        return tuple(t.id for t in self.tracks if function in t.functions)


@dataclass(frozen=True)
class ServiceTask:
    unit_id: int
    task_kind: str
    duration: int

    def __post_init__(self):
        if self.duration <= 0:
            raise StructuralError(f"task for unit {self.unit_id}: duration must be positive")
        if self.task_kind not in TASK_KINDS:
            raise StructuralError(f"unknown task kind {self.task_kind!r}")


@dataclass(frozen=True)
class Arrival:
    units: tuple[TrainUnit, ...]
    time: int


@dataclass(frozen=True)
class Departure:
    required: tuple[tuple[str, int], ...]
    time: int


@dataclass(frozen=True)
class Instance:
    yard: Yard
    arrivals: tuple[Arrival, ...]
    departures: tuple[Departure, ...]
    tasks: tuple[ServiceTask, ...]
    horizon: int = 1440

    def __post_init__(self):
        ids = [u.id for a in self.arrivals for u in a.units]
        if len(set(ids)) != len(ids):
            raise StructuralError("duplicate unit ids")
        arriving = Counter(u.key for a in self.arrivals for u in a.units)
        departing = Counter(k for d in self.departures for k in d.required)
        if arriving != departing:
            raise StructuralError("arriving and departing (type, subtype) multisets differ")
        times = [a.time for a in self.arrivals] + [d.time for d in self.departures]
        if any(t < 0 or t > self.horizon for t in times):
            raise StructuralError("train time outside [0, horizon]")
        if [a.time for a in self.arrivals] != sorted(a.time for a in self.arrivals):
            raise StructuralError("arrivals must be sorted by time")
        if any(not a.units for a in self.arrivals) or any(not d.required for d in self.departures):
            raise StructuralError("empty train composition")
        seen = set()
        for task in self.tasks:
            if task.unit_id not in self.units:
                raise StructuralError(f"task references unknown unit {task.unit_id}")
            if (task.unit_id, task.task_kind) in seen:
                raise StructuralError(f"unit {task.unit_id} has task {task.task_kind} twice")
            seen.add((task.unit_id, task.task_kind))
            if not self.yard.tracks_with(task.task_kind):
                raise StructuralError(f"no track offers {task.task_kind}")

    @cached_property
    def units(self) -> dict[int, TrainUnit]:
        return {u.id: u for a in self.arrivals for u in a.units}

    @cached_property
    def unit_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.units))

    @cached_property
    def arrival_of(self) -> dict[int, Arrival]:
        return {u.id: a for a in self.arrivals for u in a.units}

    @cached_property
    def tasks_of(self) -> dict[int, tuple[ServiceTask, ...]]:
        out: dict[int, list[ServiceTask]] = {uid: [] for uid in self.units}
        for task in self.tasks:
            out[task.unit_id].append(task)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def slots(self) -> tuple[tuple[int, int], ...]:
        """All departure slots as ``(departure_index, position)`` pairs."""
        return tuple((d, p) for d, dep in enumerate(self.departures) for p in range(len(dep.required)))

    def slot_key(self, slot: tuple[int, int]) -> tuple[str, int]:
        return self.departures[slot[0]].required[slot[1]]


@dataclass(frozen=True)
class Activity:
    kind: str
    start: int
    end: int
    track_id: int | None = None
    task_kind: str | None = None
    route: tuple[int, ...] = ()

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Plan:
    matching: Mapping[int, tuple[int, int]]
    activities: Mapping[int, tuple[Activity, ...]]

    def replace_units(
        self,
        activities: Mapping[int, tuple[Activity, ...]] | None = None,
        matching: Mapping[int, tuple[int, int]] | None = None,
    ) -> Plan:
        new_acts = dict(self.activities)
        new_acts.update(activities or {})
        new_match = dict(self.matching)
        new_match.update(matching or {})
        return Plan(new_match, new_acts)


@dataclass(frozen=True)
class Violation:
    kind: str
    weight: float
    detail: str = field(default="", compare=True)


# --------------------------------------------------------------------------
# validation

def check_structure(instance: Instance, plan: Plan) -> None:
    """Raise :class:`StructuralError` when the plan references unknown ids or
    breaks the skeleton rules (arrival first, departure last, well-formed
    activities)."""
    units = set(instance.units)
    if set(plan.matching) != units:
        raise StructuralError("matching must cover exactly the instance units")
    if set(plan.activities) != units:
        raise StructuralError("activities must cover exactly the instance units")
    for uid, (d, p) in plan.matching.items():
        if not (0 <= d < len(instance.departures)) or not (0 <= p < len(instance.departures[d].required)):
            raise StructuralError(f"unit {uid}: dangling departure slot {(d, p)}")
    tracks = instance.yard.by_id
    for uid, acts in plan.activities.items():
        if len(acts) < 2 or acts[0].kind != "arrival" or acts[-1].kind != "departure":
            raise StructuralError(f"unit {uid}: chain must start with arrival and end with departure")
        for act in acts:
            if act.kind not in ACTIVITY_KINDS:
                raise StructuralError(f"unit {uid}: unknown activity kind {act.kind!r}")
            if act.end < act.start:
                raise StructuralError(f"unit {uid}: {act.kind} ends before it starts")
            if act.track_id not in tracks:
                raise StructuralError(f"unit {uid}: {act.kind} on unknown track {act.track_id}")
            if act.kind == "movement":
                if len(act.route) < 2 or act.route[-1] != act.track_id:
                    raise StructuralError(f"unit {uid}: malformed movement route {act.route}")
                if any(t not in tracks for t in act.route):
                    raise StructuralError(f"unit {uid}: route through unknown track")
            elif act.route:
                raise StructuralError(f"unit {uid}: only movements carry a route")
            if act.kind == "service" and act.task_kind not in TASK_KINDS:
                raise StructuralError(f"unit {uid}: service without a valid task kind")
            if act.kind != "service" and act.task_kind is not None:
                raise StructuralError(f"unit {uid}: task kind on a {act.kind} activity")


def occupancy_intervals(plan: Plan) -> list[tuple[int, int, int, int]]:
    """Positive-length stays ``(track, unit, enter, leave)`` derived from the
    movement structure of each unit's chain."""
    stays = []
    for uid, acts in plan.activities.items():
        loc = acts[0].track_id
        enter = acts[0].start
        for act in acts[1:]:
            if act.kind == "movement":
                if act.start > enter:
                    stays.append((loc, uid, enter, act.start))
                loc, enter = act.route[-1], act.end
        leave = acts[-1].end
        if leave > enter:
            stays.append((loc, uid, enter, leave))
    return stays


def validate_plan(instance: Instance, plan: Plan, weights: Mapping[str, float] | None = None) -> list[Violation]:
    """Every constraint violation of ``plan``; an empty list means feasible.

    Raises
    ------
    StructuralError
        If the plan is malformed (see :func:`check_structure`).
    """
    check_structure(instance, plan)
    w = DEFAULT_WEIGHTS if weights is None else {**DEFAULT_WEIGHTS, **weights}
    out: list[Violation] = []

    def flag(kind: str, detail: str) -> None:
        out.append(Violation(kind, w[kind], detail))

    yard = instance.yard
    gateway = yard.gateway.id

    slot_users: dict[tuple[int, int], list[int]] = defaultdict(list)
    for uid in instance.unit_ids:
        slot = plan.matching[uid]
        slot_users[slot].append(uid)
        if instance.slot_key(slot) != instance.units[uid].key:
            flag("matching_type_mismatch", f"unit {uid} -> slot {slot[0]}.{slot[1]}")
    for slot, users in slot_users.items():
        if len(users) > 1:
            flag("matching_type_mismatch", f"slot {slot[0]}.{slot[1]} shared by {sorted(users)}")

    services_by_track: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    for uid in instance.unit_ids:
        acts = plan.activities[uid]
        arrival_time = instance.arrival_of[uid].time
        dep_time = instance.departures[plan.matching[uid][0]].time
        if acts[0].start != arrival_time:
            flag("time_order", f"unit {uid}: arrival at {acts[0].start} instead of {arrival_time}")
        for i in range(1, len(acts)):
            if acts[i - 1].end > acts[i].start:
                flag("time_order", f"unit {uid}: activity {i - 1} overlaps activity {i}")
        if acts[0].track_id != gateway:
            flag("route_invalid", f"unit {uid}: arrival off the gateway")
        if acts[-1].track_id != gateway:
            flag("route_invalid", f"unit {uid}: departure off the gateway")
        loc = acts[0].track_id
        for i, act in enumerate(acts[1:], start=1):
            if act.kind == "movement":
                route = act.route
                if route[0] != loc:
                    flag("route_invalid", f"unit {uid}: movement {i} starts away from track {loc}")
                if any(not yard.is_adjacent(a, b) for a, b in zip(route, route[1:])):
                    flag("route_invalid", f"unit {uid}: movement {i} uses non-adjacent tracks")
                if act.duration != (len(route) - 1) * yard.move_minutes:
                    flag("route_invalid", f"unit {uid}: movement {i} duration {act.duration}")
                loc = route[-1]
            elif act.track_id != loc:
                flag("route_invalid", f"unit {uid}: {act.kind} {i} on track {act.track_id} while at {loc}")
        if acts[-1].end != dep_time:
            flag("departure_late", f"unit {uid}: departs at {acts[-1].end} instead of {dep_time}")

        services = [a for a in acts if a.kind == "service"]
        for a in services:
            services_by_track[a.track_id].append((a.start, a.end, uid))
        wanted = {t.task_kind: t for t in instance.tasks_of[uid]}
        done = Counter(a.task_kind for a in services)
        for kind in sorted(set(done) - set(wanted)):
            flag("task_unscheduled", f"unit {uid}: unrequested {kind}")
        for kind, task in sorted(wanted.items()):
            if done[kind] != 1:
                flag("task_unscheduled", f"unit {uid}: {kind} scheduled {done[kind]} times")
                continue
            a = next(a for a in services if a.task_kind == kind)
            if a.duration != task.duration:
                flag("task_unscheduled", f"unit {uid}: {kind} lasts {a.duration} not {task.duration}")
            elif a.start < arrival_time or a.end > dep_time:
                flag("task_unscheduled", f"unit {uid}: {kind} outside presence window")
            if kind not in yard.by_id[a.track_id].functions:
                flag("task_unscheduled", f"unit {uid}: {kind} on track {a.track_id} lacking the facility")

    for tid in sorted(services_by_track):
        jobs = sorted(services_by_track[tid])
        for i in range(len(jobs)):
            for j in range(i + 1, len(jobs)):
                (s1, e1, u1), (s2, e2, u2) = jobs[i], jobs[j]
                if s2 >= e1:
                    break
                if s1 < e2 and s2 < e1 and e1 > s1 and e2 > s2:
                    flag("facility_overlap", f"track {tid}: units {u1} and {u2} at {s2}")

    stays = occupancy_intervals(plan)
    by_track: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    for tid, uid, enter, leave in stays:
        by_track[tid].append((enter, leave, uid))
    for tid in sorted(by_track):
        track = yard.by_id[tid]
        events = []
        for enter, leave, uid in by_track[tid]:
            events.append((enter, 1, uid))
            events.append((leave, 0, uid))
        events.sort()
        load = 0
        k = 0
        while k < len(events):
            t = events[k][0]
            added = False
            while k < len(events) and events[k][0] == t:
                _, is_enter, uid = events[k]
                length = instance.units[uid].length
                load += length if is_enter else -length
                added |= bool(is_enter)
                k += 1
            if added and load > track.capacity:
                flag("track_capacity", f"track {tid}: load {load} > {track.capacity} at {t}")
        if track.approach == "single_end":
            items = by_track[tid]
            for enter_u, leave_u, u in items:
                blockers = [
                    v for enter_v, leave_v, v in items
                    if v != u and enter_u < enter_v < leave_u < leave_v
                ]
                if blockers:
                    flag("crossing_order", f"track {tid}: unit {u} blocked at {leave_u} by {sorted(blockers)}")

    out.sort(key=lambda v: (v.kind, v.detail))
    return out


def plan_cost(violations: Iterable[Violation]) -> float:
    return float(sum(v.weight for v in violations))


def is_feasible(instance: Instance, plan: Plan) -> bool:
    return not validate_plan(instance, plan)


# --------------------------------------------------------------------------
# JSON conversion

def yard_to_dict(yard: Yard) -> dict:
    return {
        "tracks": [
            {
                "id": t.id, "capacity": t.capacity, "approach": t.approach,
                "functions": sorted(t.functions), "is_gateway": t.is_gateway,
            }
            for t in yard.tracks
        ],
        "adjacency": sorted([a, b] for a, b in yard.adjacency),
        "move_minutes": yard.move_minutes,
        "bookkeeping_minutes": yard.bookkeeping_minutes,
    }


def yard_from_dict(d: dict) -> Yard:
    return Yard(
        tracks=tuple(
            Track(t["id"], t["capacity"], t["approach"], frozenset(t["functions"]), t["is_gateway"])
            for t in d["tracks"]
        ),
        adjacency=frozenset((a, b) for a, b in d["adjacency"]),
        move_minutes=d.get("move_minutes", 2),
        bookkeeping_minutes=d.get("bookkeeping_minutes", 3),
    )


def instance_to_dict(instance: Instance) -> dict:
    return {
        "yard": yard_to_dict(instance.yard),
        "arrivals": [
            {
                "time": a.time,
                "composition": [
                    {"id": u.id, "unit_type": u.unit_type,
                     "subtype_carriages": u.subtype_carriages, "length": u.length}
                    for u in a.units
                ],
            }
            for a in instance.arrivals
        ],
        "departures": [
            {"time": d.time, "required_types": [[t, s] for t, s in d.required]}
            for d in instance.departures
        ],
        "tasks": [
            {"unit_id": t.unit_id, "task_kind": t.task_kind, "duration": t.duration}
            for t in instance.tasks
        ],
        "horizon": instance.horizon,
    }


def instance_from_dict(d: dict) -> Instance:
    arrivals = []
    for a in d["arrivals"]:
        units = []
        for u in a["composition"]:
            unit = TrainUnit(u["id"], u["unit_type"], u["subtype_carriages"])
            if u.get("length", unit.length) != unit.length:
                raise StructuralError(f"unit {unit.id}: length must equal subtype_carriages")
            units.append(unit)
        arrivals.append(Arrival(tuple(units), a["time"]))
    return Instance(
        yard=yard_from_dict(d["yard"]),
        arrivals=tuple(arrivals),
        departures=tuple(
            Departure(tuple((t, s) for t, s in dep["required_types"]), dep["time"])
            for dep in d["departures"]
        ),
        tasks=tuple(ServiceTask(t["unit_id"], t["task_kind"], t["duration"]) for t in d["tasks"]),
        horizon=d.get("horizon", 1440),
    )


def activity_to_dict(a: Activity) -> dict:
    out = {"kind": a.kind, "start": a.start, "end": a.end, "track_id": a.track_id}
    if a.task_kind is not None:
        out["task_kind"] = a.task_kind
    if a.route:
        out["route"] = list(a.route)
    return out


def activity_from_dict(d: dict) -> Activity:
    return Activity(
        d["kind"], d["start"], d["end"], d.get("track_id"), d.get("task_kind"), tuple(d.get("route", ())),
    )


def plan_to_dict(plan: Plan) -> dict:
    return {
        "matching": [[uid, d, p] for uid, (d, p) in sorted(plan.matching.items())],
        "activities": [
            {"unit_id": uid, "chain": [activity_to_dict(a) for a in acts]}
            for uid, acts in sorted(plan.activities.items())
        ],
    }


def plan_from_dict(d: dict) -> Plan:
    return Plan(
        matching={uid: (dep, pos) for uid, dep, pos in d["matching"]},
        activities={
            entry["unit_id"]: tuple(activity_from_dict(a) for a in entry["chain"])
            for entry in d["activities"]
        },
    )


def with_activity(acts: tuple[Activity, ...], index: int, **changes) -> tuple[Activity, ...]:
    return acts[:index] + (replace(acts[index], **changes),) + acts[index + 1:]
