"""Initial solutions: Hopcroft-Karp matching plus a greedy service schedule."""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .yard import Activity, Instance, Plan, TrainUnit, occupancy_intervals

_INF = float("inf")


def hopcroft_karp_match(
    arriving_units: Sequence[TrainUnit],
    departure_slots: Sequence[tuple[str, int]],
) -> dict[int, int]:
    """Maximum-cardinality matching of units to slots with equal (type, subtype).

    Units are scanned in the given order and each unit lists its compatible
    slots in slot order, so the first phase behaves like first-come
    first-served assignment. Runs in O(E sqrt(V)).

    Returns
    -------
    dict
        ``unit_id -> slot_index``; units left unmatched are absent.
    """
    by_key: dict[tuple[str, int], list[int]] = defaultdict(list)
    for j, key in enumerate(departure_slots):
        by_key[tuple(key)].append(j)
    left = list(range(len(arriving_units)))
    adj = [by_key.get(u.key, []) for u in arriving_units]
    pair_left: list[int | None] = [None] * len(left)
    pair_right: list[int | None] = [None] * len(departure_slots)
    dist = [0.0] * len(left)

    def bfs() -> bool:
        queue = deque()
        for u in left:
            if pair_left[u] is None:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = _INF
        found = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = pair_right[v]
                if w is None:
                    found = True
                elif dist[w] == _INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def dfs(u: int) -> bool:
        for v in adj[u]:
            w = pair_right[v]
            if w is None or (dist[w] == dist[u] + 1 and dfs(w)):
                pair_left[u] = v
                pair_right[v] = u
                return True
        dist[u] = _INF
        return False

    while bfs():
        for u in left:
            if pair_left[u] is None:
                dfs(u)
    return {arriving_units[u].id: v for u, v in enumerate(pair_left) if v is not None}


def initial_matching(instance: Instance) -> dict[int, tuple[int, int]]:
    """Hopcroft-Karp matching of an instance, units in arrival order and slots
    in departure-time order."""
    units = [u for a in instance.arrivals for u in a.units]
    slots = sorted(instance.slots, key=lambda s: (instance.departures[s[0]].time, s))
    raw = hopcroft_karp_match(units, [instance.slot_key(s) for s in slots])
    return {uid: slots[j] for uid, j in raw.items()}


@dataclass
class Bookings:
    """Facility and track usage of the units already placed."""

    services: dict[int, list[tuple[int, int]]] = field(default_factory=lambda: defaultdict(list))
    stays: dict[int, list[tuple[int, int, int]]] = field(default_factory=lambda: defaultdict(list))

    @classmethod
    def from_plan(cls, instance: Instance, plan: Plan, exclude: set[int] = frozenset()) -> Bookings:
        book = cls()
        subset = Plan(
            {u: s for u, s in plan.matching.items() if u not in exclude},
            {u: a for u, a in plan.activities.items() if u not in exclude},
        )
        for tid, uid, enter, leave in occupancy_intervals(subset):
            book.stays[tid].append((enter, leave, instance.units[uid].length))
        for acts in subset.activities.values():
            for a in acts:
                if a.kind == "service":
                    book.services[a.track_id].append((a.start, a.end))
        return book

    def add_chain(self, instance: Instance, uid: int, acts: Sequence[Activity]) -> None:
        for tid, _, enter, leave in occupancy_intervals(Plan({uid: (0, 0)}, {uid: tuple(acts)})):
            self.stays[tid].append((enter, leave, instance.units[uid].length))
        for a in acts:
            if a.kind == "service":
                self.services[a.track_id].append((a.start, a.end))

    def earliest_service_start(self, track: int, ready: int, duration: int) -> int:
        start = ready
        for s, e in sorted(self.services[track]):
            if e <= start:
                continue
            if s >= start + duration:
                break
            start = max(start, e)
        return start

    def peak_load(self, track: int, enter: int, leave: int) -> int:
        """Largest load already on ``track`` during ``[enter, leave)``."""
        if leave <= enter:
            return 0
        points = {enter} | {s for s, _, _ in self.stays[track] if enter < s < leave}
        return max(
            sum(n for s, e, n in self.stays[track] if s <= t < e) for t in points
        )


def _movement(instance: Instance, src: int, dst: int, start: int) -> Activity:
    route = instance.yard.shortest_route(src, dst)
    return Activity("movement", start, start + (len(route) - 1) * instance.yard.move_minutes, dst, route=route)


def build_tail(
    instance: Instance,
    uid: int,
    prefix: list[Activity],
    park_track: int,
    departure_index: int,
) -> tuple[Activity, ...]:
    """Append parking, the run to the gateway and the departure to ``prefix``.

    The unit leaves its parking track just in time for the scheduled
    departure; when it is already late the chain is kept sequential and the
    departure slips.
    """
    yard = instance.yard
    gateway = yard.gateway.id
    acts = list(prefix)
    loc = acts[-1].track_id
    t = acts[-1].end
    dep = instance.departures[departure_index]
    combine = yard.bookkeeping_minutes if len(dep.required) > 1 else 0
    if park_track != loc:
        acts.append(_movement(instance, loc, park_track, t))
        t = acts[-1].end
    back = yard.hops(park_track, gateway) * yard.move_minutes
    park_end = max(t, dep.time - combine - back)
    acts.append(Activity("parking", t, park_end, park_track))
    t = park_end
    if park_track != gateway:
        acts.append(_movement(instance, park_track, gateway, t))
        t = acts[-1].end
    if combine:
        acts.append(Activity("combine", t, t + combine, gateway))
        t += combine
    dep_time = max(t, dep.time)
    acts.append(Activity("departure", dep_time, dep_time, gateway))
    return tuple(acts)


def parking_window(instance: Instance, loc: int, ready: int, track: int, departure_index: int) -> tuple[int, int]:
    """Interval a unit would spend on ``track`` when parked there by :func:`build_tail`."""
    yard = instance.yard
    dep = instance.departures[departure_index]
    combine = yard.bookkeeping_minutes if len(dep.required) > 1 else 0
    enter = ready + (yard.hops(loc, track) * yard.move_minutes if track != loc else 0)
    leave = dep.time - combine - yard.hops(track, yard.gateway.id) * yard.move_minutes
    return enter, max(enter, leave)


def choose_parking(
    instance: Instance, uid: int, loc: int, ready: int, departure_index: int, book: Bookings,
) -> int:
    """First parking track (by id) with room for the unit; otherwise the one
    with the most room left. Without parking tracks the unit stays at ``loc``."""
    length = instance.units[uid].length
    best, best_room = None, None
    for tid in instance.yard.tracks_with("parking"):
        enter, leave = parking_window(instance, loc, ready, tid, departure_index)
        room = instance.yard.by_id[tid].capacity - book.peak_load(tid, enter, leave)
        if room >= length:
            return tid
        if best_room is None or room > best_room:
            best, best_room = tid, room
    return loc if best is None else best


def greedy_chain(
    instance: Instance,
    uid: int,
    departure_index: int,
    book: Bookings,
) -> tuple[Activity, ...]:
    """Greedy activity chain for one unit given the units already booked.

    Tasks are served in instance order, each on the compatible track that
    finishes it earliest (lowest id on ties); the unit then parks on the
    first track with room and runs to the gateway for its departure.
    """
    yard = instance.yard
    gateway = yard.gateway.id
    arrival = instance.arrival_of[uid]
    t = arrival.time
    acts = [Activity("arrival", t, t, gateway)]
    if len(arrival.units) > 1:
        acts.append(Activity("split", t, t + yard.bookkeeping_minutes, gateway))
        t += yard.bookkeeping_minutes
    loc = gateway
    for task in instance.tasks_of[uid]:
        best = None
        for tid in yard.tracks_with(task.task_kind):
            ready = t + yard.hops(loc, tid) * yard.move_minutes
            start = book.earliest_service_start(tid, ready, task.duration)
            if best is None or start + task.duration < best[0]:
                best = (start + task.duration, tid, start)
        _, tid, start = best
        if tid != loc:
            acts.append(_movement(instance, loc, tid, t))
        acts.append(Activity("service", start, start + task.duration, tid, task.task_kind))
        t, loc = start + task.duration, tid

    park = choose_parking(instance, uid, loc, t, departure_index, book)
    return build_tail(instance, uid, acts, park, departure_index)


def build_initial_plan(instance: Instance, matching: Mapping[int, tuple[int, int]] | None = None) -> Plan:
    """Greedy initial plan; units are placed one by one in arrival order.

    ``matching`` maps unit id to ``(departure_index, position)`` and defaults
    to :func:`initial_matching`. The result is structurally valid but in
    general violates constraints.
    """
    if matching is None:
        matching = initial_matching(instance)
    book = Bookings()
    chains = {}
    for a in instance.arrivals:
        for u in a.units:
            chain = greedy_chain(instance, u.id, matching[u.id][0], book)
            book.add_chain(instance, u.id, chain)
            chains[u.id] = chain
    return Plan(dict(matching), chains)
