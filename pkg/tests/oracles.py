"""Independent reference implementations used by the tests.

``simulate_plan`` replays a plan minute by minute instead of sweeping
interval events, and ``max_matching_bruteforce`` enumerates assignments.
Neither shares code with the package beyond the data classes.
"""
from __future__ import annotations

from collections import defaultdict


def _positions(plan, uid):
    """Per-minute location of ``uid``: list of (t_from, t_to, track or None)."""
    acts = plan.activities[uid]
    segs = []
    loc, since = acts[0].track_id, acts[0].start
    for a in acts[1:]:
        if a.kind == "movement":
            segs.append((since, a.start, loc))
            segs.append((a.start, a.end, None))
            loc, since = a.route[-1], a.end
    segs.append((since, acts[-1].end, loc))
    return segs


def simulate_plan(instance, plan) -> set[str]:
    """Violation kinds of ``plan`` found by minute-level simulation."""
    yard = instance.yard
    gw = yard.gateway.id
    kinds: set[str] = set()
    units = instance.units

    # matching
    used = defaultdict(int)
    for uid, slot in plan.matching.items():
        used[slot] += 1
        if instance.departures[slot[0]].required[slot[1]] != (units[uid].unit_type, units[uid].subtype_carriages):
            kinds.add("matching_type_mismatch")
    if any(n > 1 for n in used.values()):
        kinds.add("matching_type_mismatch")

    # per-unit chain walk
    for uid, acts in plan.activities.items():
        if acts[0].start != instance.arrival_of[uid].time:
            kinds.add("time_order")
        for prev, nxt in zip(acts, acts[1:]):
            if prev.end > nxt.start:
                kinds.add("time_order")
        if acts[0].track_id != gw or acts[-1].track_id != gw:
            kinds.add("route_invalid")
        here = acts[0].track_id
        for a in acts[1:]:
            if a.kind == "movement":
                hops_ok = all(
                    (min(x, y), max(x, y)) in yard.adjacency for x, y in zip(a.route, a.route[1:])
                )
                if a.route[0] != here or not hops_ok or a.end - a.start != yard.move_minutes * (len(a.route) - 1):
                    kinds.add("route_invalid")
                here = a.route[-1]
            elif a.track_id != here:
                kinds.add("route_invalid")
        dep_time = instance.departures[plan.matching[uid][0]].time
        if acts[-1].end != dep_time:
            kinds.add("departure_late")
        services = [a for a in acts if a.kind == "service"]
        wanted = {t.task_kind: t.duration for t in instance.tasks_of[uid]}
        for kind in {a.task_kind for a in services} | set(wanted):
            done = [a for a in services if a.task_kind == kind]
            if kind not in wanted or len(done) != 1:
                kinds.add("task_unscheduled")
                continue
            a = done[0]
            arr = instance.arrival_of[uid].time
            if a.end - a.start != wanted[kind] or a.start < arr or a.end > dep_time:
                kinds.add("task_unscheduled")
            if kind not in yard.by_id[a.track_id].functions:
                kinds.add("task_unscheduled")

    # minute-level replay
    segs = {uid: _positions(plan, uid) for uid in plan.activities}
    horizon = max(s[1] for ss in segs.values() for s in ss) + 1
    stacks: dict[int, list[set[int]]] = defaultdict(list)  # layers of simultaneous entries
    where_prev: dict[int, int | None] = {uid: None for uid in segs}
    start = min(s[0] for ss in segs.values() for s in ss)
    for t in range(start, horizon):
        where = {}
        for uid, ss in segs.items():
            where[uid] = None
            for lo, hi, loc in ss:
                if lo <= t < hi:
                    where[uid] = loc
        # capacity
        load = defaultdict(int)
        for uid, loc in where.items():
            if loc is not None:
                load[loc] += units[uid].length
        if any(load[tid] > yard.by_id[tid].capacity for tid in load):
            kinds.add("track_capacity")
        # facility use
        busy = defaultdict(int)
        for uid, acts in plan.activities.items():
            for a in acts:
                if a.kind == "service" and a.start <= t < a.end:
                    busy[a.track_id] += 1
        if any(n > 1 for n in busy.values()):
            kinds.add("facility_overlap")
        # dead-end tracks: leaving units must not have later entries above them
        for tid in [tr.id for tr in yard.tracks if tr.approach == "single_end"]:
            layers = stacks[tid]
            leaving = {u for u in where_prev if where_prev[u] == tid and where[u] != tid}
            for depth, layer in enumerate(layers):
                for u in layer & leaving:
                    above = set().union(*layers[depth + 1:]) if depth + 1 < len(layers) else set()
                    if above - leaving:
                        kinds.add("crossing_order")
            layers[:] = [layer - leaving for layer in layers]
            layers[:] = [layer for layer in layers if layer]
            entering = {u for u in where if where[u] == tid and where_prev[u] != tid}
            if entering:
                layers.append(entering)
        where_prev = where
    return kinds


def max_matching_bruteforce(unit_keys, slot_keys) -> int:
    """Largest number of units that can be given distinct slots of their key."""
    best = 0

    def go(i, used, size):
        nonlocal best
        if size + (len(unit_keys) - i) <= best:
            return
        if i == len(unit_keys):
            best = max(best, size)
            return
        for j, key in enumerate(slot_keys):
            if j not in used and key == unit_keys[i]:
                used.add(j)
                go(i + 1, used, size + 1)
                used.discard(j)
        go(i + 1, used, size)

    go(0, set(), 0)
    return best
