"""Simulated-annealing local search over shunting plans.

Operator table (``op_id``):

1. swap the departure slots of two compatible units and rebuild both chains
2. move one service activity to another track offering the same task
3. shift one service activity by plus or minus ``shift_minutes``
4. change the parking track of one unit
5. swap the entry order of two units parked together on one track
6. re-route one movement through a different neighbouring track
7. shift one movement by plus or minus ``shift_minutes``; adjacent parking
   absorbs the change
8. rebuild one unit's whole chain greedily around the other units
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigurationError
from .initial import Bookings, build_tail, greedy_chain
from .yard import Activity, Instance, Plan, plan_cost, validate_plan

N_OPERATORS = 8
OPERATOR_NAMES = {
    1: "swap_matching", 2: "move_service_track", 3: "shift_service", 4: "change_parking_track",
    5: "swap_parking_order", 6: "reroute_movement", 7: "shift_movement", 8: "regreedy_unit",
}


class Move(NamedTuple):
    plan: Plan
    identity: bool


@dataclass(frozen=True)
class LSParams:
    max_runtime_seconds: float = 300.0
    max_iterations: int | None = None
    restart_patience_seconds: float = 30.0
    restart_patience_iterations: int | None = None
    initial_temperature: float = 10.0
    cooling_rate: float = 0.999
    shift_minutes: int = 10
    restart_moves: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.cooling_rate < 1:
            raise ConfigurationError("cooling_rate must lie in (0, 1)")
        if self.initial_temperature <= 0 or self.max_runtime_seconds <= 0:
            raise ConfigurationError("temperature and runtime budget must be positive")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ConfigurationError("max_iterations must be non-negative")


@dataclass
class RunTrace:
    """Accepted states ``G_0 .. G_N`` of one run.

    ``iterations[i]`` is the number of proposals made when ``plans[i]``
    became the current state; ``n_iterations`` is the index ``N`` of the
    last recorded state.
    """

    plans: list[Plan]
    costs: list[float]
    feasible: bool
    n_proposals: int
    wall_time_seconds: float
    seed: int
    iterations: list[int] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def n_iterations(self) -> int:
        return len(self.plans) - 1


# --------------------------------------------------------------------------
# operators

def _with_routes(instance: Instance, acts: list[Activity]) -> list[Activity]:
    """Re-derive movements after stationary activities changed tracks.

    Movements keep their start time; their route becomes the shortest one
    and the duration follows from it. Movements that became pointless are
    dropped and missing ones are inserted after the preceding activity.
    """
    yard = instance.yard
    out = [acts[0]]
    loc = acts[0].track_id
    pending: Activity | None = None
    for act in acts[1:]:
        if act.kind == "movement":
            pending = act
            continue
        if act.track_id != loc:
            start = pending.start if pending is not None else out[-1].end
            route = yard.shortest_route(loc, act.track_id)
            out.append(Activity("movement", start, start + (len(route) - 1) * yard.move_minutes,
                                act.track_id, route=route))
        pending = None
        out.append(act)
        loc = act.track_id
    return out


def _swap_matching(instance, plan, rng, shift):
    pairs = [
        (u, v) for u in instance.unit_ids for v in instance.unit_ids
        if u < v and instance.units[u].key == instance.units[v].key and plan.matching[u] != plan.matching[v]
    ]
    if not pairs:
        return None
    u, v = pairs[rng.integers(len(pairs))]
    matching = {u: plan.matching[v], v: plan.matching[u]}
    book = Bookings.from_plan(instance, plan, exclude={u, v})
    chains = {}
    for uid in (u, v):
        chains[uid] = greedy_chain(instance, uid, matching[uid][0], book)
        book.add_chain(instance, uid, chains[uid])
    return plan.replace_units(chains, matching)


def _service_refs(plan):
    return [(uid, i) for uid, acts in sorted(plan.activities.items()) for i, a in enumerate(acts) if a.kind == "service"]


def _move_service_track(instance, plan, rng, shift):
    yard = instance.yard
    refs = [
        (uid, i) for uid, i in _service_refs(plan)
        if len(yard.tracks_with(plan.activities[uid][i].task_kind)) > 1
    ]
    if not refs:
        return None
    uid, i = refs[rng.integers(len(refs))]
    acts = list(plan.activities[uid])
    options = [t for t in yard.tracks_with(acts[i].task_kind) if t != acts[i].track_id]
    acts[i] = replace(acts[i], track_id=options[rng.integers(len(options))])
    return plan.replace_units({uid: tuple(_with_routes(instance, acts))})


def _shift_service(instance, plan, rng, shift):
    refs = _service_refs(plan)
    if not refs:
        return None
    uid, i = refs[rng.integers(len(refs))]
    acts = list(plan.activities[uid])
    delta = shift if rng.random() < 0.5 else -shift
    if acts[i].start + delta < 0:
        delta = shift
    acts[i] = replace(acts[i], start=acts[i].start + delta, end=acts[i].end + delta)
    return plan.replace_units({uid: tuple(acts)})


def _change_parking_track(instance, plan, rng, shift):
    parking_tracks = instance.yard.tracks_with("parking")
    if len(parking_tracks) < 2:
        return None
    refs = [(uid, i) for uid, acts in sorted(plan.activities.items()) for i, a in enumerate(acts) if a.kind == "parking"]
    if not refs:
        return None
    uid, i = refs[rng.integers(len(refs))]
    acts = plan.activities[uid]
    options = [t for t in parking_tracks if t != acts[i].track_id]
    new_track = options[rng.integers(len(options))]
    cut = i - 1 if acts[i - 1].kind == "movement" else i
    prefix = list(acts[:cut])
    return plan.replace_units({uid: build_tail(instance, uid, prefix, new_track, plan.matching[uid][0])})


def _stays_on(plan, kind="parking"):
    by_track = {}
    for uid, acts in sorted(plan.activities.items()):
        for i, a in enumerate(acts):
            if a.kind == kind:
                by_track.setdefault(a.track_id, []).append((uid, i))
    return by_track


def _swap_parking_order(instance, plan, rng, shift):
    candidates = []
    for tid, refs in sorted(_stays_on(plan).items()):
        for x in range(len(refs)):
            for y in range(x + 1, len(refs)):
                (u, i), (v, j) = refs[x], refs[y]
                a, b = plan.activities[u][i], plan.activities[v][j]
                if u != v and a.start < b.end and b.start < a.end and a.start != b.start:
                    candidates.append(((u, i), (v, j)) if a.start < b.start else ((v, j), (u, i)))
    if not candidates:
        return None
    (u, i), (v, j) = candidates[rng.integers(len(candidates))]
    # u entered first; it now enters one minute after v
    acts = list(plan.activities[u])
    target = plan.activities[v][j].start + 1
    if acts[i - 1].kind == "movement":
        m = acts[i - 1]
        acts[i - 1] = replace(m, start=target - m.duration, end=target)
    acts[i] = replace(acts[i], start=target, end=max(target, acts[i].end))
    return plan.replace_units({u: tuple(acts)})


def _reroute_movement(instance, plan, rng, shift):
    yard = instance.yard
    options = []
    for uid, acts in sorted(plan.activities.items()):
        for i, a in enumerate(acts):
            if a.kind != "movement":
                continue
            src, dst = a.route[0], a.route[-1]
            for w in yard.neighbors[src]:
                if w == dst or (len(a.route) > 1 and w == a.route[1]):
                    continue
                route = (src,) + yard.shortest_route(w, dst)
                if src not in route[1:]:
                    options.append((uid, i, route))
    if not options:
        return None
    uid, i, route = options[rng.integers(len(options))]
    acts = list(plan.activities[uid])
    m = acts[i]
    acts[i] = replace(m, route=route, end=m.start + (len(route) - 1) * yard.move_minutes)
    return plan.replace_units({uid: tuple(acts)})


def _shift_movement(instance, plan, rng, shift):
    refs = [(uid, i) for uid, acts in sorted(plan.activities.items()) for i, a in enumerate(acts) if a.kind == "movement"]
    if not refs:
        return None
    uid, i = refs[rng.integers(len(refs))]
    acts = list(plan.activities[uid])
    delta = shift if rng.random() < 0.5 else -shift
    m = acts[i]
    if m.start + delta < 0:
        delta = shift
    acts[i] = replace(m, start=m.start + delta, end=m.end + delta)
    prev, nxt = acts[i - 1], acts[i + 1]
    if prev.kind == "parking":
        acts[i - 1] = replace(prev, end=max(prev.start, prev.end + delta))
    if nxt.kind == "parking":
        acts[i + 1] = replace(nxt, start=min(nxt.end, nxt.start + delta))
    return plan.replace_units({uid: tuple(acts)})


def _regreedy_unit(instance, plan, rng, shift):
    uid = instance.unit_ids[rng.integers(len(instance.unit_ids))]
    book = Bookings.from_plan(instance, plan, exclude={uid})
    chain = greedy_chain(instance, uid, plan.matching[uid][0], book)
    if chain == plan.activities[uid]:
        return None
    return plan.replace_units({uid: chain})


_OPERATORS: dict[int, Callable] = {
    1: _swap_matching, 2: _move_service_track, 3: _shift_service, 4: _change_parking_track,
    5: _swap_parking_order, 6: _reroute_movement, 7: _shift_movement, 8: _regreedy_unit,
}


def apply_operator(
    instance: Instance, plan: Plan, op_id: int, rng: np.random.Generator, shift_minutes: int = 10,
) -> Move:
    """Neighbour of ``plan`` under operator ``op_id``; the input is never mutated.

    When the operator has nothing to act on the input comes back unchanged
    with ``identity=True``.
    """
    if op_id not in _OPERATORS:
        raise ValueError(f"unknown operator {op_id}")
    if not plan.activities:
        return Move(plan, True)
    out = _OPERATORS[op_id](instance, plan, rng, shift_minutes)
    if out is None:
        return Move(plan, True)
    return Move(out, False)


# --------------------------------------------------------------------------
# search loop

def evaluate(instance: Instance, plan: Plan) -> float:
    return plan_cost(validate_plan(instance, plan))


def ls_run(
    instance: Instance,
    initial: Plan,
    params: LSParams = LSParams(),
    observer: Callable[[int, Plan, float], bool] | None = None,
) -> RunTrace:
    """Simulated annealing from ``initial`` until a zero-cost plan or the budget.

    Each proposal applies a uniformly drawn operator. Improving or equal
    neighbours are accepted; worse ones with probability ``exp(-delta/T)``.
    The temperature is multiplied by ``cooling_rate`` after every proposal.
    When the best cost has not improved for the restart patience the search
    jumps to the best plan perturbed by ``restart_moves`` random operators.

    ``observer(i, plan, cost)`` is called for every recorded state before
    the search continues; returning True stops the run (stop reason
    ``"observer"``). With an iteration cap and no wall-clock pressure the
    run is a deterministic function of its inputs.
    """
    rng = np.random.default_rng(params.seed)
    t0 = time.perf_counter()
    cost = evaluate(instance, initial)
    current = initial
    plans, costs, iters = [initial], [cost], [0]
    best, best_cost = initial, cost
    temperature = params.initial_temperature
    proposals = 0
    last_improvement, last_improvement_time = 0, t0
    reason = ""

    def record(plan: Plan, c: float) -> bool:
        plans.append(plan)
        costs.append(c)
        iters.append(proposals)
        return observer is not None and observer(len(plans) - 1, plan, c)

    if observer is not None and observer(0, initial, cost):
        reason = "observer"
    while not reason:
        if cost == 0:
            reason = "feasible"
            break
        if params.max_iterations is not None and proposals >= params.max_iterations:
            reason = "iterations"
            break
        now = time.perf_counter()
        if now - t0 > params.max_runtime_seconds:
            reason = "time"
            break
        proposals += 1
        op = int(rng.integers(1, N_OPERATORS + 1))
        cand, identity = apply_operator(instance, current, op, rng, params.shift_minutes)
        u = rng.random()
        if not identity:
            c = evaluate(instance, cand)
            delta = c - cost
            if delta <= 0 or u < math.exp(-delta / temperature):
                current, cost = cand, c
                if record(cand, c):
                    reason = "observer"
                if c < best_cost:
                    best, best_cost = cand, c
                    last_improvement, last_improvement_time = proposals, time.perf_counter()
        temperature *= params.cooling_rate
        if reason or cost == 0:
            continue
        if params.restart_patience_iterations is not None:
            stale = proposals - last_improvement >= params.restart_patience_iterations
        else:
            stale = time.perf_counter() - last_improvement_time >= params.restart_patience_seconds
        if stale:
            cand = best
            for _ in range(params.restart_moves):
                cand = apply_operator(instance, cand, int(rng.integers(1, N_OPERATORS + 1)), rng,
                                      params.shift_minutes).plan
            current, cost = cand, evaluate(instance, cand)
            last_improvement, last_improvement_time = proposals, time.perf_counter()
            if record(cand, cost):
                reason = "observer"
            if cost < best_cost:
                best, best_cost = cand, cost
    return RunTrace(
        plans=plans,
        costs=costs,
        feasible=costs[-1] == 0,
        n_proposals=proposals,
        wall_time_seconds=time.perf_counter() - t0,
        seed=params.seed,
        iterations=iters,
        stop_reason=reason,
    )
