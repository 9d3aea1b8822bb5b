"""Trace files: the sequence of accepted plans of one local-search run.

The first plan is stored in full and every later plan as the units whose
chain or matching changed, which keeps files small because operators touch
one or two units at a time. Wall-clock time is not part of the trace; it
goes to a separate timing file so that reruns give byte-identical traces.
"""
from __future__ import annotations

from pathlib import Path

from .io import read_document, write_document
from .search import RunTrace
from .yard import Plan, activity_from_dict, activity_to_dict, plan_from_dict, plan_to_dict

TRACE_KIND = "trace"
TIMING_KIND = "timing"


def _delta(prev: Plan, cur: Plan) -> dict:
    acts = {uid: a for uid, a in cur.activities.items() if prev.activities.get(uid) != a}
    match = {uid: s for uid, s in cur.matching.items() if prev.matching.get(uid) != s}
    return {
        "activities": [
            {"unit_id": uid, "chain": [activity_to_dict(a) for a in acts[uid]]} for uid in sorted(acts)
        ],
        "matching": [[uid, d, p] for uid, (d, p) in sorted(match.items())],
    }


def _apply(prev: Plan, delta: dict) -> Plan:
    acts = {e["unit_id"]: tuple(activity_from_dict(a) for a in e["chain"]) for e in delta["activities"]}
    match = {uid: (d, p) for uid, d, p in delta["matching"]}
    return prev.replace_units(acts, match)


def trace_to_dict(trace: RunTrace, instance_name: str = "", horizon: int = 1440) -> dict:
    deltas = [_delta(a, b) for a, b in zip(trace.plans, trace.plans[1:])]
    return {
        "instance": instance_name,
        "horizon": horizon,
        "seed": trace.seed,
        "feasible": trace.feasible,
        "stop_reason": trace.stop_reason,
        "n_proposals": trace.n_proposals,
        "costs": list(trace.costs),
        "iterations": list(trace.iterations),
        "initial_plan": plan_to_dict(trace.plans[0]),
        "deltas": deltas,
    }


def trace_from_dict(d: dict, wall_time_seconds: float = 0.0) -> RunTrace:
    plans = [plan_from_dict(d["initial_plan"])]
    for delta in d["deltas"]:
        plans.append(_apply(plans[-1], delta))
    return RunTrace(
        plans=plans,
        costs=list(d["costs"]),
        feasible=d["feasible"],
        n_proposals=d["n_proposals"],
        wall_time_seconds=wall_time_seconds,
        seed=d["seed"],
        iterations=list(d["iterations"]),
        stop_reason=d["stop_reason"],
    )


def write_trace(path: str | Path, trace: RunTrace, instance_name: str = "", horizon: int = 1440) -> Path:
    return write_document(path, TRACE_KIND, trace_to_dict(trace, instance_name, horizon))


def read_trace(path: str | Path) -> tuple[RunTrace, dict]:
    """Trace plus its header fields (``instance``, ``horizon``)."""
    doc = read_document(path, TRACE_KIND)
    return trace_from_dict(doc), {"instance": doc["instance"], "horizon": doc["horizon"]}
