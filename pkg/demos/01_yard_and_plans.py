"""Instances, greedy initial plans and constraint violations.

Run with ``python demos/01_yard_and_plans.py``.
"""
from __future__ import annotations

from collections import Counter

from tusp import ScenarioConfig, build_initial_plan, generate_instance, plan_cost, validate_plan

# %% A generated instance: arrivals, departures and service tasks on the default yard.
inst = generate_instance(ScenarioConfig(n_units=8, seed=3))
print(f"{len(inst.arrivals)} arrivals, {len(inst.departures)} departures, {len(inst.tasks)} tasks")
for t in inst.yard.tracks:
    print(f"  track {t.id}: capacity {t.capacity:>3} {t.approach:<10} {sorted(t.functions)}")

# %% The greedy initial plan matches units to departure slots and schedules
# every unit's activities in turn. It ignores most interactions between units,
# so it usually violates something.
plan = build_initial_plan(inst)
violations = validate_plan(inst, plan)
print("violations by kind:", dict(Counter(v.kind for v in violations)))
print("weighted cost:", plan_cost(violations))

# %% Each unit's chain of activities.
uid = min(plan.activities)
for a in plan.activities[uid]:
    print(f"  {a.kind:<10} {a.start:>4}-{a.end:<4} track {a.track_id}")

# %% Over a batch of instances, how often is the greedy plan already feasible?
feasible = sum(not validate_plan(i, build_initial_plan(i))
               for i in (generate_instance(ScenarioConfig(seed=s)) for s in range(30)))
print(f"greedy plan feasible on {feasible}/30 instances")
