"""Simulated-annealing repair of an infeasible plan.

The search records every accepted plan, so one run is a sequence of plans
with their costs. Those sequences are the raw material of the classifier.
"""
from __future__ import annotations

import numpy as np

from tusp import LSParams, ScenarioConfig, build_initial_plan, generate_instance, ls_run

# %% An iteration-capped run is deterministic given its seed.
inst = generate_instance(ScenarioConfig(n_units=6, seed=11))
params = LSParams(max_iterations=1500, restart_patience_iterations=300, max_runtime_seconds=1e9, seed=0)
trace = ls_run(inst, build_initial_plan(inst), params)
print(f"stop: {trace.stop_reason}; {len(trace.plans)} accepted plans after {trace.n_proposals} proposals")

# %% Cost trajectory, sampled every hundredth accepted plan.
costs = np.array(trace.costs)
print("costs:", costs[::100].tolist(), "... final", costs[-1])

# %% Success rate over seeds on the same instance.
hits = [ls_run(inst, build_initial_plan(inst), LSParams(**{**params.__dict__, "seed": s})).feasible for s in range(10)]
print(f"feasible in {sum(hits)}/10 seeds")
