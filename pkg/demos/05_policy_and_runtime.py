"""Early termination: the threshold policy and its expected runtime."""
from __future__ import annotations

from tusp import (
    LSParams, PolicyConfig, RuntimeModel, ScenarioConfig, estimate_expected_runtime, generate_instance,
    policy_run, simulate_runtime,
)

# %% The runtime chain: halted feasible attempts are retried, halted
# infeasible ones save the rest of their budget.
rm = RuntimeModel.from_counts(543, 250, 284, 523, prior_feasible=0.28, t_feasible=157, t_infeasible=300, t_decision=80)
est = estimate_expected_runtime(rm, PolicyConfig())
print(f"tpr {rm.tpr:.3f} tnr {rm.tnr:.3f}: {est.t_without:.1f} s -> {est.t_with:.1f} s ({est.reduction_fraction:.1%})")
print(f"Monte-Carlo check: {simulate_runtime(rm, 200_000, seed=0):.1f} s")

# %% The saving depends strongly on the share of feasible runs.
for p in (0.1, 0.28, 0.5, 0.72):
    e = estimate_expected_runtime(RuntimeModel(**{**rm.__dict__, "prior_feasible": p}), PolicyConfig())
    print(f"  prior feasible {p:.2f}: reduction {e.reduction_fraction:6.1%}")

# %% The policy on a live search. Any callable mapping a plan to [0, 1] can
# stand in for a trained model; here a pessimistic constant.
inst = generate_instance(ScenarioConfig(seed=5))
params = LSParams(max_iterations=1500, restart_patience_iterations=300, max_runtime_seconds=1e9, seed=1)
res = policy_run(inst, lambda plan: 0.2, params, PolicyConfig(K=50))
print(f"verdict {res.verdict} after {res.iterations} accepted plans, {res.n_proposals} proposals, "
      f"decision score {res.decision_score}")
