"""Label search runs, build a balanced run-level split and train the network.

A small corpus keeps this quick; expect accuracies near chance. The
``ExperimentConfig`` defaults run the larger comparison (about ten minutes).
"""
from __future__ import annotations

from tusp import Architecture, balance_and_split, evaluate, label_run, train
from tusp.experiment import ExperimentConfig, harvest

# %% Harvest: one iteration-capped search per generated instance.
cfg = ExperimentConfig(n_instances=60)
_, traces = harvest(cfg)
print(f"{sum(t.feasible for t in traces)}/{len(traces)} runs end feasible")

# %% Labels look W accepted plans ahead. Each run contributes at most 16
# graphs, and runs, not graphs, are assigned to train or test.
runs = [label_run(t, W=50, run_id=f"run{i:03d}") for i, t in enumerate(traces)]
split = balance_and_split(runs, per_run_cap=16, test_fraction=0.3, seed=0, W=50)
print("train classes", split.class_counts("train"), "test classes", split.class_counts("test"))

# %% Train with and without the time features.
arch = Architecture()
for temporal in (True, False):
    res = train(split.train, arch, lr=1e-4, epochs=20, seed=0, temporal=temporal)
    m = evaluate(res.model, split.test)
    print(f"temporal={temporal}: loss {res.losses[0]:.3f} -> {res.losses[-1]:.3f}; "
          f"test acc {m.accuracy:.3f} tpr {m.tpr:.3f} tnr {m.tnr:.3f}")
