"""Labelled graph datasets harvested from local-search runs.

A run with accepted plans ``G_0 .. G_N`` yields one example per plan. The
label of ``G_i`` is the feasibility of the plan ``W`` accepted steps later,
``G_min(N, W + i)``; with ``W >= N`` every graph carries the run's final
verdict.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .gnn import epoch_batches
from .graph import ActivityGraph, LabelAlphabet, extract_features, plan_to_graph
from .io import read_document, write_document
from .search import RunTrace
from .yard import Plan

STRATEGIES = ("all", "initial", "first_fraction")
MANIFEST_KIND = "dataset_manifest"


@dataclass(eq=False)
class LabeledExample:
    run_id: str
    index: int
    label: int
    plan: Plan | None = None
    features: np.ndarray | None = None

    @cached_property
    def graph(self) -> ActivityGraph:
        if self.plan is None:
            raise ValueError(f"example {self.run_id}#{self.index} has no plan")
        return plan_to_graph(self.plan)

    @property
    def key(self) -> tuple[str, int]:
        return (self.run_id, self.index)


def lookahead_labels(costs: Sequence[float], W: int) -> list[int]:
    """``y_i = 1`` iff the plan at ``min(N, W + i)`` has zero cost."""
    if W < 1:
        raise ConfigurationError("look-ahead W must be a positive integer")
    N = len(costs) - 1
    return [int(costs[min(N, W + i)] == 0) for i in range(N + 1)]


def label_run(trace: RunTrace, W: int, run_id: str = "") -> list[LabeledExample]:
    """One labelled example per accepted plan of ``trace``.

    Graphs are built lazily from the plans, so labelling a long run is cheap
    when only a sample of it is used later.
    """
    if not trace.plans:
        raise ConfigurationError("cannot label an empty trace")
    labels = lookahead_labels(trace.costs, W)
    return [LabeledExample(run_id, i, y, plan) for i, (y, plan) in enumerate(zip(labels, trace.plans))]


@dataclass
class DatasetSplit:
    train: list[LabeledExample]
    test: list[LabeledExample]
    batch_size: int = 50
    epochs: int = 200
    W: int = 150
    per_run_cap: int = 32
    seed: int = 0
    strategy: str = "all"
    test_fraction: float = 0.2
    train_runs: tuple[str, ...] = field(default_factory=tuple)
    test_runs: tuple[str, ...] = field(default_factory=tuple)

    def class_counts(self, part: str = "train") -> tuple[int, int]:
        ys = [ex.label for ex in getattr(self, part)]
        return ys.count(0), ys.count(1)


def candidate_indices(n_graphs: int, strategy: str, first_fraction: float = 0.1) -> list[int]:
    if strategy == "all":
        return list(range(n_graphs))
    if strategy == "initial":
        return [0]
    if strategy == "first_fraction":
        return list(range(math.floor(first_fraction * (n_graphs - 1)) + 1))
    raise ConfigurationError(f"unknown sampling strategy {strategy!r}; expected one of {STRATEGIES}")


def _undersample(examples: list[LabeledExample], rng: np.random.Generator) -> list[LabeledExample]:
    by_class = {0: [e for e in examples if e.label == 0], 1: [e for e in examples if e.label == 1]}
    m = min(len(by_class[0]), len(by_class[1]))
    keep = []
    for y in (0, 1):
        pool = by_class[y]
        if len(pool) > m:
            picked = np.sort(rng.choice(len(pool), size=m, replace=False))
            pool = [pool[i] for i in picked]
        keep += pool
    return sorted(keep, key=lambda e: e.key)


def balance_and_split(
    runs: Sequence[Sequence[LabeledExample]],
    per_run_cap: int = 32,
    test_fraction: float = 0.2,
    seed: int = 0,
    strategy: str = "all",
    first_fraction: float = 0.1,
    W: int = 150,
    batch_size: int = 50,
    epochs: int = 200,
    balance_test: bool = True,
) -> DatasetSplit:
    """Sample, split by run and undersample to a 50/50 training set.

    Steps, all driven by one generator seeded with ``seed``:

    1. each run contributes at most ``per_run_cap`` graphs, drawn uniformly
       from the indices allowed by ``strategy``;
    2. runs (never single graphs) are assigned to train or test, separately
       for runs ending feasible and infeasible so both parts see both;
    3. the majority class of the training part is undersampled to the size
       of the minority class, and likewise for the test part when it holds
       both classes and ``balance_test`` is set.
    """
    if per_run_cap < 1:
        raise ConfigurationError("per_run_cap must be at least 1")
    if not 0 <= test_fraction < 1:
        raise ConfigurationError("test_fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    sampled: dict[str, list[LabeledExample]] = {}
    verdict: dict[str, int] = {}
    for run in runs:
        if not run:
            continue
        rid = run[0].run_id
        if rid in sampled:
            raise ConfigurationError(f"duplicate run id {rid!r}")
        idx = candidate_indices(len(run), strategy, first_fraction)
        if len(idx) > per_run_cap:
            idx = sorted(rng.choice(idx, size=per_run_cap, replace=False).tolist())
        sampled[rid] = [run[i] for i in idx]
        verdict[rid] = run[-1].label
    labels = {e.label for exs in sampled.values() for e in exs}
    if labels != {0, 1}:
        raise ConfigurationError("corpus holds a single class; cannot balance")

    test_runs: list[str] = []
    for y in (0, 1):
        group = sorted(r for r in sampled if verdict[r] == y)
        order = rng.permutation(len(group))
        n_test = int(round(test_fraction * len(group)))
        test_runs += [group[i] for i in order[:n_test]]
    test_set = set(test_runs)
    train_runs = sorted(r for r in sampled if r not in test_set)

    train = [e for r in train_runs for e in sampled[r]]
    if {e.label for e in train} != {0, 1}:
        raise ConfigurationError("training part holds a single class; cannot balance")
    train = _undersample(train, rng)
    test = [e for r in sorted(test_set) for e in sampled[r]]
    if balance_test and {e.label for e in test} == {0, 1}:
        test = _undersample(test, rng)
    return DatasetSplit(
        train, test, batch_size, epochs, W, per_run_cap, seed, strategy, test_fraction,
        tuple(train_runs), tuple(sorted(test_set)),
    )


def make_batches(split: DatasetSplit, seed: int, epoch: int = 0) -> list[list[LabeledExample]]:
    """Batches of one epoch: a fresh permutation per ``(seed, epoch)``, the
    final batch may be short. Training uses the same permutation."""
    return [[split.train[i] for i in idx] for idx in epoch_batches(len(split.train), split.batch_size, seed, epoch)]


def featurize(
    examples: Sequence[LabeledExample], alphabet: LabelAlphabet, horizon: int, temporal: bool = True,
) -> list[np.ndarray]:
    """Attach (and return) feature matrices for ``examples``."""
    for ex in examples:
        ex.features = extract_features(ex.graph, alphabet, horizon, temporal)
    return [ex.features for ex in examples]


# --------------------------------------------------------------------------
# manifest

def write_manifest(path: str | Path, split: DatasetSplit, trace_files: Sequence[str], first_fraction: float = 0.1) -> Path:
    """Manifest naming the traces and every setting needed to rebuild the split."""
    return write_document(path, MANIFEST_KIND, {
        "traces": list(trace_files),
        "W": split.W,
        "strategy": split.strategy,
        "first_fraction": first_fraction,
        "per_run_cap": split.per_run_cap,
        "test_fraction": split.test_fraction,
        "seed": split.seed,
        "batch_size": split.batch_size,
        "epochs": split.epochs,
        "train": [[e.run_id, e.index, e.label] for e in split.train],
        "test": [[e.run_id, e.index, e.label] for e in split.test],
    })


def read_manifest(path: str | Path) -> dict:
    return read_document(path, MANIFEST_KIND)


def split_from_manifest(manifest: dict, traces: dict[str, RunTrace]) -> DatasetSplit:
    """Rebuild a split from a manifest and its loaded traces (keyed by run id)."""
    labelled = {rid: label_run(tr, manifest["W"], rid) for rid, tr in traces.items()}

    def pick(rows):
        out = []
        for rid, i, y in rows:
            ex = labelled[rid][i]
            if ex.label != y:
                raise ConfigurationError(f"manifest label of {rid}#{i} disagrees with its trace")
            out.append(ex)
        return out

    train, test = pick(manifest["train"]), pick(manifest["test"])
    return DatasetSplit(
        train, test, manifest["batch_size"], manifest["epochs"], manifest["W"], manifest["per_run_cap"],
        manifest["seed"], manifest["strategy"], manifest["test_fraction"],
        tuple(sorted({e.run_id for e in train})), tuple(sorted({e.run_id for e in test})),
    )
