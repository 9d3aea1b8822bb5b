"""Desk-scale comparison of initial-plan classifiers with and without time features.

For every generated instance the greedy initial plan is labelled with the
outcome of an iteration-capped local search on it. Classifiers are trained on
the initial graphs of a run-level training split and scored on the held-out
runs, once with the temporal feature block and once with labels only.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dataset import balance_and_split, label_run
from .generator import ScenarioConfig, generate_instance
from .gnn import Architecture, Metrics, evaluate, train
from .initial import build_initial_plan
from .search import LSParams, RunTrace, ls_run
from .seeds import derive_seed
from .yard import Instance

RUN_TO_END = 10**9  # look-ahead beyond any run length: every graph gets the final verdict


def solve_instance(instance: Instance, params: LSParams) -> RunTrace:
    """Local search from the greedy initial plan."""
    return ls_run(instance, build_initial_plan(instance), params)


@dataclass
class ExperimentConfig:
    n_instances: int = 600
    n_seeds: int = 5
    base_seed: int = 0
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    ls: LSParams = field(default_factory=lambda: LSParams(
        max_runtime_seconds=1e9, max_iterations=1500, restart_patience_iterations=300,
    ))
    architecture: Architecture = field(default_factory=Architecture)
    lr: float = 1e-4
    epochs: int = 50
    batch_size: int = 50
    test_fraction: float = 0.3


@dataclass
class ExperimentResult:
    feasible_fraction: float
    temporal: list[Metrics]
    label_only: list[Metrics]
    wall_seconds: float

    @staticmethod
    def _mean(ms: Sequence[Metrics]) -> float:
        return float(np.mean([m.accuracy for m in ms]))

    @property
    def temporal_mean(self) -> float:
        return self._mean(self.temporal)

    @property
    def label_only_mean(self) -> float:
        return self._mean(self.label_only)


def harvest(cfg: ExperimentConfig) -> tuple[list[Instance], list[RunTrace]]:
    instances, traces = [], []
    for i in range(cfg.n_instances):
        inst = generate_instance(replace(cfg.scenario, seed=derive_seed(cfg.base_seed, i)))
        params = replace(cfg.ls, seed=derive_seed(cfg.base_seed + 1, i))
        instances.append(inst)
        traces.append(solve_instance(inst, params))
    return instances, traces


def run_experiment(cfg: ExperimentConfig = ExperimentConfig(), traces: Sequence[RunTrace] | None = None) -> ExperimentResult:
    """Train both variants on ``cfg.n_seeds`` run-level splits and report test metrics."""
    t0 = time.perf_counter()
    if traces is None:
        _, traces = harvest(cfg)
    runs = [label_run(tr, RUN_TO_END, f"run{i:04d}") for i, tr in enumerate(traces)]
    temporal, label_only = [], []
    for s in range(cfg.n_seeds):
        split = balance_and_split(
            runs, per_run_cap=1, test_fraction=cfg.test_fraction, seed=s, strategy="initial",
            W=RUN_TO_END, batch_size=cfg.batch_size, epochs=cfg.epochs,
        )
        for use_time, sink in ((True, temporal), (False, label_only)):
            res = train(split.train, cfg.architecture, lr=cfg.lr, batch_size=cfg.batch_size,
                        epochs=cfg.epochs, seed=s, temporal=use_time, horizon=cfg.scenario.horizon)
            sink.append(evaluate(res.model, split.test))
    feasible = float(np.mean([tr.feasible for tr in traces]))
    return ExperimentResult(feasible, temporal, label_only, time.perf_counter() - t0)
