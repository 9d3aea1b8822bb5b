"""Train unit shunting: instance generation, local search, plan-graph
classification and an early-termination policy for the search."""
from __future__ import annotations

from .dataset import DatasetSplit, LabeledExample, balance_and_split, label_run, make_batches
from .errors import ConfigurationError, SchemaError, StructuralError
from .generator import ScenarioConfig, default_yard, generate_instance
from .gnn import Architecture, Model, evaluate, graph_conv_forward, network_forward, train, unify_nodes
from .graph import ActivityGraph, LabelAlphabet, extract_features, plan_to_graph
from .initial import build_initial_plan, hopcroft_karp_match, initial_matching
from .policy import (
    PolicyConfig, RuntimeModel, estimate_expected_runtime, policy_run, score_curve, simulate_runtime,
)
from .search import LSParams, RunTrace, apply_operator, ls_run
from .yard import Instance, Plan, Yard, check_structure, is_feasible, plan_cost, validate_plan

__version__ = "0.1.0"

__all__ = [
    "ActivityGraph",
    "Architecture",
    "ConfigurationError",
    "DatasetSplit",
    "Instance",
    "LSParams",
    "LabelAlphabet",
    "LabeledExample",
    "Model",
    "Plan",
    "PolicyConfig",
    "RunTrace",
    "RuntimeModel",
    "ScenarioConfig",
    "SchemaError",
    "StructuralError",
    "Yard",
    "apply_operator",
    "balance_and_split",
    "build_initial_plan",
    "check_structure",
    "default_yard",
    "estimate_expected_runtime",
    "evaluate",
    "extract_features",
    "generate_instance",
    "graph_conv_forward",
    "hopcroft_karp_match",
    "initial_matching",
    "is_feasible",
    "label_run",
    "ls_run",
    "make_batches",
    "network_forward",
    "plan_cost",
    "plan_to_graph",
    "policy_run",
    "score_curve",
    "simulate_runtime",
    "train",
    "unify_nodes",
    "validate_plan",
    "__version__",
]
