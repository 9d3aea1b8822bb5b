"""Early-termination policy for local-search runs and its runtime model.

During a run every accepted plan ``G_i`` with ``i <= K`` is scored with
``phi(G_i)``, the classifier's probability that the run is heading for a
feasible plan. At the decision point the aggregated score is compared with
``alpha_if``; at or below it the run is abandoned as infeasible.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .gnn import Metrics, Model
from .graph import plan_to_graph
from .search import LSParams, RunTrace, ls_run
from .yard import Instance, Plan

AGGREGATORS = ("mean_over_0_to_K", "per_iteration", "moving_average")
Scorer = Callable[[Plan], float]


@dataclass(frozen=True)
class PolicyConfig:
    """Threshold policy settings.

    ``aggregator`` selects how scores are combined:

    ``mean_over_0_to_K``
        decide once, at ``i = K``, on the mean of ``phi_0 .. phi_K``;
    ``per_iteration``
        decide at every ``i <= K`` on the running mean of ``phi_0 .. phi_i``;
    ``moving_average``
        decide once, at ``i = K``, on the mean of the last ``window`` scores.
    """

    K: int = 200
    alpha_if: float = 0.5
    aggregator: str = "mean_over_0_to_K"
    window: int = 10
    lookahead: int = 150

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError("K must be at least 1")
        if not 0 < self.alpha_if < 1:
            raise ConfigurationError("alpha_if must lie in (0, 1)")
        if self.aggregator not in AGGREGATORS:
            raise ConfigurationError(f"unknown aggregator {self.aggregator!r}; expected one of {AGGREGATORS}")
        if self.window < 1:
            raise ConfigurationError("window must be at least 1")

    def decision(self, i: int, scores: Sequence[float]) -> float | None:
        """Aggregated score if ``i`` is a decision point, else None."""
        if i > self.K:
            return None
        if self.aggregator == "per_iteration":
            return float(np.mean(scores))
        if i != self.K:
            return None
        if self.aggregator == "moving_average":
            return float(np.mean(scores[-self.window:]))
        return float(np.mean(scores))


def model_scorer(model: Model) -> Scorer:
    """``phi``: class-1 probability of the model on the plan's activity graph."""
    return lambda plan: float(model.score_graphs([plan_to_graph(plan)])[0])


@dataclass
class PolicyResult:
    verdict: str
    iterations: int
    n_proposals: int
    wall_time: float
    scores: list[float]
    decision_score: float | None
    trace: RunTrace = field(repr=False)

    @property
    def predicted_feasible(self) -> bool:
        return self.verdict == "feasible"


def policy_run(
    instance: Instance,
    model: Model | Scorer,
    ls_params: LSParams,
    policy: PolicyConfig,
    initial: Plan | None = None,
) -> PolicyResult:
    """Local search under the threshold policy.

    ``model`` is a trained :class:`Model` or any callable mapping a plan to
    a score in [0, 1]. Verdicts are ``feasible`` (a zero-cost plan was
    found, whatever the scores), ``infeasible_predicted`` (halted by the
    policy) and ``infeasible_budget`` (the search ran out of budget).
    Scoring does not touch the search's random stream, so a policy that
    never halts reproduces the plain run exactly.
    """
    from .initial import build_initial_plan

    scorer = model_scorer(model) if isinstance(model, Model) else model
    if initial is None:
        initial = build_initial_plan(instance)
    scores: list[float] = []
    state = {"halted": False, "decision": None}

    def observer(i: int, plan: Plan, cost: float) -> bool:
        if i > policy.K:
            return False
        scores.append(scorer(plan))
        if cost == 0:
            return False
        g = policy.decision(i, scores)
        if g is not None and g <= policy.alpha_if:
            state["halted"], state["decision"] = True, g
            return True
        if g is not None:
            state["decision"] = g
        return False

    t0 = time.perf_counter()
    trace = ls_run(instance, initial, ls_params, observer)
    wall = time.perf_counter() - t0
    if trace.feasible:
        verdict = "feasible"
    elif state["halted"]:
        verdict = "infeasible_predicted"
    else:
        verdict = "infeasible_budget"
    return PolicyResult(verdict, trace.n_iterations, trace.n_proposals, wall, scores, state["decision"], trace)


def score_curve(model: Model | Scorer, trace: RunTrace, smoothing_window: int = 10) -> list[float]:
    """Trailing moving average of ``phi`` over the plans of ``trace``."""
    if smoothing_window < 1:
        raise ConfigurationError("smoothing_window must be at least 1")
    if isinstance(model, Model):
        raw = model.score_graphs([plan_to_graph(p) for p in trace.plans]).tolist()
    else:
        raw = [float(model(p)) for p in trace.plans]
    return moving_average(raw, smoothing_window)


def moving_average(values: Sequence[float], window: int) -> list[float]:
    csum = np.concatenate([[0.0], np.cumsum(values, dtype=float)])
    out = []
    for i in range(len(values)):
        lo = max(0, i + 1 - window)
        out.append(float((csum[i + 1] - csum[lo]) / (i + 1 - lo)))
    return out


# --------------------------------------------------------------------------
# runtime model

@dataclass(frozen=True)
class RuntimeModel:
    """Priors, mean run times and classifier rates of the runtime chain.

    Times may be in any unit (seconds, proposals) as long as they agree.
    """

    prior_feasible: float = 0.28
    t_feasible: float = 157.0
    t_infeasible: float = 300.0
    t_decision: float = 80.0
    tpr: float = 1.0
    tnr: float = 1.0

    def __post_init__(self):
        for name in ("prior_feasible", "tpr", "tnr"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        for name in ("t_feasible", "t_infeasible", "t_decision"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")

    @property
    def fnr(self) -> float:
        return 1.0 - self.tpr

    @property
    def fpr(self) -> float:
        return 1.0 - self.tnr

    @classmethod
    def from_counts(cls, tn: int, fp: int, fn: int, tp: int, **kw) -> RuntimeModel:
        """Rates from confusion counts (rows: true class)."""
        m = Metrics(tn, fp, fn, tp)
        return cls(tpr=m.tpr, tnr=m.tnr, **kw)


@dataclass(frozen=True)
class RuntimeEstimate:
    t_without: float
    t_with: float

    @property
    def reduction_fraction(self) -> float:
        return 1.0 - self.t_with / self.t_without if self.t_without else 0.0

    def to_dict(self) -> dict:
        return {"t_without": self.t_without, "t_with": self.t_with, "reduction_fraction": self.reduction_fraction}


def estimate_expected_runtime(rm: RuntimeModel, policy: PolicyConfig | None = None) -> RuntimeEstimate:
    """Expected time per instance with and without the policy.

    Each attempt draws the true class from the prior. A feasible attempt is
    either completed (``t_feasible``) or wrongly halted at ``t_decision``,
    after which the instance is attempted again. An infeasible attempt is
    halted at ``t_decision`` or runs its full ``t_infeasible``. Solving the
    chain gives

        E = [p TPR t_f + p FNR t_d + (1 - p)(TNR t_d + FPR t_i)] / (1 - p FNR).

    ``policy=None`` means the policy is disabled and nothing is ever halted.
    """
    p = rm.prior_feasible
    t_without = p * rm.t_feasible + (1 - p) * rm.t_infeasible
    if policy is None:
        return RuntimeEstimate(t_without, t_without)
    retry = p * rm.fnr
    if retry >= 1:
        raise ConfigurationError("every attempt is retried; the expected runtime diverges")
    num = p * rm.tpr * rm.t_feasible + p * rm.fnr * rm.t_decision \
        + (1 - p) * (rm.tnr * rm.t_decision + rm.fpr * rm.t_infeasible)
    return RuntimeEstimate(t_without, num / (1 - retry))


def simulate_runtime(rm: RuntimeModel, n_samples: int = 1_000_000, seed: int = 0, max_rounds: int = 10_000) -> float:
    """Monte-Carlo mean of the same chain, one sample per instance."""
    if rm.prior_feasible * rm.fnr >= 1:
        raise ConfigurationError("every attempt is retried; the expected runtime diverges")
    rng = np.random.default_rng(seed)
    total = np.zeros(n_samples)
    active = np.arange(n_samples)
    for _ in range(max_rounds):
        if not active.size:
            break
        m = active.size
        feasible = rng.random(m) < rm.prior_feasible
        correct = rng.random(m) < np.where(feasible, rm.tpr, rm.tnr)
        halted = np.where(feasible, ~correct, correct)
        total[active] += np.where(halted, rm.t_decision, np.where(feasible, rm.t_feasible, rm.t_infeasible))
        active = active[feasible & halted]
    return float(total.mean())


def empirical_runtime_model(
    plain: Sequence[RunTrace], halted_at: Sequence[int | None], metrics: Metrics | None = None,
) -> RuntimeModel:
    """Runtime model measured in proposals from plain runs.

    ``halted_at[j]`` is the proposal count at which the policy would stop
    run ``j`` (None when it would not). ``t_decision`` is the mean over the
    infeasible runs of that stopping point, or of their full length when
    the policy never reaches a decision on them.
    """
    feas = [t for t in plain if t.feasible]
    infeas = [(t, h) for t, h in zip(plain, halted_at) if not t.feasible]
    if not plain:
        raise ConfigurationError("no runs to measure")
    mean = lambda xs: float(np.mean(xs)) if len(xs) else 0.0
    # a rate of an absent class is undefined but carries zero prior weight
    kw = {} if metrics is None else {
        "tpr": 1.0 if math.isnan(metrics.tpr) else metrics.tpr,
        "tnr": 1.0 if math.isnan(metrics.tnr) else metrics.tnr,
    }
    return RuntimeModel(
        prior_feasible=len(feas) / len(plain),
        t_feasible=mean([t.n_proposals for t in feas]),
        t_infeasible=mean([t.n_proposals for t, _ in infeas]),
        t_decision=mean([t.n_proposals if h is None else h for t, h in infeas]),
        **kw,
    )


def decision_proposal(trace: RunTrace, K: int) -> int | None:
    """Proposal count at which accepted state ``K`` was recorded, if reached."""
    return trace.iterations[K] if K < len(trace.iterations) else None
