from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import single_unit_instance
from tusp.errors import ConfigurationError
from tusp.generator import ScenarioConfig, generate_instance
from tusp.initial import build_initial_plan
from tusp.policy import (
    PolicyConfig, RuntimeModel, decision_proposal, empirical_runtime_model, estimate_expected_runtime,
    moving_average, policy_run, score_curve, simulate_runtime,
)
from tusp.search import LSParams, ls_run

ON = PolicyConfig()
LS = LSParams(max_iterations=400, seed=3, max_runtime_seconds=1e9, restart_patience_iterations=100)


def chain_expectation(rm: RuntimeModel) -> float:
    """Expected accumulated time of the attempt chain via its fundamental matrix.

    Transient states: 0 = new attempt, 1 = feasible attempt, 2 = infeasible
    attempt. Rewards are collected on leaving states 1 and 2.
    """
    p = rm.prior_feasible
    Q = np.zeros((3, 3))
    Q[0, 1], Q[0, 2] = p, 1 - p
    Q[1, 0] = 1 - rm.tpr  # wrongly halted, start over
    r = np.array([
        0.0,
        rm.tpr * rm.t_feasible + (1 - rm.tpr) * rm.t_decision,
        rm.tnr * rm.t_decision + (1 - rm.tnr) * rm.t_infeasible,
    ])
    return float(np.linalg.solve(np.eye(3) - Q, r)[0])


rates = st.floats(0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.99), rates, rates, st.floats(1, 500), st.floats(1, 500), st.floats(0, 500))
def test_closed_form_matches_chain(p, tpr, tnr, tf, ti, td):
    rm = RuntimeModel(p, tf, ti, td, tpr, tnr)
    assert math.isclose(estimate_expected_runtime(rm, ON).t_with, chain_expectation(rm), rel_tol=1e-9)


def test_monte_carlo_agrees_with_closed_form():
    rm = RuntimeModel(0.4, 157, 300, 80, tpr=0.7, tnr=0.6)
    mc = simulate_runtime(rm, 200_000, seed=1)
    assert abs(mc / estimate_expected_runtime(rm, ON).t_with - 1) < 0.01


def test_perfect_classifier():
    rm = RuntimeModel(0.28, 157, 300, 80)
    est = estimate_expected_runtime(rm, ON)
    assert est.t_with == pytest.approx(0.28 * 157 + 0.72 * 80, abs=1e-12)
    assert est.t_without == pytest.approx(0.28 * 157 + 0.72 * 300, abs=1e-12)


def test_disabled_policy_changes_nothing():
    rm = RuntimeModel(0.28, 157, 300, 80, tpr=0.3, tnr=0.4)
    est = estimate_expected_runtime(rm, None)
    assert est.t_with == est.t_without and est.reduction_fraction == 0.0


def test_saving_grows_with_true_negative_rate():
    ts = [estimate_expected_runtime(RuntimeModel(tnr=x, tpr=0.8), ON).t_with for x in np.linspace(0, 1, 11)]
    assert all(b < a for a, b in zip(ts, ts[1:]))


def test_certain_retry_diverges():
    rm = RuntimeModel(prior_feasible=1.0, tpr=0.0)
    with pytest.raises(ConfigurationError):
        estimate_expected_runtime(rm, ON)
    with pytest.raises(ConfigurationError):
        simulate_runtime(rm, 10)


def test_rates_from_counts():
    rm = RuntimeModel.from_counts(543, 250, 284, 523)
    assert rm.tnr == pytest.approx(543 / 793) and rm.tpr == pytest.approx(523 / 807)


def test_config_validation():
    for bad in (dict(K=0), dict(alpha_if=1.0), dict(aggregator="median"), dict(window=0)):
        with pytest.raises(ConfigurationError):
            PolicyConfig(**bad)


def test_aggregators():
    s = [0.2, 0.4, 0.9, 0.1]
    assert PolicyConfig(K=3).decision(2, s[:3]) is None
    assert PolicyConfig(K=3).decision(3, s) == pytest.approx(0.4)
    assert PolicyConfig(K=3, aggregator="per_iteration").decision(1, s[:2]) == pytest.approx(0.3)
    assert PolicyConfig(K=3, aggregator="moving_average", window=2).decision(3, s) == pytest.approx(0.5)
    assert PolicyConfig(K=3, aggregator="per_iteration").decision(4, s) is None


def test_moving_average():
    assert moving_average([1, 1, 1], 10) == [1, 1, 1]
    assert moving_average([0, 2, 4, 6], 2) == [0, 1, 3, 5]


def test_score_curve_of_constant_scorer():
    inst = generate_instance(ScenarioConfig(seed=0))
    trace = ls_run(inst, build_initial_plan(inst), LSParams(max_iterations=50, seed=0, max_runtime_seconds=1e9))
    curve = score_curve(lambda plan: 0.25, trace, 5)
    assert len(curve) == len(trace.plans) and all(c == 0.25 for c in curve)


def _hard_instance():
    for seed in range(50):
        inst = generate_instance(ScenarioConfig(seed=seed))
        plain = ls_run(inst, build_initial_plan(inst), LS)
        if len(plain.costs) > 10 and all(c > 0 for c in plain.costs[:11]):
            return inst, plain
    raise AssertionError("no instance stays infeasible for ten steps")


def test_optimistic_scorer_reproduces_plain_run():
    inst, plain = _hard_instance()
    res = policy_run(inst, lambda plan: 0.9, LS, PolicyConfig(K=10))
    assert res.trace.costs == plain.costs and res.trace.plans == plain.plans
    assert res.verdict in ("feasible", "infeasible_budget")
    assert res.predicted_feasible == plain.feasible


def test_pessimistic_scorer_halts_at_decision_point():
    inst, plain = _hard_instance()
    res = policy_run(inst, lambda plan: 0.3, LS, PolicyConfig(K=10))
    assert res.verdict == "infeasible_predicted"
    assert res.iterations == 10 and len(res.scores) == 11
    assert res.decision_score == pytest.approx(0.3)
    assert res.n_proposals == decision_proposal(plain, 10)


def test_feasible_before_decision_point_is_kept():
    inst = single_unit_instance()
    res = policy_run(inst, lambda plan: 0.0, LS, PolicyConfig(K=10, aggregator="per_iteration"))
    assert res.verdict == "feasible" and res.iterations == 0


def test_empirical_model_from_plain_runs():
    from tusp.search import RunTrace

    def tr(feasible, n):
        return RunTrace([None], [0.0 if feasible else 1.0], feasible, n, 0.0, 0)

    rm = empirical_runtime_model([tr(True, 10), tr(False, 100), tr(False, 50)], [None, 20, None])
    assert rm.prior_feasible == pytest.approx(1 / 3)
    assert (rm.t_feasible, rm.t_infeasible, rm.t_decision) == (10, 75, 35)
