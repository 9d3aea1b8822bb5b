from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import line_yard, parked_chain, random_plan, small_instance
from oracles import simulate_plan
from tusp.errors import StructuralError
from tusp.io import dumps
from tusp.yard import (
    Activity, Arrival, Departure, Instance, Plan, Track, TrainUnit, Violation, Yard,
    check_structure, instance_from_dict, instance_to_dict, is_feasible, occupancy_intervals,
    plan_cost, plan_from_dict, plan_to_dict, validate_plan,
)


def two_unit_instance(yard, deps=(400, 400), lengths=(6, 6)):
    units = [TrainUnit(0, "A", lengths[0]), TrainUnit(1, "A", lengths[1])]
    return Instance(
        yard,
        (Arrival((units[0],), 100), Arrival((units[1],), 110)),
        (Departure((("A", lengths[0]),), deps[0]), Departure((("A", lengths[1]),), deps[1])),
        (),
    )


def kinds(violations):
    return sorted({v.kind for v in violations})


class TestValidatorExamples:
    def test_empty_instance_and_plan_is_feasible(self):
        yard = line_yard()
        inst = Instance(yard, (), (), ())
        assert validate_plan(inst, Plan({}, {})) == []

    def test_two_six_length_units_overflow_capacity_ten(self):
        inst = two_unit_instance(line_yard(capacity=10))
        plan = Plan(
            {0: (0, 0), 1: (1, 0)},
            {0: parked_chain(100, 120, 300, 400), 1: parked_chain(110, 130, 310, 400)},
        )
        assert kinds(validate_plan(inst, plan)) == ["track_capacity"]

    def test_lifo_blocking_on_dead_end_track(self):
        # unit 0 enters first and must leave first: blocked by unit 1
        inst = two_unit_instance(line_yard(capacity=20, approach="single_end"), lengths=(4, 4))
        plan = Plan(
            {0: (0, 0), 1: (1, 0)},
            {0: parked_chain(100, 120, 300, 400), 1: parked_chain(110, 130, 320, 400)},
        )
        assert kinds(validate_plan(inst, plan)) == ["crossing_order"]
        assert simulate_plan(inst, plan) == {"crossing_order"}

    def test_reverse_exit_order_is_fine_on_dead_end_track(self):
        inst = two_unit_instance(line_yard(capacity=20, approach="single_end"), lengths=(4, 4))
        plan = Plan(
            {0: (0, 0), 1: (1, 0)},
            {0: parked_chain(100, 120, 320, 400), 1: parked_chain(110, 130, 300, 400)},
        )
        assert validate_plan(inst, plan) == []

    def test_same_blocking_order_is_fine_on_through_track(self):
        inst = two_unit_instance(line_yard(capacity=20), lengths=(4, 4))
        plan = Plan(
            {0: (0, 0), 1: (1, 0)},
            {0: parked_chain(100, 120, 300, 400), 1: parked_chain(110, 130, 320, 400)},
        )
        assert validate_plan(inst, plan) == []

    def test_late_departure(self):
        inst = two_unit_instance(line_yard(capacity=20), lengths=(4, 4))
        chain = parked_chain(100, 120, 300, 405)
        plan = Plan({0: (0, 0), 1: (1, 0)}, {0: chain, 1: parked_chain(110, 130, 320, 400)})
        vs = validate_plan(inst, plan)
        assert kinds(vs) == ["departure_late"]
        assert plan_cost(vs) == 5.0

    def test_type_mismatch_and_shared_slot(self):
        inst = two_unit_instance(line_yard(capacity=20), lengths=(4, 6))
        plan = Plan({0: (0, 0), 1: (0, 0)},
                    {0: parked_chain(100, 120, 300, 400), 1: parked_chain(110, 130, 320, 400)})
        vs = validate_plan(inst, plan)
        assert kinds(vs) == ["matching_type_mismatch"]
        assert len(vs) == 2  # unit 1 mismatched, slot 0.0 shared

    def test_movement_between_non_adjacent_tracks(self):
        inst = two_unit_instance(line_yard(capacity=20), lengths=(4, 4))
        bad = list(parked_chain(100, 120, 300, 400, track=2))
        bad[1] = Activity("movement", 118, 120, 2, route=(0, 2))
        bad[3] = Activity("movement", 300, 302, 0, route=(2, 0))
        plan = Plan({0: (0, 0), 1: (1, 0)}, {0: tuple(bad), 1: parked_chain(110, 130, 320, 400)})
        assert kinds(validate_plan(inst, plan)) == ["route_invalid"]

    def test_service_checks(self):
        yard = line_yard(capacity=20)
        u0, u1 = TrainUnit(0, "A", 4), TrainUnit(1, "A", 4)
        from tusp.yard import ServiceTask

        inst = Instance(
            yard, (Arrival((u0,), 100), Arrival((u1,), 100)),
            (Departure((("A", 4),), 400), Departure((("A", 4),), 400)),
            (ServiceTask(0, "cleaning", 45), ServiceTask(1, "cleaning", 45)),
        )

        def chain(s, dur=45):
            return (
                Activity("arrival", 100, 100, 0),
                Activity("movement", 100, 104, 2, route=(0, 1, 2)),
                Activity("service", s, s + dur, 2, "cleaning"),
                Activity("movement", 300, 304, 0, route=(2, 1, 0)),
                Activity("departure", 400, 400, 0),
            )

        ok = Plan({0: (0, 0), 1: (1, 0)}, {0: chain(110), 1: chain(155)})
        assert validate_plan(inst, ok) == []
        overlap = Plan({0: (0, 0), 1: (1, 0)}, {0: chain(110), 1: chain(150)})
        assert kinds(validate_plan(inst, overlap)) == ["facility_overlap"]
        short = Plan({0: (0, 0), 1: (1, 0)}, {0: chain(110), 1: chain(155, dur=30)})
        assert kinds(validate_plan(inst, short)) == ["task_unscheduled"]
        missing = Plan({0: (0, 0), 1: (1, 0)}, {0: chain(110), 1: parked_chain(100, 120, 300, 400)})
        assert kinds(validate_plan(inst, missing)) == ["task_unscheduled"]


class TestPlanCost:
    def test_empty(self):
        assert plan_cost([]) == 0

    def test_single(self):
        assert plan_cost([Violation("time_order", 3.0)]) == 3.0

    def test_mixed(self):
        vs = [Violation("time_order", w) for w in (1, 1, 2, 5)]
        assert plan_cost(vs) == 9


class TestStructure:
    def test_dangling_unit_raises(self):
        inst = two_unit_instance(line_yard())
        plan = Plan({0: (0, 0)}, {0: parked_chain(100, 120, 300, 400)})
        with pytest.raises(StructuralError):
            validate_plan(inst, plan)

    def test_unknown_track_raises(self):
        inst = two_unit_instance(line_yard())
        bad = list(parked_chain(100, 120, 300, 400))
        bad[2] = Activity("parking", 120, 300, 9)
        plan = Plan({0: (0, 0), 1: (1, 0)}, {0: tuple(bad), 1: parked_chain(110, 130, 310, 400)})
        with pytest.raises(StructuralError):
            check_structure(inst, plan)

    def test_yard_needs_one_gateway(self):
        with pytest.raises(StructuralError):
            Yard((Track(0, 10), Track(1, 10)), frozenset({(0, 1)}))

    def test_yard_must_be_connected(self):
        with pytest.raises(StructuralError):
            Yard((Track(0, 10, is_gateway=True), Track(1, 10)), frozenset())

    def test_instance_conservation(self):
        u = TrainUnit(0, "A", 4)
        with pytest.raises(StructuralError):
            Instance(line_yard(), (Arrival((u,), 10),), (Departure((("A", 6),), 100),), ())


def test_zero_length_stays_are_not_occupancy():
    plan = Plan({0: (0, 0)}, {0: parked_chain(100, 120, 120, 400)})
    assert all(enter < leave for _, _, enter, leave in occupancy_intervals(plan))


def test_round_trip_is_bit_exact(rng):
    for _ in range(20):
        inst = small_instance(rng)
        plan = random_plan(inst, rng)
        text = dumps(instance_to_dict(inst))
        assert dumps(instance_to_dict(instance_from_dict(json.loads(text)))) == text
        ptext = dumps(plan_to_dict(plan))
        assert plan_from_dict(json.loads(ptext)) == plan
        assert dumps(plan_to_dict(plan_from_dict(json.loads(ptext)))) == ptext


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_validator_matches_minute_simulation(seed):
    rng = np.random.default_rng(seed)
    inst = small_instance(rng)
    plan = random_plan(inst, rng)
    vs = validate_plan(inst, plan)
    sim = simulate_plan(inst, plan)
    assert (not vs) == (not sim)
    if "time_order" not in sim:
        assert {v.kind for v in vs} == sim


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_validator_is_pure_and_cost_consistent(seed):
    rng = np.random.default_rng(seed)
    inst = small_instance(rng)
    plan = random_plan(inst, rng)
    a, b = validate_plan(inst, plan), validate_plan(inst, plan)
    assert a == b
    assert (plan_cost(a) == 0) == (a == []) == is_feasible(inst, plan)
