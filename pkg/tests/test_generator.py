from __future__ import annotations

from collections import Counter
from dataclasses import replace

import pytest
from scipy import stats

from tusp.errors import ConfigurationError
from tusp.generator import ScenarioConfig, config_from_dict, config_to_dict, generate_instance
from tusp.io import dumps
from tusp.yard import instance_to_dict


def test_single_unit_instance():
    cfg = ScenarioConfig(n_units=1, unit_type_mix=(("SLT", 4, 1.0),), tasks_per_unit=(("cleaning", 45, 1.0),))
    inst = generate_instance(cfg)
    assert len(inst.arrivals) == len(inst.departures) == len(inst.tasks) == 1


def test_same_seed_gives_identical_bytes():
    cfg = ScenarioConfig(seed=99)
    assert dumps(instance_to_dict(generate_instance(cfg))) == dumps(instance_to_dict(generate_instance(cfg)))


def test_conservation_and_composition_length():
    for seed in range(50):
        cfg = ScenarioConfig(n_units=12, max_composition_length=3, seed=seed)
        inst = generate_instance(cfg)
        arr = Counter(u.key for a in inst.arrivals for u in a.units)
        dep = Counter(k for d in inst.departures for k in d.required)
        assert arr == dep
        assert all(len(a.units) <= 3 for a in inst.arrivals)
        assert all(len({u.unit_type for u in a.units}) == 1 for a in inst.arrivals)


def test_histograms_follow_configured_probabilities():
    """Pooled unit-key and task-kind counts over 1000 seeds pass a chi-square test."""
    cfg = ScenarioConfig(n_units=21)
    keys, tasks = Counter(), Counter()
    for seed in range(1000):
        inst = generate_instance(replace(cfg, seed=seed))
        assert len(inst.units) == 21
        keys.update(u.key for u in inst.units.values())
        tasks.update(t.task_kind for t in inst.tasks)
        assert Counter(t.unit_id for t in inst.tasks) == Counter({uid: 1 for uid in inst.units})
    total = 21 * 1000
    obs = [keys[(t, s)] for t, s, _ in cfg.unit_type_mix]
    exp = [p * total for _, _, p in cfg.unit_type_mix]
    assert stats.chisquare(obs, exp).pvalue > 0.001
    obs = [tasks[k] for k, _, _ in cfg.tasks_per_unit]
    exp = [p * total for _, _, p in cfg.tasks_per_unit]
    assert stats.chisquare(obs, exp).pvalue > 0.001


@pytest.mark.parametrize("bad", [
    dict(n_units=0),
    dict(unit_type_mix=(("SLT", 4, 0.5),)),
    dict(departure_time_distribution=((0, 100, 1.0),)),
    dict(tasks_per_unit=(("cleaning", 0, 1.0),)),
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigurationError):
        ScenarioConfig(**bad)


def test_config_round_trip():
    cfg = ScenarioConfig(n_units=5, seed=11)
    assert config_from_dict(config_to_dict(cfg)) == cfg
