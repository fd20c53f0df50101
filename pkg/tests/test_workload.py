"""Demand model tests: distribution shape, own-key exclusion, replay tails."""

import numpy as np
import pytest

from kadsim.errors import ConfigError
from kadsim.workload import (
    draw_keyspace,
    make_hotspot,
    make_rounds,
    make_uniform,
    with_replay_tail,
)


def test_uniform_two_targets_half_half():
    demand = make_uniform([5, 9])
    sched = make_rounds(demand, own_keys=[1, 2], count=40_000, rng=0)
    frac5 = sched.keys.count(5) / len(sched)
    assert frac5 == pytest.approx(0.5, abs=0.02)


def test_uniform_rejects_empty_targets():
    with pytest.raises(ConfigError):
        make_uniform([])


def test_hotspot_set_sizes_and_split():
    targets = list(range(100))
    demand = make_hotspot(targets, hot_fraction=0.2, hot_mass=0.8, seed=3)
    assert len(demand.hot_set) == 20
    assert len(demand.cold_set) == 80
    assert set(demand.hot_set) | set(demand.cold_set) == set(targets)
    assert not set(demand.hot_set) & set(demand.cold_set)


def test_hotspot_hit_rate_within_one_percent():
    targets = list(range(500))
    demand = make_hotspot(targets, seed=7)
    hot = set(demand.hot_set)
    sched = make_rounds(demand, own_keys=list(range(1000, 1064)), count=1_000_000, rng=11)
    rate = sum(k in hot for k in sched.keys) / len(sched)
    assert rate == pytest.approx(0.8, abs=0.01)


def test_hotspot_degenerate_sizes_error():
    with pytest.raises(ConfigError):
        make_hotspot(list(range(100)), hot_fraction=0.001)  # |H| = 0
    with pytest.raises(ConfigError):
        make_hotspot(list(range(3)), hot_fraction=0.9)  # |H| = |targets|
    with pytest.raises(ConfigError):
        make_hotspot(list(range(10)), hot_mass=1.0)
    with pytest.raises(ConfigError):
        make_hotspot(list(range(10)), hot_fraction=0.0)


def test_near_uniform_boundary_hotspot():
    # |H| = |targets| - 1 with half the mass: every key keeps positive mass
    targets = list(range(10))
    demand = make_hotspot(targets, hot_fraction=0.9, hot_mass=0.5, seed=0)
    assert len(demand.hot_set) == 9
    sched = make_rounds(demand, own_keys=[99], count=50_000, rng=1)
    counts = {t: sched.keys.count(t) for t in targets}
    assert all(c > 0 for c in counts.values())


def test_sources_uniform_and_own_key_never_drawn():
    ids = [3, 8, 12, 200]
    demand = make_uniform(ids)
    sched = make_rounds(demand, own_keys=ids, count=80_000, rng=5)
    counts = np.bincount(sched.sources, minlength=4)
    assert counts.min() > 0.22 * len(sched)
    for s, k in sched:
        assert k != ids[s]


def test_hotspot_excludes_own_key_even_when_hot():
    ids = [0, 1, 2, 3, 4]
    demand = make_hotspot(ids, hot_fraction=0.4, hot_mass=0.9, seed=2)
    sched = make_rounds(demand, own_keys=ids, count=30_000, rng=9)
    assert all(k != ids[s] for s, k in sched)


def test_single_node_no_valid_target_errors():
    demand = make_uniform([7])
    with pytest.raises(ConfigError):
        make_rounds(demand, own_keys=[7], count=10, rng=0)


def test_schedule_deterministic_per_seed():
    demand = make_hotspot(list(range(64)), seed=4)
    a = make_rounds(demand, own_keys=list(range(64)), count=5000, rng=21)
    b = make_rounds(demand, own_keys=list(range(64)), count=5000, rng=21)
    c = make_rounds(demand, own_keys=list(range(64)), count=5000, rng=22)
    assert a.sources == b.sources and a.keys == b.keys
    assert a.keys != c.keys


def test_replay_tail_clones_head():
    demand = make_uniform(list(range(32)))
    sched = make_rounds(demand, own_keys=list(range(100, 132)), count=1000, rng=3)
    replayed = with_replay_tail(sched, 200)
    assert len(replayed) == 1000
    assert replayed.sources[-200:] == sched.sources[:200]
    assert replayed.keys[-200:] == sched.keys[:200]
    assert replayed.sources[:800] == sched.sources[:800]
    with pytest.raises(ConfigError):
        with_replay_tail(sched, 600)


def test_keyspace_distinct_in_range():
    keys = draw_keyspace(512, 16, rng=8)
    assert len(keys) == 512 == len(set(keys))
    assert all(0 <= k < (1 << 16) for k in keys)
    assert draw_keyspace(512, 16, rng=8) == keys
    full = draw_keyspace(16, 4, rng=0)
    assert sorted(full) == list(range(16))
    with pytest.raises(ConfigError):
        draw_keyspace(17, 4, rng=0)
