import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mobloc.beaconing import (AnnulusConstraint, ObservationLog, StopRecord, TrajectoryConfig,
                              extract_constraints, generate_trajectory, simulate_beaconing,
                              valid_radii)
from mobloc.geometry import Point2D, SensorNode
from mobloc.radio import RadioConfig
from mobloc.scenario import ScenarioConfig, default_setup

RADIO = RadioConfig((15.0, 30.0))


def test_grid_sweep_serpentine():
    stops = generate_trajectory(TrajectoryConfig("grid_sweep", 50.0), (100.0, 100.0))
    assert [tuple(p) for p in stops] == [
        (0, 0), (50, 0), (100, 0), (100, 50), (50, 50), (0, 50), (0, 100), (50, 100), (100, 100)]


def test_grid_sweep_covers_far_edge():
    stops = generate_trajectory(TrajectoryConfig("grid_sweep", 15.0), (100.0, 100.0))
    xs = sorted({p.x for p in stops})
    assert xs == [0, 15, 30, 45, 60, 75, 90, 100]
    assert len(stops) == 64


def test_explicit_and_random():
    assert generate_trajectory(TrajectoryConfig("explicit", explicit_points=((10, 10),)),
                               (100, 100)) == [Point2D(10, 10)]
    cfg = TrajectoryConfig("random_waypoint", 5.0, waypoints=6)
    a = generate_trajectory(cfg, (100, 100), seed=4)
    assert a == generate_trajectory(cfg, (100, 100), seed=4)
    assert a != generate_trajectory(cfg, (100, 100), seed=5)
    assert all(0 <= p.x <= 100 and 0 <= p.y <= 100 for p in a)
    gaps = [p.dist(q) for p, q in zip(a, a[1:])]
    assert max(gaps) <= 5.0 + 1e-9


def test_explicit_requires_points():
    with pytest.raises(ValueError):
        TrajectoryConfig("explicit")


def _scenario_with_node(x, y):
    return ScenarioConfig(nodes=(SensorNode(0, Point2D(x, y)),), radio=RADIO)


@pytest.mark.parametrize("dist, heard", [(20, {1}), (10, {0, 1}), (40, set())])
def test_beaconing_ideal(dist, heard):
    sc = _scenario_with_node(50 + dist, 50)
    logs = simulate_beaconing(sc, [Point2D(50, 50)])
    assert set(logs[0].stops[0].heard) == heard


def _log(heard_sets):
    return ObservationLog(0, [StopRecord(i, Point2D(i, 0), frozenset(h)) for i, h in enumerate(heard_sets)])


def test_extract_examples():
    (c,) = extract_constraints(_log([{1}]), RADIO)
    assert (c.lower, c.upper) == (15.0, 30.0)
    (c,) = extract_constraints(_log([{0, 1}]), RADIO)
    assert (c.lower, c.upper) == (0.0, 15.0)
    (c,) = extract_constraints(_log([{0}]), RADIO)
    assert (c.lower, c.upper) == (0.0, 15.0)
    assert extract_constraints(_log([set()]), RADIO) == []


def test_lower_only_switch():
    radio = replace(RADIO, lower_only=True)
    (c,) = extract_constraints(_log([set()]), radio)
    assert (c.lower, c.upper) == (30.0, None)


@pytest.mark.parametrize("levels", [(15.0, 30.0), (10.0, 20.0, 35.0), (5.0, 9.0, 12.0, 40.0)])
def test_every_hearing_pattern_gives_nonempty_annulus(levels):
    # exhaustive over all subsets of levels
    m = len(levels)
    for bits in itertools.product([False, True], repeat=m):
        heard = {j for j in range(m) if bits[j]}
        lower, upper = valid_radii(heard, levels)
        if heard:
            assert lower < upper
            assert upper == levels[min(heard)]
        else:
            assert upper is None


def test_annulus_rejects_empty():
    with pytest.raises(ValueError):
        AnnulusConstraint(Point2D(0, 0), 15.0, 15.0)
    with pytest.raises(ValueError):
        AnnulusConstraint(Point2D(0, 0), -1.0, 15.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_truth_is_feasible_under_ideal_radio(seed):
    sc = default_setup(seed=seed)
    sc = replace(sc, random_nodes=30)
    stops = generate_trajectory(sc.trajectory, (100, 100))
    nodes = sc.deployed_nodes()
    logs = simulate_beaconing(sc, stops)
    for n in nodes:
        cons = extract_constraints(logs[n.id], sc.radio)
        assert len(cons) <= len(stops)
        assert all(c.satisfied_by(n.position) for c in cons)


@given(st.lists(st.sets(st.integers(0, 2)), min_size=1, max_size=8), st.randoms())
def test_extraction_commutes_with_stop_permutation(heard_sets, rnd):
    radio = RadioConfig((10.0, 20.0, 30.0))
    log = _log(heard_sets)
    perm = list(range(len(heard_sets)))
    rnd.shuffle(perm)
    shuffled = ObservationLog(0, [log.stops[i] for i in perm])
    direct = {c.center: c for c in extract_constraints(log, radio)}
    permuted = extract_constraints(shuffled, radio)
    assert [c.center for c in permuted] == [log.stops[i].position for i in perm
                                            if log.stops[i].heard]
    assert all(direct[c.center] == c for c in permuted)


def test_dump_format():
    log = _log([{0, 1}, set()])
    text = log.dump()
    assert "stop=0" in text and "heard=1,2" in text and "heard=-" in text


def test_one_fading_draw_per_stop():
    # a faded stop drops every level at once
    sc = replace(default_setup(seed=1, fading_f=0.5), random_nodes=50)
    stops = generate_trajectory(sc.trajectory, (100, 100))
    logs = simulate_beaconing(sc, stops)
    from mobloc.beaconing import fading_draws
    draws = fading_draws(sc.seed, len(stops), 50)
    for k, n in enumerate(sc.deployed_nodes()):
        for i, rec in enumerate(logs[n.id].stops):
            if draws[i, k] < 0.5:
                assert rec.heard == frozenset()
