import numpy as np
import pytest

from streetrow.netmodel import load_network
from streetrow.scenario import (
    PED_BOOST_RANGE, ScenarioError, ScenarioSpec, build_scenario, load_scenario,
    mean_trip_duration, sample_day, sample_slot_demand, save_scenario, slot_boosts,
)
from streetrow.sim import PEDESTRIAN, VEHICLE

from conftest import two_way


def test_reported_targets(grid4):
    s1, s2, s3 = (build_scenario(i, grid4) for i in (1, 2, 3))
    assert (s1.veh_peak_target, s1.ped_peak_target) == (63, 53)
    assert (s2.veh_peak_target, s2.ped_peak_target) == (118, 102)
    assert (s3.veh_peak_target, s3.ped_peak_target) == (121, 169)
    assert s3.ped_boost_range == (1.5, 2.5) and s1.ped_boost_range is None


def test_shape_and_window(grid4):
    spec = build_scenario(1, grid4)
    w = np.array(spec.diurnal_shape)
    assert len(w) == 48 and w.min() >= 0 and w.max() == 1.0
    assert spec.peak_slot_window == (36, 37)
    assert all(w[s] == 1.0 for s in spec.peak_slot_window)


def test_errors():
    with pytest.raises(ScenarioError):
        build_scenario(4, load_network("grid4"))
    plain = two_way([(1, 2), (2, 3)])
    with pytest.raises(ScenarioError):
        build_scenario(3, plain)
    spec = build_scenario(1, plain)
    with pytest.raises(ScenarioError):
        sample_slot_demand(spec, 48, plain, 0)
    with pytest.raises(ScenarioError):
        ScenarioSpec.from_dict({**spec.to_dict(), "ped_boost_range": [1.5, 2.5]})


def test_little_law_calibration(k12):
    spec = build_scenario(1, k12)
    concurrency = spec.veh_peak_rate * mean_trip_duration(k12, VEHICLE)
    assert concurrency == pytest.approx(63 * 12 / 58)


def test_zero_weight_slot_is_empty(grid4):
    spec = build_scenario(1, grid4)
    flat = ScenarioSpec.from_dict({**spec.to_dict(), "diurnal_shape": [0.0] * 47 + [1.0]})
    assert sample_slot_demand(flat, 3, grid4, 1) == []


def test_deterministic_and_sorted(k12):
    spec = build_scenario(3, k12)
    a = sample_slot_demand(spec, 36, k12, 5)
    b = sample_slot_demand(spec, 36, k12, 5)
    assert a == b
    assert [r.depart_s for r in a] == sorted(r.depart_s for r in a)
    assert len({r.id for r in a}) == len(a)
    for r in a:
        assert 36 * 1800 <= r.depart_s < 37 * 1800
        assert r.route[0] == r.origin_edge and r.route[-1] == r.dest_edge


def test_ids_unique_over_a_day(grid4):
    day = sample_day(build_scenario(2, grid4), grid4, 3)
    ids = [r.id for slot in day for r in slot]
    assert len(ids) == len(set(ids))


def test_peak_count_matches_rate(grid4):
    spec = build_scenario(1, grid4)
    expected = spec.veh_peak_rate * spec.slot_length_s
    counts = np.array([
        sum(r.mode == VEHICLE for r in sample_slot_demand(spec, 36, grid4, seed))
        for seed in range(1000)
    ])
    se = counts.std(ddof=1) / np.sqrt(len(counts))
    assert abs(counts.mean() - expected) <= 3 * se


def test_scenario_two_and_three_share_vehicle_demand(k12):
    s2, s3 = build_scenario(2, k12), build_scenario(3, k12)
    for seed in range(3):
        v2 = [r for r in sample_slot_demand(s2, 30, k12, seed) if r.mode == VEHICLE]
        v3 = [r for r in sample_slot_demand(s3, 30, k12, seed) if r.mode == VEHICLE]
        assert v2 == v3


def test_boost_draws_in_range(k12):
    spec = build_scenario(3, k12)
    tagged = set(k12.tagged("exhibition"))
    draws = [slot_boosts(spec, s, k12, 4) for s in range(48)]
    assert all(set(d) == tagged for d in draws)
    vals = [v for d in draws for v in d.values()]
    assert all(PED_BOOST_RANGE[0] <= v <= PED_BOOST_RANGE[1] for v in vals)
    assert len(set(vals)) == len(vals)  # fresh per slot


def _ped_counts(spec, net, slot, seeds):
    tagged = set(net.tagged("exhibition"))
    to_tag = np.zeros(len(seeds))
    other = []
    for i, seed in enumerate(seeds):
        peds = [r for r in sample_slot_demand(spec, slot, net, seed) if r.mode == PEDESTRIAN]
        to_tag[i] = sum(r.dest_edge in tagged for r in peds)
        other.append([r for r in peds if r.dest_edge not in tagged])
    return to_tag, other


def test_exhibition_boost_paired_seeds(k12):
    s2, s3 = build_scenario(2, k12), build_scenario(3, k12)
    seeds = range(300)
    c2, other2 = _ped_counts(s2, k12, 36, seeds)
    c3, other3 = _ped_counts(s3, k12, 36, seeds)
    ratio = c3.mean() / c2.mean()
    assert 1.5 <= ratio <= 2.5
    # demand toward untagged edges is identical draw for draw
    for a, b in zip(other2, other3):
        assert [(r.origin_edge, r.dest_edge, r.depart_s) for r in a] == \
               [(r.origin_edge, r.dest_edge, r.depart_s) for r in b]


def test_parking_propensity(grid4):
    spec = build_scenario(2, grid4, parking_propensity=0.4)
    veh = [r for s in sample_day(spec, grid4, 8) for r in s if r.mode == VEHICLE]
    share = np.mean([r.wants_parking for r in veh])
    assert abs(share - 0.4) < 4 * np.sqrt(0.24 / len(veh))
    assert not any(r.wants_parking for s in sample_day(spec, grid4, 8) for r in s if r.mode == PEDESTRIAN)


def test_file_round_trip(tmp_path, grid4):
    spec = build_scenario(3, grid4)
    day = sample_day(spec, grid4, 2)
    path = tmp_path / "s.json"
    save_scenario(path, spec, day, network="grid4", seed=2)
    spec2, day2 = load_scenario(path)
    assert spec2 == spec and day2 == day
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    with pytest.raises(ScenarioError):
        load_scenario(bad)
