import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streetrow.netmodel import NetworkError, project_action, quantize_layout, load_network
from streetrow.scenario import build_scenario, sample_slot_demand
from streetrow.sim import (
    DRIVING, PARKED, PEDESTRIAN, SEEKING, VEHICLE, ActiveTrip, CurbState, SimParams,
    SlotObservation, TripBuffer, TripRequest, World, decide_park, handle_parking_request,
    park_probability, ped_edge_speed, plan_motion, run_slot, veh_edge_speed,
)

P = SimParams()


def layouts_for(net, raw=(0.0, 0.0, 0.0)):
    return {e.id: quantize_layout(project_action(raw, e.beta_faci), e) for e in net.edges}


def trip(tid, net, origin, dest, depart, mode=VEHICLE, park=False):
    from streetrow.netmodel import shortest_route
    return TripRequest(tid, mode, origin, dest, depart, tuple(shortest_route(net, origin, dest)), park)


# -- speed relations ------------------------------------------------------------

def test_free_flow_vehicle_speed():
    assert veh_edge_speed(0.0, P) == 13.0


def test_jam_and_midpoint():
    k = P.veh_jam_density
    assert veh_edge_speed(k, P) == 0.0
    assert veh_edge_speed(k / 2, P) == pytest.approx(6.5)
    assert k == pytest.approx(1 / (4.0 + 0.6 * 13.0))


def test_pedestrian_speeds():
    assert ped_edge_speed(0.0, 3.0, P) == pytest.approx(1.2)
    assert ped_edge_speed(P.ped_jam_density, 3.0, P) == 0.0
    assert P.ped_jam_density == pytest.approx(0.4)
    for density in (0.0, 0.1, 0.39):
        assert ped_edge_speed(density, 0.5, P) == pytest.approx(0.48)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1.0), st.floats(0, 1.0))
def test_vehicle_speed_monotone_and_bounded(k1, k2):
    lo, hi = sorted((k1, k2))
    assert 0 <= veh_edge_speed(hi, P) <= veh_edge_speed(lo, P) <= 13.0 * 1.05


def test_bad_params_rejected():
    with pytest.raises(ValueError):
        SimParams(obs_interval_s=35.0)
    with pytest.raises(ValueError):
        SimParams(veh_max_speed_mps=0.0)
    with pytest.raises(ValueError):
        veh_edge_speed(-1.0, P)


# -- parking --------------------------------------------------------------------

def _seeker():
    req = TripRequest("t", VEHICLE, "a", "a", 0.0, ("a",), True)
    return ActiveTrip(req, req.route, state=SEEKING)


def test_logistic_value():
    p = SimParams(park_sigmoid_bias=1.0, park_sigmoid_gain=2.0)
    # 1 / (1 + e^-2.5) with e^-2.5 = 0.0820849986...
    assert park_probability(0.25, p) == pytest.approx(1 / (1 + 0.0820849986238988), abs=1e-12)
    assert park_probability(0.25, p) == pytest.approx(0.9241, abs=1e-4)


def test_coin_flip_frequency():
    p = SimParams(park_sigmoid_bias=0.0, park_sigmoid_gain=0.0)
    rng = np.random.default_rng(11)
    hits = sum(decide_park(_seeker(), 0.3, p, rng) for _ in range(10_000))
    assert abs(hits / 10_000 - 0.5) <= 0.02


def test_strong_negative_bias_never_parks():
    p = SimParams(park_sigmoid_bias=-50.0)
    assert park_probability(0.0, p) < 1e-6
    rng = np.random.default_rng(12)
    assert not any(decide_park(_seeker(), 0.0, p, rng) for _ in range(10_000))


def test_decide_park_draws_once():
    a, b = np.random.default_rng(5), np.random.default_rng(5)
    decide_park(_seeker(), 0.5, P, a)
    b.random()
    assert a.random() == b.random()


def test_request_without_capacity_expires():
    curb = CurbState(capacity=0)
    assert handle_parking_request(_seeker(), curb, 10.0, P, np.random.default_rng(0)) == "expired"
    assert (curb.demand, curb.expired) == (1, 1)


def test_request_with_free_bay_parks():
    curb = CurbState(capacity=5, occupied=4)
    t = _seeker()
    assert handle_parking_request(t, curb, 10.0, P, np.random.default_rng(0)) == "parked"
    assert curb.occupied == 5 and curb.demand == 1
    assert t.state == PARKED and t.parked_until_s > 10.0


def test_request_on_full_curb_expires():
    curb = CurbState(capacity=5, occupied=5)
    t = _seeker()
    assert handle_parking_request(t, curb, 10.0, P, np.random.default_rng(0)) == "expired"
    assert curb.occupied == 5 and curb.demand == 1 and t.state == DRIVING


# -- kinematics -----------------------------------------------------------------

def test_accelerate_then_cruise_by_hand():
    # 0 -> 13 m/s at 2.6 m/s^2: 5 s and 32.5 m, then 97.5 m at 13 m/s = 7.5 s
    m = plan_motion(0.0, 0.0, 130.0, 0.0, 13.0, 2.6, 4.5)
    assert m.duration == pytest.approx(12.5)
    assert m.position(5.0) == pytest.approx(32.5)
    assert m.position(12.5) == pytest.approx(130.0)
    assert m.speed(2.0) == pytest.approx(5.2)
    assert 130.0 / m.duration / 13.0 == pytest.approx(0.8)


def test_short_edge_never_reaches_target():
    # v^2 = 2 a d -> v = sqrt(2 * 2.6 * 10)
    m = plan_motion(0.0, 0.0, 10.0, 0.0, 13.0, 2.6, 4.5)
    assert m.speed(m.duration) == pytest.approx(math.sqrt(52.0))
    assert m.position(m.duration) == pytest.approx(10.0)


def test_braking_profile():
    m = plan_motion(0.0, 0.0, 100.0, 13.0, 4.0, 2.6, 4.5)
    assert m.speed(m.duration) == pytest.approx(4.0)
    assert m.position(m.duration) == pytest.approx(100.0)


# -- run_slot -------------------------------------------------------------------

def test_empty_slot(grid4):
    res = run_slot(grid4, layouts_for(grid4), [], TripBuffer(), P, seed=1)
    assert all(o == SlotObservation(k_park=o.k_park) for o in res.obs.values())
    assert len(res.buffer_out) == 0 and res.completed == []


def test_single_vehicle_on_130m_edge(grid4):
    assert grid4.edge_by_id["e2_3"].length_m == 130.0
    due = [trip("v", grid4, "e2_3", "e2_3", 10.0)]
    res = run_slot(grid4, layouts_for(grid4), due, TripBuffer(), P, seed=3)
    assert res.completed == ["v"]
    obs = res.obs["e2_3"]
    assert obs.nv_e == 1
    assert 0.9 <= obs.mean_rel_veh_speed <= 1.0 + P.veh_speed_factor


def test_late_vehicle_is_buffered_and_restored(grid4):
    due = [trip("late", grid4, "e1_2", "e2_3", 1800.0 - 5.0)]
    first = run_slot(grid4, layouts_for(grid4), due, TripBuffer(), P, seed=4, slot_index=0)
    assert "late" not in first.completed
    assert [t.request.id for t in first.buffer_out.carried] == ["late"]
    assert first.buffer_out.restoration_count == 0
    second = run_slot(grid4, layouts_for(grid4), [], first.buffer_out, P, seed=5, slot_index=1)
    assert second.buffer_out.restoration_count == 1
    assert second.completed == ["late"]


def test_buffer_round_trip(grid4):
    due = [trip(f"t{i}", grid4, "e1_2", "e2_3", 1790.0 + i, mode=VEHICLE if i else PEDESTRIAN)
           for i in range(3)]
    w = World(grid4, layouts_for(grid4), P, seed=6)
    w.schedule(due)
    w.run()
    buf = w.buffer_unfinished()
    assert len(buf) == 3
    again = TripBuffer.from_dict(buf.to_dict())
    w2 = World(grid4, layouts_for(grid4), P, seed=7, slot_index=1)
    w2.restore_trips(again)
    snap = w2.buffer_unfinished()  # nothing has moved yet
    for a, b in zip(buf.carried, snap.carried):
        assert (a.request.id, a.route_index, a.position_m, a.state) == (b.request.id, b.route_index, b.position_m, b.state)
    assert snap.restoration_count == 3


def test_empty_buffer_identity(grid4):
    w = World(grid4, layouts_for(grid4), P, seed=0)
    w.restore_trips(TripBuffer())
    assert len(w.buffer_unfinished()) == 0


def test_restore_on_wrong_network_raises(grid4):
    due = [trip("x", grid4, "e1_2", "e2_3", 1795.0)]
    buf = run_slot(grid4, layouts_for(grid4), due, TripBuffer(), P, seed=1).buffer_out
    other = load_network("kensington12")
    with pytest.raises(NetworkError):
        run_slot(other, layouts_for(other), [], buf, P, seed=1, slot_index=1)


def test_malformed_due_rejected(grid4):
    a = trip("a", grid4, "e1_2", "e2_3", 20.0)
    b = trip("b", grid4, "e1_2", "e2_3", 10.0)
    with pytest.raises(ValueError):
        run_slot(grid4, layouts_for(grid4), [a, b], TripBuffer(), P, seed=1)
    outside = trip("c", grid4, "e1_2", "e2_3", 1900.0)
    with pytest.raises(ValueError):
        run_slot(grid4, layouts_for(grid4), [outside], TripBuffer(), P, seed=1)
    with pytest.raises(ValueError):
        run_slot(grid4, {}, [], TripBuffer(), P, seed=1)


def _day(net, scenario_id, raw=(0.0, 0.0, 0.0), seed=21):
    spec = build_scenario(scenario_id, net)
    lay = layouts_for(net, raw)
    buf = TripBuffer()
    injected, completed = 0, 0
    for slot in range(48):
        due = sample_slot_demand(spec, slot, net, seed)
        res = run_slot(net, lay, due, buf, P, seed=seed * 100 + slot, slot_index=slot)
        injected += len(due)
        completed += len(res.completed)
        buf = res.buffer_out
        yield slot, due, res, injected, completed


@pytest.mark.parametrize("scenario_id", [1, 2, 3])
def test_trip_conservation_over_a_day(grid4, scenario_id):
    for _, _, res, injected, completed in _day(grid4, scenario_id):
        # nothing stays active inside the world after the slot closes
        assert injected == completed + len(res.buffer_out)


def test_occupancy_and_speed_bounds(k12):
    for _, _, res, _, _ in _day(k12, 2):
        for o in res.obs.values():
            assert o.k_occupied_max <= o.k_park
            assert 0 <= o.k_occupied_mean <= o.k_park
            assert 0 <= o.mean_rel_veh_speed <= 1.0 + P.veh_speed_factor + 1e-12
            assert 0 <= o.mean_rel_ped_speed <= 1.0 + 1e-12


def test_no_parking_anywhere_still_counts_demand(grid4):
    total_demand = 0
    for _, _, res, _, _ in _day(grid4, 2, raw=(0.0, 0.0, -50.0)):
        assert all(o.k_park == 0 and o.k_occupied_max == 0 for o in res.obs.values())
        assert all(t.state != PARKED for t in res.buffer_out.carried)
        total_demand += sum(o.k_dem for o in res.obs.values())
    assert total_demand > 0


def test_slot_is_deterministic(k12):
    spec = build_scenario(2, k12)
    due = sample_slot_demand(spec, 36, k12, 9)
    a = run_slot(k12, layouts_for(k12), due, TripBuffer(), P, seed=77, slot_index=36)
    b = run_slot(k12, layouts_for(k12), due, TripBuffer(), P, seed=77, slot_index=36)
    assert a.obs == b.obs
    assert a.completed == b.completed
    assert a.buffer_out.to_dict() == b.buffer_out.to_dict()


def test_closed_edge_is_crawled(grid4):
    lay = layouts_for(grid4)
    edge = grid4.edge_by_id["e2_3"]
    closed = {**lay, "e2_3": quantize_layout(project_action([0, -50, 0], edge.beta_faci), edge)}
    assert closed["e2_3"].n_lanes == 0
    # e2_3 is the only way to its own end, so the vehicle crawls through it
    due = [trip("v", grid4, "e1_2", "e2_3", 0.0)]
    open_run = run_slot(grid4, lay, due, TripBuffer(), P, seed=2)
    shut_run = run_slot(grid4, closed, due, TripBuffer(), P, seed=2)
    assert shut_run.completed == ["v"]
    # entry braking lifts the mean a little above the crawl speed itself
    assert shut_run.obs["e2_3"].mean_rel_veh_speed < 0.3
    assert open_run.obs["e2_3"].mean_rel_veh_speed > 0.9


def test_reroute_around_closure():
    from conftest import grid_pairs, two_way
    net = two_way(grid_pairs(2, 2), length=100.0)
    lay = layouts_for(net)
    req = trip("v", net, "e1_2", "e4_3", 0.0)
    blocked = req.route[1]
    edge = net.edge_by_id[blocked]
    lay[blocked] = quantize_layout(project_action([0, -50, 0], edge.beta_faci), edge)
    res = run_slot(net, lay, [req], TripBuffer(), P, seed=3)
    assert res.completed == ["v"]
    assert res.obs[blocked].nv_e == 0
