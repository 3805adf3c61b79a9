import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streetrow.netmodel import (
    BUNDLED_NETWORKS, DirectedEdge, NetworkError, Node, RowAllocation, StreetNetwork,
    load_network, network_from_dict, network_to_dict, project_action, quantize_layout,
    routes_from, save_network, shortest_route, validate_network,
)

from conftest import grid_pairs, two_way


# -- validation ---------------------------------------------------------------

def test_minimal_pair_is_valid():
    assert validate_network(two_way([(1, 2)])) == []


def test_missing_node_is_named():
    net = two_way([(1, 2)])
    bad = StreetNetwork(net.nodes, net.edges + (DirectedEdge("e2_99", "n2", "n99", 50, 10),), "x")
    problems = validate_network(bad)
    assert len(problems) == 1 and "n99" in problems[0]


def test_duplicate_edge_id():
    net = two_way([(1, 2)])
    dup = StreetNetwork(net.nodes, net.edges + (net.edges[0],), "x")
    problems = validate_network(dup)
    assert len(problems) == 1 and "duplicate" in problems[0]


@pytest.mark.parametrize("field,value", [("length_m", 0.0), ("width_m", -1.0), ("beta_faci", 0.6)])
def test_field_ranges(field, value):
    net = two_way([(1, 2)])
    e = net.edges[0]
    kw = {**e.__dict__, field: value}
    bad = StreetNetwork(net.nodes, (DirectedEdge(**kw), net.edges[1]), "x")
    assert any(field in p for p in validate_network(bad))


def test_one_way_dead_end_breaks_connectivity():
    net = StreetNetwork(
        (Node("n1"), Node("n2"), Node("n3")),
        (DirectedEdge("a", "n1", "n2", 10, 10), DirectedEdge("b", "n2", "n3", 10, 10)),
        "x",
    )
    assert any("strongly connected" in p for p in validate_network(net))


@pytest.mark.parametrize("name", BUNDLED_NETWORKS)
def test_bundled_networks_valid(name):
    net = load_network(name)
    assert validate_network(net) == []


def test_bundled_sizes():
    assert len(load_network("kensington58").edges) == 58
    assert len(load_network("kensington12").edges) == 12
    assert len(load_network("grid4").edges) == 4
    for name in BUNDLED_NETWORKS:
        assert load_network(name).tagged("exhibition")


def test_json_round_trip(tmp_path, grid4):
    path = tmp_path / "net.json"
    save_network(grid4, path)
    again = load_network(path)
    assert network_to_dict(again) == network_to_dict(grid4)


def test_load_errors(tmp_path):
    with pytest.raises(NetworkError):
        load_network(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(NetworkError):
        load_network(bad)
    with pytest.raises(NetworkError):
        network_from_dict({"nodes": [], "edges": [{"id": "a"}]})


def test_neighbours_share_an_endpoint(grid4):
    assert set(grid4.neighbours("e1_2")) == {"e2_1", "e2_3", "e3_2"}


# -- projection ---------------------------------------------------------------

def test_equal_raw_gives_equal_thirds():
    a = project_action([0, 0, 0], 0.1, (0, 0, 0))
    assert (a.beta_sidewalk, a.beta_veh, a.beta_faci, a.beta_park) == pytest.approx((0.3, 0.3, 0.1, 0.3), abs=1e-12)


def test_saturating_raw():
    a = project_action([50, 0, 0], 0.1, (0.05, 0.05, 0))
    assert a.beta_sidewalk == pytest.approx(0.85, abs=1e-6)
    assert a.beta_veh == pytest.approx(0.05, abs=1e-6)
    assert a.beta_park == pytest.approx(0.0, abs=1e-6)
    assert a.beta_faci == 0.1


def test_hand_softmax():
    # e = 2.718281828..., worked by hand
    e1, e0, em1 = 2.718281828459045, 1.0, 0.36787944117144233
    s = e1 + e0 + em1
    a = project_action([1.0, 0.0, -1.0], 0.1, (0, 0, 0))
    assert a.beta_sidewalk == pytest.approx(0.9 * e1 / s, abs=1e-12)
    assert a.beta_veh == pytest.approx(0.9 * e0 / s, abs=1e-12)
    assert a.beta_park == pytest.approx(0.9 * em1 / s, abs=1e-12)


@pytest.mark.parametrize("raw", [[np.nan, 0, 0], [np.inf, 0, 0], [0, 0]])
def test_projection_rejects_bad_raw(raw):
    with pytest.raises(ValueError):
        project_action(raw, 0.1)


def test_projection_rejects_infeasible_minima():
    with pytest.raises(ValueError):
        project_action([0, 0, 0], 0.5, (0.3, 0.3, 0.0))


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(st.tuples(finite, finite, finite), st.floats(0, 0.5),
       st.tuples(st.floats(0, 0.15), st.floats(0, 0.15), st.floats(0, 0.15)))
def test_projection_on_simplex(raw, faci, minima):
    a = project_action(raw, faci, minima)
    assert abs(a.total() - 1.0) <= 1e-9
    assert a.is_valid(minima)


@settings(max_examples=200, deadline=None)
@given(st.tuples(finite, finite, finite), st.floats(-500, 500, allow_nan=False), st.floats(0, 0.5))
def test_projection_shift_invariant(raw, c, faci):
    a = project_action(raw, faci)
    b = project_action([r + c for r in raw], faci)
    for x, y in zip((a.beta_sidewalk, a.beta_veh, a.beta_park), (b.beta_sidewalk, b.beta_veh, b.beta_park)):
        assert abs(x - y) <= 1e-9


# -- quantization -------------------------------------------------------------

def _edge(length=120.0, width=20.0):
    return DirectedEdge("e", "a", "b", length, width)


def test_two_lanes_from_point_three_of_twenty():
    lay = quantize_layout(RowAllocation(0.4, 0.3, 0.1, 0.2), _edge(width=20))
    assert lay.n_lanes == 2


def test_strip_above_threshold_gives_bays():
    lay = quantize_layout(RowAllocation(0.5, 0.275, 0.1, 0.125), _edge(120, 20))  # 2.5 m strip
    assert lay.parking_strip_active and lay.parking_capacity == 20


def test_strip_below_threshold_gives_none():
    lay = quantize_layout(RowAllocation(0.5, 0.305, 0.1, 0.095), _edge(120, 20))  # 1.9 m strip
    assert not lay.parking_strip_active and lay.parking_capacity == 0


def test_sidewalk_width():
    lay = quantize_layout(RowAllocation(0.35, 0.35, 0.1, 0.2), _edge(width=20))
    assert lay.sidewalk_width_m == pytest.approx(7.0)


unit = st.floats(0, 1, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(unit, unit, unit, unit, st.floats(5, 40))
def test_quantize_monotone(v1, v2, p1, p2, width):
    e = _edge(width=width)
    lo_v, hi_v = sorted((v1, v2))
    lo_p, hi_p = sorted((p1, p2))
    a = quantize_layout(RowAllocation(0, lo_v, 0, lo_p), e)
    b = quantize_layout(RowAllocation(0, hi_v, 0, hi_p), e)
    assert a.n_lanes <= b.n_lanes
    assert a.parking_capacity <= b.parking_capacity


# -- routing ------------------------------------------------------------------

def test_route_to_self():
    net = two_way([(1, 2)])
    assert shortest_route(net, "e1_2", "e1_2") == ["e1_2"]


def test_two_edge_chain():
    net = StreetNetwork(
        (Node("n1"), Node("n2"), Node("n3")),
        (DirectedEdge("A", "n1", "n2", 10, 10), DirectedEdge("B", "n2", "n3", 10, 10),
         DirectedEdge("C", "n3", "n1", 10, 10)),
        "chain",
    )
    assert shortest_route(net, "A", "B") == ["A", "B"]


def test_unknown_edges_raise(grid4):
    with pytest.raises(NetworkError):
        shortest_route(grid4, "e1_2", "zzz")
    with pytest.raises(NetworkError):
        routes_from(grid4, "zzz")


def _brute_force(net, weights, origin, dest):
    """Cheapest simple edge path, ties broken by smallest id sequence."""
    succ = net.successors
    best = None

    def walk(path, cost):
        nonlocal best
        last = path[-1]
        if last == dest:
            key = (round(cost, 9), tuple(path))
            if best is None or key < best:
                best = key
            return
        for f in succ[last]:
            if f not in path:
                walk(path + [f], cost + weights[f])

    walk([origin], weights[origin])
    return list(best[1])


def test_three_by_three_corner_to_corner():
    net = two_way(grid_pairs(3, 3), length=100.0)
    w = {e.id: 1.0 for e in net.edges}
    got = shortest_route(net, "e1_2", "e8_9", w)
    # origin edge plus three more edges reach the far corner
    assert len(got) == 4
    assert got == _brute_force(net, w, "e1_2", "e8_9")


def test_grid_all_pairs_match_brute_force():
    net = two_way(grid_pairs(2, 3), length=100.0)
    rng = np.random.default_rng(3)
    w = {e.id: float(rng.integers(1, 4)) for e in net.edges}
    for o, d in itertools.permutations(net.edge_ids, 2):
        assert shortest_route(net, o, d, w) == _brute_force(net, w, o, d), (o, d)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_weights_match_brute_force(seed):
    net = two_way(grid_pairs(2, 2), length=100.0)
    rng = np.random.default_rng(seed)
    w = {e.id: float(rng.uniform(0.5, 3.0)) for e in net.edges}
    for o, d in itertools.permutations(net.edge_ids, 2):
        assert shortest_route(net, o, d, w) == _brute_force(net, w, o, d)


def test_free_flow_cache_matches_uncached(grid4):
    from streetrow.netmodel import free_flow_weights
    w = free_flow_weights(grid4)
    for o, d in itertools.permutations(grid4.edge_ids, 2):
        assert shortest_route(grid4, o, d) == shortest_route(grid4, o, d, w)
