"""Regenerate the bundled network files under src/streetrow/data/networks.

kensington58 is a 4 x 5 block grid (20 junctions, 29 two-way streets) sized
to roughly 0.65 km^2; the column through junctions 3-8-13-18 stands in for
Exhibition Road.  kensington12 is the 6-street block around junctions 7-14.
"""
import math
from pathlib import Path

import numpy as np

from streetrow.netmodel import DirectedEdge, Node, StreetNetwork, save_network, validate_network

OUT = Path(__file__).resolve().parents[1] / "src" / "streetrow" / "data" / "networks"

COLS_X = [0.0, 228.0, 462.0, 700.0, 930.0]
ROWS_Y = [0.0, 236.0, 468.0, 700.0]
DROPPED = {(16, 17), (4, 9)}
EXHIBITION = {(3, 8), (8, 13), (13, 18)}
QUEENS_GATE = {(2, 7), (7, 12), (12, 17)}


def _street_pairs():
    pairs = []
    for r in range(4):
        for c in range(5):
            n = r * 5 + c + 1
            if c < 4:
                pairs.append((n, n + 1))
            if r < 3:
                pairs.append((n, n + 5))
    return [p for p in pairs if p not in DROPPED]


def _edges_for(pairs, nodes, rng):
    edges = []
    for a, b in pairs:
        (xa, ya), (xb, yb) = nodes[a], nodes[b]
        length = round(math.hypot(xb - xa, yb - ya) * rng.uniform(1.0, 1.08), 1)
        if (a, b) in EXHIBITION:
            width, faci, tags = 24.0, 0.08, ("exhibition",)
        elif (a, b) in QUEENS_GATE:
            width, faci, tags = 20.0, 0.08, ()
        else:
            width = float(rng.choice(np.arange(12.0, 18.5, 0.5)))
            faci, tags = round(float(rng.uniform(0.05, 0.10)), 2), ()
        for i, j in ((a, b), (b, a)):
            edges.append(
                DirectedEdge(
                    id=f"e{i}_{j}", from_node=f"n{i}", to_node=f"n{j}",
                    length_m=length, width_m=width, beta_faci=faci,
                    v_max_veh=13.0, v_max_ped=1.2, tags=frozenset(tags),
                )
            )
    return edges


def kensington(subset=None):
    rng = np.random.default_rng(20211115)
    coords = {}
    for r, y in enumerate(ROWS_Y):
        for c, x in enumerate(COLS_X):
            coords[r * 5 + c + 1] = (x + rng.uniform(-12, 12), y + rng.uniform(-12, 12))
    edges = _edges_for(_street_pairs(), coords, rng)
    if subset is not None:
        keep = {f"e{a}_{b}" for a, b in subset} | {f"e{b}_{a}" for a, b in subset}
        edges = [e for e in edges if e.id in keep]
    used = sorted({int(e.from_node[1:]) for e in edges})
    nodes = tuple(Node(f"n{k}", round(coords[k][0], 1), round(coords[k][1], 1)) for k in used)
    name = "kensington58" if subset is None else f"kensington{len(edges)}"
    return StreetNetwork(nodes=nodes, edges=tuple(edges), name=name)


def grid4():
    nodes = (Node("n1", 0.0, 0.0), Node("n2", 120.0, 0.0), Node("n3", 250.0, 0.0))
    spec = [("n1", "n2", 120.0, 15.0, 0.08, ()), ("n2", "n3", 130.0, 14.0, 0.06, ("exhibition",))]
    edges = []
    for a, b, length, width, faci, tags in spec:
        for i, j in ((a, b), (b, a)):
            edges.append(DirectedEdge(f"e{i[1:]}_{j[1:]}", i, j, length, width, faci, 13.0, 1.2, frozenset(tags)))
    return StreetNetwork(nodes=nodes, edges=tuple(edges), name="grid4")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    block = [(7, 8), (8, 9), (12, 13), (13, 14), (8, 13), (9, 14)]
    for net in (grid4(), kensington(), kensington(block)):
        assert not validate_network(net), validate_network(net)
        save_network(net, OUT / f"{net.name}.json")
        print(net.name, len(net.nodes), "nodes", len(net.edges), "edges")
