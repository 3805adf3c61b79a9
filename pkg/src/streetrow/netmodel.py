"""Street network, right-of-way allocations and their discrete layouts.

A street is a directed edge whose cross-section of width ``width_m`` is
split into a sidewalk, driving lanes, a fixed facility belt and an
on-street parking strip.  Allocations are continuous fractions; the
simulator sees them through :func:`quantize_layout`.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

BUNDLED_NETWORKS = ("grid4", "kensington12", "kensington58")

ROW_PARTS = ("sidewalk", "veh", "park")
DEFAULT_MINIMA = (0.05, 0.0, 0.0)
SUM_TOL = 1e-9


class NetworkError(ValueError):
    """Raised for malformed network documents or impossible routing requests."""


@dataclass(frozen=True)
class Node:
    id: str
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class DirectedEdge:
    id: str
    from_node: str
    to_node: str
    length_m: float
    width_m: float
    beta_faci: float = 0.1
    v_max_veh: float = 13.0
    v_max_ped: float = 1.2
    tags: frozenset = frozenset()

    @property
    def free_flow_time_veh(self) -> float:
        return self.length_m / self.v_max_veh

    @property
    def free_flow_time_ped(self) -> float:
        return self.length_m / self.v_max_ped


@dataclass(frozen=True)
class StreetNetwork:
    nodes: tuple
    edges: tuple
    name: str = "network"

    @cached_property
    def edge_index(self) -> dict[str, int]:
        return {e.id: i for i, e in enumerate(self.edges)}

    @cached_property
    def edge_by_id(self) -> dict[str, DirectedEdge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def adjacency(self) -> dict[str, tuple[str, ...]]:
        """Node id -> ids of edges leaving that node, sorted."""
        out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            out.setdefault(e.from_node, []).append(e.id)
        return {k: tuple(sorted(v)) for k, v in out.items()}

    @cached_property
    def successors(self) -> dict[str, tuple[str, ...]]:
        """Edge id -> edges that can follow it on a route."""
        return {e.id: self.adjacency.get(e.to_node, ()) for e in self.edges}

    @cached_property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.edges)

    def neighbours(self, edge_id: str) -> tuple[str, ...]:
        """Edges sharing at least one endpoint with ``edge_id`` (itself excluded)."""
        e = self.edge_by_id[edge_id]
        ends = {e.from_node, e.to_node}
        return tuple(
            f.id for f in self.edges
            if f.id != edge_id and (f.from_node in ends or f.to_node in ends)
        )

    def tagged(self, tag: str) -> tuple[str, ...]:
        return tuple(e.id for e in self.edges if tag in e.tags)

    @cached_property
    def _route_cache(self) -> dict:
        return {}


@dataclass(frozen=True)
class RowAllocation:
    beta_sidewalk: float
    beta_veh: float
    beta_faci: float
    beta_park: float

    def total(self) -> float:
        return self.beta_sidewalk + self.beta_veh + self.beta_faci + self.beta_park

    def is_valid(self, minima: Sequence[float] = (0.0, 0.0, 0.0), tol: float = SUM_TOL) -> bool:
        parts = (self.beta_sidewalk, self.beta_veh, self.beta_park)
        return (
            abs(self.total() - 1.0) <= tol
            and all(0.0 <= p <= 1.0 for p in (*parts, self.beta_faci))
            and all(p >= m - tol for p, m in zip(parts, minima))
        )


@dataclass(frozen=True)
class QuantizationConfig:
    lane_width_m: float = 3.0
    parking_strip_width_m: float = 2.0
    bay_length_m: float = 6.0


@dataclass(frozen=True)
class DiscreteLayout:
    n_lanes: int
    parking_capacity: int
    sidewalk_width_m: float
    parking_strip_active: bool


# ---------------------------------------------------------------------------
# validation


def validate_network(net: StreetNetwork) -> list[str]:
    """Return every invariant violation as a readable message; empty means valid."""
    problems: list[str] = []
    node_ids = [n.id for n in net.nodes]
    seen_nodes: set[str] = set()
    for nid in node_ids:
        if nid in seen_nodes:
            problems.append(f"node {nid!r}: duplicate node id")
        seen_nodes.add(nid)

    seen_edges: set[str] = set()
    for e in net.edges:
        if e.id in seen_edges:
            problems.append(f"edge {e.id!r}: duplicate edge id")
        seen_edges.add(e.id)
        for end in (e.from_node, e.to_node):
            if end not in seen_nodes:
                problems.append(f"edge {e.id!r}: endpoint node {end!r} does not exist")
        if not e.length_m > 0:
            problems.append(f"edge {e.id!r}: length_m must be positive, got {e.length_m}")
        if not e.width_m > 0:
            problems.append(f"edge {e.id!r}: width_m must be positive, got {e.width_m}")
        if not 0.0 <= e.beta_faci <= 0.5:
            problems.append(f"edge {e.id!r}: beta_faci must lie in [0, 0.5], got {e.beta_faci}")
        if not e.v_max_veh > 0 or not e.v_max_ped > 0:
            problems.append(f"edge {e.id!r}: maximum speeds must be positive")

    if net.edges and not problems:
        problems.extend(_connectivity_problems(net))
    return problems


def _connectivity_problems(net: StreetNetwork) -> list[str]:
    succ = net.successors
    pred: dict[str, list[str]] = {e.id: [] for e in net.edges}
    for eid, nxt in succ.items():
        for f in nxt:
            pred[f].append(eid)

    def reach(start: str, graph: Mapping[str, Iterable[str]]) -> set[str]:
        seen = {start}
        stack = [start]
        while stack:
            for f in graph[stack.pop()]:
                if f not in seen:
                    seen.add(f)
                    stack.append(f)
        return seen

    root = net.edges[0].id
    fwd, bwd = reach(root, succ), reach(root, pred)
    return [
        f"edge {e.id!r}: network is not strongly connected (edge unreachable from or to {root!r})"
        for e in net.edges
        if e.id not in fwd or e.id not in bwd
    ]


# ---------------------------------------------------------------------------
# allocations


def project_action(
    raw: Sequence[float],
    beta_faci: float,
    minima: Sequence[float] = DEFAULT_MINIMA,
) -> RowAllocation:
    """Map three unconstrained actor outputs onto the ROW simplex.

    The residual width left after the facility belt and the per-part minima
    is shared by a normalised exponential of ``raw`` (sidewalk, veh, park).
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (3,):
        raise ValueError(f"expected 3 raw action values, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise ValueError(f"raw action must be finite, got {raw.tolist()}")
    minima = np.asarray(minima, dtype=float)
    if minima.shape != (3,) or np.any(minima < 0):
        raise ValueError("minima must be three nonnegative values")
    residual = 1.0 - beta_faci - float(minima.sum())
    if not residual > 0 or beta_faci < 0:
        raise ValueError(
            f"beta_faci ({beta_faci}) plus minima ({minima.sum()}) must be below 1"
        )
    z = np.exp(raw - raw.max())
    shares = minima + residual * z / z.sum()
    return RowAllocation(
        beta_sidewalk=float(shares[0]),
        beta_veh=float(shares[1]),
        beta_faci=float(beta_faci),
        beta_park=float(shares[2]),
    )


def quantize_layout(
    alloc: RowAllocation,
    edge: DirectedEdge,
    geom: QuantizationConfig = QuantizationConfig(),
) -> DiscreteLayout:
    drive_w = alloc.beta_veh * edge.width_m
    park_w = alloc.beta_park * edge.width_m
    # tiny epsilon keeps 0.3 * 20 / 3 == 2 lanes despite binary rounding
    n_lanes = int(math.floor(drive_w / geom.lane_width_m + 1e-9))
    active = park_w + 1e-9 >= geom.parking_strip_width_m
    capacity = int(math.floor(edge.length_m / geom.bay_length_m + 1e-9)) if active else 0
    return DiscreteLayout(
        n_lanes=max(n_lanes, 0),
        parking_capacity=capacity,
        sidewalk_width_m=alloc.beta_sidewalk * edge.width_m,
        parking_strip_active=active,
    )


# ---------------------------------------------------------------------------
# routing


def free_flow_weights(net: StreetNetwork, mode: str = "vehicle") -> dict[str, float]:
    if mode == "vehicle":
        return {e.id: e.free_flow_time_veh for e in net.edges}
    if mode == "pedestrian":
        return {e.id: e.free_flow_time_ped for e in net.edges}
    raise ValueError(f"unknown mode {mode!r}")


def routes_from(
    net: StreetNetwork,
    origin_edge: str,
    weights: Mapping[str, float] | None = None,
) -> dict[str, tuple[str, ...]]:
    """Single-source minimal-time routes from ``origin_edge`` to every reachable edge.

    Ties on cost go to the lexicographically smallest edge-id sequence.
    """
    if origin_edge not in net.edge_by_id:
        raise NetworkError(f"unknown edge {origin_edge!r}")
    w = weights if weights is not None else free_flow_weights(net)
    succ = net.successors
    best: dict[str, tuple[str, ...]] = {}
    heap = [(round(w[origin_edge], 9), (origin_edge,), w[origin_edge])]
    while heap:
        _, path, cost = heapq.heappop(heap)
        last = path[-1]
        if last in best:
            continue
        best[last] = path
        for f in succ[last]:
            if f not in best:
                c = cost + w[f]
                heapq.heappush(heap, (round(c, 9), path + (f,), c))
    return best


def shortest_route(
    net: StreetNetwork,
    origin_edge: str,
    dest_edge: str,
    weights: Mapping[str, float] | None = None,
) -> list[str]:
    if dest_edge not in net.edge_by_id:
        raise NetworkError(f"unknown edge {dest_edge!r}")
    if weights is None:
        key = ("free", origin_edge)
        cache = net._route_cache
        if key not in cache:
            cache[key] = routes_from(net, origin_edge)
        table = cache[key]
    else:
        table = routes_from(net, origin_edge, weights)
    if dest_edge not in table:
        raise NetworkError(f"edge {dest_edge!r} is unreachable from {origin_edge!r}")
    return list(table[dest_edge])


# ---------------------------------------------------------------------------
# persistence


def network_from_dict(doc: Mapping) -> StreetNetwork:
    try:
        nodes = tuple(
            Node(id=str(n["id"]), x=float(n.get("x", 0.0)), y=float(n.get("y", 0.0)))
            for n in doc["nodes"]
        )
        edges = tuple(
            DirectedEdge(
                id=str(e["id"]),
                from_node=str(e["from"]),
                to_node=str(e["to"]),
                length_m=float(e["length_m"]),
                width_m=float(e["width_m"]),
                beta_faci=float(e.get("beta_faci", 0.1)),
                v_max_veh=float(e.get("v_max_veh", 13.0)),
                v_max_ped=float(e.get("v_max_ped", 1.2)),
                tags=frozenset(e.get("tags", ())),
            )
            for e in doc["edges"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkError(f"malformed network document: {exc}") from exc
    return StreetNetwork(nodes=nodes, edges=edges, name=str(doc.get("name", "network")))


def network_to_dict(net: StreetNetwork) -> dict:
    return {
        "name": net.name,
        "nodes": [{"id": n.id, "x": n.x, "y": n.y} for n in net.nodes],
        "edges": [
            {
                "id": e.id,
                "from": e.from_node,
                "to": e.to_node,
                "length_m": e.length_m,
                "width_m": e.width_m,
                "beta_faci": e.beta_faci,
                "v_max_veh": e.v_max_veh,
                "v_max_ped": e.v_max_ped,
                "tags": sorted(e.tags),
            }
            for e in net.edges
        ],
    }


def load_network(name_or_path: str | Path) -> StreetNetwork:
    """Load a bundled network by name or a network JSON file by path."""
    if str(name_or_path) in BUNDLED_NETWORKS:
        text = (
            resources.files("streetrow")
            .joinpath("data", "networks", f"{name_or_path}.json")
            .read_text()
        )
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise NetworkError(f"network {str(name_or_path)!r} is neither bundled nor a file")
        text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"network file is not valid JSON: {exc}") from exc
    return network_from_dict(doc)


def save_network(net: StreetNetwork, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1) + "\n")
