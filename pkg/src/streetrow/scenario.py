"""Seeded daily demand for the three traffic regimes.

Scenario 1 is low flow, scenario 2 high flow, scenario 3 keeps scenario 2's
vehicle process and multiplies pedestrian demand toward ``exhibition`` edges
by a factor drawn afresh every slot.

Peak concurrency targets refer to the 58-edge reference network and scale
with edge count.  They are turned into injection rates with Little's law,
using the mean free-flow trip duration over all origin/destination pairs.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import poisson

from .netmodel import StreetNetwork, free_flow_weights, routes_from, shortest_route
from .sim import PEDESTRIAN, VEHICLE, SimParams, TripRequest

# (peak AVs in operation, peak pedestrians) as reported for the reference network
PEAK_TARGETS = {1: (63, 53), 2: (118, 102), 3: (121, 169)}
REFERENCE_EDGE_COUNT = 58
PED_BOOST_RANGE = (1.5, 2.5)
BOOST_TAG = "exhibition"

# hour-of-day -> demand weight; 18:00-19:00 is the peak
DIURNAL_KNOTS = ((0.0, 0.2), (6.0, 0.2), (18.0, 1.0), (19.0, 1.0), (24.0, 0.2))

_VEH_COUNTS, _VEH_DETAIL, _PED_COUNTS, _PED_DETAIL, _BOOST = range(5)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    veh_peak_target: int
    ped_peak_target: int
    peak_slot_window: tuple
    diurnal_shape: tuple
    ped_boost_range: tuple | None
    parking_propensity: float
    veh_peak_rate: float
    ped_peak_rate: float
    slot_length_s: float = 1800.0
    boost_tag: str = BOOST_TAG

    def __post_init__(self):
        w = np.asarray(self.diurnal_shape, dtype=float)
        if w.ndim != 1 or len(w) == 0 or np.any(w < 0) or np.any(w > 1):
            raise ScenarioError("diurnal weights must lie in [0, 1]")
        if not self.peak_slot_window:
            raise ScenarioError("peak slot window is empty")
        if (self.ped_boost_range is not None) != (self.id == 3):
            raise ScenarioError("the pedestrian boost applies to scenario 3 only")
        if not 0 <= self.parking_propensity <= 1:
            raise ScenarioError("parking_propensity must lie in [0, 1]")
        if self.veh_peak_rate < 0 or self.ped_peak_rate < 0:
            raise ScenarioError("injection rates must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["peak_slot_window"] = list(self.peak_slot_window)
        d["diurnal_shape"] = list(self.diurnal_shape)
        d["ped_boost_range"] = None if self.ped_boost_range is None else list(self.ped_boost_range)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioSpec":
        boost = d.get("ped_boost_range")
        return cls(
            id=int(d["id"]),
            veh_peak_target=int(d["veh_peak_target"]),
            ped_peak_target=int(d["ped_peak_target"]),
            peak_slot_window=tuple(int(s) for s in d["peak_slot_window"]),
            diurnal_shape=tuple(float(x) for x in d["diurnal_shape"]),
            ped_boost_range=None if boost is None else (float(boost[0]), float(boost[1])),
            parking_propensity=float(d["parking_propensity"]),
            veh_peak_rate=float(d["veh_peak_rate"]),
            ped_peak_rate=float(d["ped_peak_rate"]),
            slot_length_s=float(d.get("slot_length_s", 1800.0)),
            boost_tag=str(d.get("boost_tag", BOOST_TAG)),
        )


def diurnal_shape(slots_per_day: int = 48, knots=DIURNAL_KNOTS) -> tuple:
    hours = (np.arange(slots_per_day) + 0.5) * 24.0 / slots_per_day
    xs, ys = zip(*knots)
    return tuple(float(v) for v in np.interp(hours, xs, ys))


def peak_window(slots_per_day: int = 48, start_h: float = 18.0, end_h: float = 19.0) -> tuple:
    per_hour = slots_per_day / 24.0
    return tuple(range(int(round(start_h * per_hour)), int(round(end_h * per_hour))))


def _pairs(net: StreetNetwork) -> list[tuple[str, str]]:
    ids = net.edge_ids
    if len(ids) == 1:
        return [(ids[0], ids[0])]
    return [(o, d) for o in ids for d in ids if o != d]


def mean_trip_duration(net: StreetNetwork, mode: str) -> float:
    """Mean free-flow duration of a trip over all origin/destination pairs."""
    w = free_flow_weights(net, mode)
    total = 0.0
    pairs = _pairs(net)
    for o, d in pairs:
        total += sum(w[e] for e in shortest_route(net, o, d))
    return total / len(pairs)


def build_scenario(
    scenario_id: int,
    net: StreetNetwork,
    params: SimParams = SimParams(),
    parking_propensity: float = 0.4,
) -> ScenarioSpec:
    if scenario_id not in PEAK_TARGETS:
        raise ScenarioError(f"unknown scenario id {scenario_id}; expected 1, 2 or 3")
    if scenario_id == 3 and not net.tagged(BOOST_TAG):
        raise ScenarioError(f"scenario 3 needs at least one {BOOST_TAG!r}-tagged edge")
    veh_target, ped_target = PEAK_TARGETS[scenario_id]
    # scenario 3 reuses scenario 2's base processes; its targets are the outcome
    base_veh, base_ped = PEAK_TARGETS[2] if scenario_id == 3 else (veh_target, ped_target)
    scale = len(net.edges) / REFERENCE_EDGE_COUNT
    return ScenarioSpec(
        id=scenario_id,
        veh_peak_target=veh_target,
        ped_peak_target=ped_target,
        peak_slot_window=peak_window(params.slots_per_day),
        diurnal_shape=diurnal_shape(params.slots_per_day),
        ped_boost_range=PED_BOOST_RANGE if scenario_id == 3 else None,
        parking_propensity=parking_propensity,
        veh_peak_rate=base_veh * scale / mean_trip_duration(net, VEHICLE),
        ped_peak_rate=base_ped * scale / mean_trip_duration(net, PEDESTRIAN),
        slot_length_s=params.slot_length_s,
    )


def _stream(seed: int, slot_index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(slot_index, stream)))


def slot_boosts(spec: ScenarioSpec, slot_index: int, net: StreetNetwork, seed: int) -> dict[str, float]:
    """Pedestrian multipliers for boosted destination edges in this slot."""
    if spec.ped_boost_range is None:
        return {}
    tagged = net.tagged(spec.boost_tag)
    lo, hi = spec.ped_boost_range
    draws = _stream(seed, slot_index, _BOOST).uniform(lo, hi, size=len(tagged))
    return dict(zip(tagged, (float(x) for x in draws)))


def _draw_trips(
    rate_per_pair: np.ndarray,
    pairs: Sequence[tuple[str, str]],
    counts_rng: np.random.Generator,
    detail_rng: np.random.Generator,
    t0: float,
    span: float,
) -> list[tuple[float, str, str, float]]:
    # one uniform per pair keeps every pair's count independent of the others' rates
    u = counts_rng.random(len(pairs))
    counts = poisson.ppf(u, rate_per_pair).astype(int)
    out = []
    for (o, d), c in zip(pairs, counts):
        if c == 0:
            continue
        departs = t0 + detail_rng.random(c) * span
        marks = detail_rng.random(c)
        out.extend((float(t), o, d, float(m)) for t, m in zip(departs, marks))
    return out


def sample_slot_demand(
    spec: ScenarioSpec, slot_index: int, net: StreetNetwork, seed: int
) -> list[TripRequest]:
    """All trips departing during ``slot_index``, sorted by departure time."""
    if not 0 <= slot_index < len(spec.diurnal_shape):
        raise ScenarioError(f"slot index {slot_index} outside the day")
    weight = spec.diurnal_shape[slot_index]
    if weight == 0:
        return []
    span = spec.slot_length_s
    t0 = slot_index * span
    pairs = _pairs(net)
    tagged = set(net.tagged(spec.boost_tag))
    # pairs toward boost-tagged edges come last so the rest draw identically across scenarios
    pairs.sort(key=lambda p: p[1] in tagged)
    n = len(pairs)

    veh_rate = np.full(n, spec.veh_peak_rate * weight * span / n)
    ped_rate = np.full(n, spec.ped_peak_rate * weight * span / n)
    boosts = slot_boosts(spec, slot_index, net, seed)
    if boosts:
        ped_rate *= np.array([boosts.get(d, 1.0) for _, d in pairs])

    requests = []
    veh = _draw_trips(veh_rate, pairs, _stream(seed, slot_index, _VEH_COUNTS),
                      _stream(seed, slot_index, _VEH_DETAIL), t0, span)
    for k, (t, o, d, mark) in enumerate(veh):
        requests.append(TripRequest(
            id=f"{slot_index:02d}v{k:05d}", mode=VEHICLE, origin_edge=o, dest_edge=d,
            depart_s=t, route=tuple(shortest_route(net, o, d)),
            wants_parking=mark < spec.parking_propensity,
        ))
    ped = _draw_trips(ped_rate, pairs, _stream(seed, slot_index, _PED_COUNTS),
                      _stream(seed, slot_index, _PED_DETAIL), t0, span)
    ped_w = free_flow_weights(net, PEDESTRIAN)
    for k, (t, o, d, _) in enumerate(ped):
        requests.append(TripRequest(
            id=f"{slot_index:02d}p{k:05d}", mode=PEDESTRIAN, origin_edge=o, dest_edge=d,
            depart_s=t, route=tuple(_ped_route(net, o, d, ped_w)),
        ))
    requests.sort(key=lambda r: (r.depart_s, r.id))
    return requests


def _ped_route(net: StreetNetwork, o: str, d: str, weights) -> list[str]:
    cache = net._route_cache
    key = ("ped", o)
    if key not in cache:
        cache[key] = routes_from(net, o, weights)
    return list(cache[key][d])


def sample_day(spec: ScenarioSpec, net: StreetNetwork, seed: int) -> list[list[TripRequest]]:
    return [sample_slot_demand(spec, s, net, seed) for s in range(len(spec.diurnal_shape))]


def save_scenario(path: str | Path, spec: ScenarioSpec, days: Sequence | None = None,
                  network: str | None = None, seed: int | None = None) -> None:
    doc = {"format": "streetrow-scenario", "version": 1, "network": network, "seed": seed,
           "spec": spec.to_dict()}
    if days is not None:
        doc["slots"] = [[t.to_dict() for t in slot] for slot in days]
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_scenario(path: str | Path) -> tuple[ScenarioSpec, list[list[TripRequest]] | None]:
    try:
        doc = json.loads(Path(path).read_text())
        spec = ScenarioSpec.from_dict(doc["spec"])
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    slots = doc.get("slots")
    if slots is None:
        return spec, None
    return spec, [[TripRequest.from_dict(t) for t in slot] for slot in slots]
