"""Mesoscopic simulator of AVs, pedestrians and on-street parking for one slot.

Each road user moves edge by edge.  On entering an edge its target speed is
set from the current density on that edge (Greenshields for vehicles, an
area-based analogue for pedestrians) and it reaches that speed within the
acceleration and deceleration bounds.  The clock advances in ticks of
``tick_s``; state changes falling inside a tick are applied in time order.

Speeds are retrieved every ``obs_interval_s``: each road user that moved on
an edge since the previous retrieval contributes one sample, its mean speed
over that window divided by the edge's maximum speed.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .netmodel import DiscreteLayout, NetworkError, StreetNetwork, routes_from

VEHICLE = "vehicle"
PEDESTRIAN = "pedestrian"

DRIVING = "driving"
WALKING = "walking"
SEEKING = "seeking_parking"
PARKED = "parked"
DONE = "done"

_DEPART, _EDGE_END, _UNPARK = 0, 1, 2
_EPS = 1e-9


@dataclass(frozen=True)
class SimParams:
    # physical parameters of pedestrians and AVs
    ped_following_gap_m: float = 2.50
    ped_max_speed_mps: float = 1.20
    ped_body_width_m: float = 1.00
    veh_accel_mps2: float = 2.60
    veh_decel_mps2: float = 4.50
    veh_max_speed_mps: float = 13.00
    veh_headway_s: float = 0.60
    veh_imperfection: float = 0.00
    veh_speed_factor: float = 0.05
    veh_length_m: float = 4.00
    # clock
    tick_s: float = 1.0
    obs_interval_s: float = 36.0
    slot_length_s: float = 1800.0
    slots_per_day: int = 48
    # parking
    park_sigmoid_bias: float = -1.0
    park_sigmoid_gain: float = 2.0
    park_duration_mean_s: float = 900.0
    # mesoscopic closure
    jam_nominal_speed_mps: float = 13.0
    ped_spillover_frac: float = 0.4
    closed_lane_speed_frac: float = 0.2
    closed_edge_penalty: float = 1000.0
    veh_min_speed_mps: float = 0.5
    ped_min_speed_mps: float = 0.1

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("invalid SimParams: " + "; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        positive = (
            "ped_following_gap_m", "ped_max_speed_mps", "ped_body_width_m",
            "veh_accel_mps2", "veh_decel_mps2", "veh_max_speed_mps", "veh_headway_s",
            "veh_length_m", "tick_s", "obs_interval_s", "slot_length_s",
            "park_duration_mean_s", "veh_min_speed_mps", "ped_min_speed_mps",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                out.append(f"{name} must be positive")
        if not 0 <= self.veh_imperfection <= 1:
            out.append("veh_imperfection must lie in [0, 1]")
        if not 0 <= self.veh_speed_factor < 1:
            out.append("veh_speed_factor must lie in [0, 1)")
        if self.slots_per_day < 1:
            out.append("slots_per_day must be at least 1")
        if out:
            return out
        if not _divides(self.obs_interval_s, self.slot_length_s):
            out.append("slot_length_s must be a multiple of obs_interval_s")
        if not _divides(self.tick_s, self.obs_interval_s):
            out.append("obs_interval_s must be a multiple of tick_s")
        return out

    @property
    def veh_jam_density(self) -> float:
        """Jam density per metre of lane."""
        return 1.0 / (self.veh_length_m + self.veh_headway_s * self.jam_nominal_speed_mps)

    @property
    def ped_jam_density(self) -> float:
        """Jam density per square metre of sidewalk."""
        return 1.0 / (self.ped_body_width_m * self.ped_following_gap_m)

    @property
    def day_length_s(self) -> float:
        return self.slot_length_s * self.slots_per_day


def _divides(step: float, total: float) -> bool:
    ratio = total / step
    return abs(ratio - round(ratio)) < 1e-9


@dataclass(frozen=True)
class TripRequest:
    id: str
    mode: str
    origin_edge: str
    dest_edge: str
    depart_s: float
    route: tuple
    wants_parking: bool = False

    def __post_init__(self):
        if self.mode not in (VEHICLE, PEDESTRIAN):
            raise ValueError(f"trip {self.id}: unknown mode {self.mode!r}")
        if not self.route or self.route[0] != self.origin_edge or self.route[-1] != self.dest_edge:
            raise ValueError(f"trip {self.id}: route must run from origin to destination edge")
        if self.depart_s < 0:
            raise ValueError(f"trip {self.id}: negative departure time")

    def to_dict(self) -> dict:
        return {
            "id": self.id, "mode": self.mode, "origin_edge": self.origin_edge,
            "dest_edge": self.dest_edge, "depart_s": self.depart_s,
            "route": list(self.route), "wants_parking": self.wants_parking,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TripRequest":
        return cls(
            id=str(d["id"]), mode=str(d["mode"]), origin_edge=str(d["origin_edge"]),
            dest_edge=str(d["dest_edge"]), depart_s=float(d["depart_s"]),
            route=tuple(d["route"]), wants_parking=bool(d.get("wants_parking", False)),
        )


@dataclass
class ActiveTrip:
    request: TripRequest
    route: tuple
    route_index: int = 0
    position_m: float = 0.0
    speed_mps: float = 0.0
    state: str = DRIVING
    parked_until_s: float | None = None
    speed_factor: float = 1.0

    @property
    def edge_id(self) -> str:
        return self.route[self.route_index]

    @property
    def is_vehicle(self) -> bool:
        return self.request.mode == VEHICLE

    def to_dict(self) -> dict:
        return {
            "request": self.request.to_dict(), "route": list(self.route),
            "route_index": self.route_index, "position_m": self.position_m,
            "speed_mps": self.speed_mps, "state": self.state,
            "parked_until_s": self.parked_until_s, "speed_factor": self.speed_factor,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ActiveTrip":
        return cls(
            request=TripRequest.from_dict(d["request"]), route=tuple(d["route"]),
            route_index=int(d["route_index"]), position_m=float(d["position_m"]),
            speed_mps=float(d["speed_mps"]), state=str(d["state"]),
            parked_until_s=None if d.get("parked_until_s") is None else float(d["parked_until_s"]),
            speed_factor=float(d.get("speed_factor", 1.0)),
        )


@dataclass
class TripBuffer:
    carried: list = field(default_factory=list)
    restoration_count: int = 0

    def __len__(self) -> int:
        return len(self.carried)

    def to_dict(self) -> dict:
        return {
            "restoration_count": self.restoration_count,
            "carried": [t.to_dict() for t in self.carried],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TripBuffer":
        return cls(
            carried=[ActiveTrip.from_dict(t) for t in d.get("carried", [])],
            restoration_count=int(d.get("restoration_count", 0)),
        )


@dataclass(frozen=True)
class SlotObservation:
    np_e: int = 0
    nv_e: int = 0
    mean_rel_ped_speed: float = 0.0
    mean_rel_veh_speed: float = 0.0
    k_dem: int = 0
    k_park: int = 0
    k_occupied_mean: float = 0.0
    expired_requests: int = 0
    ped_samples: int = 0
    veh_samples: int = 0
    k_occupied_max: int = 0


class SlotResult(NamedTuple):
    obs: dict
    buffer_out: TripBuffer
    completed: list


# ---------------------------------------------------------------------------
# speed relations


def veh_edge_speed(density: float, params: SimParams, v_max: float | None = None) -> float:
    """Greenshields speed for ``density`` vehicles per metre per lane."""
    if density < 0:
        raise ValueError("density must be nonnegative")
    v_max = params.veh_max_speed_mps if v_max is None else v_max
    v = v_max * max(0.0, 1.0 - density / params.veh_jam_density)
    return min(max(v, 0.0), v_max * (1.0 + params.veh_speed_factor))


def ped_edge_speed(
    density: float, sidewalk_width_m: float, params: SimParams, v_max: float | None = None
) -> float:
    """Walking speed for ``density`` pedestrians per square metre of sidewalk.

    Sidewalks narrower than one body width push pedestrians onto the
    carriageway, where they move at a fixed fraction of the maximum speed.
    """
    if density < 0 or sidewalk_width_m < 0:
        raise ValueError("density and sidewalk width must be nonnegative")
    v_max = params.ped_max_speed_mps if v_max is None else min(v_max, params.ped_max_speed_mps)
    if sidewalk_width_m < params.ped_body_width_m:
        return params.ped_spillover_frac * v_max
    return v_max * max(0.0, 1.0 - density / params.ped_jam_density)


# ---------------------------------------------------------------------------
# parking


def park_probability(edge_occupancy_ratio: float, params: SimParams) -> float:
    z = params.park_sigmoid_bias + params.park_sigmoid_gain * (1.0 - edge_occupancy_ratio)
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def decide_park(trip: ActiveTrip, edge_occupancy_ratio: float, params: SimParams, rng) -> bool:
    """Draw one uniform sample and compare it with the parking sigmoid."""
    return bool(rng.random() < park_probability(edge_occupancy_ratio, params))


@dataclass
class CurbState:
    """Parking bays of one edge during a slot."""

    capacity: int
    occupied: int = 0
    demand: int = 0
    expired: int = 0

    @property
    def occupancy_ratio(self) -> float:
        return 1.0 if self.capacity <= 0 else self.occupied / self.capacity


def handle_parking_request(
    trip: ActiveTrip, curb: CurbState, now: float, params: SimParams, rng
) -> str:
    """Grant a free bay or let the request expire; returns ``"parked"`` or ``"expired"``.

    Every request counts toward the edge's demand, granted or not.
    """
    curb.demand += 1
    if curb.occupied < curb.capacity:
        curb.occupied += 1
        trip.state = PARKED
        trip.position_m = 0.0
        trip.speed_mps = 0.0
        trip.parked_until_s = now + float(rng.exponential(params.park_duration_mean_s))
        return "parked"
    curb.expired += 1
    trip.state = DRIVING
    return "expired"


# ---------------------------------------------------------------------------
# kinematics


@dataclass(frozen=True, slots=True)
class Motion:
    """Ramp toward a target speed, then cruise, over ``[x0, x_end]``."""

    t0: float
    x0: float
    v0: float
    accel: float
    t_ramp: float
    v_cruise: float
    duration: float

    def position(self, t: float) -> float:
        tau = min(max(t - self.t0, 0.0), self.duration)
        if tau <= self.t_ramp:
            return self.x0 + self.v0 * tau + 0.5 * self.accel * tau * tau
        r = self.t_ramp
        return self.x0 + self.v0 * r + 0.5 * self.accel * r * r + self.v_cruise * (tau - r)

    def speed(self, t: float) -> float:
        tau = min(max(t - self.t0, 0.0), self.duration)
        if tau < self.t_ramp:
            return self.v0 + self.accel * tau
        if self.duration > self.t_ramp:
            return self.v_cruise
        return self.v0 + self.accel * self.t_ramp

    @property
    def end_time(self) -> float:
        return self.t0 + self.duration


def plan_motion(
    t0: float, x0: float, x_end: float, v0: float, v_target: float, accel: float, decel: float
) -> Motion:
    dist = max(x_end - x0, 0.0)
    if dist <= 0:
        return Motion(t0, x0, v0, 0.0, 0.0, v0, 0.0)
    if abs(v_target - v0) < 1e-12:
        return Motion(t0, x0, v0, 0.0, 0.0, v0, dist / v0)
    a = accel if v_target > v0 else -decel
    d_ramp = (v_target * v_target - v0 * v0) / (2.0 * a)
    if d_ramp >= dist:
        # the edge ends before the target speed is reached
        disc = max(v0 * v0 + 2.0 * a * dist, 0.0)
        t = (math.sqrt(disc) - v0) / a
        return Motion(t0, x0, v0, a, t, v0 + a * t, t)
    t_ramp = (v_target - v0) / a
    return Motion(t0, x0, v0, a, t_ramp, v_target, t_ramp + (dist - d_ramp) / v_target)


# ---------------------------------------------------------------------------
# world


@dataclass(slots=True)
class _Runtime:
    trip: ActiveTrip
    motion: Motion | None = None
    token: int = 0


class World:
    """All road users and curb state of the network during one slot."""

    def __init__(
        self,
        net: StreetNetwork,
        layouts: Mapping[str, DiscreteLayout],
        params: SimParams,
        seed: int | np.random.Generator | np.random.SeedSequence,
        slot_index: int = 0,
    ):
        missing = [e.id for e in net.edges if e.id not in layouts]
        if missing:
            raise ValueError(f"layout missing for edges: {', '.join(missing)}")
        if not 0 <= slot_index < params.slots_per_day:
            raise ValueError(f"slot_index {slot_index} outside the day")
        self.net = net
        self.layouts = layouts
        self.params = params
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.slot_index = slot_index
        self.t_start = slot_index * params.slot_length_s
        self.t_end = self.t_start + params.slot_length_s
        self.now = self.t_start

        self.curbs = {e.id: CurbState(layouts[e.id].parking_capacity) for e in net.edges}
        self.closed = frozenset(e.id for e in net.edges if layouts[e.id].n_lanes == 0)
        self.active: dict[str, _Runtime] = {}
        self.moving_veh = {e.id: 0 for e in net.edges}
        self.moving_ped = {e.id: 0 for e in net.edges}
        self.completed: list[str] = []
        self.restored = 0
        self.restoration_base = 0
        self._reroutes: dict[str, dict] = {}

        self._heap: list = []
        self._seq = 0
        self._occ_area = {e.id: 0.0 for e in net.edges}
        self._occ_since = {e.id: self.t_start for e in net.edges}
        self._occ_max = {e.id: 0 for e in net.edges}
        self._veh_sum = {e.id: 0.0 for e in net.edges}
        self._veh_n = {e.id: 0 for e in net.edges}
        self._ped_sum = {e.id: 0.0 for e in net.edges}
        self._ped_n = {e.id: 0 for e in net.edges}
        self._veh_seen: dict[str, set] = {e.id: set() for e in net.edges}
        self._ped_seen: dict[str, set] = {e.id: set() for e in net.edges}

    # -- scheduling -------------------------------------------------------

    def _push(self, t: float, kind: int, payload) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, kind, payload))

    def schedule(self, due: Sequence[TripRequest]) -> None:
        last = -math.inf
        for req in due:
            if req.depart_s < last:
                raise ValueError("due trips must be sorted by depart_s")
            if not self.t_start <= req.depart_s < self.t_end:
                raise ValueError(
                    f"trip {req.id} departs at {req.depart_s}, outside slot "
                    f"[{self.t_start}, {self.t_end})"
                )
            for eid in req.route:
                if eid not in self.net.edge_by_id:
                    raise ValueError(f"trip {req.id} routes over unknown edge {eid!r}")
            last = req.depart_s
            self._push(req.depart_s, _DEPART, req)

    def run(self) -> None:
        p = self.params
        n_ticks = int(round(p.slot_length_s / p.tick_s))
        heap = self._heap
        for k in range(1, n_ticks + 1):
            t_tick = self.t_start + k * p.tick_s
            while heap and heap[0][0] <= t_tick + _EPS:
                t, _, kind, payload = heapq.heappop(heap)
                self.now = t
                if kind == _DEPART:
                    self._depart(payload)
                elif kind == _EDGE_END:
                    self._edge_end(*payload)
                else:
                    self._unpark(*payload)
            self.now = t_tick

    # -- occupancy bookkeeping -------------------------------------------

    def _occ_flush(self, eid: str) -> None:
        curb = self.curbs[eid]
        self._occ_area[eid] += curb.occupied * (self.now - self._occ_since[eid])
        self._occ_since[eid] = self.now

    def _occ_check(self, eid: str) -> None:
        curb = self.curbs[eid]
        if curb.occupied > curb.capacity or curb.occupied < 0:
            raise AssertionError(f"parking occupancy out of range on {eid}")
        self._occ_max[eid] = max(self._occ_max[eid], curb.occupied)

    def _occ_change(self, eid: str, delta: int) -> None:
        self._occ_flush(eid)
        self.curbs[eid].occupied += delta
        self._occ_check(eid)

    # -- movement ---------------------------------------------------------

    def _target_speed(self, rt: _Runtime, eid: str) -> float:
        p = self.params
        edge = self.net.edge_by_id[eid]
        layout = self.layouts[eid]
        trip = rt.trip
        if trip.is_vehicle:
            if layout.n_lanes == 0:
                v = p.closed_lane_speed_frac * edge.v_max_veh
            else:
                density = self.moving_veh[eid] / (edge.length_m * layout.n_lanes)
                v = veh_edge_speed(density, p, edge.v_max_veh)
            v *= trip.speed_factor
            if p.veh_imperfection > 0:
                v *= 1.0 - p.veh_imperfection * float(self.rng.random())
            return min(max(v, p.veh_min_speed_mps), edge.v_max_veh * (1.0 + p.veh_speed_factor))
        width = layout.sidewalk_width_m
        density = self.moving_ped[eid] / (width * edge.length_m) if width > 0 else 0.0
        v = ped_edge_speed(density, width, p, edge.v_max_ped)
        return max(v, min(p.ped_min_speed_mps, edge.v_max_ped))

    def _start_motion(self, rt: _Runtime, v_in: float | None) -> None:
        trip = rt.trip
        eid = trip.edge_id
        edge = self.net.edge_by_id[eid]
        v_target = self._target_speed(rt, eid)
        v0 = v_target if v_in is None else v_in
        if trip.is_vehicle:
            self.moving_veh[eid] += 1
            m = plan_motion(self.now, trip.position_m, edge.length_m, v0, v_target,
                            self.params.veh_accel_mps2, self.params.veh_decel_mps2)
        else:
            self.moving_ped[eid] += 1
            m = plan_motion(self.now, trip.position_m, edge.length_m, v_target, v_target, 1.0, 1.0)
        rt.motion = m
        rt.token += 1
        self._push(m.end_time, _EDGE_END, (trip.request.id, rt.token))

    def _close_stint(self, rt: _Runtime, t_close: float) -> None:
        """Record speed samples for the stint that ends at ``t_close``."""
        m = rt.motion
        trip = rt.trip
        eid = trip.edge_id
        rt.motion = None
        if trip.is_vehicle:
            self.moving_veh[eid] -= 1
        else:
            self.moving_ped[eid] -= 1
        trip.position_m = min(m.position(t_close), self.net.edge_by_id[eid].length_m)
        trip.speed_mps = m.speed(t_close)
        if t_close - m.t0 <= _EPS:
            return
        edge = self.net.edge_by_id[eid]
        if trip.is_vehicle:
            v_star, sums, counts, seen = edge.v_max_veh, self._veh_sum, self._veh_n, self._veh_seen
            cap = 1.0 + self.params.veh_speed_factor
        else:
            v_star, sums, counts, seen = edge.v_max_ped, self._ped_sum, self._ped_n, self._ped_seen
            cap = 1.0
        step = self.params.obs_interval_s
        k = int(math.floor((m.t0 - self.t_start) / step + _EPS))
        while True:
            w0 = max(m.t0, self.t_start + k * step)
            w1 = min(t_close, self.t_start + (k + 1) * step)
            if w1 - w0 > _EPS:
                v = (m.position(w1) - m.position(w0)) / (w1 - w0)
                # clip float noise from differencing positions
                sums[eid] += min(max(v / v_star, 0.0), cap)
                counts[eid] += 1
                seen[eid].add(trip.request.id)
            if self.t_start + (k + 1) * step >= t_close - _EPS:
                break
            k += 1

    def _route_around_closures(self, trip: ActiveTrip) -> None:
        if not trip.is_vehicle or not self.closed:
            return
        rest = trip.route[trip.route_index + 1:-1]
        if not any(eid in self.closed for eid in rest):
            return
        here = trip.route[trip.route_index]
        dest = trip.route[-1]
        cache = self._reroutes
        key = here
        if key not in cache:
            w = {
                e.id: e.free_flow_time_veh * (self.params.closed_edge_penalty if e.id in self.closed else 1.0)
                for e in self.net.edges
            }
            cache[key] = routes_from(self.net, here, w)
        path = cache[key].get(dest)
        if path is not None:
            trip.route = trip.route[:trip.route_index] + path

    def _depart(self, req: TripRequest) -> None:
        p = self.params
        if req.mode == VEHICLE:
            state = SEEKING if req.wants_parking else DRIVING
            factor = float(self.rng.uniform(1.0 - p.veh_speed_factor, 1.0 + p.veh_speed_factor))
        else:
            state, factor = WALKING, 1.0
        trip = ActiveTrip(request=req, route=tuple(req.route), state=state, speed_factor=factor)
        rt = _Runtime(trip)
        self.active[req.id] = rt
        self._route_around_closures(trip)
        self._start_motion(rt, v_in=None)

    def _edge_end(self, trip_id: str, token: int) -> None:
        rt = self.active.get(trip_id)
        if rt is None or rt.token != token or rt.motion is None:
            return
        trip = rt.trip
        self._close_stint(rt, self.now)
        v_exit = trip.speed_mps
        if trip.route_index == len(trip.route) - 1:
            trip.state = DONE
            trip.position_m = self.net.edge_by_id[trip.edge_id].length_m
            del self.active[trip_id]
            self.completed.append(trip_id)
            return
        self._route_around_closures(trip)
        trip.route_index += 1
        trip.position_m = 0.0
        eid = trip.edge_id
        if trip.state == SEEKING:
            curb = self.curbs[eid]
            if decide_park(trip, curb.occupancy_ratio, self.params, self.rng):
                self._occ_flush(eid)
                outcome = handle_parking_request(trip, curb, self.now, self.params, self.rng)
                self._occ_check(eid)
                if outcome == "parked":
                    self._push(trip.parked_until_s, _UNPARK, (trip_id, rt.token))
                    return
        self._start_motion(rt, v_in=v_exit)

    def _unpark(self, trip_id: str, token: int) -> None:
        rt = self.active.get(trip_id)
        if rt is None or rt.token != token or rt.trip.state != PARKED:
            return
        trip = rt.trip
        self._occ_change(trip.edge_id, -1)
        trip.state = DRIVING
        trip.parked_until_s = None
        trip.position_m = 0.0
        self._route_around_closures(trip)
        self._start_motion(rt, v_in=0.0)

    # -- slot boundary ----------------------------------------------------

    def restore_trips(self, buffer: TripBuffer) -> None:
        """Put carried trips back on the network at the start of the slot."""
        for snap in buffer.carried:
            unknown = [e for e in snap.route if e not in self.net.edge_by_id]
            if unknown:
                raise NetworkError(
                    f"buffered trip {snap.request.id} references edge {unknown[0]!r} "
                    "not present in this network"
                )
        for snap in buffer.carried:
            trip = replace(snap)
            rt = _Runtime(trip)
            self.active[trip.request.id] = rt
            eid = trip.edge_id
            if trip.state == PARKED:
                curb = self.curbs[eid]
                if curb.occupied < curb.capacity:
                    self._occ_change(eid, +1)
                    when = max(trip.parked_until_s or self.now, self.now)
                    self._push(when, _UNPARK, (trip.request.id, rt.token))
                    continue
                # the strip shrank under a parked vehicle: it leaves now
                trip.state = DRIVING
                trip.parked_until_s = None
                trip.position_m = 0.0
                trip.speed_mps = 0.0
            self._route_around_closures(trip)
            self._start_motion(rt, v_in=trip.speed_mps)
        self.restored += len(buffer.carried)
        self.restoration_base = buffer.restoration_count

    def buffer_unfinished(self) -> TripBuffer:
        """Snapshot every unfinished trip at the current time, closing its stint."""
        carried = []
        for tid in sorted(self.active):
            rt = self.active[tid]
            if rt.motion is not None:
                self._close_stint(rt, self.now)
            carried.append(replace(rt.trip))
        return TripBuffer(carried=carried, restoration_count=self.restoration_base + self.restored)

    def observations(self) -> dict[str, SlotObservation]:
        out = {}
        span = self.params.slot_length_s
        for e in self.net.edges:
            eid = e.id
            area = self._occ_area[eid] + self.curbs[eid].occupied * (self.t_end - self._occ_since[eid])
            vn, pn = self._veh_n[eid], self._ped_n[eid]
            out[eid] = SlotObservation(
                np_e=len(self._ped_seen[eid]),
                nv_e=len(self._veh_seen[eid]),
                mean_rel_ped_speed=self._ped_sum[eid] / pn if pn else 0.0,
                mean_rel_veh_speed=self._veh_sum[eid] / vn if vn else 0.0,
                k_dem=self.curbs[eid].demand,
                k_park=self.curbs[eid].capacity,
                k_occupied_mean=area / span,
                expired_requests=self.curbs[eid].expired,
                ped_samples=pn,
                veh_samples=vn,
                k_occupied_max=self._occ_max[eid],
            )
        return out


def run_slot(
    net: StreetNetwork,
    layouts: Mapping[str, DiscreteLayout],
    due: Sequence[TripRequest],
    buffer_in: TripBuffer,
    params: SimParams,
    seed,
    slot_index: int = 0,
) -> SlotResult:
    """Simulate one slot and carry whatever is unfinished into the returned buffer."""
    world = World(net, layouts, params, seed, slot_index)
    world.restore_trips(buffer_in)
    world.schedule(due)
    world.run()
    buffer_out = world.buffer_unfinished()
    return SlotResult(world.observations(), buffer_out, list(world.completed))
