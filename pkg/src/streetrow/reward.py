"""Per-edge slot rewards and the episode return built from them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .netmodel import RowAllocation
from .sim import SlotObservation


@dataclass(frozen=True)
class RewardVector:
    r_sidewalk: float
    r_ped: float
    r_veh: float
    r_park: float

    @property
    def total(self) -> float:
        return self.r_sidewalk + self.r_ped + self.r_veh + self.r_park


def reward_sidewalk(alloc: RowAllocation) -> float:
    return alloc.beta_sidewalk


def relative_speed_mean(samples: Sequence[float], v_star: float) -> float:
    """Mean of ``v / v_star`` over speed samples; 0 for an empty edge."""
    if len(samples) == 0:
        return 0.0
    return sum(v / v_star for v in samples) / len(samples)


def reward_ped(obs: SlotObservation) -> float:
    return obs.mean_rel_ped_speed if obs.np_e > 0 else 0.0


def reward_veh(obs: SlotObservation) -> float:
    return obs.mean_rel_veh_speed if obs.nv_e > 0 else 0.0


def reward_park(k_dem: int, k_park: int) -> float:
    """Parking service level, capped at 1 and zero without bays."""
    if k_dem < 0 or k_park < 0:
        raise ValueError("parking counts must be nonnegative")
    if k_park == 0:
        return 0.0
    return min(k_dem / k_park, 1.0)


def slot_reward(alloc: RowAllocation, obs: SlotObservation) -> RewardVector:
    return RewardVector(
        r_sidewalk=reward_sidewalk(alloc),
        r_ped=reward_ped(obs),
        r_veh=reward_veh(obs),
        r_park=reward_park(obs.k_dem, obs.k_park),
    )


def episode_return(vectors: Iterable[RewardVector]) -> float:
    """Sum of slot totals over every (edge, slot) pair supplied."""
    return sum(v.total for v in vectors)
