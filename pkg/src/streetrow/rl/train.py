"""Multi-agent training loop, evaluation days and checkpoint persistence.

Every random stream derives from one root seed through
``SeedSequence(entropy=seed, spawn_key=(component, episode, slot, ...))``, so a
resumed run only needs the episode counter to continue bit-for-bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from ..netmodel import (DEFAULT_MINIMA, QuantizationConfig, RowAllocation, StreetNetwork,
                        project_action, quantize_layout)
from ..reward import slot_reward
from ..scenario import ScenarioSpec, sample_slot_demand
from ..sim import SimParams, SlotObservation, TripBuffer, run_slot
from .agent import (ACTION_DIM, AgentBundle, Batch, PeerBatch, ReplayBuffer, Transition,
                    act, make_agent, soft_update, update_agent)

CRITIC_SCOPES = ("local", "neighborhood", "global")
N_FEATURES = 11
CHECKPOINT_FORMAT = "streetrow-checkpoint"
CHECKPOINT_VERSION = 1

# rng components
_INIT, _DEMAND, _SIM, _NOISE, _REPLAY, _EVAL_DEMAND, _EVAL_SIM = range(7)

METRIC_COLUMNS = (
    "episode", "scenario", "seed", "total_reward", "r_sidewalk_sum", "r_ped_sum",
    "r_veh_sum", "r_park_sum", "mean_beta_sidewalk", "mean_beta_veh", "mean_beta_park",
    "buffer_restorations", "expired_parking_requests",
)
EDGE_COLUMNS = (
    "episode", "edge_id", "total", "r_sidewalk", "r_ped", "r_veh", "r_park",
    "beta_sidewalk", "beta_veh", "beta_park", "n_lanes", "parking_capacity",
    "k_dem", "np", "nv",
)
SLOT_COLUMNS = (
    "day", "slot", "edge_id", "beta_sidewalk", "beta_veh", "beta_faci", "beta_park",
    "n_lanes", "parking_capacity", "r_sidewalk", "r_ped", "r_veh", "r_park", "total",
)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.95
    tau: float = 0.01
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 100_000
    hidden: tuple = (64, 64)
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ou_sigma_final: float = 0.02
    updates_per_slot: int = 1
    critic_scope: str = "neighborhood"
    episodes: int = 150
    seed: int = 0
    action_scale: float = 3.0
    minima: tuple = DEFAULT_MINIMA
    np_scale: float = 20.0
    nv_scale: float = 200.0
    k_dem_scale: float = 20.0
    checkpoint_every: int = 10

    def __post_init__(self):
        problems = []
        if not 0 < self.gamma < 1:
            problems.append("gamma must lie in (0, 1)")
        if not 0 < self.tau <= 1:
            problems.append("tau must lie in (0, 1]")
        for name in ("actor_lr", "critic_lr", "ou_theta", "action_scale",
                     "np_scale", "nv_scale", "k_dem_scale"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if self.ou_sigma < 0 or self.ou_sigma_final < 0:
            problems.append("noise scales must be nonnegative")
        for name in ("batch_size", "buffer_capacity", "updates_per_slot", "checkpoint_every"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name} must be at least 1")
        if self.batch_size > self.buffer_capacity:
            problems.append("batch_size exceeds buffer_capacity")
        if self.episodes < 0:
            problems.append("episodes must be nonnegative")
        if self.critic_scope not in CRITIC_SCOPES:
            problems.append(f"critic_scope must be one of {', '.join(CRITIC_SCOPES)}")
        if not 0 <= self.seed < 2 ** 64:
            problems.append("seed must be a 64-bit unsigned integer")
        if len(self.minima) != 3 or min(self.minima) < 0:
            problems.append("minima needs three nonnegative entries")
        if problems:
            raise ValueError("; ".join(problems))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["minima"] = list(self.minima)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ValueError(f"unknown training options: {', '.join(unknown)}")
        kw = dict(d)
        for key in ("hidden", "minima"):
            if key in kw:
                kw[key] = tuple(kw[key])
        for key in ("batch_size", "buffer_capacity", "updates_per_slot", "episodes",
                    "seed", "checkpoint_every"):
            if key in kw:
                kw[key] = int(kw[key])
        return cls(**kw)

    def sigma_at(self, episode: int) -> float:
        """Exploration scale, decaying linearly across the configured episodes."""
        if self.episodes <= 1:
            return self.ou_sigma
        frac = min(episode / (self.episodes - 1), 1.0)
        return self.ou_sigma + (self.ou_sigma_final - self.ou_sigma) * frac


def edge_features(alloc: RowAllocation, obs: SlotObservation, slot_index: int,
                  config: TrainConfig, slots_per_day: int = 48) -> np.ndarray:
    phase = 2.0 * math.pi * slot_index / slots_per_day
    return np.array([
        alloc.beta_sidewalk, alloc.beta_veh, alloc.beta_park,
        obs.np_e / config.np_scale,
        obs.nv_e / config.nv_scale,
        obs.mean_rel_ped_speed,
        obs.mean_rel_veh_speed,
        obs.k_dem / config.k_dem_scale,
        obs.k_occupied_mean / max(obs.k_park, 1),
        math.sin(phase), math.cos(phase),
    ])


def peer_indices(net: StreetNetwork, scope: str) -> list[list[int]]:
    n = len(net.edges)
    if scope == "local":
        return [[] for _ in range(n)]
    if scope == "global":
        return [[j for j in range(n) if j != i] for i in range(n)]
    idx = net.edge_index
    return [[idx[f] for f in net.neighbours(e.id)] for e in net.edges]


def _seq(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


def _int_seed(seed: int, *key: int) -> int:
    return int(_seq(seed, *key).generate_state(1, np.uint64)[0])


@dataclass
class DayRecord:
    """What one simulated day produced, before it is flattened into rows."""
    rewards: np.ndarray          # (slots, edges, 4)
    betas: np.ndarray            # (slots, edges, 4): sidewalk, veh, faci, park
    lanes: np.ndarray            # (slots, edges)
    capacity: np.ndarray         # (slots, edges)
    k_dem: np.ndarray
    np_e: np.ndarray
    nv_e: np.ndarray
    restorations: int = 0
    expired: int = 0
    losses: list = field(default_factory=list)


class Trainer:
    def __init__(
        self,
        net: StreetNetwork,
        spec: ScenarioSpec,
        config: TrainConfig = TrainConfig(),
        sim_params: SimParams = SimParams(),
        quant: QuantizationConfig = QuantizationConfig(),
    ):
        self.net = net
        self.spec = spec
        self.config = config
        self.sim_params = sim_params
        self.quant = quant
        self.slots = sim_params.slots_per_day
        self.peers = peer_indices(net, config.critic_scope)
        width = N_FEATURES + ACTION_DIM
        self.agents: list[AgentBundle] = []
        for i, e in enumerate(net.edges):
            rng = np.random.default_rng(_seq(config.seed, _INIT, i))
            self.agents.append(make_agent(
                e.id, N_FEATURES, width * len(self.peers[i]), config.hidden, rng,
                config.actor_lr, config.critic_lr, config.action_scale,
                config.ou_theta, config.ou_sigma,
            ))
        self.replay = ReplayBuffer(config.buffer_capacity)
        self.episodes_done = 0
        self.metrics: list[dict] = []
        self.edge_metrics: list[dict] = []

    # -- one day -----------------------------------------------------------

    def _allocations(self, raw: np.ndarray) -> list[RowAllocation]:
        return [project_action(r, e.beta_faci, self.config.minima) for r, e in zip(raw, self.net.edges)]

    def initial_states(self) -> np.ndarray:
        empty = SlotObservation()
        allocs = self._allocations(np.zeros((len(self.agents), ACTION_DIM)))
        return np.stack([edge_features(a, empty, 0, self.config, self.slots) for a in allocs])

    def run_day(self, demand_seed: int, sim_key: Callable[[int], np.random.SeedSequence],
                explore: bool, learn: bool, episode: int = 0) -> DayRecord:
        cfg, net = self.config, self.net
        n = len(self.agents)
        rec = DayRecord(
            rewards=np.zeros((self.slots, n, 4)), betas=np.zeros((self.slots, n, 4)),
            lanes=np.zeros((self.slots, n), dtype=int), capacity=np.zeros((self.slots, n), dtype=int),
            k_dem=np.zeros((self.slots, n), dtype=int), np_e=np.zeros((self.slots, n), dtype=int),
            nv_e=np.zeros((self.slots, n), dtype=int),
        )
        if explore:
            sigma = cfg.sigma_at(episode)
            for ag in self.agents:
                ag.noise.sigma = sigma
                ag.noise.reset()
        states = self.initial_states()
        buffer = TripBuffer()
        for slot in range(self.slots):
            raw = np.empty((n, ACTION_DIM))
            for i, ag in enumerate(self.agents):
                rng = np.random.default_rng(_seq(cfg.seed, _NOISE, episode, slot, i)) if explore else None
                raw[i] = act(ag, states[i], explore, rng)
            allocs = self._allocations(raw)
            layouts = {e.id: quantize_layout(a, e, self.quant) for a, e in zip(allocs, net.edges)}
            due = sample_slot_demand(self.spec, slot, net, demand_seed)
            result = run_slot(net, layouts, due, buffer, self.sim_params, sim_key(slot), slot)
            buffer = result.buffer_out

            nxt = self.slots if slot + 1 == self.slots else slot + 1
            next_states = np.empty_like(states)
            rewards = np.empty(n)
            for i, (e, a) in enumerate(zip(net.edges, allocs)):
                obs = result.obs[e.id]
                rv = slot_reward(a, obs)
                rewards[i] = rv.total
                rec.rewards[slot, i] = (rv.r_sidewalk, rv.r_ped, rv.r_veh, rv.r_park)
                rec.betas[slot, i] = (a.beta_sidewalk, a.beta_veh, a.beta_faci, a.beta_park)
                lay = layouts[e.id]
                rec.lanes[slot, i] = lay.n_lanes
                rec.capacity[slot, i] = lay.parking_capacity
                rec.k_dem[slot, i] = obs.k_dem
                rec.np_e[slot, i] = obs.np_e
                rec.nv_e[slot, i] = obs.nv_e
                rec.expired += obs.expired_requests
                next_states[i] = edge_features(a, obs, nxt % self.slots, cfg, self.slots)

            if learn:
                self.replay.push(Transition(states, raw, rewards, next_states, slot + 1 == self.slots))
                for u in range(cfg.updates_per_slot):
                    if len(self.replay) < cfg.batch_size:
                        break
                    rng = np.random.default_rng(_seq(cfg.seed, _REPLAY, episode, slot, u))
                    rec.losses.append(self._update_all(rng))
            states = next_states
        rec.restorations = buffer.restoration_count
        return rec

    def _update_all(self, rng: np.random.Generator) -> float:
        cfg = self.config
        batch = self.replay.sample(cfg.batch_size, rng)
        B = len(batch)
        # every agent sees the same frozen snapshot of target next-actions
        next_actions = np.stack([ag.target_actor(batch.next_states[:, i]) for i, ag in enumerate(self.agents)], axis=1)
        total_loss = 0.0
        for i, ag in enumerate(self.agents):
            own = _slice_agent(batch, i)
            peers = None
            if self.peers[i]:
                p = self.peers[i]
                peers = PeerBatch(
                    states=batch.states[:, p].reshape(B, -1),
                    actions=batch.actions[:, p].reshape(B, -1),
                    next_states=batch.next_states[:, p].reshape(B, -1),
                    next_actions=next_actions[:, p].reshape(B, -1),
                )
            total_loss += update_agent(ag, own, peers, cfg.gamma)["critic_loss"]
            soft_update(ag, cfg.tau)
        return total_loss / len(self.agents)

    # -- episodes ----------------------------------------------------------

    def train_episode(self) -> dict:
        ep = self.episodes_done
        seed = self.config.seed
        rec = self.run_day(_int_seed(seed, _DEMAND, ep), lambda s: _seq(seed, _SIM, ep, s),
                           explore=True, learn=True, episode=ep)
        row = episode_row(ep, self.spec.id, seed, rec)
        self.metrics.append(row)
        self.edge_metrics.extend(edge_rows(ep, self.net, rec))
        self.episodes_done += 1
        return row

    def train(self, episodes: int | None = None,
              on_episode: Callable[["Trainer", dict], None] | None = None) -> list[dict]:
        target = self.config.episodes if episodes is None else episodes
        while self.episodes_done < target:
            row = self.train_episode()
            if on_episode is not None:
                on_episode(self, row)
        return self.metrics

    def evaluate(self, days: int = 1, seed: int | None = None) -> tuple[list[dict], list[dict]]:
        """Greedy days without learning; returns (per-day rows, per-slot rows)."""
        seed = self.config.seed if seed is None else seed
        day_rows, slot_rows = [], []
        for d in range(days):
            rec = self.run_day(_int_seed(seed, _EVAL_DEMAND, d), lambda s: _seq(seed, _EVAL_SIM, d, s),
                               explore=False, learn=False)
            day_rows.append(episode_row(d, self.spec.id, seed, rec))
            slot_rows.extend(slot_detail_rows(d, self.net, rec))
        return day_rows, slot_rows


def _slice_agent(batch: Batch, i: int) -> Batch:
    return Batch(batch.states[:, i], batch.actions[:, i], batch.rewards[:, i],
                 batch.next_states[:, i], batch.terminals)


def episode_row(episode: int, scenario: int, seed: int, rec: DayRecord) -> dict:
    sums = rec.rewards.sum(axis=(0, 1))
    means = rec.betas.mean(axis=(0, 1))
    return {
        "episode": episode, "scenario": scenario, "seed": seed,
        "total_reward": float(rec.rewards.sum()),
        "r_sidewalk_sum": float(sums[0]), "r_ped_sum": float(sums[1]),
        "r_veh_sum": float(sums[2]), "r_park_sum": float(sums[3]),
        "mean_beta_sidewalk": float(means[0]), "mean_beta_veh": float(means[1]),
        "mean_beta_park": float(means[3]),
        "buffer_restorations": int(rec.restorations),
        "expired_parking_requests": int(rec.expired),
    }


def edge_rows(episode: int, net: StreetNetwork, rec: DayRecord) -> list[dict]:
    rsum = rec.rewards.sum(axis=0)
    bmean = rec.betas.mean(axis=0)
    out = []
    for i, e in enumerate(net.edges):
        out.append({
            "episode": episode, "edge_id": e.id, "total": float(rsum[i].sum()),
            "r_sidewalk": float(rsum[i, 0]), "r_ped": float(rsum[i, 1]),
            "r_veh": float(rsum[i, 2]), "r_park": float(rsum[i, 3]),
            "beta_sidewalk": float(bmean[i, 0]), "beta_veh": float(bmean[i, 1]),
            "beta_park": float(bmean[i, 3]),
            "n_lanes": float(rec.lanes[:, i].mean()),
            "parking_capacity": float(rec.capacity[:, i].mean()),
            "k_dem": int(rec.k_dem[:, i].sum()), "np": int(rec.np_e[:, i].sum()),
            "nv": int(rec.nv_e[:, i].sum()),
        })
    return out


def slot_detail_rows(day: int, net: StreetNetwork, rec: DayRecord) -> list[dict]:
    out = []
    for s in range(rec.rewards.shape[0]):
        for i, e in enumerate(net.edges):
            r = rec.rewards[s, i]
            b = rec.betas[s, i]
            out.append({
                "day": day, "slot": s, "edge_id": e.id,
                "beta_sidewalk": float(b[0]), "beta_veh": float(b[1]),
                "beta_faci": float(b[2]), "beta_park": float(b[3]),
                "n_lanes": int(rec.lanes[s, i]), "parking_capacity": int(rec.capacity[s, i]),
                "r_sidewalk": float(r[0]), "r_ped": float(r[1]), "r_veh": float(r[2]),
                "r_park": float(r[3]), "total": float(r.sum()),
            })
    return out


# ---------------------------------------------------------------------------
# checkpoints


class CheckpointError(ValueError):
    pass


def _net_arrays(prefix: str, ag: AgentBundle) -> dict[str, np.ndarray]:
    return {
        f"{prefix}_actor": ag.actor.get_flat(),
        f"{prefix}_critic": ag.critic.get_flat(),
        f"{prefix}_target_actor": ag.target_actor.get_flat(),
        f"{prefix}_target_critic": ag.target_critic.get_flat(),
        f"{prefix}_actor_opt": np.concatenate([a.ravel() for a in ag.actor_opt.state_arrays()]),
        f"{prefix}_critic_opt": np.concatenate([a.ravel() for a in ag.critic_opt.state_arrays()]),
        f"{prefix}_noise": ag.noise.state.copy(),
    }


def save_checkpoint(trainer: Trainer, directory: str | Path, extra: Mapping | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {}
    agents_meta = []
    for i, ag in enumerate(trainer.agents):
        arrays.update(_net_arrays(f"a{i}", ag))
        agents_meta.append({
            "edge_id": ag.edge_id,
            "actor_widths": list(ag.actor.layer_widths),
            "critic_widths": list(ag.critic.layer_widths),
            "actor_opt_step": ag.actor_opt.t,
            "critic_opt_step": ag.critic_opt.t,
            "noise_sigma": ag.noise.sigma,
        })
    entries = trainer.replay.entries
    if entries:
        arrays["replay_states"] = np.stack([t.state for t in entries])
        arrays["replay_actions"] = np.stack([t.action for t in entries])
        arrays["replay_rewards"] = np.stack([t.reward for t in entries])
        arrays["replay_next_states"] = np.stack([t.next_state for t in entries])
        arrays["replay_terminals"] = np.array([t.terminal for t in entries])
    np.savez(directory / "state.npz", **arrays)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "episodes_done": trainer.episodes_done,
        "network": trainer.net.name,
        "edge_ids": list(trainer.net.edge_ids),
        "n_features": N_FEATURES,
        "config": trainer.config.to_dict(),
        "sim_params": asdict(trainer.sim_params),
        "quantization": asdict(trainer.quant),
        "scenario": trainer.spec.to_dict(),
        "rng": {"root_seed": trainer.config.seed,
                "derivation": "SeedSequence(entropy=root_seed, spawn_key=(component, episode, slot[, edge]))"},
        "replay_size": len(entries),
        "agents": agents_meta,
        "metrics": trainer.metrics,
        "edge_metrics": trainer.edge_metrics,
    }
    if extra:
        doc.update(extra)
    (directory / "checkpoint.json").write_text(json.dumps(doc) + "\n")
    return directory


def read_checkpoint_meta(directory: str | Path) -> dict:
    path = Path(directory) / "checkpoint.json"
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path} is not a version-{CHECKPOINT_VERSION} checkpoint")
    return doc


def load_checkpoint(trainer: Trainer, directory: str | Path, restore_progress: bool = True) -> dict:
    """Load parameters (and, optionally, replay and metrics) into ``trainer``."""
    doc = read_checkpoint_meta(directory)
    ids = list(trainer.net.edge_ids)
    if doc["edge_ids"] != ids:
        raise CheckpointError(
            f"checkpoint has {len(doc['edge_ids'])} agents, network has {len(ids)} edges"
            + ("" if len(doc["edge_ids"]) != len(ids) else " (edge ids differ)")
        )
    if doc["n_features"] != N_FEATURES:
        raise CheckpointError(f"checkpoint feature width {doc['n_features']} != {N_FEATURES}")
    with np.load(Path(directory) / "state.npz") as z:
        arrays = {k: z[k] for k in z.files}
    for i, (ag, meta) in enumerate(zip(trainer.agents, doc["agents"])):
        if list(ag.critic.layer_widths) != meta["critic_widths"] or list(ag.actor.layer_widths) != meta["actor_widths"]:
            raise CheckpointError(f"agent {ag.edge_id}: layer widths differ from the checkpoint")
        ag.actor.set_flat(arrays[f"a{i}_actor"])
        ag.critic.set_flat(arrays[f"a{i}_critic"])
        ag.target_actor.set_flat(arrays[f"a{i}_target_actor"])
        ag.target_critic.set_flat(arrays[f"a{i}_target_critic"])
        _load_opt(ag.actor_opt, arrays[f"a{i}_actor_opt"], meta["actor_opt_step"])
        _load_opt(ag.critic_opt, arrays[f"a{i}_critic_opt"], meta["critic_opt_step"])
        ag.noise.state = arrays[f"a{i}_noise"].copy()
        ag.noise.sigma = meta["noise_sigma"]
    if restore_progress:
        trainer.replay.entries.clear()
        if doc["replay_size"]:
            for s, a, r, s2, d in zip(arrays["replay_states"], arrays["replay_actions"],
                                      arrays["replay_rewards"], arrays["replay_next_states"],
                                      arrays["replay_terminals"]):
                trainer.replay.push(Transition(s, a, r, s2, bool(d)))
        trainer.episodes_done = doc["episodes_done"]
        trainer.metrics = list(doc["metrics"])
        trainer.edge_metrics = list(doc["edge_metrics"])
    return doc


def _load_opt(opt, flat: np.ndarray, step: int) -> None:
    pieces, k = [], 0
    for ref in opt.state_arrays():
        pieces.append(flat[k:k + ref.size].reshape(ref.shape))
        k += ref.size
    if k != flat.size:
        raise CheckpointError("optimizer state size mismatch")
    opt.load_arrays(pieces, step)
