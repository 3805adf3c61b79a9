"""Per-edge actor-critic bundles, exploration noise and the shared replay memory."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .nets import BOUNDED, IDENTITY, Adam, Mlp

ACTION_DIM = 3


class OUNoise:
    """Ornstein-Uhlenbeck process sampled exactly at unit time steps.

    The exact update keeps the stationary deviation at ``sigma / sqrt(2 theta)``
    regardless of how large ``theta`` is.
    """

    def __init__(self, dim: int = ACTION_DIM, theta: float = 0.15, sigma: float = 0.2, mu: float = 0.0):
        if theta <= 0 or sigma < 0:
            raise ValueError("OU noise needs theta > 0 and sigma >= 0")
        self.theta, self.sigma, self.mu = theta, sigma, mu
        self.state = np.full(dim, mu, dtype=float)

    def reset(self) -> None:
        self.state[:] = self.mu

    @property
    def stationary_std(self) -> float:
        return self.sigma / math.sqrt(2.0 * self.theta)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        decay = math.exp(-self.theta)
        spread = self.sigma * math.sqrt((1.0 - decay * decay) / (2.0 * self.theta))
        eps = rng.standard_normal(self.state.shape)
        self.state = self.mu + (self.state - self.mu) * decay + spread * eps
        return self.state.copy()


@dataclass(frozen=True)
class Transition:
    """One joint step: row ``i`` of each array belongs to agent ``i``."""
    state: np.ndarray        # (agents, features)
    action: np.ndarray       # (agents, 3)
    reward: np.ndarray       # (agents,)
    next_state: np.ndarray   # (agents, features)
    terminal: bool


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


@dataclass
class PeerBatch:
    """Concatenated peer context seen by a centralised critic."""
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    next_actions: np.ndarray


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.entries: deque = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.entries)

    def push(self, transition: Transition) -> None:
        self.entries.append(transition)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if batch_size > len(self.entries):
            raise ValueError(f"replay holds {len(self.entries)} transitions, batch needs {batch_size}")
        return rng.choice(len(self.entries), size=batch_size, replace=False)

    def gather(self, indices: Sequence[int]) -> Batch:
        picked = [self.entries[i] for i in indices]
        return Batch(
            states=np.stack([t.state for t in picked]),
            actions=np.stack([t.action for t in picked]),
            rewards=np.stack([t.reward for t in picked]),
            next_states=np.stack([t.next_state for t in picked]),
            terminals=np.array([t.terminal for t in picked], dtype=float),
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        return self.gather(self.sample_indices(batch_size, rng))


@dataclass
class AgentBundle:
    edge_id: str
    actor: Mlp
    critic: Mlp
    target_actor: Mlp
    target_critic: Mlp
    actor_opt: Adam
    critic_opt: Adam
    noise: OUNoise
    peer_width: int = 0   # extra critic inputs beyond own state and action
    last_losses: dict = field(default_factory=dict)


def make_agent(
    edge_id: str,
    state_dim: int,
    peer_width: int,
    hidden: Sequence[int],
    rng: np.random.Generator,
    actor_lr: float = 1e-4,
    critic_lr: float = 1e-3,
    action_scale: float = 3.0,
    ou_theta: float = 0.15,
    ou_sigma: float = 0.2,
) -> AgentBundle:
    actor = Mlp([state_dim, *hidden, ACTION_DIM], rng, BOUNDED, action_scale)
    critic = Mlp([state_dim + ACTION_DIM + peer_width, *hidden, 1], rng, IDENTITY)
    return AgentBundle(
        edge_id=edge_id,
        actor=actor,
        critic=critic,
        target_actor=actor.copy(),
        target_critic=critic.copy(),
        actor_opt=Adam.for_net(actor, actor_lr),
        critic_opt=Adam.for_net(critic, critic_lr),
        noise=OUNoise(ACTION_DIM, ou_theta, ou_sigma),
        peer_width=peer_width,
    )


def act(agent: AgentBundle, state: np.ndarray, explore: bool,
        rng: np.random.Generator | None = None) -> np.ndarray:
    action = agent.actor(state)
    if explore:
        if rng is None:
            raise ValueError("exploration needs a random generator")
        action = action + agent.noise.sample(rng)
    return action


def _critic_input(states, actions, peer_states=None, peer_actions=None) -> np.ndarray:
    parts = [states, actions]
    if peer_states is not None:
        parts += [peer_states, peer_actions]
    return np.concatenate(parts, axis=1)


def critic_targets(agent: AgentBundle, batch: Batch, peers: PeerBatch | None, gamma: float) -> np.ndarray:
    next_a = agent.target_actor(batch.next_states)
    x = _critic_input(batch.next_states, next_a,
                      None if peers is None else peers.next_states,
                      None if peers is None else peers.next_actions)
    q_next = agent.target_critic(x)[:, 0]
    return batch.rewards + gamma * (1.0 - batch.terminals) * q_next


def update_agent(agent: AgentBundle, batch: Batch, peers: PeerBatch | None, gamma: float) -> dict:
    """One critic step toward the bootstrapped target, then one actor step."""
    n = len(batch)
    if (peers is None) != (agent.peer_width == 0):
        raise ValueError(f"agent {agent.edge_id}: peer context does not match critic width")
    y = critic_targets(agent, batch, peers, gamma)

    peer_s = None if peers is None else peers.states
    peer_a = None if peers is None else peers.actions
    q, cache = agent.critic.forward(_critic_input(batch.states, batch.actions, peer_s, peer_a))
    err = q[:, 0] - y
    critic_loss = float(np.mean(err ** 2))
    grads, _ = agent.critic.backward(cache, (2.0 / n) * err[:, None])
    agent.critic_opt.step(agent.critic.params(), grads)

    mu, a_cache = agent.actor.forward(batch.states)
    q_pi, c_cache = agent.critic.forward(_critic_input(batch.states, mu, peer_s, peer_a))
    _, dx = agent.critic.backward(c_cache, np.full((n, 1), 1.0 / n))
    s_dim = batch.states.shape[1]
    dq_da = dx[:, s_dim:s_dim + ACTION_DIM]
    # ascend Q: feed the negated action gradient into the actor's descent step
    a_grads, _ = agent.actor.backward(a_cache, -dq_da)
    agent.actor_opt.step(agent.actor.params(), a_grads)

    report = {"critic_loss": critic_loss, "actor_objective": float(np.mean(q_pi))}
    agent.last_losses = report
    return report


def soft_update(agent: AgentBundle, tau: float) -> None:
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    for target, source in ((agent.target_actor, agent.actor), (agent.target_critic, agent.critic)):
        for t, s in zip(target.params(), source.params()):
            t *= 1.0 - tau
            t += tau * s
