"""Numpy actor-critic learners, one per directed edge."""
from .agent import AgentBundle, OUNoise, ReplayBuffer, Transition, act, soft_update, update_agent
from .nets import Adam, Mlp, mlp_forward, mlp_gradients
from .train import TrainConfig, Trainer, load_checkpoint, save_checkpoint

__all__ = [
    "Adam", "AgentBundle", "Mlp", "OUNoise", "ReplayBuffer", "TrainConfig", "Trainer",
    "Transition", "act", "load_checkpoint", "mlp_forward", "mlp_gradients",
    "save_checkpoint", "soft_update", "update_agent",
]
