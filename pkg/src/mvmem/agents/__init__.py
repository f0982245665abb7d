"""Replay buffer, discrete-action agents and the intrinsic-reward training loops."""

from mvmem.agents.a2c import ActorCritic, actor_critic_loss, discounted_returns
from mvmem.agents.buffer import Batch, ReplayBuffer, Transition
from mvmem.agents.dqn import QAgent, greedy_action, q_loss
from mvmem.agents.loops import (
    COLUMNS,
    RunLog,
    build_models,
    evaluate_models,
    load_models,
    run_episodes,
    spawn_streams,
    train,
    train_off_policy,
    train_on_policy,
)

__all__ = [
    "COLUMNS",
    "ActorCritic",
    "Batch",
    "QAgent",
    "ReplayBuffer",
    "RunLog",
    "Transition",
    "actor_critic_loss",
    "build_models",
    "discounted_returns",
    "evaluate_models",
    "greedy_action",
    "load_models",
    "q_loss",
    "run_episodes",
    "spawn_streams",
    "train",
    "train_off_policy",
    "train_on_policy",
]
