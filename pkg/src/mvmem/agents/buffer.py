"""Fixed-capacity FIFO replay buffer with seeded uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mvmem.errors import NotEnoughData, ShapeMismatch


@dataclass
class Transition:
    obs: np.ndarray  # [N, D]
    action: int
    extrinsic_reward: float
    next_obs: np.ndarray
    done: bool

    def __post_init__(self):
        if np.shape(self.obs) != np.shape(self.next_obs):
            raise ShapeMismatch(f"obs {np.shape(self.obs)} and next_obs {np.shape(self.next_obs)} differ")


@dataclass
class Batch:
    obs: np.ndarray  # [B, N, D]
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    indices: np.ndarray  # insertion order of each sampled transition

    def __len__(self):
        return len(self.actions)

    def transitions(self):
        return [
            Transition(self.obs[i], int(self.actions[i]), float(self.rewards[i]), self.next_obs[i], bool(self.dones[i]))
            for i in range(len(self))
        ]


class ReplayBuffer:
    """Ring storage; observations are kept in ``obs_dtype`` (uint8 suits binary views)."""

    def __init__(self, capacity, obs_shape, obs_dtype=np.float64):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.obs_shape = tuple(obs_shape)
        self._obs = np.zeros((capacity, *self.obs_shape), dtype=obs_dtype)
        self._next = np.zeros((capacity, *self.obs_shape), dtype=obs_dtype)
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._dones = np.zeros(capacity, dtype=bool)
        self._stamp = np.zeros(capacity, dtype=np.int64)
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def push(self, t: Transition):
        if np.shape(t.obs) != self.obs_shape:
            raise ShapeMismatch(f"transition obs shape {np.shape(t.obs)} != buffer shape {self.obs_shape}")
        slot = self.inserted % self.capacity
        self._obs[slot] = t.obs
        self._next[slot] = t.next_obs
        self._actions[slot] = t.action
        self._rewards[slot] = t.extrinsic_reward
        self._dones[slot] = t.done
        self._stamp[slot] = self.inserted
        self.inserted += 1

    def sample(self, batch_size, rng):
        """``batch_size`` distinct transitions drawn uniformly."""
        size = len(self)
        if batch_size > size:
            raise NotEnoughData(f"asked for {batch_size} transitions, buffer holds {size}")
        slots = rng.choice(size, batch_size, replace=False)
        return Batch(
            self._obs[slots].astype(np.float64),
            self._actions[slots].copy(),
            self._rewards[slots].copy(),
            self._next[slots].astype(np.float64),
            self._dones[slots].copy(),
            self._stamp[slots].copy(),
        )

    def contents(self):
        """Stored transitions, oldest first."""
        size = len(self)
        start = self.inserted - size
        slots = [(start + i) % self.capacity for i in range(size)]
        return [
            Transition(self._obs[s].astype(np.float64), int(self._actions[s]), float(self._rewards[s]),
                       self._next[s].astype(np.float64), bool(self._dones[s]))
            for s in slots
        ]
