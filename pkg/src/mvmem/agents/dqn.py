"""One-step Q-learning with a periodically synced target network."""

from __future__ import annotations

import numpy as np

from mvmem.autodiff import tensor as T
from mvmem.autodiff.nn import MLP
from mvmem.autodiff.params import Adam, ParamStore
from mvmem.errors import ShapeMismatch


def q_loss(qnet, states, actions, targets):
    """Mean squared TD error of Q(s, a) against fixed ``targets``."""
    q = qnet(T.as_tensor(states))
    err = T.pick(q, actions) - T.Tensor(targets)
    return T.mean(T.square(err))


def greedy_action(values):
    """Index of the largest value; ties go to the lowest index."""
    return int(np.argmax(values))


class QAgent:
    def __init__(self, state_dim, num_actions, rng, hidden=64, learning_rate=1e-3, gamma=0.99, prefix="q"):
        if not 0.0 <= gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
        self.state_dim = state_dim
        self.num_actions = num_actions
        self.gamma = gamma
        self.prefix = prefix
        hidden = (hidden,) if isinstance(hidden, int) else tuple(hidden)
        self.sizes = (state_dim, *hidden, num_actions)
        self.store = ParamStore()
        self.qnet = MLP(self.store, prefix, self.sizes, rng)
        # target weights are overwritten by sync(), so their init draws must not touch ``rng``
        self.target_store = ParamStore()
        self.target = MLP(self.target_store, prefix, self.sizes, np.random.default_rng(0))
        self.sync()
        self.opt = Adam(self.store, learning_rate)

    def sync(self):
        self.target_store.load_state(self.store.state())

    def q_values(self, states, target=False):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if states.shape[1] != self.state_dim:
            raise ShapeMismatch(f"state dimension {states.shape[1]} != {self.state_dim}")
        net = self.target if target else self.qnet
        with T.no_grad():
            return net(T.Tensor(states)).data

    def act(self, state, epsilon, rng):
        """Epsilon-greedy choice. Always draws one uniform so the stream advances identically."""
        q = self.q_values(state)[0]
        explore = rng.random() < epsilon
        if explore:
            return int(rng.integers(self.num_actions))
        return greedy_action(q)

    def td_targets(self, rewards, next_states, dones):
        nq = self.q_values(next_states, target=True).max(axis=1)
        return rewards + self.gamma * np.where(dones, 0.0, nq)

    def update(self, states, actions, rewards, next_states, dones):
        targets = self.td_targets(rewards, next_states, dones)
        self.opt.zero_grad()
        loss = q_loss(self.qnet, states, actions, targets)
        T.backward(loss)
        self.opt.step()
        return loss.item()
