"""Advantage actor-critic with an entropy bonus, updated once per episode."""

from __future__ import annotations

import numpy as np

from mvmem.autodiff import tensor as T
from mvmem.autodiff.nn import MLP
from mvmem.autodiff.params import Adam, ParamStore
from mvmem.errors import ShapeMismatch


def discounted_returns(rewards, gamma, bootstrap=0.0):
    out = np.empty(len(rewards))
    acc = bootstrap
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def actor_critic_loss(policy, value, states, actions, returns, advantages, entropy_coef=0.01, value_coef=0.5):
    """Policy-gradient, value-regression and entropy terms; returns (loss, parts).

    ``advantages`` enter as constants (returns minus the critic's estimate
    before the update).
    """
    s = T.as_tensor(states)
    logp = T.log_softmax(policy(s))
    v = T.reshape(value(s), (s.shape[0],))
    pg = -T.mean(T.mul(T.pick(logp, actions), T.Tensor(advantages)))
    vl = T.mean(T.square(v - T.Tensor(returns)))
    entropy = -T.mean(T.sum_(T.mul(T.exp(logp), logp), axis=1))
    loss = pg + value_coef * vl - entropy_coef * entropy
    return loss, {"policy": pg.item(), "value": vl.item(), "entropy": entropy.item()}


class ActorCritic:
    def __init__(self, state_dim, num_actions, rng, hidden=64, learning_rate=5e-4, gamma=0.99,
                 entropy_coef=0.01, value_coef=0.5):
        if not 0.0 <= gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
        hidden = (hidden,) if isinstance(hidden, int) else tuple(hidden)
        self.state_dim = state_dim
        self.num_actions = num_actions
        self.gamma = gamma
        self.entropy_coef = entropy_coef
        self.value_coef = value_coef
        self.store = ParamStore()
        self.policy = MLP(self.store, "pi", (state_dim, *hidden, num_actions), rng)
        self.value = MLP(self.store, "v", (state_dim, *hidden, 1), rng)
        self.opt = Adam(self.store, learning_rate)

    def probabilities(self, states):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if states.shape[1] != self.state_dim:
            raise ShapeMismatch(f"state dimension {states.shape[1]} != {self.state_dim}")
        with T.no_grad():
            return T.softmax(self.policy(T.Tensor(states))).data

    def values(self, states):
        with T.no_grad():
            return self.value(T.Tensor(np.atleast_2d(states))).data[:, 0]

    def act(self, state, greedy, rng):
        p = self.probabilities(state)[0]
        if greedy:
            return int(np.argmax(p))
        # inverse-CDF draw keeps exactly one uniform per action
        u = rng.random()
        return int(min(np.searchsorted(np.cumsum(p), u, side="right"), self.num_actions - 1))

    def update(self, states, actions, rewards, bootstrap_state=None):
        """One gradient step on a finished (or truncated) rollout."""
        tail = 0.0 if bootstrap_state is None else float(self.values(bootstrap_state)[0])
        returns = discounted_returns(rewards, self.gamma, tail)
        advantages = returns - self.values(states)
        self.opt.zero_grad()
        loss, parts = actor_critic_loss(self.policy, self.value, states, actions, returns, advantages,
                                        self.entropy_coef, self.value_coef)
        T.backward(loss)
        self.opt.step()
        return loss.item(), parts
