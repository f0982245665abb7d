"""Training loops: replay-based Q-learning and episodic actor-critic, both with intrinsic rewards.

Each run draws from independent random streams (environment, action
sampling, buffer sampling, parameter init, auxiliary nets) spawned from the
run seed. Intrinsic rewards consume no randomness, so switching them off
leaves every other stream untouched.
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mvmem.agents.a2c import ActorCritic
from mvmem.agents.buffer import ReplayBuffer, Transition
from mvmem.agents.dqn import QAgent
from mvmem.autodiff import tensor as T
from mvmem.autodiff.nn import MLP
from mvmem.autodiff.params import ParamStore, load_checkpoint, save_checkpoint
from mvmem.encoder import MultiViewEncoder, states_from_features
from mvmem.envs import ACTIONS, make_env
from mvmem.exploration.rewards import (
    beta_at,
    multiview_intrinsic_rewards,
    multiview_query_rewards,
    re3_query_rewards,
    re3_rewards,
)

COLUMNS = (
    "step",
    "episode",
    "action",
    "extrinsic_reward",
    "intrinsic_reward",
    "beta",
    "total_reward",
    "loss_diff",
    "loss_con",
    "loss_adv_d",
    "loss_adv_g",
    "policy_loss",
    "disc_accuracy",
    "eval_return",
)
STREAMS = ("env", "action", "buffer", "init", "aux")


def spawn_streams(seed):
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


def eval_noise_seed(base, episode):
    return int(np.random.SeedSequence([base, episode]).generate_state(1)[0])


@dataclass
class RunLog:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return [r[name] for r in self.rows]


def _blank_row(**values):
    row = dict.fromkeys(COLUMNS)
    row.update(values)
    return row


# -- model assembly ------------------------------------------------------------------------


class Models:
    """Everything a run learns or freezes, plus the map from views to agent states."""

    def __init__(self, cfg, env, rngs):
        self.cfg = cfg
        self.num_cells = env.num_cells
        enc = cfg.encoder
        self.encoder = None
        if cfg.agent.state_source == "encoder":
            self.encoder = MultiViewEncoder(
                env.input_dim,
                env.num_views,
                rngs["init"],
                hidden=enc.hidden,
                latent_dim=enc.latent_dim,
                disc_hidden=enc.disc_hidden,
                weights=enc.loss_weights(),
                learning_rate=enc.learning_rate,
                disc_learning_rate=enc.disc_learning_rate,
            )
            state_dim = self.encoder.state_dim
        else:
            state_dim = env.num_cells
        a = cfg.agent
        if a.loop == "off_policy":
            self.agent = QAgent(state_dim, len(ACTIONS), rngs["init"], a.hidden, a.learning_rate, a.gamma)
        else:
            self.agent = ActorCritic(state_dim, len(ACTIONS), rngs["init"], a.hidden, a.learning_rate, a.gamma,
                                     a.entropy_coef, a.value_coef)
        self.re3 = None
        if cfg.exploration.mode.startswith("re3"):
            # frozen random projection of the first view
            store = ParamStore()
            self.re3 = MLP(store, "re3", (env.input_dim, enc.hidden, enc.latent_dim), rngs["aux"])
            self.re3_store = store

    def states(self, obs, cells=None):
        """Agent states for a batch of multi-view observations [B, N, D]."""
        if self.encoder is None:
            out = np.zeros((len(cells), self.num_cells))
            out[np.arange(len(cells)), cells] = 1.0
            return out, None
        x, y = self.encoder.features(obs)
        return states_from_features(x, y), (x, y)

    def re3_features(self, obs):
        with T.no_grad():
            return self.re3(T.Tensor(np.asarray(obs)[:, 0, :])).data

    def state_dict(self):
        out = OrderedDict()
        if self.encoder is not None:
            out.update(self.encoder.store.state())
        out.update(self.agent.store.state())
        return out

    def load_state_dict(self, state):
        if self.encoder is not None:
            self.encoder.store.load_state(OrderedDict((n, v) for n, v in state.items() if n in self.encoder.store))
        self.agent.store.load_state(OrderedDict((n, v) for n, v in state.items() if n in self.agent.store))
        if isinstance(self.agent, QAgent):
            self.agent.sync()


class IntrinsicReward:
    """Eq.-9-style or single-view rewards over a feature pool, by exploration mode."""

    def __init__(self, cfg, models):
        self.mode = cfg.exploration.mode
        self.k = cfg.exploration.k
        self.aggregate = cfg.exploration.re3_aggregate
        self.form = "raw_distance" if self.mode == "re3_raw" else "log1p_distance"
        self.models = models

    @property
    def enabled(self):
        return self.mode != "none"

    def pool_features(self, obs, feats):
        if self.mode == "mem":
            x, y = feats
            return [y[:, i] for i in range(y.shape[1])], x.mean(axis=1)
        return self.models.re3_features(obs)

    def over_pool(self, pool):
        if self.mode == "mem":
            specific, shared_mean = pool
            return multiview_intrinsic_rewards(specific, shared_mean, self.k)
        return re3_rewards(pool, self.k, self.form, self.aggregate)

    def query(self, pool, obs, feats):
        """Rewards of points outside ``pool`` (neighbours drawn from the pool)."""
        if self.mode == "mem":
            specific, shared_mean = self.pool_features(obs, feats)
            return multiview_query_rewards(specific, shared_mean, pool[0], pool[1], self.k)
        return re3_query_rewards(self.models.re3_features(obs), pool, self.k, self.form, self.aggregate)


# -- evaluation ------------------------------------------------------------------------------


def run_episodes(spec, policy, episodes, base_seed):
    """Roll out ``policy(views, env) -> action`` greedily; returns per-episode (return, success)."""
    results = []
    for e in range(episodes):
        env = make_env(spec, eval_noise_seed(base_seed, e))
        views = env.reset()
        ret, success = 0.0, False
        while True:
            res = env.step(policy(views, env))
            ret += res.extrinsic_reward
            views = res.obs
            if res.done:
                success = res.info["success"]
                break
        results.append((ret, success))
    return results


def greedy_policy(models):
    def policy(views, env):
        s, _ = models.states(np.asarray(views)[None], [env.cell_index()])
        if isinstance(models.agent, QAgent):
            return int(np.argmax(models.agent.q_values(s)[0]))
        return int(np.argmax(models.agent.probabilities(s)[0]))

    return policy


def evaluate_models(cfg, models, episodes=None, base_seed=None):
    spec = cfg.env.grid_spec()
    episodes = cfg.run.eval_episodes if episodes is None else episodes
    base_seed = spec.seed if base_seed is None else base_seed
    results = run_episodes(spec, greedy_policy(models), episodes, base_seed)
    returns = np.array([r for r, _ in results])
    success = float(np.mean([s for _, s in results]))
    return float(returns.mean()), float(returns.std()), success


def build_models(cfg, seed=0):
    env = make_env(cfg.env.grid_spec())
    return Models(cfg, env, spawn_streams(seed))


def load_models(cfg, path):
    models = build_models(cfg)
    models.load_state_dict(load_checkpoint(path))
    return models


# -- loops -----------------------------------------------------------------------------------


def _epsilon(a, t):
    frac = max(0.0, 1.0 - t / a.epsilon_decay_steps)
    return a.epsilon_end + (a.epsilon_start - a.epsilon_end) * frac


def _checkpoint(models, directory, tag):
    if directory is None:
        return
    Path(directory).mkdir(parents=True, exist_ok=True)
    save_checkpoint(Path(directory) / f"{tag}.ckpt", models.state_dict())


def _finish(log, cfg, seed, started, models, checkpoint_dir):
    _checkpoint(models, checkpoint_dir, "final")
    log.meta.update(seed=seed, wall_clock=time.perf_counter() - started, rows=len(log.rows))
    return log


def _maybe_eval(cfg, models, log, step, row):
    ret, _, success = evaluate_models(cfg, models)
    row["eval_return"] = ret
    log.meta.setdefault("evals", []).append((step, ret, success))
    target = cfg.run.stop_at_success
    if success >= (target if target is not None else 0.9) and log.meta.get("solved_at") is None:
        log.meta["solved_at"] = step
    return target is not None and success >= target


def train_off_policy(cfg, seed, on_row=None, checkpoint_dir=None):
    """Replay-based loop: one row per environment step."""
    started = time.perf_counter()
    rngs = spawn_streams(seed)
    env = make_env(cfg.env.grid_spec())
    models = Models(cfg, env, rngs)
    intrinsic = IntrinsicReward(cfg, models)
    a, x, run = cfg.agent, cfg.exploration, cfg.run
    schedule = x.schedule()
    store_dtype = np.uint8
    buf = ReplayBuffer(a.buffer_capacity, (env.num_views, env.input_dim), store_dtype)
    log = RunLog(meta={"solved_at": None})
    pool = None
    episode = 0
    views = env.reset()
    cell = env.cell_index()
    for t in range(run.t_max):
        state, feats = models.states(views[None], [cell])
        action = models.agent.act(state[0], _epsilon(a, t), rngs["action"])
        res = env.step(action)
        next_cell = env.cell_index()
        buf.push(Transition(views, action, res.extrinsic_reward, res.obs, res.info["success"]))
        beta = beta_at(schedule, t)
        r_int = 0.0
        if intrinsic.enabled and pool is not None:
            r_int = float(intrinsic.query(pool, views[None], feats)[0])
        row = _blank_row(step=t, episode=episode, action=action, extrinsic_reward=res.extrinsic_reward,
                         intrinsic_reward=r_int, beta=beta, total_reward=res.extrinsic_reward + beta * r_int)

        if len(buf) >= a.warmup_steps and (t + 1) % a.update_every == 0:
            batch = buf.sample(a.batch_size, rngs["buffer"])
            cells = None
            if models.encoder is None:
                cells = _cells_of(batch.obs, env)
                next_cells = _cells_of(batch.next_obs, env)
            s, feats_b = models.states(batch.obs, cells)
            s_next, _ = models.states(batch.next_obs, None if cells is None else next_cells)
            rewards = batch.rewards
            if intrinsic.enabled:
                pool = intrinsic.pool_features(batch.obs, feats_b)
                rewards = rewards + beta * intrinsic.over_pool(pool)
            row["policy_loss"] = models.agent.update(s, batch.actions, rewards, s_next, batch.dones)
            if models.encoder is not None:
                row.update(models.encoder.train_step(batch.obs))
        if (t + 1) % a.target_update == 0:
            models.agent.sync()

        stop = False
        if run.eval_every and (t + 1) % run.eval_every == 0:
            stop = _maybe_eval(cfg, models, log, t, row)
        if run.checkpoint_every and (t + 1) % run.checkpoint_every == 0:
            _checkpoint(models, checkpoint_dir, f"step{t + 1}")
        log.rows.append(row)
        if on_row is not None:
            on_row(row)
        if stop:
            break
        if res.done:
            episode += 1
            views = env.reset()
            cell = env.cell_index()
        else:
            views, cell = res.obs, next_cell
    return _finish(log, cfg, seed, started, models, checkpoint_dir)


def _cells_of(obs, env):
    """Agent cell indices read back from the allocentric agent plane (one-hot states)."""
    kinds = env.spec.view_set
    if "allocentric" in kinds:
        v = kinds.index("allocentric")
    elif "noisy_allocentric" in kinds:
        v = kinds.index("noisy_allocentric")
    else:
        raise ValueError("one-hot states need an allocentric view to recover the agent cell")
    return np.argmax(obs[:, v, : env.num_cells], axis=1)


def train_on_policy(cfg, seed, on_row=None, checkpoint_dir=None):
    """Episodic loop: roll out, reward over the episode's features, update. One row per episode."""
    started = time.perf_counter()
    rngs = spawn_streams(seed)
    env = make_env(cfg.env.grid_spec())
    models = Models(cfg, env, rngs)
    intrinsic = IntrinsicReward(cfg, models)
    x, run = cfg.exploration, cfg.run
    schedule = x.schedule()
    log = RunLog(meta={"solved_at": None})
    steps = 0
    for ep in range(run.episodes):
        views = env.reset()
        obs, actions, rewards, cells = [views], [], [], [env.cell_index()]
        while True:
            state, _ = models.states(views[None], [cells[-1]])
            action = models.agent.act(state[0], False, rngs["action"])
            res = env.step(action)
            actions.append(action)
            rewards.append(res.extrinsic_reward)
            views = res.obs
            obs.append(views)
            cells.append(env.cell_index())
            if res.done:
                break
        steps += len(actions)
        length = len(actions)
        obs = np.asarray(obs)
        states, feats = models.states(obs, cells)
        r_ext = np.asarray(rewards)
        beta = beta_at(schedule, ep)
        r_int = np.zeros(length)
        if intrinsic.enabled and length >= x.k + 1:
            if feats is not None:
                feats = (feats[0][:length], feats[1][:length])
            r_int = intrinsic.over_pool(intrinsic.pool_features(obs[:length], feats))
        r_total = r_ext + beta * r_int
        bootstrap = None if res.info["success"] else states[length]
        loss, _ = models.agent.update(states[:length], np.asarray(actions), r_total, bootstrap)
        ext_sum, int_sum = float(r_ext.sum()), float(r_int.sum())
        row = _blank_row(step=steps - 1, episode=ep, extrinsic_reward=ext_sum, intrinsic_reward=int_sum,
                         beta=beta, total_reward=ext_sum + beta * int_sum, policy_loss=loss)
        if models.encoder is not None:
            row.update(models.encoder.train_step(obs[:length]))
        stop = False
        if run.eval_every and (ep + 1) % run.eval_every == 0:
            stop = _maybe_eval(cfg, models, log, ep, row)
        if run.checkpoint_every and (ep + 1) % run.checkpoint_every == 0:
            _checkpoint(models, checkpoint_dir, f"episode{ep + 1}")
        log.rows.append(row)
        if on_row is not None:
            on_row(row)
        if stop:
            break
    return _finish(log, cfg, seed, started, models, checkpoint_dir)


def train(cfg, seed, on_row=None, checkpoint_dir=None):
    loop = train_off_policy if cfg.agent.loop == "off_policy" else train_on_policy
    return loop(cfg, seed, on_row=on_row, checkpoint_dir=checkpoint_dir)
