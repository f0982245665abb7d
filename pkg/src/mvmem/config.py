"""Run configuration: YAML loading, validation, defaults and the resolved dump.

A config file has up to five sections (env, encoder, exploration, agent,
run); every key is optional and unknown keys are rejected. Fields whose
default depends on the loop variant are resolved after parsing so the
dumped config is always fully explicit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from mvmem.encoder import LossWeights
from mvmem.envs import VIEW_KINDS, GridSpec
from mvmem.errors import InvalidSpec, ParseError, ValidationError
from mvmem.exploration.rewards import BetaSchedule

LOOPS = ("off_policy", "on_policy")
MODES = ("mem", "re3_raw", "re3_log1p", "none")

# loop-dependent defaults: (off_policy, on_policy)
_LOOP_DEFAULTS = {
    ("exploration", "k"): (3, 5),
    ("exploration", "beta0"): (0.05, 0.1),
    ("encoder", "learning_rate"): (1e-4, 5e-4),
    ("agent", "learning_rate"): (1e-3, 5e-4),
}


@dataclass(frozen=True)
class EnvConfig:
    height: int = 11
    width: int = 11
    wall_density: float = 0.15
    goal_reward: float = 1.0
    step_penalty: float = 0.001
    max_steps: int = 200
    reward_mode: str = "sparse"
    views: tuple = VIEW_KINDS
    seed: int = 0

    def grid_spec(self):
        return GridSpec(self.height, self.width, self.wall_density, self.goal_reward, self.step_penalty,
                        self.max_steps, self.reward_mode, tuple(self.views), self.seed)


@dataclass(frozen=True)
class EncoderConfig:
    hidden: int = 64
    latent_dim: int = 16
    disc_hidden: int = 0
    lambda1: float = LossWeights.lambda1
    lambda2: float = LossWeights.lambda2
    lambda3: float = LossWeights.lambda3
    margin: float = 1.0
    learning_rate: float = None
    disc_learning_rate: float = None

    def loss_weights(self):
        return LossWeights(self.lambda1, self.lambda2, self.lambda3, self.margin)


@dataclass(frozen=True)
class ExplorationConfig:
    mode: str = "mem"
    k: int = None
    beta0: float = None
    kappa: float = 1e-5
    re3_aggregate: str = "kth"

    def schedule(self):
        return BetaSchedule(self.beta0, self.kappa)


@dataclass(frozen=True)
class AgentConfig:
    loop: str = "off_policy"
    state_source: str = "encoder"
    gamma: float = 0.99
    learning_rate: float = None
    hidden: int = 64
    batch_size: int = 256
    buffer_capacity: int = 100_000
    warmup_steps: int = 2000
    update_every: int = 4
    target_update: int = 1000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 20_000
    entropy_coef: float = 0.01
    value_coef: float = 0.5


@dataclass(frozen=True)
class RunSection:
    t_max: int = 10_000
    episodes: int = 200
    seeds: tuple = (0,)
    eval_every: int = 2000
    eval_episodes: int = 10
    checkpoint_every: int = 0
    stop_at_success: float = None
    out_dir: str = "runs"
    name: str = "mem"


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    exploration: ExplorationConfig = field(default_factory=ExplorationConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    run: RunSection = field(default_factory=RunSection)

    def to_dict(self):
        out = {}
        for f in fields(self):
            section = dataclasses.asdict(getattr(self, f.name))
            out[f.name] = {k: list(v) if isinstance(v, tuple) else v for k, v in section.items()}
        return out

    def replace(self, **sections):
        """Copy with some section fields overridden, e.g. replace(exploration={"beta0": 0.0})."""
        data = self.to_dict()
        for name, updates in sections.items():
            data[name].update(updates)
        return from_dict(data)


# null is a legal value for these (it means "resolve from the loop variant" or "off")
_NULLABLE = {"learning_rate", "disc_learning_rate", "k", "beta0", "stop_at_success"}
_SECTION_TYPES = {
    "env": EnvConfig,
    "encoder": EncoderConfig,
    "exploration": ExplorationConfig,
    "agent": AgentConfig,
    "run": RunSection,
}


def _coerce(path, value, kind, nullable):
    """Check one value against the annotated type of its field."""
    if value is None:
        if nullable:
            return None
        raise ValidationError(path, "must not be null")
    if kind == "tuple":
        if not isinstance(value, (list, tuple)) or not value:
            raise ValidationError(path, "must be a non-empty list")
        item = int if path.endswith("seeds") else str
        for v in value:
            if not isinstance(v, item) or isinstance(v, bool):
                raise ValidationError(path, f"entries must be of type {item.__name__}")
        return tuple(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(path, f"must be an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(path, f"must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ValidationError(path, f"must be a string, got {value!r}")
    return value


def from_dict(data):
    """Validated RunConfig from a nested mapping (missing keys take defaults)."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValidationError("<root>", "config must be a mapping of sections")
    for key in data:
        if key not in _SECTION_TYPES:
            raise ValidationError(key, f"unknown section; expected one of {sorted(_SECTION_TYPES)}")
    built = {}
    for name, cls in _SECTION_TYPES.items():
        raw = data.get(name) or {}
        if not isinstance(raw, dict):
            raise ValidationError(name, "section must be a mapping")
        known = {f.name: f for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise ValidationError(f"{name}.{key}", "unknown key")
        values = {}
        for key, f in known.items():
            if key in raw:
                values[key] = _coerce(f"{name}.{key}", raw[key], f.type, key in _NULLABLE)
        built[name] = cls(**values)
    cfg = RunConfig(**built)
    cfg = _resolve(cfg)
    validate(cfg)
    return cfg


def _resolve(cfg):
    idx = LOOPS.index(cfg.agent.loop) if cfg.agent.loop in LOOPS else 0
    sections = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    for (section, key), choices in _LOOP_DEFAULTS.items():
        if getattr(sections[section], key) is None:
            sections[section] = dataclasses.replace(sections[section], **{key: choices[idx]})
    enc = sections["encoder"]
    if enc.disc_learning_rate is None:
        sections["encoder"] = dataclasses.replace(enc, disc_learning_rate=enc.learning_rate)
    return RunConfig(**sections)


def validate(cfg):
    def need(cond, path, reason):
        if not cond:
            raise ValidationError(path, reason)

    try:
        cfg.env.grid_spec()
    except InvalidSpec as exc:
        raise ValidationError("env", str(exc)) from exc
    e = cfg.encoder
    need(e.hidden >= 1, "encoder.hidden", "must be >= 1")
    need(e.latent_dim >= 1, "encoder.latent_dim", "must be >= 1")
    need(e.disc_hidden >= 0, "encoder.disc_hidden", "must be >= 0 (0 means a linear discriminator)")
    for key in ("lambda1", "lambda2", "lambda3", "margin"):
        need(getattr(e, key) >= 0, f"encoder.{key}", "must be nonnegative")
    need(e.learning_rate > 0, "encoder.learning_rate", "must be positive")
    need(e.disc_learning_rate >= 0, "encoder.disc_learning_rate", "must be nonnegative")

    x = cfg.exploration
    need(x.mode in MODES, "exploration.mode", f"must be one of {MODES}")
    need(x.k >= 1, "exploration.k", "must be >= 1")
    need(x.beta0 >= 0, "exploration.beta0", "must be nonnegative")
    need(0 <= x.kappa < 1, "exploration.kappa", "must lie in [0, 1)")
    need(x.re3_aggregate in ("kth", "mean_of_k"), "exploration.re3_aggregate", "must be kth or mean_of_k")

    a = cfg.agent
    need(a.loop in LOOPS, "agent.loop", f"must be one of {LOOPS}")
    need(a.state_source in ("encoder", "onehot"), "agent.state_source", "must be encoder or onehot")
    need(0 <= a.gamma < 1, "agent.gamma", "must lie in [0, 1)")
    need(a.learning_rate > 0, "agent.learning_rate", "must be positive")
    need(a.hidden >= 1, "agent.hidden", "must be >= 1")
    need(a.batch_size > x.k, "agent.batch_size", f"must exceed k={x.k} so the k-NN pool is valid")
    need(a.buffer_capacity >= a.batch_size, "agent.buffer_capacity", "must be >= batch_size")
    need(a.warmup_steps >= a.batch_size, "agent.warmup_steps", "must be >= batch_size")
    need(a.update_every >= 1, "agent.update_every", "must be >= 1")
    need(a.target_update >= 1, "agent.target_update", "must be >= 1")
    need(0 <= a.epsilon_end <= a.epsilon_start <= 1, "agent.epsilon_start",
         "need 0 <= epsilon_end <= epsilon_start <= 1")
    need(a.epsilon_decay_steps >= 1, "agent.epsilon_decay_steps", "must be >= 1")
    need(a.entropy_coef >= 0, "agent.entropy_coef", "must be nonnegative")
    need(a.value_coef >= 0, "agent.value_coef", "must be nonnegative")
    if a.state_source == "onehot":
        need(x.mode == "none" or x.beta0 == 0, "exploration.mode",
             "one-hot states bypass the encoder, so only mode none (or beta0 = 0) is meaningful")

    r = cfg.run
    need(r.t_max >= 1, "run.t_max", "must be >= 1")
    need(r.episodes >= 1, "run.episodes", "must be >= 1")
    need(len(set(r.seeds)) == len(r.seeds), "run.seeds", "must not repeat")
    need(r.eval_every >= 0, "run.eval_every", "must be >= 0 (0 disables evaluation)")
    need(r.eval_episodes >= 1, "run.eval_episodes", "must be >= 1")
    need(r.checkpoint_every >= 0, "run.checkpoint_every", "must be >= 0")
    need(r.stop_at_success is None or 0 < r.stop_at_success <= 1, "run.stop_at_success",
         "must be null or in (0, 1]")
    need(bool(r.name) and "/" not in r.name, "run.name", "must be a non-empty name without '/'")


def loads(text, source="<string>"):
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ParseError(f"{source}: {exc.problem or exc.context}", line, col) from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"{source}: {exc}") from exc
    return from_dict(data)


def load_config(path):
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), str(path))


def dumps(cfg):
    """Resolved config as YAML; loading it back yields an equal RunConfig."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=False)


def config_hash(cfg):
    """sha256 of the canonical JSON form, ignoring where output is written."""
    data = cfg.to_dict()
    data["run"].pop("out_dir")
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
