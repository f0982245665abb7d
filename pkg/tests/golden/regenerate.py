"""Rewrite the frozen fixtures in this directory. Run only after a deliberate format change.

The encoder vector is produced by a plain numpy forward pass written here
independently of the autodiff library, from the same seeded initial weights.
"""

import json
from pathlib import Path

import numpy as np

from mvmem.autodiff.params import ParamStore
from mvmem.config import dumps, loads
from mvmem.encoder import EncoderNet
from mvmem.envs import GridSpec, MultiViewGrid

HERE = Path(__file__).parent
ENCODER_SEED, ENCODER_SHAPE = 7, (6, 5, 3)


def encoder_fixture():
    rng = np.random.default_rng(ENCODER_SEED)
    store = ParamStore()
    EncoderNet(store, *ENCODER_SHAPE, rng)
    w = {n: t.data for n, t in store.items()}
    obs = np.linspace(-1.0, 1.0, ENCODER_SHAPE[0])

    def ln(v):
        c = v - v.mean()
        return c / np.sqrt((c * c).mean() + 1e-5)

    h = np.maximum(obs @ w["encoder/trunk0/weight"] + w["encoder/trunk0/bias"], 0.0)
    x = ln(h @ w["encoder/shared/weight"] + w["encoder/shared/bias"])
    y = ln(h @ w["encoder/specific/weight"] + w["encoder/specific/bias"])
    return {"seed": ENCODER_SEED, "shape": ENCODER_SHAPE, "obs": obs.tolist(), "shared": x.tolist(),
            "specific": y.tolist()}


def env_fixture():
    env = MultiViewGrid(GridSpec(seed=0))
    env.reset()
    for a in (1, 1, 3):
        env.step(a)
    views = env.render_views()
    return {"layout_hash": env.layout_hash(), "text_map": env.text_map(), "cell": list(env.agent),
            "egocentric": views[1, :50].tolist(), "views_sum": views.sum(axis=1).tolist(),
            "allocentric_nonzero": np.flatnonzero(views[0]).tolist(),
            "noisy_nonzero": np.flatnonzero(views[2]).tolist()}


if __name__ == "__main__":
    (HERE / "encoder_forward.json").write_text(json.dumps(encoder_fixture(), indent=1) + "\n")
    (HERE / "env_seed0.json").write_text(json.dumps(env_fixture(), indent=1) + "\n")
    (HERE / "minimal_resolved.yaml").write_text(dumps(loads("env:\n  seed: 0\n")))
