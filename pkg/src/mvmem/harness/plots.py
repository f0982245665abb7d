"""Learning-curve and ablation figures rendered from run CSVs."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from mvmem.harness.runner import read_csv  # noqa: E402

LOSS_COLUMNS = ("loss_diff", "loss_con", "loss_adv_d", "loss_adv_g", "policy_loss")


def _seed_csvs(run_dir):
    return sorted(Path(run_dir).glob("seed*.csv"), key=lambda p: int(p.stem[4:]))


def _series(rows, column):
    pts = [(r["step"], r[column]) for r in rows if r[column] is not None]
    if not pts:
        return np.empty(0), np.empty(0)
    x, y = zip(*pts)
    return np.asarray(x), np.asarray(y)


def _running_mean(y, window):
    if y.size == 0:
        return y
    window = max(1, min(window, y.size))
    c = np.cumsum(np.insert(y, 0, 0.0))
    out = np.empty(y.size)
    out[window - 1 :] = (c[window:] - c[:-window]) / window
    out[: window - 1] = c[1:window] / np.arange(1, window)
    return out


def plot_run(run_dir, out_dir=None, window=1000):
    """Eval return, reward and loss curves for every seed of one run; returns the PNG paths."""
    run_dir = Path(run_dir)
    out_dir = run_dir if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = {p.stem: read_csv(p) for p in _seed_csvs(run_dir)}
    if not runs:
        raise FileNotFoundError(f"no seed*.csv files in {run_dir}")
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, rows in runs.items():
        x, y = _series(rows, "eval_return")
        ax.plot(x, y, marker="o", ms=3, label=name)
    ax.set_xlabel("step")
    ax.set_ylabel("greedy eval return")
    ax.legend(fontsize="small")
    fig.tight_layout()
    paths.append(out_dir / "eval_return.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for name, rows in runs.items():
        x, y = _series(rows, "extrinsic_reward")
        axes[0].plot(x, _running_mean(y, window), label=name)
        x, y = _series(rows, "intrinsic_reward")
        axes[1].plot(x, _running_mean(y, window), label=name)
    axes[0].set_ylabel(f"extrinsic reward (mean over {window} rows)")
    axes[1].set_ylabel(f"intrinsic reward (mean over {window} rows)")
    for ax in axes:
        ax.set_xlabel("step")
        ax.legend(fontsize="small")
    fig.tight_layout()
    paths.append(out_dir / "rewards.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    fig, axes = plt.subplots(1, len(LOSS_COLUMNS), figsize=(4 * len(LOSS_COLUMNS), 3.5))
    for ax, column in zip(axes, LOSS_COLUMNS):
        for name, rows in runs.items():
            x, y = _series(rows, column)
            if y.size:
                ax.plot(x, _running_mean(y, max(1, window // 10)), label=name)
        ax.set_title(column)
        ax.set_xlabel("step")
    axes[0].legend(fontsize="small")
    fig.tight_layout()
    paths.append(out_dir / "losses.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)
    return paths


def plot_ablation(ablation_dir, out_path=None):
    """Steps-to-solve per seed and mode from ``ablation.json``; returns the PNG path."""
    ablation_dir = Path(ablation_dir)
    table = json.loads((ablation_dir / "ablation.json").read_text(encoding="utf-8"))
    out_path = ablation_dir / "ablation.png" if out_path is None else Path(out_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    modes = list(table)
    for i, mode in enumerate(modes):
        solve = np.asarray(table[mode]["steps_to_solve"], dtype=float)
        ax.scatter(np.full(solve.size, i), solve, alpha=0.6)
        ax.hlines(table[mode]["median_steps_to_solve"], i - 0.3, i + 0.3, colors="k")
    cap = table[modes[0]]["cap"] if modes else None
    if cap:
        ax.axhline(cap, ls="--", lw=0.8, color="grey")
    ax.set_xticks(range(len(modes)), modes)
    ax.set_ylabel("steps to reach success target (cap = unsolved)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
