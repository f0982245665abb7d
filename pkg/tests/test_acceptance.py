"""Acceptance criteria A1-A9, each reporting one PASS/FAIL line at its stated tolerance.

A7 at full size (10 seeds x 3 modes x 100k steps) takes hours on one core.
By default it measures the per-step cost of the default configuration and
fails with the projection when the protocol cannot fit the 15-minute,
4-core budget; set MVMEM_A7_FULL=1 to run the whole ablation regardless.
"""

import math
import os
import time

import numpy as np
import pytest

from acceptance_log import record
from mvmem.agents.loops import train
from mvmem.config import from_dict
from mvmem.encoder import disentangling_trial, loss_diff
from mvmem.exploration.entropy import estimate_entropy
from mvmem.exploration.knn import knn_table
from mvmem.exploration.rewards import multiview_intrinsic_rewards
from mvmem.gradsuite import TOLERANCE, run_suite
from mvmem.harness.bench import entropy_bench
from mvmem.harness.runner import ablate, run_experiment

pytestmark = pytest.mark.acceptance


def report(capsys, criterion, ok, detail):
    line = record(criterion, ok, detail)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def test_a1_entropy_estimator(capsys):
    started = time.perf_counter()
    r = entropy_bench(n=4096, q=1, k=3, distribution="gaussian", trials=10)
    elapsed = time.perf_counter() - started
    ok = r.mae < 0.1 and elapsed < 5.0
    report(capsys, "A1", ok, f"entropy-bench gaussian q=1 n=4096 k=3 trials=10: MAE {r.mae:.4f} nats "
                             f"(< 0.1) vs {r.target:.4f}, runtime {elapsed:.2f} s (< 5 s)")


def test_a2_knn_exactness(capsys):
    rng = np.random.default_rng(2024)
    combos = [(q, k) for q in (2, 8) for k in (1, 3, 5)]
    mismatches = 0
    for i in range(100):
        q, k = combos[i % len(combos)]
        pts = rng.random((1000, q))
        bd, bi = knn_table(pts, k, "brute")
        td, ti = knn_table(pts, k, "tree")
        mismatches += not (np.array_equal(bd, td) and np.array_equal(bi, ti))
    report(capsys, "A2", mismatches == 0,
           f"tree vs brute on 100 instances (n=1000, q in {{2,8}}, k in {{1,3,5}}): {mismatches} mismatches")


def test_a3_gradient_suite(capsys):
    worst = run_suite(trials=100, seed=0)
    ok = all(err < TOLERANCE for err in worst.values())
    detail = ", ".join(f"{name} {err:.1e}" for name, err in worst.items())
    report(capsys, "A3", ok, f"max relative error over 100 instances per loss (< {TOLERANCE:g}): {detail}")


def test_a4_disentangling(capsys):
    started = time.perf_counter()
    acc = np.array([disentangling_trial(seed) for seed in range(5)])
    elapsed = time.perf_counter() - started
    spec, shared = np.median(acc, axis=0)
    ok = spec >= 0.9 and shared <= 0.6 and elapsed < 60.0
    report(capsys, "A4", ok, f"median probe accuracy over 5 seeds: specific {spec:.3f} (>= 0.9), "
                             f"shared {shared:.3f} (<= 0.6); runtime {elapsed:.1f} s (< 60 s)")


def test_a5_fixtures(capsys):
    r = multiview_intrinsic_rewards([np.array([[0.0], [1.0], [3.0]])], np.zeros((3, 1)), 1)
    ok9 = np.allclose(r, [0.3466, 0.3466, 0.5493], atol=1e-4)
    h = estimate_entropy([0.0, 1.0, 3.0], 1)
    ok1 = abs(h - 2.6000) <= 1e-3
    diffs = [loss_diff(np.array(x), np.array(y)).item()
             for x, y in (((1.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (-1.0, 0.0)))]
    ok3 = diffs == [2.0, 3.0, 2.0]
    report(capsys, "A5", ok9 and ok1 and ok3,
           f"reward fixture {np.round(r, 4).tolist()}, entropy fixture {h:.4f}, difference-loss fixtures {diffs}")


A6_COLUMNS = ("extrinsic_reward", "total_reward", "policy_loss")


def _a6_config(**exploration):
    return from_dict({"env": {"seed": 0}, "exploration": exploration,
                      "run": {"t_max": 10_000, "seeds": [0], "eval_every": 2000, "name": "a6"}})


@pytest.fixture(scope="module")
def a6_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("a6")
    run_experiment(_a6_config(mode="mem", beta0=0.0), base / "beta0")
    run_experiment(_a6_config(mode="none"), base / "none")
    return base


def _columns(path, names):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    idx = [header.index(n) for n in names]
    return [[line.split(",")[i] for i in idx] for line in lines[1:]]


def test_a6_reduction(capsys, a6_runs):
    a = _columns(a6_runs / "beta0" / "seed0.csv", A6_COLUMNS)
    b = _columns(a6_runs / "none" / "seed0.csv", A6_COLUMNS)
    same = a == b and len(a) == 10_000
    report(capsys, "A6", same, f"beta0=0 vs intrinsic disabled, 10k steps: columns {', '.join(A6_COLUMNS)} "
                               f"{'byte-identical' if same else 'differ'} over {len(a)} rows")


def test_a8_determinism(capsys, a6_runs, tmp_path):
    run_experiment(_a6_config(mode="mem", beta0=0.0), tmp_path / "again")
    first = (a6_runs / "beta0" / "seed0.csv").read_bytes()
    again = (tmp_path / "again" / "seed0.csv").read_bytes()
    on_cfg = from_dict({"env": {"seed": 0, "height": 7, "width": 7}, "agent": {"loop": "on_policy"},
                        "run": {"episodes": 30, "seeds": [1], "eval_every": 10, "name": "a8"}})
    run_experiment(on_cfg, tmp_path / "on1")
    run_experiment(on_cfg, tmp_path / "on2")
    on_same = (tmp_path / "on1" / "seed1.csv").read_bytes() == (tmp_path / "on2" / "seed1.csv").read_bytes()
    ok = first == again and on_same
    report(capsys, "A8", ok, f"rerun byte-identical: off-policy 10k-step CSV {first == again}, "
                             f"on-policy 30-episode CSV {on_same}")


def test_a9_schedule(capsys):
    # one-hot states and sparse updates keep a 100k-step run cheap; beta logging is loop-level
    cfg = from_dict({"env": {"seed": 0}, "exploration": {"mode": "none", "beta0": 0.05, "kappa": 1e-5},
                     "agent": {"state_source": "onehot", "update_every": 1000, "batch_size": 32,
                               "warmup_steps": 32},
                     "run": {"t_max": 100_001, "eval_every": 0}})
    log = train(cfg, seed=0)
    errs = {t: abs(log.rows[t]["beta"] - 0.05 * (1 - 1e-5) ** t) for t in (0, 10_000, 100_000)}
    off_ok = all(e <= 1e-12 for e in errs.values())
    on_cfg = from_dict({"env": {"seed": 0, "height": 5, "width": 5}, "agent": {"loop": "on_policy"},
                        "run": {"episodes": 15, "eval_every": 0}})
    betas = train(on_cfg, seed=0).column("beta")
    on_ok = betas == [0.1 * (1 - 1e-5) ** e for e in range(15)] and all(
        a > b for a, b in zip(betas, betas[1:]))
    report(capsys, "A9", off_ok and on_ok,
           f"off-policy beta error at t=0, 1e4, 1e5: {max(errs.values()):.1e} (<= 1e-12); on-policy beta "
           f"one value per episode, decaying by episode index: {on_ok}")


A7_SEEDS = list(range(10))
A7_CAP = 100_000
A7_MODES = ("mem", "none", "re3_log1p")
A7_BUDGET = 15 * 60 * 4  # core-seconds


def _a7_config():
    return from_dict({"env": {"seed": 0, "reward_mode": "sparse"}, "exploration": {"mode": "mem"},
                      "run": {"t_max": A7_CAP, "seeds": A7_SEEDS, "eval_every": 2000, "stop_at_success": 0.9,
                              "name": "a7"}})


def test_a7_sample_efficiency(capsys, tmp_path):
    cfg = _a7_config()
    if os.environ.get("MVMEM_A7_FULL") != "1":
        # time warm-up and update phases apart; a seed that never solves pays the update rate to the cap
        warm = cfg.agent.warmup_steps
        cost = {}
        for steps in (warm, warm + 1000):
            probe = cfg.replace(run={"t_max": steps, "seeds": [0], "eval_every": 0, "stop_at_success": None})
            t0 = time.process_time()
            train(probe, seed=0)
            cost[steps] = time.process_time() - t0
        per_update_step = (cost[warm + 1000] - cost[warm]) / 1000
        per_run = cost[warm] + per_update_step * (A7_CAP - warm)
        runs = len(A7_MODES) * len(A7_SEEDS)
        projected = per_run * runs / 4
        ok = projected < 15 * 60
        report(capsys, "A7", ok,
               f"not run in full: {1e3 * per_update_step:.1f} ms per step once updates start gives "
               f"{projected / 60:.0f} min on 4 cores for {runs} runs at the {A7_CAP} cap (budget 15 min); "
               f"MVMEM_A7_FULL=1 runs the ablation anyway")
        return
    started = time.perf_counter()
    _, table = ablate(cfg, list(A7_MODES), tmp_path, workers=min(4, os.cpu_count() or 1))
    elapsed = time.perf_counter() - started
    mem, none, re3 = (table[m]["median_steps_to_solve"] for m in A7_MODES)
    ok = mem < none and elapsed < 15 * 60
    report(capsys, "A7", ok,
           f"median steps to 0.9 greedy success (cap {A7_CAP}): mem {mem:g}, none {none:g} "
           f"(need mem < none); re3_log1p {re3:g} (reported); runtime {elapsed / 60:.1f} min (< 15)")
