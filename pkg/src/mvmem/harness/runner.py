"""Experiment execution: per-seed CSV logs, resolved-config dump, run summary and ablations."""

from __future__ import annotations

import csv
import json
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from mvmem.agents.loops import COLUMNS, train
from mvmem.config import config_hash, dumps, from_dict

OUT_DIR_ENV = "MEM_OUT_DIR"
SUMMARY = "summary.json"
RESOLVED = "resolved_config.yaml"


def format_cell(value):
    """CSV text for one value: blank for None, 17 significant digits for floats."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {value!r} in a log row")
    return format(value, ".17g")


class CsvLog:
    """Appends rows to a per-seed CSV as they arrive."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="", encoding="ascii")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(COLUMNS)

    def __call__(self, row):
        self._writer.writerow([format_cell(row[c]) for c in COLUMNS])

    def close(self):
        self._fh.close()


def read_csv(path):
    """Rows of a run CSV as dicts of floats (None where blank)."""
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        return [{k: (float(v) if v != "" else None) for k, v in row.items()} for row in reader]


def output_dir(cfg):
    """Run directory: ``$MEM_OUT_DIR`` (or run.out_dir) joined with run.name."""
    base = os.environ.get(OUT_DIR_ENV) or cfg.run.out_dir
    return Path(base) / cfg.run.name


def run_seed(cfg_dict, seed, out_dir):
    """Train one seed, streaming its CSV; returns a summary record and never raises."""
    cfg = from_dict(cfg_dict)
    out_dir = Path(out_dir)
    ckpt_dir = out_dir / f"seed{seed}"
    log = CsvLog(out_dir / f"seed{seed}.csv")
    try:
        result = train(cfg, seed, on_row=log, checkpoint_dir=ckpt_dir)
    except Exception as exc:  # one failed seed must not take the others down
        return {"seed": seed, "status": "error", "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc()}
    finally:
        log.close()
    evals = result.meta.get("evals", [])
    return {
        "seed": seed,
        "status": "ok",
        "rows": result.meta["rows"],
        "solved_at": result.meta["solved_at"],
        "final_eval_return": evals[-1][1] if evals else None,
        "final_success": evals[-1][2] if evals else None,
        "wall_clock": result.meta["wall_clock"],
        "checkpoint": str(ckpt_dir / "final.ckpt"),
    }


def run_experiment(cfg, out_dir=None, workers=1):
    """Run every seed of ``cfg``; returns (exit status, summary dict).

    Writes seed{s}.csv per seed, the resolved config and a summary. Exit
    status is 0 only when every seed completed.
    """
    out = Path(out_dir) if out_dir is not None else output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / RESOLVED).write_text(dumps(cfg), encoding="utf-8")
    data = cfg.to_dict()
    seeds = list(cfg.run.seeds)
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            records = list(pool.map(run_seed, [data] * len(seeds), seeds, [str(out)] * len(seeds)))
    else:
        records = [run_seed(data, s, out) for s in seeds]
    summary = {"config_hash": config_hash(cfg), "out_dir": str(out), "seeds": records}
    (out / SUMMARY).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    status = 0 if all(r["status"] == "ok" for r in records) else 1
    return status, summary


def steps_to_solve(record, cap):
    """Environment steps until the success target was first met; ``cap`` when never."""
    if record.get("status") != "ok" or record.get("solved_at") is None:
        return cap
    return record["solved_at"] + 1


def ablate(cfg, modes, out_dir=None, workers=1):
    """Same config and seeds under each exploration mode; returns (exit status, per-mode summary)."""
    base = Path(out_dir) if out_dir is not None else output_dir(cfg)
    cap = cfg.run.t_max if cfg.agent.loop == "off_policy" else cfg.run.episodes
    status, table = 0, {}
    for mode in modes:
        variant = cfg.replace(exploration={"mode": mode}, run={"name": f"{cfg.run.name}-{mode}"})
        code, summary = run_experiment(variant, base / mode, workers)
        status = max(status, code)
        solve = [steps_to_solve(r, cap) for r in summary["seeds"]]
        table[mode] = {
            "steps_to_solve": solve,
            "median_steps_to_solve": float(np.median(solve)),
            "solved_seeds": sum(r.get("solved_at") is not None for r in summary["seeds"]),
            "cap": cap,
            "config_hash": summary["config_hash"],
        }
    base.mkdir(parents=True, exist_ok=True)
    (base / "ablation.json").write_text(json.dumps(table, indent=2) + "\n", encoding="utf-8")
    return status, table
