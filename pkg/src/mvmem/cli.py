"""Command-line entry point: ``mvmem <command> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from mvmem.errors import MEMError

MODES = ("mem", "re3_raw", "re3_log1p", "none")


def _config(args):
    from mvmem.config import load_config

    cfg = load_config(args.config)
    run = {}
    if getattr(args, "seeds", None):
        run["seeds"] = [int(s) for s in args.seeds.split(",")]
    if getattr(args, "t_max", None) is not None:
        run["t_max"] = args.t_max
    return cfg.replace(run=run) if run else cfg


def cmd_train(args):
    from mvmem.harness.runner import run_experiment

    cfg = _config(args)
    status, summary = run_experiment(cfg, args.out, args.workers)
    for rec in summary["seeds"]:
        if rec["status"] == "ok":
            print(f"seed {rec['seed']}: ok rows={rec['rows']} solved_at={rec['solved_at']} "
                  f"final_eval_return={rec['final_eval_return']}")
        else:
            print(f"seed {rec['seed']}: {rec['error']}", file=sys.stderr)
    print(f"wrote {summary['out_dir']}")
    if args.plot:
        from mvmem.harness.plots import plot_run

        for path in plot_run(summary["out_dir"]):
            print(f"wrote {path}")
    return status


def cmd_eval(args):
    from mvmem.agents.loops import evaluate_models, load_models
    from mvmem.config import load_config

    if args.episodes < 1:
        raise SystemExit("--episodes must be >= 1")
    cfg = load_config(args.config)
    models = load_models(cfg, args.checkpoint)
    mean, std, success = evaluate_models(cfg, models, args.episodes, args.base_seed)
    print(f"episodes={args.episodes} mean_return={mean:.6f} std_return={std:.6f} success_rate={success:.3f}")
    return 0


def _bench_tokens(tokens):
    """Positional form ``gaussian q=1 n=4096 k=3 trials=10``."""
    out = {}
    for tok in tokens:
        if "=" in tok:
            key, value = tok.split("=", 1)
            if key not in ("q", "n", "k", "trials", "seed"):
                raise SystemExit(f"unknown bench parameter {key!r}")
            out[key] = int(value)
        else:
            out["distribution"] = tok
    return out


def cmd_entropy_bench(args):
    from mvmem.harness.bench import entropy_bench

    params = {"distribution": args.distribution, "q": args.q, "n": args.n, "k": args.k,
              "trials": args.trials, "seed": args.seed}
    params.update(_bench_tokens(args.params))
    report = entropy_bench(tree=not args.no_tree, **params)
    print("\n".join(report.lines()))
    return 0


def cmd_gradcheck(args):
    from mvmem.gradsuite import CASES, TOLERANCE, run_suite

    cases = args.cases.split(",") if args.cases else list(CASES)
    unknown = [c for c in cases if c not in CASES]
    if unknown:
        raise SystemExit(f"unknown cases {unknown}; choose from {list(CASES)}")
    worst = run_suite(args.trials, args.seed, cases)
    for name, err in worst.items():
        print(f"{name:<24} max_rel_err={err:.3e} {'PASS' if err < TOLERANCE else 'FAIL'}")
    return 0 if all(err < TOLERANCE for err in worst.values()) else 1


def cmd_ablate(args):
    from mvmem.harness.runner import ablate

    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise SystemExit(f"unknown modes {bad}; choose from {list(MODES)}")
    cfg = _config(args)
    status, table = ablate(cfg, modes, args.out, args.workers)
    for mode, row in table.items():
        print(f"{mode:<10} median_steps_to_solve={row['median_steps_to_solve']:g} "
              f"solved={row['solved_seeds']}/{len(row['steps_to_solve'])} cap={row['cap']}")
    if args.plot:
        from mvmem.harness.plots import plot_ablation, plot_run
        from mvmem.harness.runner import output_dir

        base = Path(args.out) if args.out else output_dir(cfg)
        print(f"wrote {plot_ablation(base)}")
        for mode in modes:
            for path in plot_run(base / mode):
                print(f"wrote {path}")
    return status


def cmd_plot(args):
    from mvmem.harness.plots import plot_ablation, plot_run

    target = Path(args.run_dir)
    if (target / "ablation.json").exists():
        print(f"wrote {plot_ablation(target)}")
        return 0
    for path in plot_run(target, args.out, args.window):
        print(f"wrote {path}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mvmem", description="Multi-view exploration maximization experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run every seed of a config and write CSV logs")
    t.add_argument("config")
    t.add_argument("--seeds", help="comma-separated seeds overriding run.seeds")
    t.add_argument("--t-max", type=int, dest="t_max", help="override run.t_max")
    t.add_argument("--out", help="output directory (default: $MEM_OUT_DIR or run.out_dir, plus run.name)")
    t.add_argument("--workers", type=int, default=1, help="parallel seed workers")
    t.add_argument("--plot", action="store_true", help="also render PNG curves next to the CSVs")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("config")
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--base-seed", type=int, default=None, dest="base_seed")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("entropy-bench", help="entropy estimator accuracy and k-NN timing")
    b.add_argument("params", nargs="*", help="optional positional form: gaussian q=1 n=4096 k=3 trials=10")
    b.add_argument("--distribution", choices=("gaussian", "uniform"), default="gaussian")
    b.add_argument("--q", type=int, default=1)
    b.add_argument("--n", type=int, default=4096)
    b.add_argument("--k", type=int, default=3)
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--no-tree", action="store_true", help="skip the kd-tree timing")
    b.set_defaults(func=cmd_entropy_bench)

    g = sub.add_parser("gradcheck", help="finite-difference check of every loss")
    g.add_argument("--trials", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--cases", help="comma-separated subset of cases")
    g.set_defaults(func=cmd_gradcheck)

    a = sub.add_parser("ablate", help="the same config under several exploration modes")
    a.add_argument("config")
    a.add_argument("--modes", default="mem,re3_log1p,none")
    a.add_argument("--seeds", help="comma-separated seeds overriding run.seeds")
    a.add_argument("--t-max", type=int, dest="t_max", help="override run.t_max")
    a.add_argument("--out", help="output directory")
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--plot", action="store_true")
    a.set_defaults(func=cmd_ablate)

    pl = sub.add_parser("plot", help="render PNG curves from a run or ablation directory")
    pl.add_argument("run_dir")
    pl.add_argument("--out", help="directory for the PNGs (default: run_dir)")
    pl.add_argument("--window", type=int, default=1000, help="running-mean window in rows")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MEMError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
