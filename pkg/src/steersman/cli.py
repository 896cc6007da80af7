"""Command-line entry point.

Subcommands: model build, train, eval, baseline, oracle, metrics.
Exit code 0 on success; nonzero with a single structured error line on
failure."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import baselines, harness
from .plate import save_basis


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steersman",
                                     description="Adaptive sensor steering toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    model = sub.add_parser("model", help="modal model operations")
    model_sub = model.add_subparsers(dest="model_command", required=True)
    build = model_sub.add_parser("build", help="solve modes and save a modal basis")
    build.add_argument("--config", required=True)
    build.add_argument("--condition", required=True)
    build.add_argument("--out", required=True)

    tr = sub.add_parser("train", help="train the steering agent")
    tr.add_argument("--config", required=True)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--out", default=None, help="override output directory")

    ev = sub.add_parser("eval", help="evaluate a checkpoint against baselines")
    ev.add_argument("--config", required=True)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--condition", default=None)
    ev.add_argument("--steps", type=int, default=None)
    ev.add_argument("--out", default=None)

    bl = sub.add_parser("baseline", help="run a classical placement baseline")
    bl.add_argument("--method", required=True,
                    choices=["efi", "fssp", "oracle", "random"])
    bl.add_argument("--config", required=True)
    bl.add_argument("--condition", required=True)
    bl.add_argument("--sensors", type=int, default=None)
    bl.add_argument("--steps", type=int, default=1000)
    bl.add_argument("--seed", type=int, default=0)

    orc = sub.add_parser("oracle", help="exhaustive optimum placement")
    orc.add_argument("--config", required=True)
    orc.add_argument("--condition", required=True)
    orc.add_argument("--sensors", type=int, default=None)

    mt = sub.add_parser("metrics", help="re-export metrics plots for a run")
    mt.add_argument("--run", required=True)
    return parser


def _load(args) -> harness.ExperimentConfig:
    config = harness.load_config(args.config)
    if getattr(args, "seed", None) is not None and args.seed is not None:
        raw_seed = args.seed
        config.seed = raw_seed
        config.agent.seed = raw_seed
    if getattr(args, "out", None):
        config.output_dir = args.out
    return config


def _placement_line(result: baselines.PlacementResult) -> str:
    nodes = ",".join(str(i) for i in result.selected)
    text = (f"method={result.method} selected=[{nodes}] "
            f"det={result.det!r} score={result.score!r}")
    csv_row = f"{result.method},\"{nodes}\",{result.det!r},{result.score!r}"
    return text + "\n" + csv_row


def _run_baseline(config, method, condition, sensors, steps, seed) -> str:
    library = config.build_library()
    p = sensors if sensors is not None else config.env.sensors
    if method == "random":
        env = config.build_env(library)
        rng = np.random.default_rng(seed)
        scores = baselines.random_policy(env, rng, steps, condition=condition)
        return (f"method=random condition={condition} steps={steps} "
                f"final_score={scores[-1]!r} max_score={max(scores)!r}")
    cond = library.condition(condition)
    fn = {"efi": baselines.efi_select, "fssp": baselines.fssp_select,
          "oracle": baselines.brute_force_optimum}[method]
    return _placement_line(fn(cond, p))


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "model":
            config = _load(args)
            library = config.build_library()
            basis = library.condition(args.condition).basis
            save_basis(basis, args.out)
            print(f"saved modal basis for {args.condition!r} to {args.out}")

        elif args.command == "train":
            config = _load(args)
            def progress(record):
                print(f"epoch {record.epoch}: reward={record.mean_episode_reward:.4f} "
                      f"final_score={record.final_score:.4f} eps={record.epsilon:.3f}",
                      flush=True)
            artifacts = harness.run_train(config, progress=progress)
            print(f"metrics: {artifacts['metrics_csv']}")
            for path in artifacts["checkpoints"]:
                print(f"checkpoint: {path}")

        elif args.command == "eval":
            config = _load(args)
            conditions = [args.condition] if args.condition else None
            artifacts = harness.run_eval(args.checkpoint, config,
                                         conditions=conditions, steps=args.steps,
                                         out_dir=args.out)
            print(f"comparison: {artifacts['comparison_csv']}")

        elif args.command == "baseline":
            config = _load(args)
            print(_run_baseline(config, args.method, args.condition,
                                args.sensors, args.steps, args.seed))

        elif args.command == "oracle":
            config = _load(args)
            print(_run_baseline(config, "oracle", args.condition,
                                args.sensors, None, 0))

        elif args.command == "metrics":
            for path in harness.plot_metrics(args.run):
                print(f"plot: {path}")

    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
