"""Experiment front end.

Subcommands: simulate, compare, gen-dataset, train, evaluate. Every run
writes a manifest (config hash, master seed, package version, kernel
backend) next to its CSV outputs. Exit codes: 0 success, 2 configuration
error, 3 runtime error.

All randomness derives from one master seed, split deterministically per
episode, so schedulers compared under the same seed see bit-identical
channel trajectories. Wall-clock columns are the only non-deterministic
output fields.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, backend, metrics, ml
from .codebook import codebook_from_config
from .config import SystemConfig, load_config
from .errors import CombinatorialCapError, ConfigurationError
from .protocol import episode_seed, run_episode
from .schedulers import SCHEDULER_NAMES, make_scheduler

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _default_config_path() -> Path:
    from importlib import resources

    return Path(str(resources.files("beamsched").joinpath("configs", "desk.toml")))


def _load(args) -> SystemConfig:
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    return config


def _write_manifest(out_dir: Path, config: SystemConfig, command: str, extra=None):
    manifest = {
        "command": command,
        "config": config.to_dict(),
        "config_sha256": config.sha256(),
        "master_seed": config.seed,
        "package_version": __version__,
        "kernel_backend": backend.backend_name(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        manifest.update(extra)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


# episode execution (optionally process-parallel) -----------------------------

_WORKER_CACHE: dict = {}


def _episode_task(payload):
    config, scheduler_name, model_path, episode, seed, keep_rates = payload
    key = (config.sha256(), scheduler_name, model_path)
    cached = _WORKER_CACHE.get(key)
    if cached is None:
        model = ml.SelectorNetwork.load(model_path) if model_path else None
        cached = (codebook_from_config(config), make_scheduler(scheduler_name, model=model))
        _WORKER_CACHE[key] = cached
    codebook, scheduler = cached
    return run_episode(seed, config, scheduler, codebook=codebook,
                       episode=episode, keep_rates=keep_rates)


def _check_exhaustive_budget(config: SystemConfig, episodes: int) -> None:
    """Whole-run guard: subsets per slot x slots x episodes against the cap.

    The per-call cap inside exhaustive_select guards a single slot; a full
    run multiplies it by config.steps * episodes, which is what actually
    explodes at paper scale (I=20 already means ~6.2e5 sets per slot)."""
    from math import comb

    per_slot = sum(comb(config.users, m) for m in range(1, config.n_max + 1))
    total = per_slot * config.steps * episodes
    if total > config.exhaustive_cap:
        raise CombinatorialCapError(
            f"exhaustive run needs {total:.3g} ZF evaluations "
            f"({per_slot} sets/slot x {config.steps} slots x {episodes} episodes), "
            f"above the cap {config.exhaustive_cap:g}; use desk-scale parameters"
        )


def _run_episodes(config, scheduler_name, episodes, jobs, model_path=None,
                  keep_rates=False):
    if scheduler_name == "exhaustive":
        _check_exhaustive_budget(config, episodes)
    payloads = [
        (config, scheduler_name, model_path, e, episode_seed(config.seed, e), keep_rates)
        for e in range(episodes)
    ]
    if jobs <= 1:
        return [_episode_task(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        traces = list(pool.map(_episode_task, payloads, chunksize=4))
    return sorted(traces, key=lambda tr: tr.episode)


def _print_report_table(reports):
    header = f"{'scheduler':<14} {'PF(mean)':>10} {'geo-mean':>10} {'|M|':>6} " \
             f"{'chordal':>8} {'t_p50(us)':>10}"
    print(header)
    print("-" * len(header))
    for rep in reports:
        print(f"{rep.scheduler:<14} {rep.pf_mean:>10.4f} {rep.geo_mean:>10.4f} "
              f"{rep.mean_selected:>6.2f} {rep.mean_min_chordal:>8.4f} "
              f"{rep.time_p50_us:>10.1f}")


def _write_report(out_dir: Path, label: str, traces, perslot: bool):
    report = metrics.summarize(traces)
    report.scheduler = label
    metrics.write_cdf_csv(report, out_dir / f"cdf_{label}.csv")
    metrics.write_episodes_csv(report, out_dir / f"episodes_{label}.csv")
    if perslot:
        metrics.write_perslot_csv(traces, out_dir / f"perslot_{label}.csv")
    return report


# subcommands -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    config = _load(args)
    episodes = args.episodes if args.episodes is not None else config.episodes
    if args.scheduler == "ml" and not args.model:
        raise ConfigurationError("scheduler 'ml' requires --model")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces = _run_episodes(config, args.scheduler, episodes, args.jobs,
                           model_path=args.model[0] if args.model else None)
    report = _write_report(out_dir, args.scheduler, traces, args.perslot)
    metrics.write_summary_csv([report], out_dir / "summary.csv")
    _write_manifest(out_dir, config, "simulate",
                    {"scheduler": args.scheduler, "episodes": episodes})
    _print_report_table([report])
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _load(args)
    episodes = args.episodes if args.episodes is not None else config.episodes
    names = [s.strip() for s in args.schedulers.split(",") if s.strip()]
    unknown = [s for s in names if s not in SCHEDULER_NAMES]
    if unknown:
        raise ConfigurationError(f"unknown schedulers: {unknown}")
    if "ml" in names and not args.model:
        raise ConfigurationError("comparison includes 'ml' but no --model given")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs_plan = []
    for name in names:
        if name == "ml":
            for path in args.model:
                label = "ml" if len(args.model) == 1 else f"ml_{Path(path).stem}"
                jobs_plan.append((name, label, path))
        else:
            jobs_plan.append((name, name, None))

    reports = []
    for name, label, model_path in jobs_plan:
        traces = _run_episodes(config, name, episodes, args.jobs, model_path=model_path)
        reports.append(_write_report(out_dir, label, traces, args.perslot))
    metrics.write_summary_csv(reports, out_dir / "summary.csv")
    _write_manifest(out_dir, config, "compare",
                    {"schedulers": [label for _, label, _ in jobs_plan],
                     "episodes": episodes})
    _print_report_table(reports)
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    config = _load(args)
    episodes = args.episodes if args.episodes is not None else config.train_episodes
    steps = args.steps if args.steps is not None else config.steps
    dataset = ml.generate_dataset(
        config, episodes, steps=steps, seed=config.seed,
        store_complex=args.store_complex,
        progress=(lambda done, total: print(f"\repisodes {done}/{total}", end="",
                                            flush=True)) if args.progress else None,
    )
    if args.progress:
        print()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.save(out)
    print(f"wrote {len(dataset)} samples ({dataset.n_episodes} episodes) to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load(args)
    if args.dataset:
        dataset = ml.SlotDataset.load(args.dataset)
    else:
        episodes = args.episodes if args.episodes is not None else config.train_episodes
        print(f"generating dataset: {episodes} episodes x {config.steps} steps")
        dataset = ml.generate_dataset(config, episodes, seed=config.seed)
    mode = args.mode or config.input_mode
    if args.resume:
        net = ml.SelectorNetwork.load(args.resume)
        if net.feature_mode != mode:
            raise ConfigurationError(
                f"resume model mode {net.feature_mode!r} != requested {mode!r}")
    else:
        spec = ml.FeatureSpec.parse(mode, dataset.n_users)
        net = ml.init_network(spec, hidden=(config.hidden1, config.hidden2),
                              seed=config.seed)
    epochs = args.epochs if args.epochs is not None else config.epochs
    lr = args.lr if args.lr is not None else config.learning_rate
    batch = args.batch_size if args.batch_size is not None else config.batch_size

    def report(stats):
        print(f"epoch {stats.epoch:>3d}  train_loss {stats.train_loss:.5f}  "
              f"val_loss {stats.val_loss:.5f}  val_acc {stats.val_accuracy:.4f}")

    net, history = ml.train(dataset, net, epochs, learning_rate=lr,
                            batch_size=batch, seed=config.seed,
                            val_fraction=config.val_fraction, verbose=report)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    net.save(out)
    curve_path = out.with_name(out.stem + "_curve.csv")
    with open(curve_path, "w") as fh:
        fh.write("epoch,train_loss,val_loss,val_accuracy\n")
        for st in history:
            fh.write(f"{st.epoch},{st.train_loss!r},{st.val_loss!r},{st.val_accuracy!r}\n")
    _write_manifest(out.parent, config, "train",
                    {"model": str(out), "mode": mode, "epochs": epochs,
                     "samples": len(dataset)})
    print(f"saved model to {out} (curve: {curve_path})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _load(args)
    episodes = args.episodes if args.episodes is not None else max(1, config.episodes // 10)
    net = ml.SelectorNetwork.load(args.model[0] if isinstance(args.model, list) else args.model)
    spec = ml.FeatureSpec.parse(net.feature_mode, net.n_users)

    # element accuracy against greedy labels on fresh test episodes
    test_set = ml.generate_dataset(config, episodes, seed=config.seed,
                                   store_complex=spec.channel_kind == "C(R/I)")
    x = ml.normalize_features(net, test_set.features(net.feature_mode))
    pred = (ml.sigmoid(ml.forward_logits(net, x)) >= 0.5).astype(float)
    accuracy = 1.0 - float(np.mean(np.abs(pred - test_set.targets)))

    traces = _run_episodes(config, "ml", episodes, args.jobs,
                           model_path=str(args.model[0] if isinstance(args.model, list) else args.model))
    report = metrics.summarize(traces)
    print(f"element accuracy vs greedy: {accuracy:.4f}")
    _print_report_table([report])
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics.write_summary_csv([report], out_dir / "summary.csv")
        with open(out_dir / "accuracy.csv", "w") as fh:
            fh.write("episodes,samples,element_accuracy\n")
            fh.write(f"{episodes},{len(test_set)},{accuracy!r}\n")
        _write_manifest(out_dir, config, "evaluate",
                        {"model": str(args.model), "episodes": episodes})
    return EXIT_OK


# parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamsched",
        description="mmWave hybrid-beamforming user-selection experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, episodes_help):
        p.add_argument("--config", default=str(_default_config_path()),
                       help="TOML config file (default: packaged desk.toml)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--episodes", type=int, default=None, help=episodes_help)
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel episode workers (default 1, exact timings)")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("simulate", help="run one scheduler, write metric CSVs")
    common(p, "episode count (default: config.episodes)")
    p.add_argument("--scheduler", choices=SCHEDULER_NAMES, default="greedy")
    p.add_argument("--model", action="append", default=[],
                   help="trained model path (required for --scheduler ml)")
    p.add_argument("--perslot", action="store_true", help="also write per-slot CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run several schedulers on shared seeds")
    common(p, "episode count (default: config.episodes)")
    p.add_argument("--schedulers", default="greedy,adaptive,topN,top1",
                   help="comma-separated scheduler names")
    p.add_argument("--model", action="append", default=[],
                   help="model path for 'ml'; repeat for ablation variants")
    p.add_argument("--perslot", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-dataset", help="record greedy-labeled training data")
    common(p, "episode count (default: config.train_episodes)")
    p.add_argument("--steps", type=int, default=None, help="slots per episode")
    p.add_argument("--store-complex", action="store_true",
                   help="keep complex effective channels (needed for W+C(R/I))")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_gen_dataset, out="dataset.npz")

    p = sub.add_parser("train", help="train the DNN selector")
    common(p, "episodes to generate when no --dataset is given")
    p.add_argument("--dataset", default=None, help="pre-generated dataset .npz")
    p.add_argument("--mode", default=None, help="input mode (default: config)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--resume", default=None, help="continue from a saved model")
    p.set_defaults(func=cmd_train, out="model.npz")

    p = sub.add_parser("evaluate", help="accuracy + PF of a trained model")
    common(p, "test episode count (default: config.episodes/10)")
    p.add_argument("--model", required=True, help="trained model path")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CombinatorialCapError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
