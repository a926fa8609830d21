"""Command-line entry point.

Subcommands: ``train`` (run a scenario, write snapshot + metrics),
``eval`` (score a saved model on a dataset), ``synth`` (generate a
synthetic dataset file), and ``replay-ablation`` (paired with/without-replay
incremental runs). Every run writes its fully-resolved configuration next
to its outputs so it can be reproduced bit-identically.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import (DataError, SyntheticSpec, export_metrics, generate_synthetic,
                   load_dataset, write_dataset)
from .harness import (HarnessError, RunConfig, aggregate_logs, evaluate,
                      run_scenario, run_trials, split_train_test)
from .network import NetworkParams, semantic_params
from .snapshot import SnapshotError, load_model, save_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3

_NET_FIELDS = ("insertion_threshold", "habituation_threshold", "tau_bmu",
               "tau_neighbor", "kappa", "depth", "alpha", "beta", "eps_bmu",
               "eps_neighbor", "max_edge_age")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        raise UsageError(message)


# ----------------------------------------------------------------------
# config files: one `key = value` pair per line

def _parse_bool(raw: str) -> bool:
    if raw.lower() in ("true", "1", "yes", "on"):
        return True
    if raw.lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _net_kv(prefix: str, params: NetworkParams) -> list[str]:
    lines = []
    for name in _NET_FIELDS:
        value = getattr(params, name)
        if name == "alpha":
            value = ",".join(repr(v) for v in value)
        elif value is None:
            value = "none"
        lines.append(f"{prefix}_{name} = {value}")
    return lines


def config_text(config: RunConfig, data: Optional[str], out: Optional[str]) -> str:
    lines = [
        f"scenario = {config.scenario}",
        f"epochs = {config.epochs}",
        f"epochs_per_batch = {config.epochs_per_batch}",
        f"trials = {config.trials}",
        f"seeds = {','.join(str(s) for s in config.seeds)}",
        f"replay = {str(config.replay).lower()}",
        f"tc = {config.tc}",
        f"test_sessions = {','.join(str(s) for s in config.test_sessions)}",
        f"jobs = {config.jobs}",
    ]
    if data is not None:
        lines.append(f"data = {data}")
    if out is not None:
        lines.append(f"out = {out}")
    lines += _net_kv("em", config.em_params)
    lines += _net_kv("sm", config.sm_params)
    return "\n".join(lines) + "\n"


def read_config_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def apply_config_values(config: RunConfig, values: dict[str, str]) -> dict[str, str]:
    """Apply key/value pairs to a RunConfig; returns leftover keys (paths)."""
    leftovers: dict[str, str] = {}
    net_updates: dict[str, dict] = {"em": {}, "sm": {}}
    for key, raw in values.items():
        try:
            if key == "scenario":
                config.scenario = raw
            elif key == "epochs":
                config.epochs = int(raw)
            elif key == "epochs_per_batch":
                config.epochs_per_batch = int(raw)
            elif key == "trials":
                config.trials = int(raw)
            elif key == "seeds":
                config.seeds = tuple(int(v) for v in raw.split(",") if v)
            elif key == "replay":
                config.replay = _parse_bool(raw)
            elif key == "tc":
                config.tc = raw
            elif key == "test_sessions":
                config.test_sessions = tuple(int(v) for v in raw.split(",") if v)
            elif key == "jobs":
                config.jobs = int(raw)
            elif "_" in key and key.split("_", 1)[0] in ("em", "sm") \
                    and key.split("_", 1)[1] in _NET_FIELDS:
                prefix, name = key.split("_", 1)
                if name == "alpha":
                    net_updates[prefix][name] = tuple(float(v) for v in raw.split(","))
                elif name == "depth":
                    net_updates[prefix][name] = int(raw)
                elif name == "max_edge_age":
                    net_updates[prefix][name] = None if raw == "none" else int(raw)
                else:
                    net_updates[prefix][name] = float(raw)
            else:
                leftovers[key] = raw
        except ValueError as exc:
            raise DataError(f"config key {key!r}: {exc}") from exc
    if net_updates["em"]:
        config.em_params = dataclasses.replace(config.em_params, **net_updates["em"])
    if net_updates["sm"]:
        config.sm_params = dataclasses.replace(config.sm_params, **net_updates["sm"])
    return leftovers


def _config_from_args(args) -> RunConfig:
    config = RunConfig()
    if args.config:
        apply_config_values(config, read_config_file(Path(args.config)))
    overrides: dict[str, str] = {}
    for key in ("scenario", "epochs", "epochs_per_batch", "trials", "tc", "jobs"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "seeds", None):
        overrides["seeds"] = args.seeds
    if getattr(args, "test_sessions", None):
        overrides["test_sessions"] = args.test_sessions
    if getattr(args, "replay", None) is not None:
        overrides["replay"] = str(args.replay)
    apply_config_values(config, overrides)
    if config.tc == "none":
        config.em_params = config.em_params.with_depth(0)
        config.sm_params = config.sm_params.with_depth(0)
    config.validate()
    return config


# ----------------------------------------------------------------------
# subcommands

def cmd_train(args) -> int:
    config = _config_from_args(args)
    dataset = load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(
        config_text(config, data=str(args.data), out=str(out)), encoding="utf-8")
    seeds = list(config.seeds)[: config.trials]
    logs = []
    model = None
    if config.jobs > 1:
        logs = run_trials(dataset, config, seeds)
        _, model = run_scenario(dataset, config, seeds[0])
    else:
        for seed in seeds:
            log, trial_model = run_scenario(dataset, config, seed)
            logs.append(log)
            if model is None:
                model = trial_model
    for log in logs:
        export_metrics(log, out / f"metrics_seed{log.seed}.txt", fmt="text")
        export_metrics(log, out / f"metrics_seed{log.seed}.json", fmt="json")
    summary = aggregate_logs(logs)
    summary["scenario"] = config.scenario
    summary["seeds"] = seeds
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    save_model(model, out / "model.gdmm")
    final = summary["final"]
    print(f"scenario={config.scenario} trials={len(logs)} "
          f"instance_acc={final['instance_acc']['mean']:.2f} "
          f"category_acc={final['category_acc']['mean']:.2f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.data)
    depth = 0 if args.tc in ("none", "test-none") else None
    test_sessions = tuple(int(v) for v in args.test_sessions.split(",")) \
        if args.test_sessions else (3, 7, 10)
    if args.all_frames:
        test_idx = np.arange(dataset.n_frames)
    else:
        _, test_idx = split_train_test(dataset, test_sessions)
    result = evaluate(model, dataset, test_idx, depth=depth)
    print(f"instance_acc={result.instance_acc!r} "
          f"category_acc={result.category_acc!r} frames={result.n_frames}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_categories=args.categories, instances_per_category=args.instances,
        sequences_per_instance=args.sequences, frames_per_sequence=args.frames,
        dim=args.dim, category_spread=args.category_spread,
        instance_spread=args.instance_spread, drift=args.drift,
        noise=args.noise, seed=args.seed)
    try:
        spec.validate()
    except ValueError as exc:
        raise HarnessError(str(exc)) from exc
    dataset = generate_synthetic(spec)
    write_dataset(dataset, args.out)
    print(f"wrote {dataset.n_frames} frames (dim={dataset.dim}) to {args.out}")
    return EXIT_OK


def cmd_replay_ablation(args) -> int:
    config = _config_from_args(args)
    if config.scenario == "batch":
        raise HarnessError("replay-ablation requires an incremental scenario")
    dataset = load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(config.seeds)[: config.trials]
    arms = {}
    for name, replay in (("with_replay", True), ("without_replay", False)):
        arm_config = dataclasses.replace(config, replay=replay)
        logs = []
        for seed in seeds:
            log, _ = run_scenario(dataset, arm_config, seed)
            logs.append(log)
            export_metrics(log, out / f"metrics_{name}_seed{seed}.txt")
        arms[name] = aggregate_logs(logs)
    (out / "config.resolved").write_text(
        config_text(config, data=str(args.data), out=str(out)), encoding="utf-8")
    delta = {
        name: arms["with_replay"]["final"][name]["mean"]
        - arms["without_replay"]["final"][name]["mean"]
        for name in ("instance_acc", "category_acc", "first_category_acc",
                     "first_instances_acc")}
    doc = {"scenario": config.scenario, "seeds": seeds, "arms": arms,
           "replay_delta": delta}
    (out / "ablation.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(" ".join(f"delta_{k}={v:+.2f}" for k, v in delta.items()))
    return EXIT_OK


# ----------------------------------------------------------------------
# argument wiring

def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override")
    p.add_argument("--scenario", choices=("batch", "incremental", "ni", "nc", "nic"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--epochs-per-batch", dest="epochs_per_batch", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seeds", help="comma-separated trial seeds")
    p.add_argument("--replay", dest="replay", action="store_true", default=None)
    p.add_argument("--no-replay", dest="replay", action="store_false")
    p.add_argument("--tc", choices=("full", "none", "test-none"))
    p.add_argument("--test-sessions", dest="test_sessions",
                   help="comma-separated held-out session ids")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel trials (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualmem",
                     description="Growing dual-memory continual learning engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train on a dataset and write outputs")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True)
    _add_run_options(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved model snapshot")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--tc", choices=("full", "test-none", "none"), default="full")
    p_eval.add_argument("--test-sessions", dest="test_sessions")
    p_eval.add_argument("--all-frames", action="store_true",
                        help="score every frame instead of the test split")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="write a synthetic dataset file")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--categories", type=int, default=10)
    p_synth.add_argument("--instances", type=int, default=5)
    p_synth.add_argument("--sequences", type=int, default=11)
    p_synth.add_argument("--frames", type=int, default=6)
    p_synth.add_argument("--dim", type=int, default=24)
    p_synth.add_argument("--category-spread", type=float, default=1.0)
    p_synth.add_argument("--instance-spread", type=float, default=0.35)
    p_synth.add_argument("--drift", type=float, default=0.08)
    p_synth.add_argument("--noise", type=float, default=0.05)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.set_defaults(func=cmd_synth)

    p_abl = sub.add_parser("replay-ablation",
                           help="paired incremental runs with and without replay")
    p_abl.add_argument("--data", required=True)
    p_abl.add_argument("--out", required=True)
    _add_run_options(p_abl)
    p_abl.set_defaults(func=cmd_replay_ablation)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataError, SnapshotError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (HarnessError, ValueError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
