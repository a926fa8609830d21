"""Scenario scheduling, training orchestration, and metric computation.

Realizes the evaluation protocols: a single-batch multi-epoch regime and
four incremental regimes (category-by-category, new-instances, new-classes,
new-instances-and-classes), with optional trajectory replay after each
mini-batch, multi-seed trials, and frame-level accuracy metrics at instance
and category level.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .data import EpochRecord, MetricsLog, SequenceDataset
from .model import DualMemory
from .network import NetworkParams, semantic_params

DEFAULT_TEST_SESSIONS = (3, 7, 10)
SCENARIOS = ("batch", "incremental", "ni", "nc", "nic")


class HarnessError(Exception):
    """Invalid scenario, schedule, or evaluation input."""


@dataclass
class RunConfig:
    """Engine-level configuration for one experiment."""

    scenario: str = "batch"
    epochs: int = 35
    epochs_per_batch: int = 1
    trials: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    replay: bool = False
    tc: str = "full"  # full | none | test-none
    test_sessions: tuple[int, ...] = DEFAULT_TEST_SESSIONS
    jobs: int = 1
    em_params: NetworkParams = field(default_factory=NetworkParams)
    sm_params: NetworkParams = field(default_factory=semantic_params)

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise HarnessError(f"unknown scenario {self.scenario!r}")
        if self.tc not in ("full", "none", "test-none"):
            raise HarnessError(f"unknown temporal-context mode {self.tc!r}")
        if self.epochs < 1 or self.epochs_per_batch < 1 or self.trials < 1:
            raise HarnessError("epochs, epochs_per_batch and trials must be >= 1")
        self.em_params.validate()
        self.sm_params.validate()

    @property
    def eval_depth(self) -> Optional[int]:
        return 0 if self.tc in ("none", "test-none") else None

    def network_params(self) -> tuple[NetworkParams, NetworkParams]:
        if self.tc == "none":
            return self.em_params.with_depth(0), self.sm_params.with_depth(0)
        return self.em_params, self.sm_params


@dataclass
class ScenarioSchedule:
    """An ordered list of training mini-batches (each a list of sequences,
    each sequence an array of frame indices)."""

    kind: str
    batches: list[list[np.ndarray]]
    epochs_per_batch: int
    replay: bool
    seed: int


@dataclass
class EvalResult:
    instance_acc: float
    category_acc: float
    per_category: dict[int, dict[str, float]]
    n_frames: int


# ----------------------------------------------------------------------
# splitting and schedules

def split_train_test(dataset: SequenceDataset,
                     test_sessions: Sequence[int] = DEFAULT_TEST_SESSIONS
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Frame indices for the train/test split by held-out session ids."""
    mask = np.isin(dataset.sessions, np.asarray(list(test_sessions)))
    test_idx = np.flatnonzero(mask)
    train_idx = np.flatnonzero(~mask)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise HarnessError(
            f"empty split: {len(train_idx)} train / {len(test_idx)} test frames "
            f"for test sessions {tuple(test_sessions)}")
    return train_idx, test_idx


def _category_of(dataset: SequenceDataset, seq: np.ndarray) -> int:
    return int(dataset.categories[seq[0]])


def _instance_of(dataset: SequenceDataset, seq: np.ndarray) -> int:
    return int(dataset.instances[seq[0]])


def build_schedule(dataset: SequenceDataset, kind: str, train_idx: np.ndarray,
                   seed: int, epochs: int = 35, epochs_per_batch: int = 1,
                   replay: bool = False) -> ScenarioSchedule:
    """Realize one scenario as an ordered list of mini-batches.

    Seeded shuffling drives category/batch order; every training frame is
    placed in exactly one mini-batch.
    """
    rng = np.random.default_rng(seed)
    groups = dataset.sequence_groups(train_idx)
    if not groups:
        raise HarnessError("no training sequences")
    if kind == "batch":
        batches = [groups]
        epochs_per_batch = epochs
    elif kind == "incremental":
        cats = sorted({_category_of(dataset, g) for g in groups})
        order = [cats[i] for i in rng.permutation(len(cats))]
        batches = [[g for g in groups if _category_of(dataset, g) == c]
                   for c in order]
    elif kind == "ni":
        sessions = sorted({int(dataset.sessions[g[0]]) for g in groups})
        order = [sessions[i] for i in rng.permutation(len(sessions))]
        batches = [[g for g in groups if int(dataset.sessions[g[0]]) == s]
                   for s in order]
    elif kind == "nc":
        cats = sorted({_category_of(dataset, g) for g in groups})
        order = [cats[i] for i in rng.permutation(len(cats))]
        first = [g for g in groups
                 if _category_of(dataset, g) in order[:2]]
        batches = [first] + [
            [g for g in groups if _category_of(dataset, g) == c]
            for c in order[2:]]
    elif kind == "nic":
        batches = _nic_batches(dataset, groups, rng)
    else:
        raise HarnessError(f"unknown scenario {kind!r}")
    schedule = ScenarioSchedule(kind=kind, batches=batches,
                                epochs_per_batch=epochs_per_batch,
                                replay=replay, seed=seed)
    _check_coverage(schedule, train_idx)
    return schedule


def _nic_batches(dataset: SequenceDataset, groups: list[np.ndarray],
                 rng: np.random.Generator) -> list[list[np.ndarray]]:
    """First batch: one sequence per category (its first object); later
    batches: five sequences, from distinct objects where possible."""
    by_cat: dict[int, list[int]] = {}
    for gi, g in enumerate(groups):
        by_cat.setdefault(_category_of(dataset, g), []).append(gi)
    cats = sorted(by_cat)
    cat_order = [cats[i] for i in rng.permutation(len(cats))]
    first_ids = []
    for c in cat_order:
        members = by_cat[c]
        first_obj = min(_instance_of(dataset, groups[gi]) for gi in members)
        first_ids.append(min(gi for gi in members
                             if _instance_of(dataset, groups[gi]) == first_obj))
    remaining = [gi for gi in range(len(groups)) if gi not in set(first_ids)]
    remaining = [remaining[i] for i in rng.permutation(len(remaining))]
    batches = [[groups[gi] for gi in first_ids]]
    pool = list(remaining)
    while pool:
        batch_ids: list[int] = []
        used_instances: set[int] = set()
        rest: list[int] = []
        for gi in pool:
            inst = _instance_of(dataset, groups[gi])
            if len(batch_ids) < 5 and inst not in used_instances:
                batch_ids.append(gi)
                used_instances.add(inst)
            else:
                rest.append(gi)
        while len(batch_ids) < 5 and rest:  # tail fallback: allow repeats
            batch_ids.append(rest.pop(0))
        batches.append([groups[gi] for gi in batch_ids])
        pool = rest
    return batches


def _check_coverage(schedule: ScenarioSchedule, train_idx: np.ndarray) -> None:
    seen: list[int] = []
    for batch in schedule.batches:
        for seq in batch:
            seen.extend(int(i) for i in seq)
    if sorted(seen) != sorted(int(i) for i in train_idx):
        raise HarnessError(
            f"schedule does not cover each training frame exactly once "
            f"({len(seen)} placed vs {len(train_idx)} training frames)")


# ----------------------------------------------------------------------
# training and evaluation

def make_model(dim: int, config: RunConfig) -> DualMemory:
    em, sm = config.network_params()
    return DualMemory(dim, episodic_params=em, semantic_params_=sm,
                      replay_enabled=config.replay)


def train_sequences(model: DualMemory, dataset: SequenceDataset,
                    sequences: list[np.ndarray], rng: np.random.Generator,
                    shuffle: bool = True) -> None:
    """One epoch over a mini-batch: sequences in (shuffled) order, temporal
    context reset at every sequence boundary."""
    order = rng.permutation(len(sequences)) if shuffle else range(len(sequences))
    for si in order:
        model.reset_contexts()
        for f in sequences[si]:
            model.train_step(dataset.features[f], int(dataset.instances[f]),
                             int(dataset.categories[f]))
    model.reset_contexts()


def evaluate(model: DualMemory, dataset: SequenceDataset, test_idx: np.ndarray,
             depth: Optional[int] = None) -> EvalResult:
    """Frame-level accuracy over the test frames, grouped into sequences
    with a context reset at each sequence start; missing predictions count
    as wrong. Accuracies are percentages."""
    if len(test_idx) == 0:
        raise HarnessError("empty test set")
    inst_ok = cat_ok = total = 0
    per_cat: dict[int, dict[str, float]] = {}
    for seq in dataset.sequence_groups(test_idx):
        frames = dataset.features[seq]
        preds = model.classify(frames, depth=depth)
        for f, (pred_inst, pred_cat) in zip(seq, preds):
            cat = int(dataset.categories[f])
            stats = per_cat.setdefault(cat, {"frames": 0, "instance_ok": 0,
                                             "category_ok": 0})
            stats["frames"] += 1
            total += 1
            if pred_inst == int(dataset.instances[f]):
                inst_ok += 1
                stats["instance_ok"] += 1
            if pred_cat == cat:
                cat_ok += 1
                stats["category_ok"] += 1
    breakdown = {
        c: {"frames": s["frames"],
            "instance_acc": 100.0 * s["instance_ok"] / s["frames"],
            "category_acc": 100.0 * s["category_ok"] / s["frames"]}
        for c, s in sorted(per_cat.items())}
    return EvalResult(instance_acc=100.0 * inst_ok / total,
                      category_acc=100.0 * cat_ok / total,
                      per_category=breakdown, n_frames=total)


def _mean_rate(rates: list[float]) -> float:
    return float(np.mean(rates)) if rates else 0.0


def _record(model: DualMemory, epoch: int, result: EvalResult,
            first_category: Optional[int]) -> EpochRecord:
    stats = result.per_category.get(first_category)
    return EpochRecord(
        epoch=epoch,
        em_neurons=model.episodic.n_neurons,
        sm_neurons=model.semantic.n_neurons,
        em_update_rate=_mean_rate(model.episodic.drain_update_rates()),
        sm_update_rate=_mean_rate(model.semantic.drain_update_rates()),
        instance_acc=result.instance_acc,
        category_acc=result.category_acc,
        first_category_acc=stats["category_acc"] if stats else 0.0,
        first_instances_acc=stats["instance_acc"] if stats else 0.0)


# ----------------------------------------------------------------------
# runners

def run_batch(dataset: SequenceDataset, config: RunConfig, seed: int,
              model: Optional[DualMemory] = None) -> tuple[MetricsLog, DualMemory]:
    """Single-batch regime: the whole training split, many epochs, sequence
    order reshuffled per epoch, evaluation after every epoch."""
    config.validate()
    train_idx, test_idx = split_train_test(dataset, config.test_sessions)
    schedule = build_schedule(dataset, "batch", train_idx, seed,
                              epochs=config.epochs)
    rng = np.random.default_rng(seed)
    model = model or make_model(dataset.dim, config)
    sequences = schedule.batches[0]
    log = MetricsLog(scenario="batch", seed=seed)
    first_category: Optional[int] = None
    for epoch in range(config.epochs):
        order = rng.permutation(len(sequences))
        if first_category is None:
            first_category = _category_of(dataset, sequences[int(order[0])])
        for si in order:
            model.reset_contexts()
            for f in sequences[si]:
                model.train_step(dataset.features[f], int(dataset.instances[f]),
                                 int(dataset.categories[f]))
        model.reset_contexts()
        if schedule.replay or config.replay:
            model.replay_pass()
        result = evaluate(model, dataset, test_idx, depth=config.eval_depth)
        log.records.append(_record(model, epoch, result, first_category))
    return log, model


def run_incremental(dataset: SequenceDataset, schedule: ScenarioSchedule,
                    config: RunConfig,
                    model: Optional[DualMemory] = None) -> tuple[MetricsLog, DualMemory]:
    """Mini-batch regime: each batch trained for a fixed number of epochs,
    optional replay after each batch, evaluation after each batch.

    The category-incremental regime scores test frames of the categories
    encountered so far; the benchmark regimes (ni, nc, nic) always score
    the full test set.
    """
    config.validate()
    train_idx, test_idx = split_train_test(dataset, config.test_sessions)
    model = model or make_model(dataset.dim, config)
    rng = np.random.default_rng(schedule.seed)
    log = MetricsLog(scenario=schedule.kind, seed=schedule.seed)
    seen_categories: set[int] = set()
    first_category: Optional[int] = None
    for b, batch in enumerate(schedule.batches):
        if first_category is None:
            first_category = _category_of(dataset, batch[0])
        seen_categories.update(_category_of(dataset, g) for g in batch)
        for _ in range(schedule.epochs_per_batch):
            train_sequences(model, dataset, batch, rng)
        if schedule.replay:
            model.replay_pass()
        if schedule.kind == "incremental":
            mask = np.isin(dataset.categories[test_idx],
                           np.asarray(sorted(seen_categories)))
            eval_idx = test_idx[mask]
        else:
            eval_idx = test_idx
        result = evaluate(model, dataset, eval_idx, depth=config.eval_depth)
        log.records.append(_record(model, b, result, first_category))
    return log, model


def run_scenario(dataset: SequenceDataset, config: RunConfig,
                 seed: int) -> tuple[MetricsLog, DualMemory]:
    """Run one trial of the configured scenario."""
    config.validate()
    if config.scenario == "batch":
        return run_batch(dataset, config, seed)
    train_idx, _ = split_train_test(dataset, config.test_sessions)
    schedule = build_schedule(dataset, config.scenario, train_idx, seed,
                              epochs=config.epochs,
                              epochs_per_batch=config.epochs_per_batch,
                              replay=config.replay)
    return run_incremental(dataset, schedule, config)


def _trial_worker(args) -> MetricsLog:
    dataset, config, seed = args
    log, _ = run_scenario(dataset, config, seed)
    return log


def run_trials(dataset: SequenceDataset, config: RunConfig,
               seeds: Optional[Sequence[int]] = None) -> list[MetricsLog]:
    """Run one trial per seed; trials are independent and may run in
    parallel when ``config.jobs`` > 1."""
    config.validate()
    seeds = list(seeds if seeds is not None else config.seeds)[: config.trials]
    if not seeds:
        raise HarnessError("no seeds supplied")
    jobs = max(1, config.jobs)
    if jobs == 1 or len(seeds) == 1:
        return [_trial_worker((dataset, config, s)) for s in seeds]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_trial_worker,
                             [(dataset, config, s) for s in seeds]))


def aggregate_logs(logs: Sequence[MetricsLog]) -> dict:
    """Mean and standard deviation per metric, final epoch and per epoch."""
    if not logs:
        raise HarnessError("no logs to aggregate")
    fields = ("em_neurons", "sm_neurons", "em_update_rate", "sm_update_rate",
              "instance_acc", "category_acc", "first_category_acc",
              "first_instances_acc")
    final = {}
    for name in fields:
        values = np.asarray([getattr(log.final, name) for log in logs], dtype=float)
        final[name] = {"mean": float(values.mean()), "std": float(values.std())}
    n_epochs = min(len(log.records) for log in logs)
    per_epoch = []
    for e in range(n_epochs):
        row = {"epoch": e}
        for name in fields:
            values = np.asarray([getattr(log.records[e], name) for log in logs],
                                dtype=float)
            row[name] = {"mean": float(values.mean()), "std": float(values.std())}
        per_epoch.append(row)
    return {"trials": len(logs), "final": final, "per_epoch": per_epoch}
