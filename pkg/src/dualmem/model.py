"""Dual-memory composition: episodic and semantic growing networks.

The episodic network learns instance-level spatiotemporal prototypes from
raw feature frames in an unsupervised fashion and keeps both instance and
category histograms. The semantic network consumes the episodic BMU weight
of every frame and regulates its own plasticity with category labels: it
only inserts on label mismatch and only adapts on label match, yielding a
compact category-level map. Stored temporal-transition counters in the
episodic network let the model regenerate prototype trajectories and replay
them to both networks without touching any stored training sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .network import GrowingNetwork, NetworkParams, StepReport, semantic_params

INSTANCE = "instance"
CATEGORY = "category"


@dataclass
class Trajectory:
    """A replayable pseudo-sequence of episodic neuron weights."""

    elements: list[np.ndarray]
    instance_labels: list[Optional[int]]
    category_labels: list[Optional[int]]
    source_neuron: int

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def fully_labeled(self) -> bool:
        return (all(l is not None for l in self.instance_labels)
                and all(l is not None for l in self.category_labels))


@dataclass
class SemanticEvent:
    """One semantic-network training event, for gating audits."""

    step: int
    bmu_id: int
    predicted: Optional[int]
    target: int
    matched: bool
    inserted: bool
    updated: bool


@dataclass
class ReplayReport:
    n_trajectories: int = 0
    episodic_steps: int = 0
    semantic_steps: int = 0


class DualMemory:
    """Episodic + semantic growing networks trained frame by frame."""

    def __init__(self, dim: int,
                 episodic_params: Optional[NetworkParams] = None,
                 semantic_params_: Optional[NetworkParams] = None,
                 replay_enabled: bool = False,
                 replay_direction: str = "forward",
                 semantic_input: str = "post"):
        if replay_direction not in ("forward", "backward"):
            raise ValueError("replay_direction must be 'forward' or 'backward'")
        if semantic_input not in ("post", "pre"):
            raise ValueError("semantic_input must be 'post' or 'pre'")
        ep = episodic_params or NetworkParams()
        sp = semantic_params_ or semantic_params()
        self.episodic = GrowingNetwork(dim, ep, label_tables=(INSTANCE, CATEGORY))
        self.semantic = GrowingNetwork(dim, sp, label_tables=(CATEGORY,))
        self.replay_enabled = replay_enabled
        self.replay_direction = replay_direction
        self.semantic_input = semantic_input
        self.semantic_events: list[SemanticEvent] = []
        self._step = 0

    @property
    def dim(self) -> int:
        return self.episodic.dim

    @property
    def trajectory_length(self) -> int:
        """Replay trajectory length: combined temporal span of both networks."""
        return self.episodic.params.depth + self.semantic.params.depth + 1

    # ------------------------------------------------------------------
    # training

    def train_step(self, feature: np.ndarray, instance_label: int,
                   category_label: int) -> tuple[StepReport, StepReport]:
        """Train both networks on one labeled frame.

        The episodic network always learns; the semantic network sees the
        episodic BMU weight and gates insertion on category mismatch (an
        empty histogram counts as a mismatch) and adaptation on match.
        """
        feature = np.asarray(feature, dtype=float)
        pre_weights = None
        if self.semantic_input == "pre":
            pre_weights = self.episodic.weights[: self.episodic.count].copy()
        em_report = self.episodic.train_step(
            feature, labels=(instance_label, category_label))
        if self.semantic_input == "post" or em_report.final_bmu >= len(pre_weights):
            sm_input = self.episodic.weights[em_report.final_bmu].copy()
        else:
            sm_input = pre_weights[em_report.final_bmu]
        state: dict[str, Optional[int]] = {}

        def insert_gate(net: GrowingNetwork, bmu: int) -> bool:
            state["pred"] = net.predict_label(bmu, CATEGORY)
            state["bmu"] = bmu
            return state["pred"] != category_label

        def update_gate(net: GrowingNetwork, nid: int) -> bool:
            # Called first for the BMU, then per neighbor: a neuron only
            # adapts toward an input of the category it predicts.
            pred = net.predict_label(nid, CATEGORY)
            if "pred" not in state:
                state["pred"] = pred
                state["bmu"] = nid
            return pred == category_label

        sm_report = self.semantic.train_step(
            sm_input, labels=(category_label,),
            insert_gate=insert_gate, update_gate=update_gate)
        pred = state.get("pred")
        self.semantic_events.append(SemanticEvent(
            step=self._step, bmu_id=sm_report.bmu_id, predicted=pred,
            target=category_label, matched=(pred == category_label),
            inserted=sm_report.inserted_id is not None,
            updated=sm_report.updated))
        self._step += 1
        return em_report, sm_report

    def reset_contexts(self) -> None:
        """Zero both temporal contexts; call at every sequence boundary."""
        self.episodic.reset_context()
        self.semantic.reset_context()

    # ------------------------------------------------------------------
    # inference

    def classify(self, frames: np.ndarray,
                 depth: Optional[int] = None) -> list[tuple[Optional[int], Optional[int]]]:
        """Per-frame (instance, category) predictions; no network mutation.

        Context state lives in per-call carriers, so concurrent calls on a
        quiescent model are safe. ``depth=0`` classifies single frames
        without temporal context.
        """
        frames = np.asarray(frames, dtype=float)
        if frames.ndim == 1:
            frames = frames[None, :]
        em_ctx = self.episodic.new_context_carrier()
        sm_ctx = self.semantic.new_context_carrier()
        out: list[tuple[Optional[int], Optional[int]]] = []
        for x in frames:
            em_bmu, _ = self.episodic.query(x, em_ctx, depth=depth)
            instance = self.episodic.predict_label(em_bmu, INSTANCE)
            sm_bmu, _ = self.semantic.query(self.episodic.weights[em_bmu],
                                            sm_ctx, depth=depth)
            category = self.semantic.predict_label(sm_bmu, CATEGORY)
            out.append((instance, category))
        return out

    # ------------------------------------------------------------------
    # replay

    def generate_trajectory(self, seed_id: int) -> Trajectory:
        """Trace the strongest temporal links from one episodic neuron.

        Forward traversal follows successor counters (the direction the
        context recursion was trained on); the backward switch follows
        predecessor counters instead. Stops early at a neuron with no
        positive link; revisits (cycles) are allowed.
        """
        em = self.episodic
        follow = em.next_neuron if self.replay_direction == "forward" else em.prev_neuron
        ids = [seed_id]
        cur = seed_id
        for _ in range(self.trajectory_length - 1):
            nxt = follow(cur)
            if nxt is None:
                break
            ids.append(nxt)
            cur = nxt
        return Trajectory(
            elements=[em.weights[i].copy() for i in ids],
            instance_labels=[em.predict_label(i, INSTANCE) for i in ids],
            category_labels=[em.predict_label(i, CATEGORY) for i in ids],
            source_neuron=seed_id)

    def replay_pass(self) -> ReplayReport:
        """Regenerate one trajectory per episodic neuron and retrain both
        networks on them as ordinary labeled steps.

        Data-free by construction: only neuron state is read. Contexts are
        reset around every trajectory; trajectories shorter than 2 elements
        or with unlabeled elements are discarded.
        """
        report = ReplayReport()
        seeds = [int(i) for i in self.episodic.live_ids()]
        trajectories = [self.generate_trajectory(j) for j in seeds]
        for traj in trajectories:
            if len(traj) < 2 or not traj.fully_labeled:
                continue
            report.n_trajectories += 1
            self.reset_contexts()
            for elem, inst, cat in zip(traj.elements, traj.instance_labels,
                                       traj.category_labels):
                self.train_step(elem, inst, cat)
                report.episodic_steps += 1
                report.semantic_steps += 1
            self.reset_contexts()
        return report
