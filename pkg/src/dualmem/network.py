"""Recurrent grow-when-required network with temporal context.

A growing set of prototype neurons, each carrying a weight vector, a stack
of temporal context descriptors, a habituation counter, and per-label count
histograms. Best-matching-unit (BMU) search blends the input distance with
distances between the network's global context and each neuron's context
descriptors, so neurons become selective for short input histories rather
than single frames. Growth is gated by network activity and BMU habituation;
topology is maintained by competitive Hebbian edges; directed temporal
synapse counters record consecutive BMU transitions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

Gate = Union[bool, Callable[["GrowingNetwork", int], bool]]


@dataclass(frozen=True)
class NetworkParams:
    """Hyperparameters for one growing network.

    Defaults match the episodic-memory configuration; the semantic memory
    uses the same values with ``insertion_threshold=0.001``.
    """

    insertion_threshold: float = 0.3
    habituation_threshold: float = 0.1
    tau_bmu: float = 0.3
    tau_neighbor: float = 0.1
    kappa: float = 1.05
    depth: int = 2
    alpha: tuple[float, ...] = (0.67, 0.24, 0.09)
    beta: float = 0.7
    eps_bmu: float = 0.5
    eps_neighbor: float = 0.005
    max_edge_age: Optional[int] = None
    # Switches for behaviors the base method leaves open.
    global_edge_aging: bool = False
    adapt_on_insert: bool = False

    def validate(self) -> None:
        if not 0.0 < self.insertion_threshold <= 1.0:
            raise ValueError("insertion_threshold must be in (0, 1]")
        if not 0.0 < self.habituation_threshold < 1.0:
            raise ValueError("habituation_threshold must be in (0, 1)")
        if self.kappa <= 1.0:
            raise ValueError("kappa must be > 1")
        if self.tau_bmu <= self.tau_neighbor:
            raise ValueError("tau_bmu must exceed tau_neighbor")
        if self.tau_bmu * self.kappa >= 1.0:
            raise ValueError("tau * kappa must be < 1 for monotone habituation")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if len(self.alpha) != self.depth + 1:
            raise ValueError("alpha must have depth + 1 entries")
        if any(a <= 0.0 for a in self.alpha):
            raise ValueError("alpha entries must be > 0")
        if any(a <= b for a, b in zip(self.alpha, self.alpha[1:])):
            raise ValueError("alpha entries must be strictly decreasing")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if self.eps_neighbor >= self.eps_bmu:
            raise ValueError("eps_neighbor must be < eps_bmu")
        if self.max_edge_age is not None and self.max_edge_age < 0:
            raise ValueError("max_edge_age must be None or >= 0")

    def with_depth(self, depth: int) -> "NetworkParams":
        """Copy with a different temporal depth (alpha renormalized)."""
        if depth == self.depth:
            return self
        if depth == 0:
            alpha = (1.0,)
        else:
            base = np.array([0.67 * (0.36 ** k) for k in range(depth + 1)])
            alpha = tuple(base / base.sum())
        return replace(self, depth=depth, alpha=alpha)


def semantic_params(**overrides) -> NetworkParams:
    """Default hyperparameters for the label-regulated semantic network."""
    return replace(NetworkParams(insertion_threshold=0.001), **overrides)


def habituate(h: float, tau: float, kappa: float) -> float:
    """One habituation step: h + tau * kappa * (1 - h) - tau.

    Monotonically approaches the fixed point 1 - 1/kappa from above when
    tau * kappa < 1. Out-of-contract inputs are clamped with a warning.
    """
    lo = 1.0 - 1.0 / kappa
    if not lo <= h <= 1.0:
        logger.warning("habituation %r outside [%r, 1]; clamping", h, lo)
        h = min(max(h, 0.0), 1.0)
    out = h + tau * kappa * (1.0 - h) - tau
    return min(max(out, 0.0), 1.0)


def activity(d_b: float) -> float:
    """Network activity exp(-d), in (0, 1]; 1 iff the BMU distance is 0."""
    if d_b < 0.0:
        raise ValueError(f"BMU distance must be >= 0, got {d_b}")
    return math.exp(-d_b)


@dataclass
class StepReport:
    """Outcome of one learning iteration."""

    bmu_id: int
    second_id: Optional[int]
    distance: float
    activity: float
    inserted_id: Optional[int] = None
    updated: bool = False

    @property
    def final_bmu(self) -> int:
        """The neuron representing this step: the insertion if one occurred."""
        return self.inserted_id if self.inserted_id is not None else self.bmu_id


@dataclass
class ContextCarrier:
    """Private temporal-context scratch state for read-only queries."""

    context: np.ndarray  # (depth, dim)
    prev_bmu: Optional[int] = None


class GrowingNetwork:
    """One growing recurrent network instance.

    Single-writer: all mutating calls must be sequential. Read-only queries
    (``distance``, ``predict_label``, ``query``) are safe between mutations.
    """

    def __init__(self, dim: int, params: NetworkParams,
                 label_tables: Sequence[str] = ("label",)):
        params.validate()
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if not 1 <= len(label_tables) <= 2:
            raise ValueError("expected one or two label tables")
        self.dim = dim
        self.params = params
        self.label_tables = tuple(label_tables)
        self._capacity = 16
        self.count = 0  # next neuron id; ids are stable array rows
        k = params.depth
        self.weights = np.zeros((self._capacity, dim))
        self.contexts = np.zeros((self._capacity, k, dim))
        self.habituation = np.ones(self._capacity)
        self.alive = np.zeros(self._capacity, dtype=bool)
        self.histograms: list[list[dict[int, int]]] = [[] for _ in self.label_tables]
        self.neighbors: dict[int, set[int]] = {}
        self.edge_age: dict[tuple[int, int], int] = {}
        self.temporal_out: dict[int, dict[int, int]] = {}
        self.global_context = np.zeros((k, dim))
        self.prev_bmu: Optional[int] = None
        self.steps = 0
        self._any_deleted = False
        # Drained by the harness to compute per-epoch mean update rates.
        self.update_rates: list[float] = []

    # ------------------------------------------------------------------
    # introspection

    @property
    def n_neurons(self) -> int:
        return int(self.alive[: self.count].sum())

    def live_ids(self) -> np.ndarray:
        if not self._any_deleted:
            return np.arange(self.count)
        return np.flatnonzero(self.alive[: self.count])

    def is_live(self, neuron_id: int) -> bool:
        return 0 <= neuron_id < self.count and bool(self.alive[neuron_id])

    def _require_live(self, neuron_id: int) -> None:
        if not self.is_live(neuron_id):
            raise KeyError(f"no live neuron with id {neuron_id}")

    def drain_update_rates(self) -> list[float]:
        rates, self.update_rates = self.update_rates, []
        return rates

    # ------------------------------------------------------------------
    # distances and matching

    def distance(self, neuron_id: int, x: np.ndarray) -> float:
        """Context-weighted squared-Euclidean distance to one neuron."""
        self._require_live(neuron_id)
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"input shape {x.shape} != ({self.dim},)")
        alpha = self.params.alpha
        d = alpha[0] * float(np.sum((x - self.weights[neuron_id]) ** 2))
        for k in range(self.params.depth):
            diff = self.global_context[k] - self.contexts[neuron_id, k]
            d += alpha[k + 1] * float(np.sum(diff ** 2))
        return d

    def _distances(self, x: np.ndarray, context: np.ndarray,
                   depth: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        """Distances to every live neuron. Returns (ids, distances)."""
        ids = self.live_ids()
        w = self.weights[ids]
        alpha = self.params.alpha
        d = alpha[0] * np.sum((x[None, :] - w) ** 2, axis=1)
        k_eff = self.params.depth if depth is None else min(depth, self.params.depth)
        for k in range(k_eff):
            diff = context[k][None, :] - self.contexts[ids, k, :]
            d += alpha[k + 1] * np.sum(diff ** 2, axis=1)
        return ids, d

    def find_bmu(self, x: np.ndarray) -> tuple[int, int, float]:
        """Best and second-best matching units. Ties go to the smaller id."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"input shape {x.shape} != ({self.dim},)")
        ids, d = self._distances(x, self.global_context)
        if len(ids) < 2:
            raise RuntimeError("BMU search needs at least 2 live neurons")
        best = int(np.argmin(d))  # first minimum; ids ascend, so smallest id
        d2 = d.copy()
        d2[best] = np.inf
        second = int(np.argmin(d2))
        return int(ids[best]), int(ids[second]), float(d[best])

    # ------------------------------------------------------------------
    # temporal context

    def _context_from(self, prev_id: int) -> np.ndarray:
        """Merge recursion over the previous BMU; row 0 convention uses
        the weight vector as the depth-0 descriptor."""
        k = self.params.depth
        out = np.empty((k, self.dim))
        beta = self.params.beta
        w_prev = self.weights[prev_id]
        for i in range(k):
            prev_desc = w_prev if i == 0 else self.contexts[prev_id, i - 1]
            out[i] = beta * w_prev + (1.0 - beta) * prev_desc
        return out

    def update_global_context(self) -> None:
        """Advance the global context from the previous step's BMU.

        Must run once per step before BMU search; a missing previous BMU
        (sequence start) leaves the context at zero.
        """
        if self.prev_bmu is None or not self.is_live(self.prev_bmu):
            return
        self.global_context = self._context_from(self.prev_bmu)

    def reset_context(self) -> None:
        """Zero the global context and forget the previous BMU."""
        self.global_context = np.zeros((self.params.depth, self.dim))
        self.prev_bmu = None

    # ------------------------------------------------------------------
    # adaptation and growth

    def adapt(self, bmu_id: int, x: np.ndarray,
              neighbor_gate: Optional[Callable[["GrowingNetwork", int], bool]] = None) -> None:
        """Move the BMU and its topological neighbors toward the input and
        the global context, then habituate them.

        ``neighbor_gate`` restricts which neighbors take part; a filtered
        neighbor is left entirely untouched (no weight, context, or
        habituation change).
        """
        self._require_live(bmu_id)
        x = np.asarray(x, dtype=float)
        p = self.params
        h_b = self.habituation[bmu_id]
        self.weights[bmu_id] += p.eps_bmu * h_b * (x - self.weights[bmu_id])
        if p.depth:
            self.contexts[bmu_id] += p.eps_bmu * h_b * (
                self.global_context - self.contexts[bmu_id])
        self.update_rates.append(p.eps_bmu * h_b)
        neigh = sorted(self.neighbors.get(bmu_id, ()))
        if neighbor_gate is not None:
            neigh = [n for n in neigh if neighbor_gate(self, n)]
        for n in neigh:
            h_n = self.habituation[n]
            self.weights[n] += p.eps_neighbor * h_n * (x - self.weights[n])
            if p.depth:
                self.contexts[n] += p.eps_neighbor * h_n * (
                    self.global_context - self.contexts[n])
            self.update_rates.append(p.eps_neighbor * h_n)
        self.habituation[bmu_id] = habituate(h_b, p.tau_bmu, p.kappa)
        for n in neigh:
            self.habituation[n] = habituate(self.habituation[n], p.tau_neighbor, p.kappa)

    def _grow_arrays(self) -> None:
        new_cap = self._capacity * 2
        self.weights = np.resize(self.weights, (new_cap, self.dim))
        self.contexts = np.resize(self.contexts, (new_cap, self.params.depth, self.dim))
        self.habituation = np.resize(self.habituation, new_cap)
        alive = np.zeros(new_cap, dtype=bool)
        alive[: self._capacity] = self.alive
        self.alive = alive
        self._capacity = new_cap

    def add_neuron(self, weight: np.ndarray, contexts: Optional[np.ndarray] = None,
                   habituation_value: float = 1.0) -> int:
        """Append a neuron and return its id."""
        if self.count == self._capacity:
            self._grow_arrays()
        nid = self.count
        self.count += 1
        self.weights[nid] = np.asarray(weight, dtype=float)
        if contexts is None:
            self.contexts[nid] = 0.0
        else:
            self.contexts[nid] = np.asarray(contexts, dtype=float)
        self.habituation[nid] = habituation_value
        self.alive[nid] = True
        for table in self.histograms:
            table.append({})
        self.neighbors[nid] = set()
        return nid

    def maybe_insert(self, x: np.ndarray, bmu_id: int, second_id: int,
                     a: float, extra_gate: bool = True) -> Optional[int]:
        """Insert a neuron halfway between BMU and input when activity and
        habituation gates (and any caller-supplied gate) allow it."""
        p = self.params
        if not (a < p.insertion_threshold
                and self.habituation[bmu_id] < p.habituation_threshold
                and extra_gate):
            return None
        x = np.asarray(x, dtype=float)
        weight = 0.5 * (self.weights[bmu_id] + x)
        contexts = 0.5 * (self.contexts[bmu_id] + self.global_context)
        nid = self.add_neuron(weight, contexts)
        self._remove_edge(bmu_id, second_id)
        self._set_edge(nid, bmu_id, 0)
        self._set_edge(nid, second_id, 0)
        return nid

    # ------------------------------------------------------------------
    # topology

    @staticmethod
    def _ekey(i: int, j: int) -> tuple[int, int]:
        return (i, j) if i < j else (j, i)

    def _set_edge(self, i: int, j: int, age: int) -> None:
        self.edge_age[self._ekey(i, j)] = age
        self.neighbors.setdefault(i, set()).add(j)
        self.neighbors.setdefault(j, set()).add(i)

    def _remove_edge(self, i: int, j: int) -> None:
        self.edge_age.pop(self._ekey(i, j), None)
        self.neighbors.get(i, set()).discard(j)
        self.neighbors.get(j, set()).discard(i)

    def update_edges(self, bmu_id: int, second_id: int) -> None:
        """Refresh the BMU/second-BMU edge to age 0 and age the others.

        By default only edges incident to the BMU age; the global switch
        ages every edge. Finite ``max_edge_age`` enables pruning (and
        deletion of orphaned neurons), off by default.
        """
        key = self._ekey(bmu_id, second_id)
        if self.params.global_edge_aging:
            for k in self.edge_age:
                if k != key:
                    self.edge_age[k] += 1
        else:
            for n in self.neighbors.get(bmu_id, ()):
                k = self._ekey(bmu_id, n)
                if k != key:
                    self.edge_age[k] += 1
        self._set_edge(bmu_id, second_id, 0)
        if self.params.max_edge_age is not None:
            self._prune_edges()

    def _prune_edges(self) -> None:
        limit = self.params.max_edge_age
        stale = [k for k, age in self.edge_age.items() if age > limit]
        touched = set()
        for i, j in stale:
            self._remove_edge(i, j)
            touched.update((i, j))
        for nid in touched:
            if not self.neighbors.get(nid) and self.n_neurons > 2:
                self._delete_neuron(nid)

    def _delete_neuron(self, nid: int) -> None:
        self.alive[nid] = False
        self._any_deleted = True
        for n in list(self.neighbors.get(nid, ())):
            self._remove_edge(nid, n)
        self.neighbors.pop(nid, None)
        self.temporal_out.pop(nid, None)
        for links in self.temporal_out.values():
            links.pop(nid, None)
        if self.prev_bmu == nid:
            self.prev_bmu = None

    # ------------------------------------------------------------------
    # labels and temporal synapses

    def _table_index(self, which: Union[int, str]) -> int:
        if isinstance(which, str):
            return self.label_tables.index(which)
        return which

    def update_labels(self, bmu_id: int, labels: Sequence[Optional[int]]) -> None:
        """Increment the BMU's histogram count for each supplied label."""
        self._require_live(bmu_id)
        if len(labels) != len(self.label_tables):
            raise ValueError(
                f"expected {len(self.label_tables)} labels, got {len(labels)}")
        for table, label in zip(self.histograms, labels):
            if label is None:
                continue
            hist = table[bmu_id]
            hist[int(label)] = hist.get(int(label), 0) + 1

    def predict_label(self, neuron_id: int, which: Union[int, str] = 0) -> Optional[int]:
        """Most frequent label seen by a neuron; ties go to the smaller
        label id; None for an untrained neuron."""
        self._require_live(neuron_id)
        hist = self.histograms[self._table_index(which)][neuron_id]
        if not hist:
            return None
        return min(hist, key=lambda label: (-hist[label], label))

    def strengthen_temporal(self, prev_id: int, bmu_id: int) -> None:
        """Count one directed prev -> current BMU transition."""
        self._require_live(prev_id)
        self._require_live(bmu_id)
        links = self.temporal_out.setdefault(prev_id, {})
        links[bmu_id] = links.get(bmu_id, 0) + 1

    def next_neuron(self, neuron_id: int) -> Optional[int]:
        """Strongest outgoing temporal successor (self excluded), or None."""
        self._require_live(neuron_id)
        links = self.temporal_out.get(neuron_id, {})
        best = None
        for j, count in links.items():
            if j == neuron_id or count <= 0 or not self.is_live(j):
                continue
            if best is None or count > links[best] or (count == links[best] and j < best):
                best = j
        return best

    def prev_neuron(self, neuron_id: int) -> Optional[int]:
        """Strongest incoming temporal predecessor (self excluded), or None."""
        self._require_live(neuron_id)
        best = None
        best_count = 0
        for i in sorted(self.temporal_out):
            if i == neuron_id or not self.is_live(i):
                continue
            count = self.temporal_out[i].get(neuron_id, 0)
            if count > best_count:
                best, best_count = i, count
        return best

    # ------------------------------------------------------------------
    # learning iteration

    def _resolve(self, gate: Gate, bmu_id: int) -> bool:
        return gate(self, bmu_id) if callable(gate) else bool(gate)

    def train_step(self, x: np.ndarray, labels: Optional[Sequence[Optional[int]]] = None,
                   insert_gate: Gate = True, update_gate: Gate = True) -> StepReport:
        """One full learning iteration.

        Order: context advance, BMU search, activity, gated insertion;
        adaptation and edge bookkeeping only on non-insertion steps that
        pass the update gate; labels and the temporal synapse always go to
        the step's final BMU (the inserted neuron when one was created).

        The first two calls bootstrap the network from the inputs
        themselves: the sample becomes a neuron and acts as the step's BMU.
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"input shape {x.shape} != ({self.dim},)")
        self.update_global_context()
        if self.n_neurons < 2:
            nid = self.add_neuron(x, self.global_context.copy())
            report = StepReport(bmu_id=nid, second_id=None, distance=0.0,
                                activity=1.0, inserted_id=nid)
        else:
            bmu, second, d_b = self.find_bmu(x)
            a = activity(d_b)
            inserted = self.maybe_insert(x, bmu, second, a,
                                         extra_gate=self._resolve(insert_gate, bmu))
            updated = False
            if inserted is None:
                if self._resolve(update_gate, bmu):
                    # A callable gate also filters neighbor adaptation, so
                    # gated networks never drag ineligible neighbors.
                    self.adapt(bmu, x, neighbor_gate=update_gate
                               if callable(update_gate) else None)
                    self.update_edges(bmu, second)
                    updated = True
            elif self.params.adapt_on_insert:
                self.adapt(bmu, x)
                updated = True
            report = StepReport(bmu_id=bmu, second_id=second, distance=d_b,
                                activity=a, inserted_id=inserted, updated=updated)
        final = report.final_bmu
        if labels is not None:
            self.update_labels(final, labels)
        if self.prev_bmu is not None and self.is_live(self.prev_bmu):
            self.strengthen_temporal(self.prev_bmu, final)
        self.prev_bmu = final
        self.steps += 1
        return report

    # ------------------------------------------------------------------
    # read-only querying

    def new_context_carrier(self) -> ContextCarrier:
        return ContextCarrier(context=np.zeros((self.params.depth, self.dim)))

    def query(self, x: np.ndarray, carrier: ContextCarrier,
              depth: Optional[int] = None) -> tuple[int, float]:
        """BMU lookup without learning, using a caller-owned context state.

        ``depth=0`` ignores temporal context entirely (single-frame match).
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"input shape {x.shape} != ({self.dim},)")
        if self.n_neurons < 1:
            raise RuntimeError("query needs at least one live neuron")
        if depth != 0 and carrier.prev_bmu is not None and self.is_live(carrier.prev_bmu):
            carrier.context = self._context_from(carrier.prev_bmu)
        ids, d = self._distances(x, carrier.context, depth=depth)
        best = int(np.argmin(d))
        carrier.prev_bmu = int(ids[best])
        return int(ids[best]), float(d[best])
