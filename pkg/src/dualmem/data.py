"""Dataset file formats, synthetic sequence generation, and metric export.

The engine consumes ordered frames of (feature vector, instance label,
category label, session id, sequence id). Two interchange formats are
supported:

* a binary container (magic ``GDMF``): little-endian header with format
  version, feature dimension (u32) and record count (u64), followed by
  fixed-width records of five u32 ids (session, sequence, frame index,
  instance, category) and the feature vector as float32. Features are
  promoted to float64 in memory.
* a plain-text tabular format, one frame per line:
  ``session,sequence,frame,instance,category,f0,...,fD-1``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

GDMF_MAGIC = b"GDMF"
GDMF_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_REC_IDS = struct.Struct("<IIIII")

METRICS_FORMAT = "dualmem-metrics"
METRICS_VERSION = 1
METRIC_FIELDS = (
    "epoch", "em_neurons", "sm_neurons", "em_update_rate", "sm_update_rate",
    "instance_acc", "category_acc", "first_category_acc", "first_instances_acc",
)


class DataError(Exception):
    """Malformed or inconsistent dataset input."""


@dataclass
class SequenceDataset:
    """Ordered frames with ids; file order is the canonical frame order."""

    features: np.ndarray  # (n, dim) float64
    sessions: np.ndarray  # (n,) int64
    sequences: np.ndarray
    frame_index: np.ndarray
    instances: np.ndarray
    categories: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def validate(self) -> None:
        n = self.n_frames
        for name in ("sessions", "sequences", "frame_index", "instances", "categories"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise DataError(f"{name} length {arr.shape} != frame count {n}")
        # Each instance id belongs to exactly one category.
        mapping: dict[int, int] = {}
        for i in range(n):
            inst = int(self.instances[i])
            cat = int(self.categories[i])
            prev = mapping.setdefault(inst, cat)
            if prev != cat:
                raise DataError(
                    f"instance {inst} appears under categories {prev} and {cat} "
                    f"(record {i})")
        # Frame indices contiguous and ascending within each sequence run.
        for idx in self.sequence_groups():
            frames = self.frame_index[idx]
            expected = np.arange(frames[0], frames[0] + len(frames))
            if not np.array_equal(frames, expected):
                raise DataError(
                    f"non-contiguous frame indices in sequence "
                    f"(session={int(self.sessions[idx[0]])}, "
                    f"sequence={int(self.sequences[idx[0]])})")

    def sequence_groups(self, subset: Optional[np.ndarray] = None) -> list[np.ndarray]:
        """Frame-index arrays for maximal runs sharing (session, sequence).

        ``subset`` restricts grouping to the given frame indices (file
        order preserved).
        """
        idx = np.arange(self.n_frames) if subset is None else np.asarray(subset)
        if len(idx) == 0:
            return []
        keys = list(zip(self.sessions[idx].tolist(), self.sequences[idx].tolist()))
        groups: list[np.ndarray] = []
        start = 0
        for i in range(1, len(idx) + 1):
            if i == len(idx) or keys[i] != keys[start]:
                groups.append(idx[start:i])
                start = i
        return groups

    def instance_to_category(self) -> dict[int, int]:
        return {int(i): int(c)
                for i, c in zip(self.instances.tolist(), self.categories.tolist())}


# ----------------------------------------------------------------------
# binary format

def write_dataset(dataset: SequenceDataset, path: Union[str, Path]) -> None:
    """Write the binary container; byte output is deterministic."""
    dataset.validate()
    n, dim = dataset.n_frames, dataset.dim
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(GDMF_MAGIC, GDMF_VERSION, dim, n))
        feats32 = dataset.features.astype("<f4")
        for i in range(n):
            fh.write(_REC_IDS.pack(int(dataset.sessions[i]), int(dataset.sequences[i]),
                                   int(dataset.frame_index[i]), int(dataset.instances[i]),
                                   int(dataset.categories[i])))
            fh.write(feats32[i].tobytes())


def _read_exact(fh, size: int, what: str, offset: int) -> bytes:
    buf = fh.read(size)
    if len(buf) != size:
        raise DataError(f"truncated file: expected {size} bytes for {what} "
                        f"at offset {offset}, got {len(buf)}")
    return buf


def load_dataset(path: Union[str, Path]) -> SequenceDataset:
    """Load either format (binary sniffed by magic); fully validated."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == GDMF_MAGIC:
        return _load_binary(path)
    return _load_text(path)


def _load_binary(path: Path) -> SequenceDataset:
    with open(path, "rb") as fh:
        raw = _read_exact(fh, _HEADER.size, "header", 0)
        magic, version, dim, count = _HEADER.unpack(raw)
        if magic != GDMF_MAGIC:
            raise DataError(f"bad magic {magic!r} at offset 0")
        if version != GDMF_VERSION:
            raise DataError(f"unsupported format version {version} at offset 4")
        if dim < 1:
            raise DataError(f"invalid feature dimension {dim} at offset 8")
        rec_size = _REC_IDS.size + 4 * dim
        ids = np.empty((count, 5), dtype=np.int64)
        features = np.empty((count, dim), dtype=np.float64)
        offset = _HEADER.size
        for i in range(count):
            buf = _read_exact(fh, rec_size, f"record {i}", offset)
            ids[i] = _REC_IDS.unpack_from(buf)
            features[i] = np.frombuffer(buf, dtype="<f4", offset=_REC_IDS.size)
            offset += rec_size
        if fh.read(1):
            raise DataError(f"trailing bytes after record {count - 1} at offset {offset}")
    dataset = SequenceDataset(features=features, sessions=ids[:, 0],
                              sequences=ids[:, 1], frame_index=ids[:, 2],
                              instances=ids[:, 3], categories=ids[:, 4])
    dataset.validate()
    return dataset


# ----------------------------------------------------------------------
# text format

def _load_text(path: Path) -> SequenceDataset:
    rows: list[list[float]] = []
    dim = None
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not a known dataset format "
                        f"(bad magic and not text: {exc})") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 6:
            raise DataError(f"line {lineno}: expected at least 6 fields")
        if dim is None:
            dim = len(parts) - 5
        elif len(parts) - 5 != dim:
            raise DataError(f"line {lineno}: feature dimension "
                            f"{len(parts) - 5} != {dim}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no records")
    arr = np.asarray(rows, dtype=np.float64)
    dataset = SequenceDataset(
        features=arr[:, 5:],
        sessions=arr[:, 0].astype(np.int64),
        sequences=arr[:, 1].astype(np.int64),
        frame_index=arr[:, 2].astype(np.int64),
        instances=arr[:, 3].astype(np.int64),
        categories=arr[:, 4].astype(np.int64))
    dataset.validate()
    return dataset


def write_dataset_text(dataset: SequenceDataset, path: Union[str, Path]) -> None:
    dataset.validate()
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(dataset.n_frames):
            ids = (int(dataset.sessions[i]), int(dataset.sequences[i]),
                   int(dataset.frame_index[i]), int(dataset.instances[i]),
                   int(dataset.categories[i]))
            feats = ",".join(repr(float(v)) for v in dataset.features[i])
            fh.write(",".join(str(v) for v in ids) + "," + feats + "\n")


# ----------------------------------------------------------------------
# synthetic generation

@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale stand-in for smooth object-video feature sequences.

    Each instance is a cluster around its category center and moves
    smoothly along a low-dimensional orbit shared by its category (the
    ``drift`` field sets the orbit radius). Instances of a category differ
    in orbit speed and direction and start each sequence at a random
    phase, so part of the instance identity lives in the motion rather
    than in the position: consecutive frames are correlated and temporal
    context carries real signal, while shuffled frames lose it.
    """

    n_categories: int = 10
    instances_per_category: int = 5
    sequences_per_instance: int = 11
    frames_per_sequence: int = 6
    dim: int = 24
    category_spread: float = 1.0
    instance_spread: float = 0.35
    drift: float = 0.08
    noise: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        counts = (self.n_categories, self.instances_per_category,
                  self.sequences_per_instance, self.frames_per_sequence, self.dim)
        if any(c < 1 for c in counts):
            raise ValueError("all counts must be >= 1")
        if min(self.category_spread, self.instance_spread,
               self.drift, self.noise) < 0:
            raise ValueError("spreads must be >= 0")


def default_spec(**overrides) -> SyntheticSpec:
    """The benchmark-shaped default: 10 categories x 5 instances, 11 sessions."""
    return SyntheticSpec(**overrides) if overrides else SyntheticSpec()


def ablation_spec(seed: int = 0, **overrides) -> SyntheticSpec:
    """Dataset tuned so instance identity is mostly in the motion.

    Instance offsets sit below the episodic insertion resolution, so a
    context-free network cannot grow apart sibling instances and ends up
    with mixed label histograms, while speed differences push the context
    distance of a context-aware network over the insertion threshold.
    """
    fields = dict(n_categories=4, instances_per_category=3,
                  sequences_per_instance=6, frames_per_sequence=12, dim=12,
                  category_spread=2.0, instance_spread=0.12, noise=0.1,
                  drift=1.6, seed=seed)
    fields.update(overrides)
    return SyntheticSpec(**fields)


def forgetting_spec(seed: int = 0, **overrides) -> SyntheticSpec:
    """Dataset tuned so category-incremental training interferes.

    Category centers sit just past the semantic insertion threshold and
    the orbits overlap, so frames of a new category often claim the
    semantic winner of an earlier one and dilute its label histogram
    unless rehearsal refreshes it.
    """
    fields = dict(n_categories=8, instances_per_category=5,
                  sequences_per_instance=8, frames_per_sequence=12, dim=12,
                  category_spread=0.58, instance_spread=0.12, noise=0.1,
                  drift=1.6, seed=seed)
    fields.update(overrides)
    return SyntheticSpec(**fields)


def generate_synthetic(spec: SyntheticSpec) -> SequenceDataset:
    """Deterministic synthetic dataset for a given seed.

    Session ids run 1..sequences_per_instance (one sequence per instance
    per session), matching the benchmark layout where sessions 3, 7 and 10
    are held out for testing.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    rows_ids: list[tuple[int, int, int, int, int]] = []
    rows_feat: list[np.ndarray] = []
    seq_counter = 0
    instance_id = 0
    base_step = 2.0 * np.pi / spec.frames_per_sequence
    for cat in range(1, spec.n_categories + 1):
        cat_center = rng.normal(0.0, spec.category_spread, spec.dim)
        # Motion lives in a 2-dimensional subspace shared by the category.
        basis, _ = np.linalg.qr(rng.normal(size=(spec.dim, 2)))
        for idx in range(spec.instances_per_category):
            instance_id += 1
            inst_center = cat_center + rng.normal(0.0, spec.instance_spread, spec.dim)
            # Instance identity partly encoded in orbit speed and direction.
            speed = (1.0 + 0.5 * (idx // 2)) * (1 if idx % 2 == 0 else -1)
            for session in range(1, spec.sequences_per_instance + 1):
                seq_counter += 1
                phase = rng.uniform(0.0, 2.0 * np.pi)
                for frame in range(spec.frames_per_sequence):
                    angle = phase + speed * base_step * frame
                    orbit = spec.drift * (np.cos(angle) * basis[:, 0]
                                          + np.sin(angle) * basis[:, 1])
                    x = inst_center + orbit + rng.normal(0.0, spec.noise, spec.dim)
                    rows_ids.append((session, seq_counter, frame, instance_id, cat))
                    rows_feat.append(x)
    ids = np.asarray(rows_ids, dtype=np.int64)
    dataset = SequenceDataset(
        features=np.asarray(rows_feat, dtype=np.float64),
        sessions=ids[:, 0], sequences=ids[:, 1], frame_index=ids[:, 2],
        instances=ids[:, 3], categories=ids[:, 4])
    dataset.validate()
    return dataset


# ----------------------------------------------------------------------
# metrics records and export

@dataclass
class EpochRecord:
    """Metrics snapshot after one training epoch (or mini-batch)."""

    epoch: int
    em_neurons: int
    sm_neurons: int
    em_update_rate: float
    sm_update_rate: float
    instance_acc: float
    category_acc: float
    first_category_acc: float
    first_instances_acc: float


@dataclass
class MetricsLog:
    """Per-epoch records for one trial."""

    scenario: str
    seed: int
    records: list[EpochRecord] = field(default_factory=list)

    @property
    def final(self) -> EpochRecord:
        return self.records[-1]


def export_metrics(log: MetricsLog, path: Union[str, Path], fmt: str = "text") -> None:
    """Write a metrics log as line-oriented text or a JSON summary."""
    path = Path(path)
    if fmt == "text":
        lines = [f"# {METRICS_FORMAT} v{METRICS_VERSION}",
                 f"# scenario={log.scenario} seed={log.seed}",
                 "# fields: " + " ".join(METRIC_FIELDS)]
        for rec in log.records:
            values = [getattr(rec, f) for f in METRIC_FIELDS]
            lines.append(" ".join(
                str(v) if isinstance(v, int) else repr(float(v)) for v in values))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "json":
        doc = {"format": METRICS_FORMAT, "version": METRICS_VERSION,
               "scenario": log.scenario, "seed": log.seed,
               "records": [asdict(r) for r in log.records]}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    else:
        raise ValueError(f"unknown metrics format {fmt!r}")


def parse_metrics(path: Union[str, Path]) -> MetricsLog:
    """Re-parse either metrics format (inverse of :func:`export_metrics`)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if doc.get("format") != METRICS_FORMAT or doc.get("version") != METRICS_VERSION:
            raise DataError(f"{path}: not a v{METRICS_VERSION} metrics document")
        log = MetricsLog(scenario=doc["scenario"], seed=int(doc["seed"]))
        log.records = [EpochRecord(**r) for r in doc["records"]]
        return log
    lines = text.splitlines()
    if not lines or not lines[0].startswith(f"# {METRICS_FORMAT} v{METRICS_VERSION}"):
        raise DataError(f"{path}: not a v{METRICS_VERSION} metrics file")
    meta = dict(part.split("=", 1) for part in lines[1][2:].split())
    log = MetricsLog(scenario=meta["scenario"], seed=int(meta["seed"]))
    for line in lines[3:]:
        if not line.strip():
            continue
        parts = line.split()
        kwargs = {}
        for name, raw in zip(METRIC_FIELDS, parts):
            kwargs[name] = int(raw) if name in (
                "epoch", "em_neurons", "sm_neurons") else float(raw)
        log.records.append(EpochRecord(**kwargs))
    return log
