"""Versioned binary snapshots for networks and dual-memory models.

Network snapshot (magic ``GWRN``, all little-endian, reals as 64-bit
IEEE-754): header (magic, u32 version, u32 dim, u32 depth, u64 neuron
count), per-neuron records sorted by id (u64 id, weight, depth context
vectors, habituation, two histograms as u64 count + (i64 label, u64 count)
pairs sorted by label), edge list sorted by endpoints (u64 i, u64 j,
u64 age), sparse temporal counters sorted by endpoints (u64 i, u64 j,
u64 count), the global context vectors, hyperparameters, and recurrence
state. Round-trips are bit-exact.

Model snapshot (magic ``GDMM``): container metadata (trajectory length,
replay flag, traversal direction, semantic input mode) followed by the two
length-prefixed network snapshots.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import BinaryIO, Sequence, Union

import numpy as np

from .model import CATEGORY, INSTANCE, DualMemory
from .network import GrowingNetwork, NetworkParams

NETWORK_MAGIC = b"GWRN"
NETWORK_VERSION = 1
MODEL_MAGIC = b"GDMM"
MODEL_VERSION = 1


class SnapshotError(Exception):
    """Malformed snapshot input."""


def _w_u32(fh, v): fh.write(struct.pack("<I", v))
def _w_u64(fh, v): fh.write(struct.pack("<Q", v))
def _w_i64(fh, v): fh.write(struct.pack("<q", v))
def _w_f64(fh, v): fh.write(struct.pack("<d", v))
def _w_vec(fh, a): fh.write(np.asarray(a, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, fh: BinaryIO):
        self.fh = fh

    def take(self, size: int, what: str) -> bytes:
        buf = self.fh.read(size)
        if len(buf) != size:
            raise SnapshotError(f"truncated snapshot while reading {what}")
        return buf

    def u32(self, what="u32") -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what="u64") -> int:
        return struct.unpack("<Q", self.take(8, what))[0]

    def i64(self, what="i64") -> int:
        return struct.unpack("<q", self.take(8, what))[0]

    def f64(self, what="f64") -> float:
        return struct.unpack("<d", self.take(8, what))[0]

    def vec(self, n: int, what="vector") -> np.ndarray:
        return np.frombuffer(self.take(8 * n, what), dtype="<f8").copy()


# ----------------------------------------------------------------------
# network snapshots

def _write_hist(fh, hist: dict[int, int]) -> None:
    _w_u64(fh, len(hist))
    for label in sorted(hist):
        _w_i64(fh, label)
        _w_u64(fh, hist[label])


def write_network(net: GrowingNetwork, fh: BinaryIO) -> None:
    p = net.params
    fh.write(NETWORK_MAGIC)
    _w_u32(fh, NETWORK_VERSION)
    _w_u32(fh, net.dim)
    _w_u32(fh, p.depth)
    ids = [int(i) for i in net.live_ids()]
    _w_u64(fh, len(ids))
    for nid in ids:
        _w_u64(fh, nid)
        _w_vec(fh, net.weights[nid])
        for k in range(p.depth):
            _w_vec(fh, net.contexts[nid, k])
        _w_f64(fh, float(net.habituation[nid]))
        for t in range(2):
            hist = net.histograms[t][nid] if t < len(net.histograms) else {}
            _write_hist(fh, hist)
    edges = sorted(net.edge_age.items())
    _w_u64(fh, len(edges))
    for (i, j), age in edges:
        _w_u64(fh, i)
        _w_u64(fh, j)
        _w_u64(fh, age)
    links = sorted((i, j, c) for i, out in net.temporal_out.items()
                   for j, c in out.items())
    _w_u64(fh, len(links))
    for i, j, c in links:
        _w_u64(fh, i)
        _w_u64(fh, j)
        _w_u64(fh, c)
    for k in range(p.depth):
        _w_vec(fh, net.global_context[k])
    for v in (p.insertion_threshold, p.habituation_threshold, p.tau_bmu,
              p.tau_neighbor, p.kappa, p.beta, p.eps_bmu, p.eps_neighbor):
        _w_f64(fh, v)
    for a in p.alpha:
        _w_f64(fh, a)
    _w_i64(fh, -1 if p.max_edge_age is None else p.max_edge_age)
    fh.write(bytes([int(p.global_edge_aging), int(p.adapt_on_insert)]))
    _w_i64(fh, -1 if net.prev_bmu is None else net.prev_bmu)
    _w_u64(fh, net.steps)


def read_network(fh: BinaryIO, label_tables: Sequence[str] = ("label",)) -> GrowingNetwork:
    r = _Reader(fh)
    magic = r.take(4, "magic")
    if magic != NETWORK_MAGIC:
        raise SnapshotError(f"bad network magic {magic!r}")
    version = r.u32("version")
    if version != NETWORK_VERSION:
        raise SnapshotError(f"unsupported network snapshot version {version}")
    dim = r.u32("dim")
    depth = r.u32("depth")
    n = r.u64("neuron count")
    records = []
    for _ in range(n):
        nid = r.u64("neuron id")
        weight = r.vec(dim, "weight")
        contexts = np.stack([r.vec(dim, "context") for _ in range(depth)]) \
            if depth else np.zeros((0, dim))
        hab = r.f64("habituation")
        hists = []
        for _ in range(2):
            m = r.u64("histogram size")
            hists.append({r.i64("label"): r.u64("count") for _ in range(m)})
        records.append((nid, weight, contexts, hab, hists))
    n_edges = r.u64("edge count")
    edges = [(r.u64("i"), r.u64("j"), r.u64("age")) for _ in range(n_edges)]
    n_links = r.u64("temporal count")
    links = [(r.u64("i"), r.u64("j"), r.u64("count")) for _ in range(n_links)]
    global_context = np.stack([r.vec(dim, "global context") for _ in range(depth)]) \
        if depth else np.zeros((0, dim))
    scalars = [r.f64("hyperparam") for _ in range(8)]
    alpha = tuple(r.f64("alpha") for _ in range(depth + 1))
    max_age = r.i64("max edge age")
    flags = r.take(2, "flags")
    prev_bmu = r.i64("prev bmu")
    steps = r.u64("steps")
    params = NetworkParams(
        insertion_threshold=scalars[0], habituation_threshold=scalars[1],
        tau_bmu=scalars[2], tau_neighbor=scalars[3], kappa=scalars[4],
        depth=depth, alpha=alpha, beta=scalars[5], eps_bmu=scalars[6],
        eps_neighbor=scalars[7], max_edge_age=None if max_age < 0 else max_age,
        global_edge_aging=bool(flags[0]), adapt_on_insert=bool(flags[1]))
    net = GrowingNetwork(dim, params, label_tables=label_tables)
    max_id = max((rec[0] for rec in records), default=-1)
    for _ in range(max_id + 1):
        net.add_neuron(np.zeros(dim))
    net.alive[: max_id + 1] = False
    net.neighbors = {}
    for nid, weight, contexts, hab, hists in records:
        net.alive[nid] = True
        net.weights[nid] = weight
        if depth:
            net.contexts[nid] = contexts
        net.habituation[nid] = hab
        net.neighbors[nid] = set()
        for t in range(len(net.label_tables)):
            net.histograms[t][nid] = hists[t]
    net._any_deleted = len(records) != max_id + 1
    for i, j, age in edges:
        net._set_edge(i, j, age)
    for i, j, c in links:
        net.temporal_out.setdefault(i, {})[j] = c
    net.global_context = global_context
    net.prev_bmu = None if prev_bmu < 0 else prev_bmu
    net.steps = steps
    return net


def save_network(net: GrowingNetwork, path: Union[str, Path]) -> None:
    with open(path, "wb") as fh:
        write_network(net, fh)


def load_network(path: Union[str, Path],
                 label_tables: Sequence[str] = ("label",)) -> GrowingNetwork:
    with open(path, "rb") as fh:
        return read_network(fh, label_tables)


# ----------------------------------------------------------------------
# model snapshots

def network_bytes(net: GrowingNetwork) -> bytes:
    buf = io.BytesIO()
    write_network(net, buf)
    return buf.getvalue()


def save_model(model: DualMemory, path: Union[str, Path]) -> None:
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        _w_u32(fh, MODEL_VERSION)
        _w_u32(fh, model.trajectory_length)
        fh.write(bytes([int(model.replay_enabled),
                        0 if model.replay_direction == "forward" else 1,
                        0 if model.semantic_input == "post" else 1]))
        for net in (model.episodic, model.semantic):
            blob = network_bytes(net)
            _w_u64(fh, len(blob))
            fh.write(blob)


def load_model(path: Union[str, Path]) -> DualMemory:
    with open(path, "rb") as fh:
        r = _Reader(fh)
        magic = r.take(4, "magic")
        if magic != MODEL_MAGIC:
            raise SnapshotError(f"bad model magic {magic!r}")
        version = r.u32("version")
        if version != MODEL_VERSION:
            raise SnapshotError(f"unsupported model snapshot version {version}")
        traj_len = r.u32("trajectory length")
        flags = r.take(3, "flags")
        blobs = []
        for _ in range(2):
            size = r.u64("network size")
            blobs.append(r.take(size, "network snapshot"))
    episodic = read_network(io.BytesIO(blobs[0]), label_tables=(INSTANCE, CATEGORY))
    semantic = read_network(io.BytesIO(blobs[1]), label_tables=(CATEGORY,))
    model = DualMemory(
        episodic.dim, episodic_params=episodic.params,
        semantic_params_=semantic.params, replay_enabled=bool(flags[0]),
        replay_direction="forward" if flags[1] == 0 else "backward",
        semantic_input="post" if flags[2] == 0 else "pre")
    model.episodic = episodic
    model.semantic = semantic
    if model.trajectory_length != traj_len:
        raise SnapshotError("trajectory length inconsistent with network depths")
    return model
