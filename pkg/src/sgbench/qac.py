"""Repetition-code encoding, physical-level samplers, and decoding.

A logical instance is encoded onto physical qubits as three data copies
plus one penalty qubit per logical spin (penalty coupled only in QAC
mode; U3 leaves the copies independent). Samplers run at the physical
level behind a small contract so recorded hardware data can be replayed
through the same decode path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .disorder import Instance
from .pticm import _csr, table1_ladders
from .topology import Graph, LogicalGraph, PegasusGraph

PENALTY_GRID = (Fraction(1, 10), Fraction(2, 10), Fraction(3, 10))


@dataclass(eq=False)
class QacEmbedding:
    """Physical layout of the repetition code over compact qubit ids.

    groups[i] = (data0, data1, data2, penalty) for logical spin i; ids
    are compact 0..4N-1. edge_copies[e, k] marks whether copy k of
    logical edge e has its physical coupler; physical_graph holds every
    usable coupler (copy couplers first, penalty couplers after).
    """

    groups: np.ndarray
    edge_copies: np.ndarray
    physical_graph: Graph
    copy_edge_index: np.ndarray    # (E, 3) -> row in physical_graph.edges
    penalty_edge_index: np.ndarray  # (N, 3) -> row in physical_graph.edges

    @property
    def n_logical(self) -> int:
        return len(self.groups)

    @property
    def n_physical(self) -> int:
        return 4 * len(self.groups)


def make_embedding(pegasus: PegasusGraph, logical: LogicalGraph) -> QacEmbedding:
    """Compact the logical graph's physical footprint into an embedding."""
    n = logical.n_nodes
    phys_ids = np.concatenate(
        [logical.data_qubits, logical.penalty_qubit[:, None]], axis=1)
    compact = {int(p): 4 * i + c
               for i in range(n) for c, p in enumerate(phys_ids[i])}
    live = set()
    for a, b in pegasus.edges:
        live.add((int(a), int(b)))
    groups = np.arange(4 * n, dtype=np.int64).reshape(n, 4)
    edges = []
    e_log = logical.edges
    copy_idx = np.full((len(e_log), 3), -1, dtype=np.int64)
    for e, (a, b) in enumerate(e_log):
        for k in range(3):
            pa = int(logical.data_qubits[a, k])
            pb = int(logical.data_qubits[b, k])
            key = (pa, pb) if pa < pb else (pb, pa)
            if key in live:
                copy_idx[e, k] = len(edges)
                edges.append((compact[pa], compact[pb]))
    pen_idx = np.empty((n, 3), dtype=np.int64)
    for i in range(n):
        for k in range(3):
            pen_idx[i, k] = len(edges)
            edges.append((groups[i, 3], groups[i, k]))
    g = Graph(n_nodes=4 * n,
              edges=np.array(edges, dtype=np.int32).reshape(-1, 2))
    return QacEmbedding(
        groups=groups,
        edge_copies=copy_idx >= 0,
        physical_graph=g,
        copy_edge_index=copy_idx,
        penalty_edge_index=pen_idx,
    )


@dataclass(eq=False)
class PhysicalProblem:
    """Encoded physical instance plus its provenance."""

    instance: Instance
    mode: str                    # "QAC" | "U3"
    j_p: Fraction
    embedding: QacEmbedding
    origin: Instance             # the logical instance


def encode(logical: Instance, emb: QacEmbedding, mode: str,
           j_p) -> PhysicalProblem:
    """Place each supported copy of every logical coupling, plus the
    ferromagnetic penalty couplings in QAC mode."""
    if mode not in ("QAC", "U3"):
        raise ValueError(f"mode must be QAC or U3, got {mode!r}")
    j_p = Fraction(j_p).limit_denominator(10**9)
    if j_p < 0:
        raise ValueError(f"penalty strength must be >= 0, got {j_p}")
    if mode == "U3":
        if j_p != 0:
            raise ValueError("U3 encoding requires J_p = 0")
    elif j_p not in PENALTY_GRID:
        warnings.warn(
            f"penalty strength {j_p} outside the benchmark grid "
            f"{{0.1, 0.2, 0.3}}; proceeding", stacklevel=2)
    if len(logical.j_num) != len(emb.edge_copies):
        raise ValueError("embedding does not match the logical instance")
    denom = int(np.lcm(np.int64(logical.denom), np.int64(j_p.denominator)))
    scale = denom // logical.denom
    n_edges = emb.physical_graph.n_edges
    j_num = np.zeros(n_edges, dtype=np.int64)
    for e in range(len(logical.j_num)):
        for k in range(3):
            row = emb.copy_edge_index[e, k]
            if row >= 0:
                j_num[row] = int(logical.j_num[e]) * scale
    pen_num = -int(j_p * denom)
    if mode == "QAC" and pen_num != 0:
        j_num[emb.penalty_edge_index.ravel()] = pen_num
    inst = Instance(
        graph=emb.physical_graph,
        j_num=j_num,
        h_num=np.zeros(emb.n_physical, dtype=np.int64),
        denom=denom,
        disorder_class=logical.disorder_class,
        seed=logical.seed)
    return PhysicalProblem(instance=inst, mode=mode, j_p=j_p,
                           embedding=emb, origin=logical)


@dataclass(eq=False)
class SampleSet:
    """Raw physical reads grouped by gauge."""

    reads: np.ndarray            # (n_reads, n_physical) int8; 0 = missing
    gauge_ids: np.ndarray        # (n_reads,) int32, contiguous groups
    t_f: float
    mode: str
    sampler_id: str
    origin: PhysicalProblem | None = None


@dataclass(eq=False)
class LogicalSampleSet:
    """Decoded logical samples with exact energies."""

    spins: np.ndarray            # (n_samples, N) int8
    energies_num: np.ndarray     # (n_samples,) int64
    denom: int
    gauge_ids: np.ndarray
    mode: str
    t_f: float
    sampler_id: str
    n_dropped: int = 0

    def energies(self):
        return [Fraction(int(e), self.denom) for e in self.energies_num]


class SamplerContract:
    """Physical-level sampler seam.

    Implementations provide `sampler_id` and `sample_reads(instance,
    t_f, init_spins, seed)` returning one +/-1 read per init row. The
    annealing-time knob t_f (microseconds) maps to Monte Carlo effort.
    """

    sampler_id: str = "abstract"

    def sample_reads(self, instance: Instance, t_f: float,
                     init_spins: np.ndarray, seed: int) -> np.ndarray:
        raise NotImplementedError


class SaSampler(SamplerContract):
    """Per-read simulated annealing; sweeps scale linearly with t_f."""

    def __init__(self, sweeps_per_us: float = 200.0, beta_min: float = 0.1,
                 beta_max: float = 10.0):
        self.sweeps_per_us = float(sweeps_per_us)
        self.beta_min = float(beta_min)
        self.beta_max = float(beta_max)
        self.sampler_id = "sa-standin"

    def sample_reads(self, instance, t_f, init_spins, seed):
        sweeps = max(1, int(round(t_f * self.sweeps_per_us)))
        betas = np.geomspace(self.beta_min, self.beta_max, sweeps)
        indptr, nbr, jn_csr = _csr(instance)
        out = np.empty_like(init_spins)
        streams = _kernels.seed_streams(np.uint64(seed), len(init_spins))
        for r in range(len(init_spins)):
            spins = init_spins[r].copy()
            st = streams[r]
            for sw in range(sweeps):
                _d, st = _kernels.metropolis_sweep(
                    spins, indptr, nbr, jn_csr, instance.h_num,
                    betas[sw] / instance.denom, st)
            out[r] = spins
        return out


class PtSampler(SamplerContract):
    """Short parallel-tempering runs; returns the coldest-replica state.

    Not gauge-covariant (it draws its own initial states), but
    deterministic per (seed, t_f).
    """

    def __init__(self, sweeps_per_us: float = 200.0, ladder=None):
        self.sweeps_per_us = float(sweeps_per_us)
        self.ladder = ladder
        self.sampler_id = "pt-standin"

    def sample_reads(self, instance, t_f, init_spins, seed):
        from .pticm import run_pticm

        ladder = self.ladder or table1_ladders()["set1"]
        sweeps = max(2, int(round(t_f * self.sweeps_per_us)))
        out = np.empty_like(init_spins)
        for r in range(len(init_spins)):
            trace = run_pticm(instance, ladder, sweeps=sweeps,
                              seed=(int(seed) * 1000003 + r) & (2**63 - 1))
            out[r] = trace.best_config
        return out


def sample(sampler: SamplerContract, physical: PhysicalProblem, t_f: float,
           n_reads: int, gauges: list) -> SampleSet:
    """Run the sampler once per gauge and un-gauge the reads.

    Initial states are drawn here and transformed with each gauge, so a
    gauge-covariant sampler (one whose dynamics depend on the state only
    through gauge-invariant products) yields reads independent of the
    gauge choice read-for-read.
    """
    if n_reads < 1:
        raise ValueError("n_reads must be >= 1")
    if not gauges:
        raise ValueError("at least one gauge required (identity counts)")
    if n_reads % len(gauges) != 0:
        raise ValueError(
            f"n_reads={n_reads} not divisible by {len(gauges)} gauges")
    per = n_reads // len(gauges)
    n_phys = physical.embedding.n_physical
    rng = np.random.Generator(np.random.PCG64(
        [0x5A17, int(physical.origin.seed), int(round(t_f * 1e6))]))
    init = rng.choice(np.array([-1, 1], dtype=np.int8),
                      size=(n_reads, n_phys))
    reads = np.empty((n_reads, n_phys), dtype=np.int8)
    gauge_ids = np.empty(n_reads, dtype=np.int32)
    for gi, gauge in enumerate(gauges):
        gvec = np.asarray(getattr(gauge, "spins", gauge), dtype=np.int8)
        if gvec.shape != (n_phys,) or not np.all(np.abs(gvec) == 1):
            raise ValueError(f"gauge {gi} is not a +/-1 vector of length "
                             f"{n_phys}")
        gauged = _gauge_instance(physical.instance, gvec)
        block = slice(gi * per, (gi + 1) * per)
        try:
            got = sampler.sample_reads(
                gauged, t_f, init[block] * gvec[None, :],
                seed=int(rng.integers(2**62)))
        except Exception as exc:
            raise RuntimeError(
                f"sampler {sampler.sampler_id!r} failed on gauge {gi}: {exc}"
            ) from exc
        reads[block] = got * gvec[None, :]
        gauge_ids[block] = gi
    return SampleSet(reads=reads, gauge_ids=gauge_ids, t_f=float(t_f),
                     mode=physical.mode, sampler_id=sampler.sampler_id,
                     origin=physical)


def _gauge_instance(instance: Instance, gvec: np.ndarray) -> Instance:
    e = instance.graph.edges
    j_num = instance.j_num * gvec[e[:, 0]].astype(np.int64) \
        * gvec[e[:, 1]].astype(np.int64)
    h_num = instance.h_num * gvec.astype(np.int64)
    return Instance(graph=instance.graph, j_num=j_num, h_num=h_num,
                    denom=instance.denom,
                    disorder_class=instance.disorder_class,
                    seed=instance.seed)


def _resolve(samples: SampleSet, emb, logical):
    if emb is None:
        if samples.origin is None:
            raise ValueError("no embedding: pass emb or a SampleSet with "
                             "origin")
        emb = samples.origin.embedding
    if logical is None:
        if samples.origin is None:
            raise ValueError("no logical instance: pass logical or a "
                             "SampleSet with origin")
        logical = samples.origin.origin
    return emb, logical


def decode_qac(samples: SampleSet, emb: QacEmbedding | None = None,
               logical: Instance | None = None) -> LogicalSampleSet:
    """Majority vote over the three data copies, penalty ignored."""
    emb, logical = _resolve(samples, emb, logical)
    if samples.mode != "QAC":
        raise ValueError(f"decode_qac needs QAC samples, got {samples.mode}")
    data = emb.groups[:, :3]
    keep = []
    spins = []
    for r in range(len(samples.reads)):
        read = samples.reads[r]
        d = read[data]
        if np.any(d == 0):
            continue
        keep.append(r)
        spins.append(np.sign(d.sum(axis=1)).astype(np.int8))
    spins = (np.array(spins, dtype=np.int8).reshape(len(keep), -1)
             if keep else np.zeros((0, emb.n_logical), dtype=np.int8))
    e_num = _kernels.energies_batch(
        spins, logical.graph.edges.astype(np.int64), logical.j_num,
        logical.h_num) if len(keep) else np.zeros(0, dtype=np.int64)
    return LogicalSampleSet(
        spins=spins, energies_num=e_num, denom=logical.denom,
        gauge_ids=samples.gauge_ids[keep].copy(), mode="QAC",
        t_f=samples.t_f, sampler_id=samples.sampler_id,
        n_dropped=len(samples.reads) - len(keep))


def decode_u3(samples: SampleSet, emb: QacEmbedding | None = None,
              logical: Instance | None = None) -> LogicalSampleSet:
    """Each physical read yields three independent logical samples."""
    emb, logical = _resolve(samples, emb, logical)
    if samples.mode != "U3":
        raise ValueError(f"decode_u3 needs U3 samples, got {samples.mode}")
    data = emb.groups[:, :3]
    spins = []
    gids = []
    dropped = 0
    for r in range(len(samples.reads)):
        read = samples.reads[r]
        d = read[data]
        if np.any(d == 0):
            dropped += 1
            continue
        for k in range(3):
            spins.append(d[:, k].astype(np.int8))
            gids.append(samples.gauge_ids[r])
    spins = (np.array(spins, dtype=np.int8).reshape(len(gids), -1)
             if gids else np.zeros((0, emb.n_logical), dtype=np.int8))
    e_num = _kernels.energies_batch(
        spins, logical.graph.edges.astype(np.int64), logical.j_num,
        logical.h_num) if len(gids) else np.zeros(0, dtype=np.int64)
    return LogicalSampleSet(
        spins=spins, energies_num=e_num, denom=logical.denom,
        gauge_ids=np.array(gids, dtype=np.int32), mode="U3",
        t_f=samples.t_f, sampler_id=samples.sampler_id, n_dropped=dropped)


def save_samples(samples: SampleSet, path_or_file) -> None:
    """Write the plain-text sample format (also the ingestion format)."""
    own = isinstance(path_or_file, str)
    f = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        n_gauges = len(np.unique(samples.gauge_ids)) if len(
            samples.gauge_ids) else 0
        f.write(f"#samples mode={samples.mode} tf_us={samples.t_f!r} "
                f"gauges={n_gauges} reads={len(samples.reads)} "
                f"sampler={samples.sampler_id}\n")
        sym = {-1: "-", 0: ".", 1: "+"}
        for r in range(len(samples.reads)):
            row = "".join(sym[int(s)] for s in samples.reads[r])
            f.write(f"{int(samples.gauge_ids[r])} {row}\n")
    finally:
        if own:
            f.close()


class SampleFormatError(ValueError):
    """Raised on malformed sample files; message names the line."""


def load_samples(path_or_file) -> SampleSet:
    own = isinstance(path_or_file, str)
    f = open(path_or_file, "r", encoding="utf-8") if own else path_or_file
    try:
        lines = f.read().splitlines()
    finally:
        if own:
            f.close()
    if not lines or not lines[0].startswith("#samples"):
        raise SampleFormatError("line 1: missing #samples header")
    kv = {}
    for tok in lines[0].split()[1:]:
        if "=" not in tok:
            raise SampleFormatError(f"line 1: bad header token {tok!r}")
        k, v = tok.split("=", 1)
        kv[k] = v
    try:
        mode = kv["mode"]
        t_f = float(kv["tf_us"])
        n_g = int(kv["gauges"])
        n_r = int(kv["reads"])
        sampler_id = kv["sampler"]
    except (KeyError, ValueError) as exc:
        raise SampleFormatError(f"line 1: bad header: {exc}") from exc
    if mode not in ("QAC", "U3"):
        raise SampleFormatError(f"line 1: mode must be QAC or U3, got {mode}")
    chars = {"+": 1, "-": -1, ".": 0}
    reads = []
    gids = []
    width = None
    for ln, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SampleFormatError(
                f"line {ln}: expected '<gauge> <spins>', got {len(parts)} "
                "fields")
        try:
            gid = int(parts[0])
        except ValueError as exc:
            raise SampleFormatError(f"line {ln}: {exc}") from exc
        try:
            row = [chars[c] for c in parts[1]]
        except KeyError as exc:
            raise SampleFormatError(
                f"line {ln}: invalid spin character {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SampleFormatError(
                f"line {ln}: read length {len(row)} != {width}")
        reads.append(row)
        gids.append(gid)
    if len(reads) != n_r:
        raise SampleFormatError(
            f"header says reads={n_r} but file has {len(reads)}")
    gids = np.array(gids, dtype=np.int32)
    if len(np.unique(gids)) != n_g:
        raise SampleFormatError(
            f"header says gauges={n_g} but file has {len(np.unique(gids))}")
    # gauge groups must be contiguous
    change = np.flatnonzero(np.diff(gids) != 0)
    if len(np.unique(gids[np.r_[0, change + 1]])) != len(change) + 1:
        raise SampleFormatError("gauge groups are not contiguous")
    return SampleSet(reads=np.array(reads, dtype=np.int8),
                     gauge_ids=gids, t_f=t_f, mode=mode,
                     sampler_id=sampler_id)