"""Modularity and two-phase Louvain community detection."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import _kernels
from .errors import CommunityLookupError, ConfigError, ParseError, UndefinedModularityError
from .graph import Graph

# Accepted moves must raise Q by more than this, on top of ``min_gain``;
# stops rounding noise from bouncing a node between equivalent communities.
GAIN_EPS = 1e-12
UNASSIGNED = -1


def canonical_labels(labels: Sequence[int]) -> np.ndarray:
    """Renumber communities 0, 1, ... in order of their smallest member."""
    first: dict[int, int] = {}
    out = [first.setdefault(c, len(first)) for c in np.asarray(labels).tolist()]
    return np.asarray(out, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Partition:
    """Node -> community assignment with canonical ids.

    Every node belongs to exactly one community. Isolated nodes sit in their
    own singleton communities whose ids are listed in ``unassigned``.
    ``levels[k]`` maps every original node to its community after pass k.
    """

    labels: np.ndarray
    unassigned: frozenset[int] = frozenset()
    levels: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        labels = canonical_labels(self.labels)
        if not np.array_equal(labels, np.asarray(self.labels)):
            raise ValueError("labels are not canonical; use Partition.from_labels")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        sizes = np.bincount(labels) if labels.size else np.zeros(0, dtype=np.int64)
        for c in self.unassigned:
            if not 0 <= c < sizes.size or sizes[c] != 1:
                raise ValueError(f"unassigned community {c} must be an existing singleton")
        levels = tuple(np.asarray(lv, dtype=np.int64) for lv in self.levels)
        for lv in levels:
            lv.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_labels(cls, labels: Sequence[int], unassigned_nodes: Iterable[int] = (),
                    levels: Sequence[Sequence[int]] = ()) -> "Partition":
        canon = canonical_labels(labels)
        unassigned = frozenset(int(canon[i]) for i in unassigned_nodes)
        return cls(canon, unassigned, tuple(canonical_labels(lv) for lv in levels))

    @classmethod
    def singletons(cls, n: int, unassigned_nodes: Iterable[int] = ()) -> "Partition":
        return cls.from_labels(np.arange(n), unassigned_nodes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return (np.array_equal(self.labels, other.labels)
                and self.unassigned == other.unassigned
                and len(self.levels) == len(other.levels)
                and all(np.array_equal(a, b) for a, b in zip(self.levels, other.levels)))

    __hash__ = None

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def n_communities(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def communities(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {c: [] for c in range(self.n_communities)}
        for node, c in enumerate(self.labels.tolist()):
            out[c].append(node)
        return {c: tuple(v) for c, v in out.items()}

    def community_of(self, node: int) -> int:
        return int(self.labels[node])

    def members(self, c: int) -> np.ndarray:
        if not 0 <= c < self.n_communities:
            raise CommunityLookupError(f"no community {c}")
        return np.flatnonzero(self.labels == c)

    def assigned_communities(self) -> list[int]:
        return [c for c in range(self.n_communities) if c not in self.unassigned]

    def export_labels(self) -> list[str]:
        return [str(UNASSIGNED if c in self.unassigned else c) for c in self.labels.tolist()]

    def to_csv(self, stream: TextIO, entity_ids: Sequence[str] | None = None) -> None:
        """``entity_id,community_id,level0_id,...``; unassigned nodes are -1 throughout."""
        ids = entity_ids if entity_ids is not None else [str(i) for i in range(self.n)]
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["entity_id", "community_id"] + [f"level{k}_id" for k in range(len(self.levels))])
        for i in range(self.n):
            flagged = int(self.labels[i]) in self.unassigned
            row = [ids[i], UNASSIGNED if flagged else int(self.labels[i])]
            row += [UNASSIGNED if flagged else int(lv[i]) for lv in self.levels]
            writer.writerow(row)


def read_partition_csv(source: TextIO | str) -> tuple[list[str], Partition]:
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream)
    header = next(reader, None)
    if not header or header[:2] != ["entity_id", "community_id"]:
        raise ParseError("expected header starting with entity_id,community_id", line=1)
    n_levels = len(header) - 2
    ids, final, levels, unassigned = [], [], [[] for _ in range(n_levels)], []
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num)
        try:
            vals = [int(x) for x in row[1:]]
        except ValueError:
            raise ParseError("community ids must be integers", line=reader.line_num) from None
        node = len(ids)
        ids.append(row[0])
        if vals[0] == UNASSIGNED:
            unassigned.append(node)
            # unique placeholder so the node stays a singleton
            vals = [-(node + 2)] * len(vals)
        final.append(vals[0])
        for k in range(n_levels):
            levels[k].append(vals[k + 1])
    return ids, Partition.from_labels(final, unassigned, levels)


def modularity(g: Graph, p: Partition) -> float:
    """Newman-Girvan modularity with weighted degrees (resolution 1).

    Per community: Q_c = in_c / 2m - (tot_c / 2m)^2 where in_c counts each
    internal edge twice plus loop entries. Terms are summed with ``math.fsum``
    in community order.
    """
    if p.n != g.n:
        raise ValueError("partition and graph sizes differ")
    two_m = float(g.strength.sum())
    if two_m <= 0.0:
        raise UndefinedModularityError("modularity is undefined for a graph with no edges")
    k = p.n_communities
    lab = p.labels
    same = lab[g.src] == lab[g.dst]
    internal = np.zeros(k)
    for c, w in zip(lab[g.src][same].tolist(), g.weight[same].tolist()):
        internal[c] += 2.0 * w
    if g.loops is not None:
        np.add.at(internal, lab, g.loops)
    tot = np.zeros(k)
    np.add.at(tot, lab, g.strength)
    terms = []
    for c in range(k):
        terms.append(internal[c] / two_m)
        terms.append(-(tot[c] / two_m) ** 2)
    return math.fsum(terms)


@dataclass(frozen=True)
class LouvainConfig:
    max_passes: int = 100
    min_gain: float = 0.0
    node_order: str = "input"  # or "shuffle"
    seed: int = 0

    def __post_init__(self):
        if self.min_gain < 0:
            raise ConfigError("min_gain must be >= 0")
        if self.max_passes < 1:
            raise ConfigError("max_passes must be >= 1")
        if self.node_order not in ("input", "shuffle"):
            raise ConfigError(f"node_order must be 'input' or 'shuffle', got {self.node_order!r}")


def _visit_order(n: int, cfg: LouvainConfig, rng: np.random.Generator | None) -> np.ndarray:
    if cfg.node_order == "shuffle":
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        return rng.permutation(n).astype(np.int64)
    return np.arange(n, dtype=np.int64)


def louvain_local_pass(g: Graph, p: Partition, cfg: LouvainConfig = LouvainConfig(),
                       moves: list | None = None, rng: np.random.Generator | None = None,
                       backend: str | None = None) -> tuple[Partition, int]:
    """Greedy node moves until a full sweep changes nothing.

    Each node goes to the neighbouring community with the largest modularity
    gain, if that gain is positive (ties: smallest community id). When a
    ``moves`` list is given, ``(node, from, to, delta_q)`` records are appended
    to it, with community ids in the numbering of ``p``.
    """
    kern = _kernels.get(backend)
    two_m = float(g.strength.sum())
    if two_m <= 0.0:
        return p, 0
    indptr, indices, weights = g.csr
    k = np.ascontiguousarray(g.strength, dtype=np.float64)
    comm = np.array(p.labels, dtype=np.int64)
    tot = np.zeros(max(g.n, 1))
    np.add.at(tot, comm, k)
    order = _visit_order(g.n, cfg, rng)
    moved, log = kern.louvain_sweeps(indptr, indices, weights, k, comm, tot, order,
                                     two_m, float(cfg.min_gain), GAIN_EPS, moves is not None)
    if moves is not None:
        moves.extend(log)
    return Partition.from_labels(comm, _isolated_singletons(g, comm)), int(moved)


def _isolated_singletons(g: Graph, labels: np.ndarray) -> np.ndarray:
    sizes = np.bincount(labels, minlength=g.n)
    lonely = np.flatnonzero(g.strength == 0)
    return lonely[sizes[labels[lonely]] == 1]


def aggregate(g: Graph, p: Partition) -> Graph:
    """Collapse each community into one node.

    Inter-community weights are summed; each supernode gets a loop entry equal
    to twice its internal edge weight plus its members' own loop entries, so
    modularity is unchanged by the collapse.
    """
    k = p.n_communities
    lab = p.labels
    a, b = lab[g.src], lab[g.dst]
    loops = np.zeros(k)
    same = a == b
    np.add.at(loops, a[same], 2.0 * g.weight[same])
    if g.loops is not None:
        np.add.at(loops, lab, g.loops)
    lo, hi = np.minimum(a[~same], b[~same]), np.maximum(a[~same], b[~same])
    key = lo * k + hi
    uniq, inv = np.unique(key, return_inverse=True)
    w = np.zeros(uniq.size)
    np.add.at(w, inv, g.weight[~same])
    return Graph(k, uniq // k, uniq % k, w, None, loops)


def louvain(g: Graph, cfg: LouvainConfig = LouvainConfig(), moves: list | None = None,
            backend: str | None = None) -> Partition:
    """Multi-level Louvain: local passes alternating with aggregation.

    Stops when a pass moves no node or after ``cfg.max_passes`` passes. The
    returned labels are the last level mapped onto the original nodes; every
    level is kept in ``levels``. Isolated nodes end up as flagged singletons.
    ``moves``, if given, collects ``(level, node, from, to, delta_q)``.
    """
    if g.n_edges == 0:
        raise UndefinedModularityError("Louvain needs at least one edge")
    rng = np.random.default_rng(cfg.seed) if cfg.node_order == "shuffle" else None
    mapping = np.arange(g.n, dtype=np.int64)
    levels: list[np.ndarray] = []
    level_graph = g
    for level in range(cfg.max_passes):
        log = [] if moves is not None else None
        p, moved = louvain_local_pass(level_graph, Partition.singletons(level_graph.n), cfg,
                                      log, rng, backend)
        if moves is not None:
            moves.extend((level,) + tuple(r) for r in log)
        if moved == 0:
            break
        mapping = p.labels[mapping]
        levels.append(canonical_labels(mapping))
        level_graph = aggregate(level_graph, p)
    return Partition.from_labels(mapping, _isolated_singletons(g, mapping), levels)
