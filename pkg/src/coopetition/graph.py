"""Undirected weighted graph over entities, and its serializations."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, TextIO
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .errors import FormatError, ParseError
from .similarity import SimilarityMatrix

BINARY = "binary"
SIMILARITY = "similarity"
EXPORT_FORMATS = ("gexf", "graphml", "dot", "jsonl")
JSONL_VERSION = 1


@dataclass(frozen=True, eq=False)
class Graph:
    """Edges are stored once with ``src < dst`` in lexicographic order.

    ``loops`` is only populated by community aggregation; it holds the
    self-loop entry A_ii of each node (twice the internal weight it stands for).
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    entity_ids: tuple[str, ...] | None = None
    loops: np.ndarray | None = None

    def __post_init__(self):
        src = np.ascontiguousarray(self.src, dtype=np.int64)
        dst = np.ascontiguousarray(self.dst, dtype=np.int64)
        w = np.ascontiguousarray(self.weight, dtype=np.float64)
        if not (src.shape == dst.shape == w.shape) or src.ndim != 1:
            raise ValueError("edge arrays must be 1-d and equally long")
        if src.size:
            if (src >= dst).any():
                raise ValueError("edges must satisfy src < dst (no self-loops)")
            if src.min() < 0 or dst.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if not (w > 0).all() or not np.isfinite(w).all():
                raise ValueError("edge weights must be finite and > 0")
            key = src * self.n + dst
            order = np.argsort(key, kind="stable")
            if (np.diff(key[order]) == 0).any():
                raise ValueError("parallel edges")
            src, dst, w = src[order], dst[order], w[order]
        if self.entity_ids is not None and len(self.entity_ids) != self.n:
            raise ValueError("entity_ids length must equal n")
        loops = None
        if self.loops is not None:
            loops = np.ascontiguousarray(self.loops, dtype=np.float64)
            if loops.shape != (self.n,) or (loops < 0).any():
                raise ValueError("loops must be a non-negative array of length n")
            loops.setflags(write=False)
        for a in (src, dst, w):
            a.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "loops", loops)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple], entity_ids: Sequence[str] | None = None) -> "Graph":
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples in any orientation."""
        src, dst, w = [], [], []
        for e in edges:
            i, j = int(e[0]), int(e[1])
            if i > j:
                i, j = j, i
            src.append(i)
            dst.append(j)
            w.append(float(e[2]) if len(e) > 2 else 1.0)
        return cls(n, np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64),
                   np.asarray(w, dtype=np.float64), None if entity_ids is None else tuple(entity_ids))

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    @property
    def total_weight(self) -> float:
        """m in the 2m convention: sum of edge weights plus half the loop entries."""
        return float(self.strength.sum()) / 2.0

    @cached_property
    def degree(self) -> np.ndarray:
        d = np.bincount(self.src, minlength=self.n) + np.bincount(self.dst, minlength=self.n)
        d = d.astype(np.int64)
        d.setflags(write=False)
        return d

    @cached_property
    def strength(self) -> np.ndarray:
        """Weighted degree, including self-loop entries."""
        s = (np.bincount(self.src, weights=self.weight, minlength=self.n)
             + np.bincount(self.dst, weights=self.weight, minlength=self.n))
        if self.loops is not None:
            s = s + self.loops
        s = s.astype(np.float64)
        s.setflags(write=False)
        return s

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency (no loop entries), neighbours ascending per row."""
        heads = np.concatenate([self.src, self.dst])
        tails = np.concatenate([self.dst, self.src])
        w = np.concatenate([self.weight, self.weight])
        order = np.lexsort((tails, heads))
        heads, tails, w = heads[order], tails[order], w[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(heads, minlength=self.n), out=indptr[1:])
        return indptr, np.ascontiguousarray(tails), np.ascontiguousarray(w)

    def isolated(self) -> np.ndarray:
        """Indices of nodes with no incident edges."""
        return np.flatnonzero(self.degree == 0)

    def ids(self) -> tuple[str, ...]:
        return self.entity_ids if self.entity_ids is not None else tuple(map(str, range(self.n)))

    def binarized(self) -> "Graph":
        return Graph(self.n, self.src, self.dst, np.ones_like(self.weight), self.entity_ids, self.loops)

    def scaled(self, factor: float) -> "Graph":
        loops = None if self.loops is None else self.loops * factor
        return Graph(self.n, self.src, self.dst, self.weight * factor, self.entity_ids, loops)

    def adjacency(self) -> np.ndarray:
        """Dense adjacency with loop entries on the diagonal."""
        A = np.zeros((self.n, self.n))
        A[self.src, self.dst] = self.weight
        A[self.dst, self.src] = self.weight
        if self.loops is not None:
            A[np.diag_indices(self.n)] = self.loops
        return A


def build_graph(s: SimilarityMatrix, weighting: str = SIMILARITY) -> Graph:
    """One edge per retained pair; entities without a retained pair stay isolated."""
    if weighting not in (BINARY, SIMILARITY):
        raise FormatError(f"weighting must be 'binary' or 'similarity', got {weighting!r}")
    w = np.ones(s.n_pairs) if weighting == BINARY else s.values.astype(np.float64)
    return Graph(s.n, s.rows, s.cols, w, s.entity_ids)


def _community_labels(partition, n: int) -> list[str] | None:
    if partition is None:
        return None
    if hasattr(partition, "export_labels"):
        labels = partition.export_labels()
    else:
        labels = [str(partition[i]) for i in range(n)]
    if len(labels) != n:
        raise ValueError("partition does not cover every node")
    return labels


def _positions(positions, n: int) -> np.ndarray | None:
    if positions is None:
        return None
    pos = np.asarray(getattr(positions, "positions", positions), dtype=np.float64)
    if pos.shape != (n, 2):
        raise ValueError(f"positions must have shape ({n}, 2), got {pos.shape}")
    return pos


def _edges_with_loops(g: Graph):
    out = list(zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist()))
    if g.loops is not None:
        out += [(i, i, v / 2.0) for i, v in enumerate(g.loops.tolist()) if v > 0]
        out.sort(key=lambda e: (e[0], e[1]))
    return out


def _fmt(v: float) -> str:
    return repr(float(v))


def _gexf(g: Graph, pos, comm) -> str:
    ids = g.ids()
    out = io.StringIO()
    w = out.write
    w('<?xml version="1.0" encoding="UTF-8"?>\n')
    w('<gexf xmlns="http://www.gexf.net/1.2draft" xmlns:viz="http://www.gexf.net/1.2draft/viz" version="1.2">\n')
    w('  <graph defaultedgetype="undirected" mode="static">\n')
    if comm is not None or pos is not None:
        w('    <attributes class="node" mode="static">\n')
        if comm is not None:
            w('      <attribute id="community" title="community" type="string"/>\n')
        if pos is not None:
            w('      <attribute id="x" title="x" type="double"/>\n')
            w('      <attribute id="y" title="y" type="double"/>\n')
        w('    </attributes>\n')
    w('    <nodes>\n')
    for i in range(g.n):
        nid = quoteattr(ids[i])
        if comm is None and pos is None:
            w(f'      <node id={nid} label={nid}/>\n')
            continue
        w(f'      <node id={nid} label={nid}>\n        <attvalues>\n')
        if comm is not None:
            w(f'          <attvalue for="community" value={quoteattr(comm[i])}/>\n')
        if pos is not None:
            w(f'          <attvalue for="x" value="{_fmt(pos[i, 0])}"/>\n')
            w(f'          <attvalue for="y" value="{_fmt(pos[i, 1])}"/>\n')
        w('        </attvalues>\n')
        if pos is not None:
            w(f'        <viz:position x="{_fmt(pos[i, 0])}" y="{_fmt(pos[i, 1])}" z="0.0"/>\n')
        w('      </node>\n')
    w('    </nodes>\n    <edges>\n')
    for k, (a, b, wt) in enumerate(_edges_with_loops(g)):
        w(f'      <edge id="{k}" source={quoteattr(ids[a])} target={quoteattr(ids[b])} weight="{_fmt(wt)}"/>\n')
    w('    </edges>\n  </graph>\n</gexf>\n')
    return out.getvalue()


def _graphml(g: Graph, pos, comm) -> str:
    ids = g.ids()
    out = io.StringIO()
    w = out.write
    w('<?xml version="1.0" encoding="UTF-8"?>\n')
    w('<graphml xmlns="http://graphml.graphdrawing.org/xmlns" '
      'xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" '
      'xsi:schemaLocation="http://graphml.graphdrawing.org/xmlns '
      'http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd">\n')
    w('  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>\n')
    if comm is not None:
        w('  <key id="community" for="node" attr.name="community" attr.type="string"/>\n')
    if pos is not None:
        w('  <key id="x" for="node" attr.name="x" attr.type="double"/>\n')
        w('  <key id="y" for="node" attr.name="y" attr.type="double"/>\n')
    w('  <graph id="G" edgedefault="undirected">\n')
    for i in range(g.n):
        nid = quoteattr(ids[i])
        if comm is None and pos is None:
            w(f'    <node id={nid}/>\n')
            continue
        w(f'    <node id={nid}>\n')
        if comm is not None:
            w(f'      <data key="community">{escape(comm[i])}</data>\n')
        if pos is not None:
            w(f'      <data key="x">{_fmt(pos[i, 0])}</data>\n')
            w(f'      <data key="y">{_fmt(pos[i, 1])}</data>\n')
        w('    </node>\n')
    for a, b, wt in _edges_with_loops(g):
        w(f'    <edge source={quoteattr(ids[a])} target={quoteattr(ids[b])}>\n')
        w(f'      <data key="weight">{_fmt(wt)}</data>\n    </edge>\n')
    w('  </graph>\n</graphml>\n')
    return out.getvalue()


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot(g: Graph, pos, comm) -> str:
    ids = g.ids()
    lines = ["graph G {"]
    for i in range(g.n):
        attrs = []
        if comm is not None:
            attrs.append(f"community={_dot_id(comm[i])}")
        if pos is not None:
            attrs.append(f"x={_fmt(pos[i, 0])}")
            attrs.append(f"y={_fmt(pos[i, 1])}")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {_dot_id(ids[i])}{suffix};")
    for a, b, wt in _edges_with_loops(g):
        lines.append(f"  {_dot_id(ids[a])} -- {_dot_id(ids[b])} [weight={_fmt(wt)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _jsonl(g: Graph, pos, comm) -> str:
    ids = g.ids()
    edges = _edges_with_loops(g)
    rows = [{"type": "graph", "format_version": JSONL_VERSION, "directed": False,
             "n_nodes": g.n, "n_edges": len(edges)}]
    for i in range(g.n):
        rec = {"type": "node", "index": i, "id": ids[i]}
        if comm is not None:
            rec["community"] = comm[i]
        if pos is not None:
            rec["x"] = float(pos[i, 0])
            rec["y"] = float(pos[i, 1])
        rows.append(rec)
    for a, b, wt in edges:
        rows.append({"type": "edge", "source": a, "target": b, "weight": wt})
    return "".join(json.dumps(r) + "\n" for r in rows)


_WRITERS = {"gexf": _gexf, "graphml": _graphml, "dot": _dot, "jsonl": _jsonl}


def export_graph(g: Graph, fmt: str, positions=None, partition=None) -> bytes:
    """Serialize ``g`` as GEXF 1.2, GraphML, DOT or JSON lines (UTF-8 bytes).

    ``positions`` is an (n, 2) array or a layout state; ``partition`` a
    :class:`~coopetition.community.Partition` or a node -> community mapping.
    Unassigned nodes carry community ``-1``.
    """
    try:
        writer = _WRITERS[fmt]
    except KeyError:
        raise FormatError(f"unknown graph format {fmt!r}; choose from {EXPORT_FORMATS}") from None
    return writer(g, _positions(positions, g.n), _community_labels(partition, g.n)).encode("utf-8")


@dataclass(frozen=True)
class LoadedGraph:
    graph: Graph
    positions: np.ndarray | None
    communities: list[str] | None


def read_graph_jsonl(stream: TextIO | str) -> LoadedGraph:
    """Inverse of ``export_graph(g, "jsonl", ...)``; weights round-trip exactly."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = None
    nodes: dict[int, dict] = {}
    edges = []
    loops: dict[int, float] = {}
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), line=lineno) from None
        kind = rec.get("type")
        if kind == "graph":
            header = rec
            if rec.get("format_version") != JSONL_VERSION:
                raise ParseError(f"unsupported format_version {rec.get('format_version')}", line=lineno)
        elif kind == "node":
            nodes[int(rec["index"])] = rec
        elif kind == "edge":
            a, b, wt = int(rec["source"]), int(rec["target"]), float(rec["weight"])
            if a == b:
                loops[a] = 2.0 * wt
            else:
                edges.append((a, b, wt))
        else:
            raise ParseError(f"unknown record type {kind!r}", line=lineno)
    if header is None:
        raise ParseError("missing graph header record", line=1)
    n = int(header["n_nodes"])
    if sorted(nodes) != list(range(n)):
        raise ParseError("node indices must be 0..n-1")
    ids = [nodes[i]["id"] for i in range(n)]
    g = Graph.from_edges(n, edges, ids)
    if loops:
        arr = np.zeros(n)
        for i, v in loops.items():
            arr[i] = v
        g = Graph(g.n, g.src, g.dst, g.weight, g.entity_ids, arr)
    pos = None
    if n and all("x" in nodes[i] for i in range(n)):
        pos = np.array([[nodes[i]["x"], nodes[i]["y"]] for i in range(n)], dtype=np.float64)
    comm = None
    if n and all("community" in nodes[i] for i in range(n)):
        comm = [nodes[i]["community"] for i in range(n)]
    return LoadedGraph(g, pos, comm)
