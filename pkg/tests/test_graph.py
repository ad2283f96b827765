from __future__ import annotations

import io
import json
import xml.etree.ElementTree as ET

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopetition.community import Partition, aggregate
from coopetition.errors import FormatError, ParseError
from coopetition.graph import EXPORT_FORMATS, Graph, build_graph, export_graph, read_graph_jsonl
from coopetition.similarity import SimilarityMatrix

GML = "{http://graphml.graphdrawing.org/xmlns}"


def thresholded(n, triples, ids=None):
    r = np.array([t[0] for t in triples], dtype=np.int64)
    c = np.array([t[1] for t in triples], dtype=np.int64)
    v = np.array([t[2] for t in triples], dtype=np.float64)
    return SimilarityMatrix(n, r, c, v, "thresholded", 0.1, n * (n - 1) // 2, ids)


def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)], ["A", "B", "C"])


def test_empty_thresholded_gives_isolated_nodes():
    g = build_graph(thresholded(3, []))
    assert g.n == 3 and g.n_edges == 0
    assert g.isolated().tolist() == [0, 1, 2]


def test_binary_weighting_path():
    g = build_graph(thresholded(3, [(0, 1, 0.5), (1, 2, 0.2)]), "binary")
    assert list(zip(g.src.tolist(), g.dst.tolist())) == [(0, 1), (1, 2)]
    assert g.weight.tolist() == [1.0, 1.0]
    g2 = build_graph(thresholded(3, [(0, 1, 0.5), (1, 2, 0.2)]))
    assert g2.weight.tolist() == [0.5, 0.2]
    with pytest.raises(FormatError):
        build_graph(thresholded(3, []), "cosine")


def test_graph_invariants_enforced():
    with pytest.raises(ValueError):
        Graph.from_edges(2, [(0, 0)])
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        Graph.from_edges(2, [(0, 1, 0.0)])
    with pytest.raises(ValueError):
        Graph.from_edges(2, [(0, 5)])


def test_csr_and_adjacency_agree():
    g = Graph.from_edges(4, [(2, 0, 1.5), (1, 3, 2.0), (0, 1, 0.5)])
    indptr, idx, w = g.csr
    A = np.zeros((4, 4))
    for i in range(4):
        for k in range(indptr[i], indptr[i + 1]):
            A[i, idx[k]] = w[k]
    assert np.array_equal(A, g.adjacency())
    assert g.strength.tolist() == [2.0, 2.5, 1.5, 2.0]


def test_graphml_triangle_counts():
    root = ET.fromstring(export_graph(triangle(), "graphml"))
    assert len(root.findall(f".//{GML}node")) == 3
    assert len(root.findall(f".//{GML}edge")) == 3


def test_partition_attribute_on_every_node():
    p = Partition.from_labels([0, 0, 1])
    g = triangle()
    for fmt in EXPORT_FORMATS:
        data = export_graph(g, fmt, partition=p).decode()
        assert data.count("community") >= 3
    G = nx.parse_graphml(export_graph(g, "graphml", partition=p).decode())
    assert [G.nodes[v]["community"] for v in "ABC"] == ["0", "0", "1"]


def test_unknown_format():
    with pytest.raises(FormatError):
        export_graph(triangle(), "pajek")


def test_unassigned_exported_as_minus_one():
    g = Graph.from_edges(3, [(0, 1)])
    p = Partition.from_labels([0, 0, 1], unassigned_nodes=[2])
    rec = [json.loads(x) for x in export_graph(g, "jsonl", partition=p).decode().splitlines()]
    assert [r["community"] for r in rec if r["type"] == "node"] == ["0", "0", "-1"]


def random_graph(seed, n=12, p=0.3):
    rng = np.random.default_rng(seed)
    edges = [(i, j, float(rng.integers(1, 100)) / 7) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges, [f"n{i}" for i in range(n)])


def edge_multiset(G):
    return sorted(tuple(sorted((a, b))) + (float(d["weight"]),) for a, b, d in G.edges(data=True))


def our_multiset(g):
    ids = g.ids()
    return sorted(tuple(sorted((ids[a], ids[b]))) + (w,)
                  for a, b, w in zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist()))


@pytest.mark.parametrize("seed", range(5))
def test_graphml_reparse_with_networkx(seed):
    g = random_graph(seed)
    G = nx.parse_graphml(export_graph(g, "graphml").decode())
    assert edge_multiset(G) == our_multiset(g)
    assert G.number_of_nodes() == g.n


@pytest.mark.parametrize("seed", range(5))
def test_gexf_reparse_with_networkx(seed, tmp_path):
    g = random_graph(seed)
    pos = np.random.default_rng(seed).random((g.n, 2))
    path = tmp_path / "g.gexf"
    path.write_bytes(export_graph(g, "gexf", positions=pos, partition=Partition.singletons(g.n)))
    G = nx.read_gexf(path)
    assert edge_multiset(G) == our_multiset(g)
    assert G.nodes["n3"]["viz"]["position"]["x"] == pos[3, 0]


def test_jsonl_roundtrip_exact():
    g = random_graph(7)
    pos = np.random.default_rng(1).normal(size=(g.n, 2))
    p = Partition.from_labels(np.arange(g.n) % 3)
    back = read_graph_jsonl(export_graph(g, "jsonl", pos, p).decode())
    assert back.graph.ids() == g.ids()
    assert back.graph.src.tolist() == g.src.tolist()
    assert back.graph.weight.tobytes() == g.weight.tobytes()
    assert back.positions.tobytes() == pos.tobytes()
    assert back.communities == p.export_labels()


def test_jsonl_keeps_aggregation_loops():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
    agg = aggregate(g, Partition.from_labels([0, 0, 0, 1, 1, 1]))
    back = read_graph_jsonl(export_graph(agg, "jsonl").decode()).graph
    assert back.loops.tolist() == agg.loops.tolist()
    assert back.strength.tolist() == agg.strength.tolist()


def test_jsonl_errors():
    with pytest.raises(ParseError):
        read_graph_jsonl('{"type":"node","index":0,"id":"a"}\n')
    with pytest.raises(ParseError):
        read_graph_jsonl('{"type":"graph","format_version":9,"n_nodes":0,"n_edges":0}\n')
    with pytest.raises(ParseError) as info:
        read_graph_jsonl('{"type":"graph","format_version":1,"n_nodes":0,"n_edges":0}\nnot json\n')
    assert info.value.line == 2


def test_dot_output_shape():
    text = export_graph(triangle(), "dot", positions=np.zeros((3, 2))).decode()
    assert text.startswith("graph G {") and text.count(" -- ") == 3
    assert '"A" [x=0.0, y=0.0];' in text


edge_lists = st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), st.floats(0.01, 10)),
                      max_size=30).map(lambda es: {(min(a, b), max(a, b)): w for a, b, w in es if a != b})


@given(edge_lists)
def test_degree_sums(edges):
    g = Graph.from_edges(10, [(a, b, w) for (a, b), w in edges.items()])
    assert int(g.degree.sum()) == 2 * g.n_edges
    assert np.isclose(g.strength.sum(), 2 * g.weight.sum(), rtol=0, atol=1e-9)
    assert g.total_weight == pytest.approx(g.weight.sum(), abs=1e-9)


@given(edge_lists, st.sampled_from(EXPORT_FORMATS))
def test_equal_inputs_give_identical_exports(edges, fmt):
    triples = [(a, b, w) for (a, b), w in sorted(edges.items())]
    a = build_graph(thresholded(10, triples))
    b = build_graph(thresholded(10, list(reversed(triples))))
    assert export_graph(a, fmt) == export_graph(b, fmt)
