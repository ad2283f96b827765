from __future__ import annotations

import io
import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopetition.community import (LouvainConfig, Partition, aggregate, canonical_labels, louvain,
                                   louvain_local_pass, modularity, read_partition_csv)
from coopetition.errors import CommunityLookupError, ConfigError, UndefinedModularityError
from coopetition.graph import Graph
from helpers import replay
from oracles import exhaustive_optimum, modularity_double_sum, random_graph_edges

TWO_TRIANGLES = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]


def two_triangles():
    return Graph.from_edges(6, TWO_TRIANGLES)


def edges_of(g):
    return list(zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist()))


# -- Partition ---------------------------------------------------------------

def test_canonical_renumbering():
    assert canonical_labels([5, 5, 2, 9, 2]).tolist() == [0, 0, 1, 2, 1]
    p = Partition.from_labels([3, 1, 3, 7])
    assert p.labels.tolist() == [0, 1, 0, 2]
    assert p.communities == {0: (0, 2), 1: (1,), 2: (3,)}
    assert p.community_of(3) == 2
    with pytest.raises(ValueError):
        Partition(np.array([1, 0]))
    with pytest.raises(CommunityLookupError):
        p.members(3)


def test_unassigned_must_be_singletons():
    with pytest.raises(ValueError):
        Partition(np.array([0, 0, 1]), frozenset({0}))
    p = Partition.from_labels([0, 0, 1], unassigned_nodes=[2])
    assert p.assigned_communities() == [0]


def test_partition_csv_roundtrip():
    p = Partition.from_labels([0, 0, 1, 2, 1], unassigned_nodes=[3], levels=[[0, 0, 1, 2, 3], [0, 0, 1, 2, 1]])
    buf = io.StringIO()
    p.to_csv(buf, ["a", "b", "c", "d", "e"])
    text = buf.getvalue()
    assert text.splitlines()[0] == "entity_id,community_id,level0_id,level1_id"
    assert text.splitlines()[4] == "d,-1,-1,-1"
    ids, back = read_partition_csv(text)
    assert ids == ["a", "b", "c", "d", "e"]
    assert back == p


# -- modularity ---------------------------------------------------------------

def test_modularity_examples():
    g = two_triangles()
    assert modularity(g, Partition.from_labels([0] * 6)) == 0.0
    assert modularity(g, Partition.from_labels([0, 0, 0, 1, 1, 1])) == 0.5
    assert modularity(Graph.from_edges(2, [(0, 1)]), Partition.singletons(2)) == -0.5
    with pytest.raises(UndefinedModularityError):
        modularity(Graph.from_edges(3, []), Partition.singletons(3))


@pytest.mark.parametrize("seed", range(20))
def test_modularity_matches_double_sum(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 31))
    edges = random_graph_edges(rng, n, 0.3, weighted=True)
    if not edges:
        edges = [(0, 1, 1.0)]
    labels = rng.integers(0, max(1, n // 3), n)
    g = Graph.from_edges(n, edges)
    p = Partition.from_labels(labels)
    assert modularity(g, p) == pytest.approx(modularity_double_sum(n, edges, labels=list(p.labels)), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_modularity_with_loops_matches_double_sum(seed):
    rng = np.random.default_rng(100 + seed)
    n = 12
    g = Graph.from_edges(n, random_graph_edges(rng, n, 0.4, weighted=True) or [(0, 1, 1.0)])
    coarse = Partition.from_labels(rng.integers(0, 5, n))
    agg = aggregate(g, coarse)
    labels = rng.integers(0, 3, agg.n)
    q = modularity(agg, Partition.from_labels(labels))
    ref = modularity_double_sum(agg.n, edges_of(agg), agg.loops, list(canonical_labels(labels)))
    assert q == pytest.approx(ref, abs=1e-12)


# -- local pass and aggregation -----------------------------------------------

def test_local_pass_two_triangles():
    p, moved = louvain_local_pass(two_triangles(), Partition.singletons(6))
    assert p.labels.tolist() == [0, 0, 0, 1, 1, 1]
    assert moved > 0


def test_local_pass_fixpoint():
    g = two_triangles()
    start = Partition.from_labels([0, 0, 0, 1, 1, 1])
    p, moved = louvain_local_pass(g, start)
    assert moved == 0 and p == start


def test_local_pass_star():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    p, _ = louvain_local_pass(g, Partition.singletons(4))
    assert p.labels.tolist() == [0, 0, 0, 0]


def test_tie_goes_to_smallest_community():
    # node 0 gains the same by joining node 1 or node 2
    g = Graph.from_edges(3, [(0, 1), (0, 2)])
    moves = []
    louvain_local_pass(g, Partition.singletons(3), moves=moves)
    node, frm, to, dq = moves[0]
    assert (node, frm, to) == (0, 0, 1)
    assert dq == pytest.approx(0.25)


def test_aggregate_identity_on_singletons():
    g = Graph.from_edges(5, [(0, 1, 2.0), (1, 2, 0.5), (3, 4, 1.0), (0, 4, 3.0)])
    agg = aggregate(g, Partition.singletons(5))
    assert edges_of(agg) == edges_of(g)
    assert agg.loops.tolist() == [0.0] * 5


def test_aggregate_two_triangles():
    agg = aggregate(two_triangles(), Partition.from_labels([0, 0, 0, 1, 1, 1]))
    assert agg.n == 2 and agg.n_edges == 0
    assert agg.loops.tolist() == [6.0, 6.0]


@pytest.mark.parametrize("seed", range(15))
def test_aggregation_preserves_q(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 25))
    g = Graph.from_edges(n, random_graph_edges(rng, n, 0.3, weighted=True) or [(0, 1, 1.0)])
    p = Partition.from_labels(rng.integers(0, max(1, n // 2), n))
    agg = aggregate(g, p)
    assert modularity(agg, Partition.singletons(agg.n)) == pytest.approx(modularity(g, p), abs=1e-12)
    assert agg.total_weight == pytest.approx(g.total_weight, abs=1e-12)


# -- Louvain -------------------------------------------------------------------

def test_louvain_two_triangles():
    p = louvain(two_triangles())
    assert p.labels.tolist() == [0, 0, 0, 1, 1, 1]
    assert modularity(two_triangles(), p) == 0.5


def test_louvain_planted_blocks():
    rng = np.random.default_rng(0)
    truth = rng.permutation(np.repeat(np.arange(4), 6))
    edges = [(i, j) for i, j in itertools.combinations(range(24), 2)
             if truth[i] == truth[j] and rng.random() < 0.7]
    p = louvain(Graph.from_edges(24, edges))
    assert p == Partition.from_labels(truth, levels=p.levels)


def test_louvain_flags_isolated_nodes():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (0, 2)])
    p = louvain(g)
    assert p.labels.tolist() == [0, 0, 0, 1, 2]
    assert p.unassigned == {1, 2}
    assert p.export_labels() == ["0", "0", "0", "-1", "-1"]


def test_louvain_needs_edges():
    with pytest.raises(UndefinedModularityError):
        louvain(Graph.from_edges(3, []))


def test_louvain_config_validation():
    with pytest.raises(ConfigError):
        LouvainConfig(min_gain=-1)
    with pytest.raises(ConfigError):
        LouvainConfig(node_order="random")
    with pytest.raises(ConfigError):
        LouvainConfig(max_passes=0)


def test_karate_quality_and_crosscheck(karate):
    p = louvain(karate)
    q = modularity(karate, p)
    assert q >= 0.40
    G = nx.Graph(list(zip(karate.src.tolist(), karate.dst.tolist())))
    ref = max(nx.community.modularity(G, nx.community.louvain_communities(G, seed=s)) for s in range(3))
    assert q >= ref - 0.03


def test_determinism_and_seeded_shuffle(karate):
    assert louvain(karate) == louvain(karate)
    cfg = LouvainConfig(node_order="shuffle", seed=5)
    assert louvain(karate, cfg) == louvain(karate, cfg)


@pytest.mark.parametrize("seed", range(15))
def test_q_monotone_along_moves_and_levels(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 40))
    g = Graph.from_edges(n, random_graph_edges(rng, n, 0.2, weighted=bool(seed % 2)) or [(0, 1, 1.0)])
    moves = []
    p = louvain(g, moves=moves)
    qs = replay(g, p, moves)
    assert all(b >= a for a, b in zip(qs, qs[1:]))
    assert qs[-1] == pytest.approx(modularity(g, p), abs=1e-12)


@given(st.integers(0, 10_000))
def test_louvain_beats_singletons_and_finds_positive_q(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    edges = random_graph_edges(rng, n, 0.45, weighted=False) or [(0, 1, 1.0)]
    g = Graph.from_edges(n, edges)
    p = louvain(g)
    q = modularity(g, p)
    assert q >= modularity(g, Partition.singletons(n)) - 1e-12
    _, best = exhaustive_optimum(n, edges)
    if best > 0:
        assert q >= 0
    assert q <= best + 1e-12
