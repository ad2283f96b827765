from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopetition.affiliation import EntityMetadata
from coopetition.community import Partition, louvain
from coopetition.errors import CommunityLookupError, ConfigError, MissingGroundTruthError
from coopetition.graph import Graph
from coopetition.metrics import (CoopetitionReport, MetricsConfig, community_grade, conductance,
                                 coopetition_report, cut_counts, label_agreement,
                                 permutation_baseline)
from oracles import conductance_enumeration, cut_enumeration, random_graph_edges


def meta_of(labels, grades=None):
    grades = grades or [None] * len(labels)
    return [EntityMetadata(f"e{i}", g, lab) for i, (g, lab) in enumerate(zip(grades, labels))]


def test_conductance_hand_count():
    # community {0,1,2,3}: 4 internal edges, 2 leaving
    g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (3, 5), (4, 5)])
    p = Partition.from_labels([0, 0, 0, 0, 1, 1])
    assert cut_counts(g, p, 0) == (2, 4)
    assert conductance(g, p, 0) == 0.5


def test_isolated_clique_has_zero_conductance():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (0, 2), (3, 4)])
    p = Partition.from_labels([0, 0, 0, 1, 1])
    assert conductance(g, p, 0) == 0


def test_conductance_undefined_and_lookup():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    p = Partition.from_labels([0, 1, 2])
    assert conductance(g, p, 1) is None
    with pytest.raises(CommunityLookupError):
        conductance(g, p, 3)
    with pytest.raises(ConfigError):
        conductance(g, p, 0, "fuzzy")


def test_grade_examples():
    p = Partition.from_labels([0, 0, 0, 1, 1, 1])
    meta = meta_of(["a"] * 6, [4, 4, 4, 3, 4, 5])
    assert community_grade(p, meta, 0) == 4.0
    assert community_grade(p, meta, 1) == 4.0
    assert community_grade(Partition.from_labels([0]), meta_of(["a"]), 0) is None


def test_agreement_identical_partition():
    labels = ["f", "f", "m", "m", "a"]
    p = Partition.from_labels([0, 0, 1, 1, 2])
    rep = label_agreement(p, meta_of(labels))
    assert rep.accuracy == 1.0 and rep.mixed_communities == []


def test_agreement_hand_count():
    labels = ["finance"] * 4 + ["marketing"] + ["finance", "marketing", "accounting", "management", "finance"]
    # B has 2/5 finance, below one half
    p = Partition.from_labels([0] * 5 + [1] * 5)
    rep = label_agreement(p, meta_of(labels), 0.5)
    assert rep.correct == 4
    assert rep.accuracy == 0.4
    assert rep.mixed_communities == [1]
    assert rep.per_community[0].majority_label == "finance"
    assert rep.per_community[0].purity == 0.8


def test_agreement_tie_and_unassigned():
    p = Partition.from_labels([0, 0, 1], unassigned_nodes=[2])
    rep = label_agreement(p, meta_of(["b", "a", "a"]), 0.5)
    assert rep.per_community[0].majority_label == "a"
    assert rep.correct == 1 and rep.unassigned_count == 1
    scoped = label_agreement(p, meta_of(["b", "a", "a"]), 0.5, scope=[1])
    assert scoped.accuracy == 1.0


def test_missing_ground_truth():
    with pytest.raises(MissingGroundTruthError):
        label_agreement(Partition.singletons(2), meta_of([None, None]))


def test_report_two_cliques():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    p = Partition.from_labels([0, 0, 0, 1, 1, 1])
    rep = coopetition_report(g, p, meta_of(["x"] * 3 + ["y"] * 3, [5, 5, 5, 3, 3, 3]))
    assert [c.conductance for c in rep.communities] == [0, 0]
    assert [c.mean_grade for c in rep.communities] == [5.0, 3.0]
    assert rep.accuracy == 1.0


def test_report_dumbbell():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
    p = louvain(g)
    rep = coopetition_report(g, p, meta_of([None] * 6))
    for c in rep.communities:
        assert (c.epsilon_AA, c.epsilon_AB) == (3, 1)
        assert c.conductance == pytest.approx(1 / 3)
    assert rep.accuracy is None


def test_report_json_roundtrip_and_text():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3)])
    p = Partition.from_labels([0, 0, 0, 1, 2], unassigned_nodes=[4])
    rep = coopetition_report(g, p, meta_of(["a", "a", "b", "b", "a"], [1, 2, 3, 4, 5]),
                             MetricsConfig("weighted", 0.6), scope=[0, 1, 2])
    text = rep.to_json()
    assert text.startswith('{\n  "report_version": 1')
    assert CoopetitionReport.from_json(text) == rep
    table = rep.to_text()
    assert "undefined" in table and "%" in table
    assert rep.unassigned_count == 1
    assert sum(c.size for c in rep.communities) + rep.unassigned_count == 5
    with pytest.raises(ValueError):
        CoopetitionReport.from_dict({**rep.to_dict(), "report_version": 2})


def test_metrics_config_validation():
    with pytest.raises(ConfigError):
        MetricsConfig(counting="both")
    with pytest.raises(ConfigError):
        MetricsConfig(purity_threshold=1.5)


def test_permutation_baseline_is_chance_like():
    rng = np.random.default_rng(0)
    labels = list(rng.choice(["a", "b", "c", "d"], 200))
    p = Partition.from_labels(np.repeat(np.arange(4), 50))
    # shuffled labels leave every community near 1/4 purity
    base = permutation_baseline(p, meta_of(labels), 0.0, rounds=50, seed=1)
    assert 0.25 < base < 0.4
    assert permutation_baseline(p, meta_of(labels), 0.0, rounds=50, seed=1) == base
    assert permutation_baseline(p, meta_of(labels), 0.5, rounds=20) == 0.0


def random_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 21))
    edges = random_graph_edges(rng, n, 0.3, weighted=True)
    labels = list(Partition.from_labels(rng.integers(0, max(1, n // 3), n)).labels)
    return n, edges, labels


@pytest.mark.parametrize("seed", range(25))
def test_conductance_matches_enumeration(seed):
    n, edges, labels = random_case(seed)
    g = Graph.from_edges(n, edges)
    p = Partition.from_labels(labels)
    for c in range(p.n_communities):
        for weighted in (False, True):
            mode = "weighted" if weighted else "binary"
            ab, aa = cut_enumeration(edges, labels, c, weighted)
            assert cut_counts(g, p, c, mode) == pytest.approx((float(ab), float(aa)), abs=1e-12)
            ours = conductance(g, p, c, mode)
            ref = conductance_enumeration(edges, labels, c, weighted)
            assert (ours is None) == (ref is None)
            if ref is not None:
                assert ours == pytest.approx(ref, abs=1e-12)


@given(st.integers(0, 100_000))
def test_cut_sums(seed):
    n, edges, labels = random_case(seed)
    g = Graph.from_edges(n, edges)
    p = Partition.from_labels(labels)
    inter = sum(1 for a, b, _ in edges if labels[a] != labels[b])
    intra = sum(1 for a, b, _ in edges if labels[a] == labels[b])
    counts = [cut_counts(g, p, c) for c in range(p.n_communities)]
    assert sum(ab for ab, _ in counts) == 2 * inter
    assert sum(aa for _, aa in counts) == intra


@given(st.integers(0, 100_000), st.sampled_from([0.5, 2.0, 8.0, 0.125]))
def test_weighted_conductance_scale_invariant(seed, factor):
    n, edges, labels = random_case(seed)
    g = Graph.from_edges(n, edges)
    p = Partition.from_labels(labels)
    for c in range(p.n_communities):
        a = conductance(g, p, c, "weighted")
        b = conductance(g.scaled(factor), p, c, "weighted")
        assert a == b or a == pytest.approx(b, rel=1e-12)


@given(st.integers(0, 100_000))
def test_binary_equals_weighted_on_unweighted(seed):
    n, edges, labels = random_case(seed)
    g = Graph.from_edges(n, edges).binarized()
    p = Partition.from_labels(labels)
    for c in range(p.n_communities):
        assert conductance(g, p, c, "binary") == conductance(g, p, c, "weighted")


@given(st.lists(st.integers(0, 4), min_size=1, max_size=30), st.lists(st.sampled_from("abc"), min_size=30, max_size=30),
       st.floats(0, 1))
def test_accuracy_bounds(comm, labels, threshold):
    p = Partition.from_labels(comm)
    rep = label_agreement(p, meta_of(labels[:len(comm)]), threshold)
    assert 0 <= rep.accuracy <= 1
    if rep.accuracy == 1:
        assert rep.mixed_communities == [] and rep.unassigned_count == 0
