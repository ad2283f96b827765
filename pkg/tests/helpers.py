"""Shared test helpers: a small in-memory pipeline, Louvain move replay, and the
acceptance result registry."""

from __future__ import annotations

import warnings

import numpy as np
import pytest

from coopetition.community import Partition, aggregate, louvain, modularity
from coopetition.graph import build_graph
from coopetition.metrics import label_agreement, permutation_baseline
from coopetition.similarity import (EmptySparsificationWarning, empirical_cdf, pairwise_distances,
                                    quantile_cutoff, reciprocal_similarity, sparsify)


def detect(matrix, q=0.95):
    s = reciprocal_similarity(pairwise_distances(matrix))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySparsificationWarning)
        kept = sparsify(s, quantile_cutoff(empirical_cdf(s), q))
    g = build_graph(kept)
    return g, louvain(g)


def recovery(data, q=0.95, scope="planted", baseline_rounds=0):
    """(accuracy, chance baseline or None) of detected communities vs. true labels."""
    _, p = detect(data.matrix, q)
    sc = data.planted_members() if scope == "planted" else None
    acc = label_agreement(p, data.metadata, 0.5, sc).accuracy
    base = None
    if baseline_rounds:
        base = permutation_baseline(p, data.metadata, 0.5, sc, baseline_rounds, seed=0)
    return acc, base


def replay(g, p, moves):
    """Recompute Q around every recorded move; returns the Q sequence."""
    qs = []
    for level in range(len(p.levels) + 1):
        lg = g if level == 0 else aggregate(g, Partition.from_labels(p.levels[level - 1]))
        labels = np.arange(lg.n)
        q = modularity(lg, Partition.singletons(lg.n))
        if level > 0:
            assert q == pytest.approx(qs[-1], abs=1e-12)
        qs.append(q)
        for lv, node, frm, to, dq in moves:
            if lv != level:
                continue
            assert labels[node] == frm
            labels[node] = to
            q_new = modularity(lg, Partition.from_labels(labels))
            assert q_new - q == pytest.approx(dq, abs=1e-12)
            assert q_new >= q
            q = q_new
            qs.append(q)
    return qs


# criterion id -> (passed, detail); printed by the terminal summary hook
ACCEPTANCE: dict[str, tuple[bool, str]] = {}
