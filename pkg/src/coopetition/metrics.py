"""Competitive stance (mean grade), cooperative stance (conductance), label agreement."""

from __future__ import annotations

import io
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .affiliation import EntityMetadata
from .community import Partition, modularity
from .errors import CommunityLookupError, ConfigError, MissingGroundTruthError
from .graph import Graph

REPORT_VERSION = 1
COUNTING_MODES = ("binary", "weighted")


def _check_community(p: Partition, c: int) -> None:
    if not 0 <= c < p.n_communities:
        raise CommunityLookupError(f"no community {c} (partition has {p.n_communities})")


def cut_counts(g: Graph, p: Partition, c: int, counting: str = "binary") -> tuple[float, float]:
    """(epsilon_AB, epsilon_AA): boundary and internal edge totals of community ``c``.

    Only edges between distinct nodes are considered; loop entries of
    aggregated graphs are ignored.
    """
    _check_community(p, c)
    if counting not in COUNTING_MODES:
        raise ConfigError(f"counting must be one of {COUNTING_MODES}, got {counting!r}")
    a = p.labels[g.src] == c
    b = p.labels[g.dst] == c
    w = g.weight if counting == "weighted" else np.ones(g.n_edges)
    inside = math.fsum(w[a & b].tolist())
    boundary = math.fsum(w[a ^ b].tolist())
    return boundary, inside


def conductance(g: Graph, p: Partition, c: int, counting: str = "binary") -> float | None:
    """K = epsilon_AB / epsilon_AA, or None when the community has no internal ties."""
    boundary, inside = cut_counts(g, p, c, counting)
    if inside == 0:
        return None
    return boundary / inside


def community_grade(p: Partition, meta: Sequence[EntityMetadata], c: int) -> float | None:
    _check_community(p, c)
    grades = [meta[i].grade for i in p.members(c).tolist() if meta[i].grade is not None]
    if not grades:
        return None
    return math.fsum(grades) / len(grades)


@dataclass(frozen=True)
class CommunityAgreement:
    majority_label: str | None
    purity: float | None
    mixed: bool


@dataclass(frozen=True)
class AgreementReport:
    per_community: dict[int, CommunityAgreement]
    accuracy: float
    correct: int
    scored: int
    mixed_communities: list[int]
    unassigned_count: int


def label_agreement(p: Partition, meta: Sequence[EntityMetadata], purity_threshold: float = 0.5,
                    scope: Iterable[int] | None = None) -> AgreementReport:
    """Map each community to its majority label and score members against it.

    A community is mixed when its purity (majority share among labelled
    members) is below ``purity_threshold``. Correct = member of a non-mixed,
    assigned community whose label equals the majority label. Accuracy is
    correct / |scope|, scope defaulting to every entity.
    """
    if len(meta) != p.n:
        raise ValueError("metadata must be aligned with partition nodes")
    if not any(m.label is not None for m in meta):
        raise MissingGroundTruthError("no entity carries a ground-truth label")
    per: dict[int, CommunityAgreement] = {}
    for c, members in p.communities.items():
        if c in p.unassigned:
            continue
        counts = Counter(meta[i].label for i in members if meta[i].label is not None)
        if not counts:
            per[c] = CommunityAgreement(None, None, False)
            continue
        top = max(counts.values())
        majority = min(lab for lab, v in counts.items() if v == top)
        purity = top / sum(counts.values())
        per[c] = CommunityAgreement(majority, purity, purity < purity_threshold)
    nodes = range(p.n) if scope is None else sorted(set(int(i) for i in scope))
    correct = 0
    for i in nodes:
        info = per.get(int(p.labels[i]))
        if info is None or info.mixed or info.majority_label is None:
            continue
        if meta[i].label == info.majority_label:
            correct += 1
    scored = len(nodes)
    return AgreementReport(
        per_community=per,
        accuracy=correct / scored if scored else 0.0,
        correct=correct,
        scored=scored,
        mixed_communities=sorted(c for c, a in per.items() if a.mixed),
        unassigned_count=sum(1 for i in range(p.n) if int(p.labels[i]) in p.unassigned),
    )


def permutation_baseline(p: Partition, meta: Sequence[EntityMetadata], purity_threshold: float = 0.5,
                         scope: Iterable[int] | None = None, rounds: int = 100,
                         seed: int = 0) -> float:
    """Mean accuracy after shuffling labels across entities (chance level for ``p``)."""
    rng = np.random.default_rng(seed)
    labels = [m.label for m in meta]
    scope = None if scope is None else list(scope)
    acc = []
    for _ in range(rounds):
        perm = rng.permutation(len(labels))
        shuffled = [EntityMetadata(m.entity_id, m.grade, labels[k]) for m, k in zip(meta, perm.tolist())]
        acc.append(label_agreement(p, shuffled, purity_threshold, scope).accuracy)
    return float(np.mean(acc))


@dataclass(frozen=True)
class MetricsConfig:
    counting: str = "binary"
    purity_threshold: float = 0.5

    def __post_init__(self):
        if self.counting not in COUNTING_MODES:
            raise ConfigError(f"counting must be one of {COUNTING_MODES}")
        if not 0 <= self.purity_threshold <= 1:
            raise ConfigError("purity_threshold must lie in [0, 1]")


@dataclass(frozen=True)
class CommunityReport:
    community_id: int
    size: int
    mean_grade: float | None
    conductance: float | None
    epsilon_AB: float
    epsilon_AA: float
    majority_label: str | None = None
    purity: float | None = None
    mixed: bool = False


@dataclass(frozen=True)
class CoopetitionReport:
    communities: list[CommunityReport]
    n_entities: int
    unassigned_count: int
    counting: str
    purity_threshold: float
    modularity: float | None = None
    accuracy: float | None = None
    correct: int | None = None
    mixed_communities: list[int] = field(default_factory=list)
    scoped_accuracy: float | None = None
    scope_size: int | None = None
    report_version: int = REPORT_VERSION

    def to_dict(self) -> dict:
        d = asdict(self)
        d = {"report_version": d.pop("report_version"), **d}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoopetitionReport":
        d = dict(d)
        version = d.get("report_version")
        if version != REPORT_VERSION:
            raise ValueError(f"unsupported report_version {version}")
        d["communities"] = [CommunityReport(**c) for c in d["communities"]]
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CoopetitionReport":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        def num(v, spec):
            return "undefined" if v is None else format(v, spec)

        out = io.StringIO()
        head = f"{'community':>9} {'size':>5} {'mean_grade':>10} {'conductance':>11} " \
               f"{'eps_AB':>8} {'eps_AA':>8}  {'majority':<12} {'purity':>6}  mixed"
        out.write(head + "\n")
        out.write("-" * len(head) + "\n")
        for c in self.communities:
            out.write(f"{c.community_id:>9} {c.size:>5} {num(c.mean_grade, '.2f'):>10} "
                      f"{num(None if c.conductance is None else 100 * c.conductance, '.2f') + ('%' if c.conductance is not None else ''):>11} "
                      f"{c.epsilon_AB:>8g} {c.epsilon_AA:>8g}  {(c.majority_label or '-'):<12} "
                      f"{num(c.purity, '.2f'):>6}  {'yes' if c.mixed else 'no'}\n")
        out.write("\n")
        out.write(f"entities: {self.n_entities}   unassigned: {self.unassigned_count}   "
                  f"conductance counting: {self.counting}\n")
        if self.modularity is not None:
            out.write(f"modularity Q: {self.modularity:.4f}\n")
        if self.accuracy is not None:
            out.write(f"label agreement: {self.accuracy:.2%} ({self.correct}/{self.n_entities}); "
                      f"mixed communities (purity < {self.purity_threshold}): {self.mixed_communities}\n")
        if self.scoped_accuracy is not None:
            out.write(f"label agreement within scope: {self.scoped_accuracy:.2%} of {self.scope_size}\n")
        return out.getvalue()


def coopetition_report(g: Graph, p: Partition, meta: Sequence[EntityMetadata],
                       cfg: MetricsConfig = MetricsConfig(),
                       scope: Iterable[int] | None = None) -> CoopetitionReport:
    """Per-community size, mean grade and conductance plus global agreement figures.

    Label agreement is filled in only when some entity has a label. ``scope``
    restricts an additional accuracy figure to the given entity indices.
    """
    if len(meta) != p.n or g.n != p.n:
        raise ValueError("graph, partition and metadata must cover the same entities")
    agreement = None
    scoped = None
    if any(m.label is not None for m in meta):
        agreement = label_agreement(p, meta, cfg.purity_threshold)
        if scope is not None:
            scoped = label_agreement(p, meta, cfg.purity_threshold, scope)
    rows = []
    for c in p.assigned_communities():
        boundary, inside = cut_counts(g, p, c, cfg.counting)
        info = agreement.per_community.get(c) if agreement else None
        rows.append(CommunityReport(
            community_id=c,
            size=int((p.labels == c).sum()),
            mean_grade=community_grade(p, meta, c),
            conductance=None if inside == 0 else boundary / inside,
            epsilon_AB=boundary,
            epsilon_AA=inside,
            majority_label=info.majority_label if info else None,
            purity=info.purity if info else None,
            mixed=info.mixed if info else False,
        ))
    return CoopetitionReport(
        communities=rows,
        n_entities=p.n,
        unassigned_count=sum(1 for c in p.labels.tolist() if c in p.unassigned),
        counting=cfg.counting,
        purity_threshold=cfg.purity_threshold,
        modularity=modularity(g, p) if g.n_edges else None,
        accuracy=agreement.accuracy if agreement else None,
        correct=agreement.correct if agreement else None,
        mixed_communities=agreement.mixed_communities if agreement else [],
        scoped_accuracy=scoped.accuracy if scoped else None,
        scope_size=scoped.scored if scoped else None,
    )
