"""Planted-partition affiliation data with known ground truth.

Course catalogue layout: ``courses_shared`` common courses, then one block of
``courses_core_per_group`` core courses per group, then electives. Each
(entity, course) cell is an independent Bernoulli draw whose probability
depends only on the entity's cohort and the course's block:

=========  ========  =========  ===========  =========
cohort     shared    own core   other cores  electives
=========  ========  =========  ===========  =========
group      p_shared  p_core     p_cross      p_elective
mixed      p_shared  p_mixed    p_mixed      p_elective
loner      p_loner   p_loner    p_loner      p_loner
=========  ========  =========  ===========  =========

Mixed-cohort members and loners are still students of some specialization:
their labels cycle through the group labels, which is what makes a detected
cluster of them a *mixed* community.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from importlib import resources
from typing import NamedTuple

import numpy as np

from .affiliation import AffiliationMatrix, EntityMetadata
from .community import Partition
from .errors import ConfigError

DEFAULT_LABELS = ("finance", "marketing", "accounting", "management")
GROUP, MIXED, LONER = "group", "mixed", "loner"


@dataclass(frozen=True)
class SynthConfig:
    k_groups: int = 4
    group_sizes: tuple[int, ...] = (20, 20, 20, 20)
    courses_core_per_group: int = 10
    courses_shared: int = 5
    p_core: float = 0.8
    p_cross: float = 0.1
    mixed_group_size: int = 0
    loner_count: int = 0
    grade_means: tuple[float, ...] = (3.5, 3.5, 3.5, 3.5)
    grade_sd: float = 0.5
    seed: int = 0
    n_features: int | None = None
    p_shared: float = 0.9
    p_elective: float = 0.0
    p_mixed: float | None = None
    p_loner: float = 0.05
    group_labels: tuple[str, ...] | None = None
    grade_min: float = 0.0
    grade_max: float = 5.0
    ensure_coverage: bool = False

    def __post_init__(self):
        for name in ("group_sizes", "grade_means"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.group_labels is not None:
            object.__setattr__(self, "group_labels", tuple(self.group_labels))
        if self.k_groups < 1:
            raise ConfigError("k_groups must be >= 1")
        if len(self.group_sizes) != self.k_groups or len(self.grade_means) != self.k_groups:
            raise ConfigError("group_sizes and grade_means need one entry per group")
        if min(self.group_sizes) < 0 or self.mixed_group_size < 0 or self.loner_count < 0:
            raise ConfigError("cohort sizes must be >= 0")
        if self.n_entities == 0:
            raise ConfigError("no entities to generate")
        for name in ("p_core", "p_cross", "p_shared", "p_elective", "p_loner"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.p_mixed is not None and not 0 <= self.p_mixed <= 1:
            raise ConfigError("p_mixed must lie in [0, 1]")
        if self.courses_core_per_group < 0 or self.courses_shared < 0:
            raise ConfigError("course counts must be >= 0")
        if self.catalogue_size <= 0:
            raise ConfigError("configuration has zero courses")
        if self.n_features is not None and self.n_features < self.courses_shared + self.k_groups * self.courses_core_per_group:
            raise ConfigError("n_features smaller than shared + core courses")
        if self.grade_sd < 0 or self.grade_min > self.grade_max:
            raise ConfigError("invalid grade scale")
        if self.group_labels is not None and len(set(self.group_labels)) != self.k_groups:
            raise ConfigError("group_labels needs k_groups distinct names")

    @property
    def n_entities(self) -> int:
        return sum(self.group_sizes) + self.mixed_group_size + self.loner_count

    @property
    def catalogue_size(self) -> int:
        core = self.courses_shared + self.k_groups * self.courses_core_per_group
        return core if self.n_features is None else self.n_features

    @property
    def labels(self) -> tuple[str, ...]:
        if self.group_labels is not None:
            return self.group_labels
        if self.k_groups == len(DEFAULT_LABELS):
            return DEFAULT_LABELS
        return tuple(f"group{g}" for g in range(self.k_groups))

    @property
    def mixed_rate(self) -> float:
        return self.p_core / self.k_groups if self.p_mixed is None else self.p_mixed

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth fields: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **changes) -> "SynthConfig":
        return SynthConfig.from_dict({**self.to_dict(), **changes})


def preset(name: str) -> SynthConfig:
    try:
        text = resources.files("coopetition.presets").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise ConfigError(f"unknown synth preset {name!r}") from None
    return SynthConfig.from_dict(json.loads(text))


class SynthData(NamedTuple):
    matrix: AffiliationMatrix
    metadata: list[EntityMetadata]
    truth: Partition
    cohorts: list[str]

    def planted_members(self) -> list[int]:
        """Indices of entities that belong to one of the planted groups."""
        return [i for i, c in enumerate(self.cohorts) if c == GROUP]


def _cohort_plan(cfg: SynthConfig) -> list[tuple[str, int]]:
    """(cohort, group index) per entity before shuffling; group index of
    mixed/loner entities is their specialization label."""
    plan = [(GROUP, g) for g, size in enumerate(cfg.group_sizes) for _ in range(size)]
    plan += [(MIXED, k % cfg.k_groups) for k in range(cfg.mixed_group_size)]
    plan += [(LONER, k % cfg.k_groups) for k in range(cfg.loner_count)]
    return plan


def cell_probabilities(cfg: SynthConfig) -> np.ndarray:
    """(n_entities, catalogue) matrix of Bernoulli rates in unshuffled cohort order."""
    F = cfg.catalogue_size
    S, C, k = cfg.courses_shared, cfg.courses_core_per_group, cfg.k_groups
    plan = _cohort_plan(cfg)
    P = np.full((len(plan), F), cfg.p_elective)
    for r, (cohort, g) in enumerate(plan):
        if cohort == LONER:
            P[r, :] = cfg.p_loner
            continue
        P[r, :S] = cfg.p_shared
        if cohort == MIXED:
            P[r, S:S + k * C] = cfg.mixed_rate
        else:
            P[r, S:S + k * C] = cfg.p_cross
            P[r, S + g * C:S + (g + 1) * C] = cfg.p_core
    return P


def expected_density(cfg: SynthConfig) -> tuple[float, float]:
    """Mean and standard deviation of the cell density (coverage pass off)."""
    P = cell_probabilities(cfg)
    total = P.size
    return float(P.sum() / total), float(np.sqrt((P * (1 - P)).sum()) / total)


def generate(cfg: SynthConfig) -> SynthData:
    """Draw a dataset. Same config (seed included) gives identical output."""
    rng = np.random.default_rng(cfg.seed)
    plan = _cohort_plan(cfg)
    n, F = len(plan), cfg.catalogue_size
    P = cell_probabilities(cfg)
    order = rng.permutation(n)
    draws = rng.random((n, F)) < P[order]

    if cfg.ensure_coverage:
        eligible = [r for r in range(n) if plan[order[r]][0] != LONER] or list(range(n))
        for f in np.flatnonzero(~draws.any(axis=0)).tolist():
            draws[eligible[int(rng.integers(len(eligible)))], f] = True

    labels = cfg.labels
    width = max(4, len(str(n)))
    fwidth = max(4, len(str(F)))
    entity_ids = [f"s{r:0{width}d}" for r in range(n)]
    course_ids = [f"c{f:0{fwidth}d}" for f in range(F)]
    records = [(entity_ids[r], course_ids[f]) for r in range(n) for f in np.flatnonzero(draws[r]).tolist()]
    matrix = AffiliationMatrix.from_records(records)

    # entities with no course at all never appear in the declaration stream
    present = set(matrix.entity_ids)
    keep = [r for r in range(n) if entity_ids[r] in present]

    meta, cohorts, truth_labels, loners = [], [], [], []
    for r in keep:
        cohort, g = plan[order[r]]
        grade = float(np.clip(rng.normal(cfg.grade_means[g], cfg.grade_sd), cfg.grade_min, cfg.grade_max))
        meta.append(EntityMetadata(entity_ids[r], grade, labels[g]))
        cohorts.append(cohort)
        if cohort == GROUP:
            truth_labels.append(g)
        elif cohort == MIXED:
            truth_labels.append(cfg.k_groups)
        else:
            loners.append(len(truth_labels))
            truth_labels.append(cfg.k_groups + 1 + len(loners))
    # matrix entity order is first-appearance order, which follows r
    index = {e: i for i, e in enumerate(matrix.entity_ids)}
    assert [index[entity_ids[r]] for r in keep] == list(range(len(keep)))
    truth = Partition.from_labels(truth_labels, loners)
    return SynthData(matrix, meta, truth, cohorts)
