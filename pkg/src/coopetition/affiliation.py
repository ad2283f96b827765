"""Binary affiliation data (entities x features) and per-entity metadata."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import DataError, EmptyDatasetError, GradeRangeError, LabelSetError, ParseError

AFFILIATION_HEADER = ("entity_id", "feature_id")
METADATA_HEADER = ("entity_id", "grade", "label")


@dataclass(frozen=True)
class IngestDiagnostics:
    declarations: int
    duplicates: int

    def to_dict(self) -> dict:
        return {"declarations": self.declarations, "duplicates": self.duplicates}


@dataclass(frozen=True, eq=False)
class AffiliationMatrix:
    """Sparse binary incidence matrix.

    ``rows``/``cols`` hold the distinct cells in first-declaration order, which
    is also the order :meth:`to_csv` writes them back out. Entity and feature
    indices are first-appearance indices.
    """

    entity_ids: tuple[str, ...]
    feature_ids: tuple[str, ...]
    rows: np.ndarray
    cols: np.ndarray
    diagnostics: IngestDiagnostics = field(default=IngestDiagnostics(0, 0))

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise ValueError("rows and cols must be 1-d arrays of equal length")
        if len(set(self.entity_ids)) != len(self.entity_ids):
            raise ValueError("duplicate entity ids")
        if len(set(self.feature_ids)) != len(self.feature_ids):
            raise ValueError("duplicate feature ids")
        if rows.size:
            if rows.min() < 0 or rows.max() >= len(self.entity_ids):
                raise ValueError("entity index out of range")
            if cols.min() < 0 or cols.max() >= len(self.feature_ids):
                raise ValueError("feature index out of range")
            flat = rows * len(self.feature_ids) + cols
            if np.unique(flat).size != flat.size:
                raise ValueError("duplicate cells")
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @property
    def n_entities(self) -> int:
        return len(self.entity_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_ids)

    @property
    def n_cells(self) -> int:
        return int(self.rows.size)

    @property
    def cells(self) -> frozenset[tuple[int, int]]:
        return frozenset(zip(self.rows.tolist(), self.cols.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_entities, self.n_features), dtype=np.uint8)
        out[self.rows, self.cols] = 1
        return out

    def feature_counts(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.n_features).astype(np.int64)

    def entity_counts(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.n_entities).astype(np.int64)

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, str]]) -> "AffiliationMatrix":
        entity_index: dict[str, int] = {}
        feature_index: dict[str, int] = {}
        seen: set[tuple[int, int]] = set()
        rows: list[int] = []
        cols: list[int] = []
        declarations = 0
        for entity, feature in records:
            declarations += 1
            i = entity_index.setdefault(entity, len(entity_index))
            j = feature_index.setdefault(feature, len(feature_index))
            if (i, j) in seen:
                continue
            seen.add((i, j))
            rows.append(i)
            cols.append(j)
        return cls(
            entity_ids=tuple(entity_index),
            feature_ids=tuple(feature_index),
            rows=np.asarray(rows, dtype=np.int64),
            cols=np.asarray(cols, dtype=np.int64),
            diagnostics=IngestDiagnostics(declarations, declarations - len(rows)),
        )

    def to_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(AFFILIATION_HEADER)
        for i, j in zip(self.rows.tolist(), self.cols.tolist()):
            writer.writerow((self.entity_ids[i], self.feature_ids[j]))

    def permuted(self, entity_order: Sequence[int] | None = None,
                 feature_order: Sequence[int] | None = None) -> "AffiliationMatrix":
        """Reindex rows/columns; ``entity_order[k]`` is the old index placed at k."""
        ent = np.arange(self.n_entities) if entity_order is None else np.asarray(entity_order)
        feat = np.arange(self.n_features) if feature_order is None else np.asarray(feature_order)
        inv_e = np.empty_like(ent)
        inv_e[ent] = np.arange(ent.size)
        inv_f = np.empty_like(feat)
        inv_f[feat] = np.arange(feat.size)
        return AffiliationMatrix(
            entity_ids=tuple(self.entity_ids[k] for k in ent),
            feature_ids=tuple(self.feature_ids[k] for k in feat),
            rows=inv_e[self.rows],
            cols=inv_f[self.cols],
            diagnostics=self.diagnostics,
        )


def _check_header(header: list[str] | None, expected: tuple[str, ...]) -> None:
    if header is None:
        raise EmptyDatasetError("empty input: no header and no records")
    if tuple(h.strip() for h in header) != expected:
        raise ParseError(f"expected header {','.join(expected)!r}, got {','.join(header)!r}", line=1)


def load_affiliation(source: TextIO | str) -> AffiliationMatrix:
    """Read a declaration CSV (``entity_id,feature_id``) into a binary matrix.

    Repeated declarations of the same pair collapse to one cell; how many were
    dropped is kept in ``matrix.diagnostics``.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream)
    _check_header(next(reader, None), AFFILIATION_HEADER)

    def records():
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line=line)
            entity, feature = row[0].strip(), row[1].strip()
            if not entity or not feature:
                raise ParseError("empty identifier", line=line)
            yield entity, feature

    matrix = AffiliationMatrix.from_records(records())
    if matrix.diagnostics.declarations == 0:
        raise EmptyDatasetError("affiliation input has a header but no records")
    return matrix


@dataclass(frozen=True)
class EntityMetadata:
    entity_id: str
    grade: float | None = None
    label: str | None = None


def load_metadata(source: TextIO | str, grade_min: float = 0.0, grade_max: float = 5.0,
                  labels: Iterable[str] | None = None) -> list[EntityMetadata]:
    """Read ``entity_id,grade,label`` rows. Empty fields stay ``None``.

    ``labels``, when given, is the declared label set; anything else raises
    :class:`LabelSetError`. Grades outside ``[grade_min, grade_max]`` raise
    :class:`GradeRangeError`.
    """
    allowed = None if labels is None else frozenset(labels)
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.reader(stream)
    _check_header(next(reader, None), METADATA_HEADER)
    out: list[EntityMetadata] = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line=line)
        entity, grade_s, label = (x.strip() for x in row)
        if not entity:
            raise ParseError("empty entity id", line=line)
        if entity in seen:
            raise ParseError(f"duplicate entity {entity!r}", line=line)
        seen.add(entity)
        grade = None
        if grade_s:
            try:
                grade = float(grade_s)
            except ValueError:
                raise ParseError(f"grade {grade_s!r} is not a number", line=line) from None
            if not math.isfinite(grade) or not grade_min <= grade <= grade_max:
                raise GradeRangeError(
                    f"line {line}: grade {grade} outside [{grade_min}, {grade_max}]")
        if label and allowed is not None and label not in allowed:
            raise LabelSetError(f"line {line}: label {label!r} not in {sorted(allowed)}")
        out.append(EntityMetadata(entity, grade, label or None))
    return out


def write_metadata(meta: Iterable[EntityMetadata], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(METADATA_HEADER)
    for m in meta:
        writer.writerow((m.entity_id, "" if m.grade is None else repr(m.grade), m.label or ""))


def align_metadata(matrix: AffiliationMatrix, meta: Iterable[EntityMetadata]) -> list[EntityMetadata]:
    """Order metadata by entity index; entities without a record get empty metadata."""
    by_id = {m.entity_id: m for m in meta}
    known = set(matrix.entity_ids)
    unknown = sorted(set(by_id) - known)
    if unknown:
        raise DataError(f"metadata references unknown entities: {unknown[:5]}")
    return [by_id.get(e, EntityMetadata(e)) for e in matrix.entity_ids]


@dataclass(frozen=True)
class MatrixStats:
    n_entities: int
    n_features: int
    n_cells: int
    max_feature_count: int
    features_attended_once: int
    histogram: dict[int, int]

    @property
    def density(self) -> float:
        return float(self.density_exact)

    @property
    def density_exact(self) -> Fraction:
        total = self.n_entities * self.n_features
        return Fraction(0) if total == 0 else Fraction(self.n_cells, total)

    def features_above_threshold(self, t: int) -> int:
        """Features attended strictly more than ``t`` times."""
        return sum(v for k, v in self.histogram.items() if k > t)

    def to_dict(self) -> dict:
        return {
            "n_entities": self.n_entities,
            "n_features": self.n_features,
            "n_cells": self.n_cells,
            "density": self.density,
            "max_feature_count": self.max_feature_count,
            "features_attended_once": self.features_attended_once,
            "features_attended_more_than_20": self.features_above_threshold(20),
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def matrix_stats(m: AffiliationMatrix) -> MatrixStats:
    counts = m.feature_counts()
    hist = Counter(counts.tolist())
    return MatrixStats(
        n_entities=m.n_entities,
        n_features=m.n_features,
        n_cells=m.n_cells,
        max_feature_count=int(counts.max()) if counts.size else 0,
        features_attended_once=int(hist.get(1, 0)),
        histogram=dict(sorted(hist.items())),
    )
