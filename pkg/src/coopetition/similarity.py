"""Hamming distances, reciprocal similarity, empirical CDF and quantile sparsification."""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, TextIO

import numpy as np

from . import _kernels
from .affiliation import AffiliationMatrix
from .errors import ConfigError, DimensionError, EmptySampleError, WeightError

PLAIN = "plain"
WEIGHTED = "weighted"
CAP_TO_ONE = "cap_to_one"
EXCLUDE_PAIR = "exclude_pair"
ZERO_POLICIES = (CAP_TO_ONE, EXCLUDE_PAIR)


class EmptySparsificationWarning(UserWarning):
    """Raised (as a warning) when a cutoff leaves no pairs."""


def _binary_vector(a) -> np.ndarray:
    v = np.asarray(a)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-d vector, got shape {v.shape}")
    return v != 0


def hamming(a, b) -> int:
    """Number of positions at which two binary vectors differ."""
    va, vb = _binary_vector(a), _binary_vector(b)
    if va.shape != vb.shape:
        raise DimensionError(f"length mismatch: {va.size} vs {vb.size}")
    return int(np.count_nonzero(va != vb))


def weighted_hamming(a, b, w) -> float:
    """Sum of ``w[j]`` over positions j where a and b differ."""
    va, vb = _binary_vector(a), _binary_vector(b)
    wv = np.asarray(w, dtype=np.float64)
    if va.shape != vb.shape or wv.shape != va.shape:
        raise DimensionError(f"length mismatch: {va.size}, {vb.size}, weights {wv.size}")
    if (wv < 0).any() or not np.isfinite(wv).all():
        raise WeightError("weights must be finite and non-negative")
    total = 0.0
    for j in np.flatnonzero(va != vb).tolist():
        total += float(wv[j])
    return total


def condensed_index(n: int, i: int, j: int) -> int:
    if i == j:
        raise IndexError("diagonal is not stored")
    if i > j:
        i, j = j, i
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major (i, j) arrays for all i < j."""
    i, j = np.triu_indices(n, 1)
    return i.astype(np.int64), j.astype(np.int64)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Pairwise distances, upper triangle only, row-major (scipy ``pdist`` order)."""

    n: int
    values: np.ndarray
    mode: str = PLAIN
    entity_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.values.shape != (self.n * (self.n - 1) // 2,):
            raise DimensionError("condensed length does not match n")
        self.values.setflags(write=False)

    def __call__(self, i: int, j: int):
        if i == j:
            return 0
        return self.values[condensed_index(self.n, i, j)].item()

    def to_square(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=self.values.dtype)
        i, j = pair_indices(self.n)
        out[i, j] = self.values
        out[j, i] = self.values
        return out

    def ids(self) -> tuple[str, ...]:
        return self.entity_ids if self.entity_ids is not None else tuple(map(str, range(self.n)))

    def to_dict(self) -> dict:
        vals = self.values.tolist()
        return {"mode": self.mode, "entity_ids": list(self.ids()), "distances": vals}

    @classmethod
    def from_dict(cls, d: dict) -> "DistanceMatrix":
        ids = tuple(d["entity_ids"])
        dtype = np.int64 if d["mode"] == PLAIN else np.float64
        return cls(len(ids), np.asarray(d["distances"], dtype=dtype).reshape(-1), d["mode"], ids)


def _row_blocks(n: int, workers: int) -> list[tuple[int, int]]:
    # balance by pair count, not row count: row i holds n-i-1 pairs
    if workers <= 1 or n < 3:
        return [(0, n)]
    total = n * (n - 1) // 2
    bounds, acc, start = [], 0, 0
    target = total / workers
    for i in range(n):
        acc += n - i - 1
        if acc >= target * (len(bounds) + 1) and len(bounds) < workers - 1:
            bounds.append((start, i + 1))
            start = i + 1
    bounds.append((start, n))
    return [b for b in bounds if b[0] < b[1]]


def pairwise_distances(m: AffiliationMatrix, mode: str = PLAIN,
                       weights: Sequence[float] | None = None, workers: int = 1,
                       backend: str | None = None) -> DistanceMatrix:
    """All-pairs Hamming (or weighted Hamming) distances between entity rows.

    In weighted mode the default weight of a feature is its attendance count.
    Row blocks may be spread over ``workers`` threads; every cell is computed
    independently so the result does not depend on the split.
    """
    kern = _kernels.get(backend)
    X = np.ascontiguousarray(m.to_dense(), dtype=np.uint8)
    n = m.n_entities
    blocks = _row_blocks(n, workers)
    if mode == PLAIN:
        out = np.zeros(n * (n - 1) // 2, dtype=np.int64)
        jobs = [(kern.hamming_block, (X, a, b, out)) for a, b in blocks]
    elif mode == WEIGHTED:
        w = m.feature_counts().astype(np.float64) if weights is None else np.asarray(weights, dtype=np.float64)
        if w.shape != (m.n_features,):
            raise DimensionError(f"expected {m.n_features} weights, got {w.size}")
        if (w < 0).any() or not np.isfinite(w).all():
            raise WeightError("weights must be finite and non-negative")
        w = np.ascontiguousarray(w)
        out = np.zeros(n * (n - 1) // 2, dtype=np.float64)
        jobs = [(kern.weighted_hamming_block, (X, w, a, b, out)) for a, b in blocks]
    else:
        raise ConfigError(f"unknown distance mode {mode!r}")
    if len(jobs) == 1:
        fn, args = jobs[0]
        fn(*args)
    else:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            for fut in [pool.submit(fn, *args) for fn, args in jobs]:
                fut.result()
    return DistanceMatrix(n, out, mode, m.entity_ids)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Similarity values over a subset of pairs i < j, stored as parallel arrays."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    state: str = "dense"
    cutoff: float | None = None
    sample_size: int | None = None
    entity_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        for a in (self.rows, self.cols, self.values):
            a.setflags(write=False)

    @property
    def n_pairs(self) -> int:
        return int(self.values.size)

    @property
    def retained_fraction(self) -> float | None:
        if self.state != "thresholded" or not self.sample_size:
            return None
        return self.n_pairs / self.sample_size

    def ids(self) -> tuple[str, ...]:
        return self.entity_ids if self.entity_ids is not None else tuple(map(str, range(self.n)))

    def to_csv(self, stream: TextIO) -> None:
        """``entity_a,entity_b,similarity`` with 10 significant digits."""
        ids = self.ids()
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("entity_a", "entity_b", "similarity"))
        for i, j, v in zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()):
            writer.writerow((ids[i], ids[j], format(v, ".10g")))


def reciprocal_similarity(d: DistanceMatrix, zero_policy: str = CAP_TO_ONE) -> SimilarityMatrix:
    """Dense similarity 1/d; zero distances are capped to 1 or dropped per ``zero_policy``."""
    if zero_policy not in ZERO_POLICIES:
        raise ConfigError(f"zero_policy must be one of {ZERO_POLICIES}, got {zero_policy!r}")
    i, j = pair_indices(d.n)
    dist = d.values.astype(np.float64)
    zero = dist == 0.0
    if zero_policy == EXCLUDE_PAIR:
        keep = ~zero
        i, j, dist = i[keep], j[keep], dist[keep]
        vals = 1.0 / dist
    else:
        with np.errstate(divide="ignore"):
            vals = np.where(zero, 1.0, 1.0 / np.where(zero, 1.0, dist))
    return SimilarityMatrix(d.n, i, j, vals, "dense", None, None, d.entity_ids)


@dataclass(frozen=True, eq=False)
class EmpiricalCDF:
    sample: np.ndarray  # sorted ascending

    def __post_init__(self):
        self.sample.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.sample.size)

    def __call__(self, x):
        """Fraction of the sample <= x (vectorised over x)."""
        r = np.searchsorted(self.sample, x, side="right") / self.sample.size
        return float(r) if np.ndim(r) == 0 else r


def empirical_cdf(s: SimilarityMatrix | np.ndarray) -> EmpiricalCDF:
    vals = s.values if isinstance(s, SimilarityMatrix) else np.asarray(s, dtype=np.float64)
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise EmptySampleError("no finite similarity values")
    return EmpiricalCDF(np.sort(vals, kind="stable"))


def kept_count(q: float, n: int) -> int:
    """ceil((1 - q) * n), with q read as the decimal it prints as."""
    frac = Fraction(str(q)) if isinstance(q, float) else Fraction(q)
    return math.ceil((1 - frac) * n)


def quantile_cutoff(cdf: EmpiricalCDF, q: float) -> float:
    """Order-statistic cutoff so that values ``> cutoff`` are the top ceil((1-q)N).

    The cutoff is the (k+1)-th largest sample value for k = ceil((1-q)N); when
    k covers the whole sample it is the float just below the minimum. Ties at
    the cutoff are dropped, so fewer than k values may survive.
    """
    if not 0 <= q < 1:
        raise ConfigError(f"quantile must lie in [0, 1), got {q}")
    n = cdf.size
    if n == 0:
        raise EmptySampleError("empty sample")
    k = kept_count(q, n)
    if k >= n:
        return float(np.nextafter(cdf.sample[0], -np.inf))
    return float(cdf.sample[n - 1 - k])


def sparsify(s: SimilarityMatrix, cutoff: float) -> SimilarityMatrix:
    """Keep only pairs whose similarity is strictly greater than ``cutoff``."""
    keep = s.values > cutoff
    if not keep.any():
        warnings.warn(f"cutoff {cutoff} removes every pair", EmptySparsificationWarning, stacklevel=2)
    sample = s.sample_size if s.state == "thresholded" else s.n_pairs
    return SimilarityMatrix(s.n, s.rows[keep], s.cols[keep], s.values[keep],
                            "thresholded", float(cutoff), sample, s.entity_ids)
