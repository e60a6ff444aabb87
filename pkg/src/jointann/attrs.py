"""Attribute and filter model: match predicates, filter/attribute distances,
capped distances, and the lexicographic comparators used during build and search.

Four attribute families are supported: categorical labels, real scalars,
fixed-width bitsets (set membership), and boolean variable assignments.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import FilterFamilyMismatch, UnsatisfiableFilter
from .metric import sq_l2

MAX_BOOL_VARS = 30


class Family(IntEnum):
    LABEL = 0
    SCALAR = 1
    BITSET = 2
    BOOL_ASSIGN = 3


@dataclass(frozen=True)
class Attribute:
    """Per-point metadata. `ivalue` carries label ids and bit patterns,
    `fvalue` carries scalar attributes; exactly one is meaningful per family."""

    family: Family
    ivalue: int = 0
    fvalue: float = 0.0
    width: int = 0

    @staticmethod
    def label(label_id: int) -> "Attribute":
        if label_id < 0:
            raise ValueError("label id must be non-negative")
        return Attribute(Family.LABEL, ivalue=label_id)

    @staticmethod
    def scalar(value: float) -> "Attribute":
        return Attribute(Family.SCALAR, fvalue=float(value))

    @staticmethod
    def bitset(bits: int, width: int) -> "Attribute":
        _check_bits(bits, width)
        return Attribute(Family.BITSET, ivalue=bits, width=width)

    @staticmethod
    def bool_assign(bits: int, width: int) -> "Attribute":
        if width > MAX_BOOL_VARS:
            raise ValueError(f"boolean assignments support at most {MAX_BOOL_VARS} variables")
        _check_bits(bits, width)
        return Attribute(Family.BOOL_ASSIGN, ivalue=bits, width=width)


def _check_bits(bits: int, width: int) -> None:
    if width <= 0:
        raise ValueError("bit width must be positive")
    if bits < 0 or bits >> width:
        raise ValueError(f"bit pattern {bits:#x} does not fit in {width} bits")


class Filter:
    """Base class for per-query constraints. Each filter belongs to one
    attribute family and evaluates a binary match predicate plus a continuous
    filter distance that is zero exactly on matching attributes."""

    family: Family

    def matches(self, a: Attribute) -> bool:
        raise NotImplementedError

    def distance(self, a: Attribute) -> float:
        raise NotImplementedError

    def _check_family(self, a: Attribute) -> None:
        if a.family != self.family:
            raise FilterFamilyMismatch(
                f"attribute family {a.family.name} does not match filter family {self.family.name}"
            )


@dataclass(frozen=True)
class EqualityFilter(Filter):
    target: int
    family: Family = field(default=Family.LABEL, init=False)

    def __post_init__(self):
        if self.target < 0:
            raise ValueError("target label must be non-negative")

    def matches(self, a: Attribute) -> bool:
        self._check_family(a)
        return a.ivalue == self.target

    def distance(self, a: Attribute) -> float:
        self._check_family(a)
        return 0.0 if a.ivalue == self.target else 1.0


@dataclass(frozen=True)
class RangeFilter(Filter):
    lo: float
    hi: float
    family: Family = field(default=Family.SCALAR, init=False)

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("range filter requires lo <= hi")

    def matches(self, a: Attribute) -> bool:
        self._check_family(a)
        return self.lo <= a.fvalue <= self.hi

    def distance(self, a: Attribute) -> float:
        self._check_family(a)
        if a.fvalue < self.lo:
            return self.lo - a.fvalue
        if a.fvalue > self.hi:
            return a.fvalue - self.hi
        return 0.0


@dataclass(frozen=True)
class SubsetFilter(Filter):
    required: int
    width: int
    family: Family = field(default=Family.BITSET, init=False)

    def __post_init__(self):
        _check_bits(self.required, self.width)

    def matches(self, a: Attribute) -> bool:
        self._check_family(a)
        return (self.required & a.ivalue) == self.required

    def distance(self, a: Attribute) -> float:
        self._check_family(a)
        # |f \ a|: required bits the attribute is missing
        return float((self.required & ~a.ivalue).bit_count())


class BoolPredicateFilter(Filter):
    """Arbitrary predicate over `width` boolean variables, stored as a dense
    truth table of 2^width entries. The filter distance is the minimum number
    of bit flips needed to reach a satisfying assignment; a full distance
    table is computed lazily by breadth-first search over the hypercube and
    cached for reuse across calls."""

    family = Family.BOOL_ASSIGN

    def __init__(self, table: np.ndarray, width: int):
        if width > MAX_BOOL_VARS:
            raise ValueError(f"boolean predicates support at most {MAX_BOOL_VARS} variables")
        table = np.asarray(table, dtype=bool)
        if table.shape != (1 << width,):
            raise ValueError(f"truth table must have exactly 2^{width} entries")
        if not table.any():
            raise UnsatisfiableFilter("boolean predicate has no satisfying assignment")
        self.table = table
        self.table.setflags(write=False)
        self.width = width
        self._dist_table: Optional[np.ndarray] = None

    @classmethod
    def from_function(cls, fn: Callable[[int], bool], width: int) -> "BoolPredicateFilter":
        table = np.fromiter((bool(fn(a)) for a in range(1 << width)), dtype=bool, count=1 << width)
        return cls(table, width)

    def matches(self, a: Attribute) -> bool:
        self._check_family(a)
        return bool(self.table[a.ivalue])

    def distance_table(self) -> np.ndarray:
        if self._dist_table is None:
            self._dist_table = _hamming_distance_table(self.table, self.width)
        return self._dist_table

    def distance(self, a: Attribute) -> float:
        self._check_family(a)
        return float(self.distance_table()[a.ivalue])

    def __eq__(self, other):
        return (
            isinstance(other, BoolPredicateFilter)
            and self.width == other.width
            and np.array_equal(self.table, other.table)
        )

    def __repr__(self):
        return f"BoolPredicateFilter(width={self.width}, pass_rate={self.table.mean():.4g})"


def _hamming_distance_table(table: np.ndarray, width: int) -> np.ndarray:
    """Min Hamming distance from every assignment to the satisfying set,
    via multi-source BFS over the hypercube."""
    size = 1 << width
    dist = np.full(size, -1, dtype=np.int32)
    frontier = np.nonzero(table)[0].astype(np.int64)
    dist[frontier] = 0
    radius = 0
    while frontier.size and (dist < 0).any():
        radius += 1
        nbrs = (frontier[:, None] ^ (np.int64(1) << np.arange(width, dtype=np.int64))).ravel()
        fresh = nbrs[dist[nbrs] < 0]
        if fresh.size == 0:
            break
        dist[fresh] = radius
        frontier = np.unique(fresh)
    dist.setflags(write=False)
    return dist


@dataclass(frozen=True)
class AttrDistanceConfig:
    """Attribute-distance configuration. When `label_weights` is set (bitset
    family only) the distance over shared set bits becomes
    cap - sum of per-bit weights, prioritizing rarer labels."""

    family: Family
    label_weights: Optional[Mapping[int, float]] = None
    weight_cap_c: Optional[float] = None

    def __post_init__(self):
        if self.label_weights is not None:
            if self.family != Family.BITSET:
                raise ValueError("label_weights is only supported for the bitset family")
            if any(w <= 0 for w in self.label_weights.values()):
                raise ValueError("label weights must be positive")
            cap = self.cap()
            total = sum(self.label_weights.values())
            if cap < total:
                raise ValueError(
                    f"weight_cap_c={cap} is below the maximum achievable overlap weight {total}"
                )

    def cap(self) -> float:
        if self.weight_cap_c is not None:
            return self.weight_cap_c
        assert self.label_weights is not None
        return sum(self.label_weights.values())

    @staticmethod
    def from_frequencies(freqs: Mapping[int, float], cap: Optional[float] = None) -> "AttrDistanceConfig":
        """Weights each label i by ln(1/p_i) given its empirical frequency p_i."""
        weights = {i: math.log(1.0 / p) for i, p in freqs.items() if 0.0 < p < 1.0}
        return AttrDistanceConfig(Family.BITSET, label_weights=weights, weight_cap_c=cap)

    def weight_array(self, width: int) -> np.ndarray:
        out = np.zeros(width, dtype=np.float64)
        if self.label_weights:
            for i, w in self.label_weights.items():
                out[i] = w
        return out


def plain_config(family: Family) -> AttrDistanceConfig:
    return AttrDistanceConfig(family)


def _check_same_family(a1: Attribute, a2: Attribute) -> None:
    if a1.family != a2.family:
        raise FilterFamilyMismatch(
            f"attribute families differ: {a1.family.name} vs {a2.family.name}"
        )


def matches(a: Attribute, f: Filter) -> bool:
    """Binary match predicate between an attribute and a filter."""
    return f.matches(a)


def filter_distance(a: Attribute, f: Filter) -> float:
    """Continuous distance from an attribute to filter satisfaction;
    zero exactly when the filter matches."""
    return f.distance(a)


def attribute_distance(a1: Attribute, a2: Attribute, cfg: Optional[AttrDistanceConfig] = None) -> float:
    """Query-independent dissimilarity between two attributes of one family."""
    _check_same_family(a1, a2)
    if cfg is not None and cfg.family != a1.family:
        raise FilterFamilyMismatch(
            f"config family {cfg.family.name} does not match attribute family {a1.family.name}"
        )
    fam = a1.family
    if fam == Family.LABEL:
        return 0.0 if a1.ivalue == a2.ivalue else 1.0
    if fam == Family.SCALAR:
        return abs(a1.fvalue - a2.fvalue)
    if fam == Family.BITSET and cfg is not None and cfg.label_weights is not None:
        shared = a1.ivalue & a2.ivalue
        total = 0.0
        for i, w in cfg.label_weights.items():
            if shared >> i & 1:
                total += w
        return cfg.cap() - total
    return float((a1.ivalue ^ a2.ivalue).bit_count())


def capped_attribute_distance(
    a1: Attribute, a2: Attribute, t: float, cfg: Optional[AttrDistanceConfig] = None
) -> float:
    """max(attribute_distance - t, 0): attributes within t are equivalent."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    return max(attribute_distance(a1, a2, cfg) - t, 0.0)


def weighted_build_distance(
    u: "Point", v: "Point", w: float, cfg: Optional[AttrDistanceConfig] = None
) -> float:
    """Scalar build comparator: w * attribute distance + vector distance."""
    if w < 0:
        raise ValueError("weight must be non-negative")
    return w * attribute_distance(u.attr, v.attr, cfg) + sq_l2(u.vector, v.vector)


class AttributeSet:
    """Column-oriented attribute storage for a whole dataset: integer payloads
    (labels, bit patterns) in `ivalues`, scalars in `fvalues`."""

    def __init__(self, family: Family, n: int, width: int = 0):
        self.family = family
        self.width = width
        self.ivalues = np.zeros(n, dtype=np.int64)
        self.fvalues = np.zeros(n, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.ivalues)

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "AttributeSet":
        s = cls(Family.LABEL, len(labels))
        s.ivalues[:] = labels
        return s

    @classmethod
    def from_scalars(cls, values: np.ndarray) -> "AttributeSet":
        s = cls(Family.SCALAR, len(values))
        s.fvalues[:] = values
        return s

    @classmethod
    def from_bitsets(cls, bits: np.ndarray, width: int) -> "AttributeSet":
        s = cls(Family.BITSET, len(bits), width)
        s.ivalues[:] = bits
        return s

    @classmethod
    def from_bool_assignments(cls, bits: np.ndarray, width: int) -> "AttributeSet":
        if width > MAX_BOOL_VARS:
            raise ValueError(f"boolean assignments support at most {MAX_BOOL_VARS} variables")
        s = cls(Family.BOOL_ASSIGN, len(bits), width)
        s.ivalues[:] = bits
        return s

    def get(self, i: int) -> Attribute:
        return Attribute(self.family, int(self.ivalues[i]), float(self.fvalues[i]), self.width)

    def __eq__(self, other):
        return (
            isinstance(other, AttributeSet)
            and self.family == other.family
            and self.width == other.width
            and np.array_equal(self.ivalues, other.ivalues)
            and np.array_equal(self.fvalues, other.fvalues)
        )


@dataclass(frozen=True)
class Point:
    """A point id with its vector and attribute, as used by the comparators."""

    id: int
    vector: np.ndarray
    attr: Attribute


@functools.total_ordering
@dataclass(frozen=True)
class UnifiedDistance:
    """Ordered (primary, secondary) distance pair compared lexicographically,
    with ultimate ties broken by candidate id."""

    primary: float
    secondary: float
    candidate_id: int = 0

    def _key(self):
        return (self.primary, self.secondary, self.candidate_id)

    def __eq__(self, other):
        return self._key() == other._key()

    def __lt__(self, other):
        return self._key() < other._key()


def build_key(p: Point, u: Point, t: float, cfg: Optional[AttrDistanceConfig] = None) -> UnifiedDistance:
    return UnifiedDistance(
        capped_attribute_distance(p.attr, u.attr, t, cfg), sq_l2(p.vector, u.vector), u.id
    )


def query_key(qvec: np.ndarray, qfilter: Filter, u: Point) -> UnifiedDistance:
    return UnifiedDistance(qfilter.distance(u.attr), sq_l2(qvec, u.vector), u.id)


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def compare_build(p: Point, u: Point, v: Point, t: float, cfg: Optional[AttrDistanceConfig] = None) -> int:
    """-1 if u precedes v around base point p under the capped-attribute
    comparator, +1 if v precedes u. Ties fall through to vector distance,
    then candidate id."""
    ku, kv = build_key(p, u, t, cfg), build_key(p, v, t, cfg)
    return -1 if ku < kv else _sign(ku._key() > kv._key())


def compare_query(qvec: np.ndarray, qfilter: Filter, u: Point, v: Point) -> int:
    """Query-time analogue of compare_build with filter distance primary."""
    ku, kv = query_key(qvec, qfilter, u), query_key(qvec, qfilter, v)
    return -1 if ku < kv else _sign(ku._key() > kv._key())
