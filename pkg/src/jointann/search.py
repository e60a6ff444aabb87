"""Greedy beam search wrappers and filtered top-k queries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import kernels
from .attrs import (
    BoolPredicateFilter,
    EqualityFilter,
    Family,
    Filter,
    RangeFilter,
    SubsetFilter,
)
from .errors import DimensionMismatch, EmptyIndex, FilterFamilyMismatch
from .graph import JointGraph
from .metric import DcCounter


@dataclass(frozen=True)
class SearchParams:
    k: int = 10
    l_search: int = 100

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.l_search < self.k:
            raise ValueError("beam size must be at least k")


@dataclass
class SearchResult:
    ids: np.ndarray          # <= k ids, best first under the query comparator
    matches: np.ndarray      # per-id filter match flag
    visited_count: int
    dc_count: int


@dataclass(frozen=True)
class VectorComparator:
    """Pure vector distance; attribute-blind."""


@dataclass(frozen=True)
class ThresholdComparator:
    t: float


@dataclass(frozen=True)
class WeightComparator:
    w: float


Comparator = Union[VectorComparator, ThresholdComparator, WeightComparator, Filter]


def encode_filter(f: Filter, graph_family: Family):
    if f.family != graph_family:
        raise FilterFamilyMismatch(
            f"filter family {f.family.name} does not match index family {graph_family.name}"
        )
    if isinstance(f, EqualityFilter):
        return f.target, 0.0, 0.0, kernels._EMPTY_TABLE
    if isinstance(f, RangeFilter):
        return 0, f.lo, f.hi, kernels._EMPTY_TABLE
    if isinstance(f, SubsetFilter):
        return f.required, 0.0, 0.0, kernels._EMPTY_TABLE
    if isinstance(f, BoolPredicateFilter):
        return 0, 0.0, 0.0, f.distance_table()
    raise TypeError(f"unsupported filter type {type(f).__name__}")


def _kernel_args(g: JointGraph, comparator: Comparator):
    """Map a comparator to (mode, t_or_w, q_ai, q_af, filter args)."""
    f_i, f_lo, f_hi, f_table = 0, 0.0, 0.0, kernels._EMPTY_TABLE
    if isinstance(comparator, VectorComparator):
        mode, t_or_w = kernels.MODE_VECTOR, 0.0
    elif isinstance(comparator, ThresholdComparator):
        mode, t_or_w = kernels.MODE_THRESHOLD, comparator.t
    elif isinstance(comparator, WeightComparator):
        mode, t_or_w = kernels.MODE_WEIGHT, comparator.w
    elif isinstance(comparator, Filter):
        mode, t_or_w = kernels.MODE_FILTER, 0.0
        f_i, f_lo, f_hi, f_table = encode_filter(comparator, g.family)
    else:
        raise TypeError(f"unsupported comparator {type(comparator).__name__}")
    return mode, t_or_w, f_i, f_lo, f_hi, f_table


def greedy_search(
    g: JointGraph,
    x: np.ndarray,
    comparator: Comparator,
    l_search: int,
    k: Optional[int] = None,
    q_attr_i: int = 0,
    q_attr_f: float = 0.0,
    counter: Optional[DcCounter] = None,
):
    """Beam search over the graph under any comparator.

    Returns (top-k ids, visited ids in visit order, visited primaries,
    visited secondaries, dc count). The top-k ranks the full visited set.
    """
    if g.n == 0 or g.entry < 0:
        raise EmptyIndex("search requested on an empty index")
    x = np.asarray(x, dtype=np.float32)
    if x.shape != (g.dim,):
        raise DimensionMismatch(f"expected dimension {g.dim}, got {x.shape}")
    mode, t_or_w, f_i, f_lo, f_hi, f_table = _kernel_args(g, comparator)
    vis, vp, vs, dc = kernels.greedy_search(
        g.vecs, g.attr_i, g.attr_f, g.adj, g.deg, g.entry, g.n,
        x, q_attr_i, q_attr_f,
        mode, int(g.family), float(t_or_w), f_i, f_lo, f_hi, f_table,
        g._bw, g._cap_c, g._use_w, int(l_search),
    )
    if counter is not None:
        counter.add(dc)
    order = np.lexsort((vis, vs, vp))
    top = vis[order[: k if k is not None else len(order)]]
    return top, vis, vp[order], vs[order], dc


def query(
    g: JointGraph,
    qvec: np.ndarray,
    qfilter: Filter,
    params: SearchParams,
    counter: Optional[DcCounter] = None,
) -> SearchResult:
    """Filtered top-k search guided by filter distance, ties by vector distance.

    Returned ids are the comparator-best visited vertices; when fewer than k
    matching points were visited the tail may contain non-matching points,
    flagged in `matches` for strict recall accounting.
    """
    if g.n == 0 or g.entry < 0:
        raise EmptyIndex("query requested on an empty index")
    top, vis, vp_sorted, _, dc = greedy_search(
        g, qvec, qfilter, params.l_search, k=params.k, counter=counter
    )
    matches = vp_sorted[: len(top)] == 0.0
    return SearchResult(ids=top, matches=matches, visited_count=len(vis), dc_count=dc)
