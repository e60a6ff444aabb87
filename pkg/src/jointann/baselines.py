"""Pre-filtering, post-filtering, and the exact filtered ground-truth oracle."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .attrs import (
    AttributeSet,
    BoolPredicateFilter,
    EqualityFilter,
    Family,
    Filter,
    RangeFilter,
    SubsetFilter,
)
from .errors import FilterFamilyMismatch
from .graph import JointGraph
from .search import VectorComparator, greedy_search

GT_PAD = np.uint32(0xFFFFFFFF)


def matching_mask(attrs: AttributeSet, f: Filter) -> np.ndarray:
    """Vectorized match predicate over a whole attribute column."""
    if f.family != attrs.family:
        raise FilterFamilyMismatch(
            f"filter family {f.family.name} does not match dataset family {attrs.family.name}"
        )
    if isinstance(f, EqualityFilter):
        return attrs.ivalues == f.target
    if isinstance(f, RangeFilter):
        return (attrs.fvalues >= f.lo) & (attrs.fvalues <= f.hi)
    if isinstance(f, SubsetFilter):
        return (attrs.ivalues & f.required) == f.required
    if isinstance(f, BoolPredicateFilter):
        return f.table[attrs.ivalues]
    raise TypeError(f"unsupported filter type {type(f).__name__}")


def selectivity(attrs: AttributeSet, f: Filter) -> float:
    return float(matching_mask(attrs, f).mean())


def pre_filter_search(
    vecs: np.ndarray, attrs: AttributeSet, qvec: np.ndarray, f: Filter, k: int
):
    """Exact scan over the matching subset; returns (top-k ids, dc count).

    One distance evaluation per matching point, so dc equals the matching
    subset size. Ties in distance break by ascending id.
    """
    mask = matching_mask(attrs, f)
    ids = np.nonzero(mask)[0]
    if len(ids) == 0:
        return np.empty(0, dtype=np.int64), 0
    diffs = vecs[ids].astype(np.float64) - np.asarray(qvec, dtype=np.float64)
    d = np.einsum("ij,ij->i", diffs, diffs)
    order = np.lexsort((ids, d))
    return ids[order[:k]].astype(np.int64), len(ids)


def brute_force_ground_truth(
    vecs: np.ndarray,
    attrs: AttributeSet,
    qvecs: np.ndarray,
    filters: Sequence[Filter],
    k: int,
) -> np.ndarray:
    """Exact filtered top-k per query, padded with GT_PAD below k matches."""
    out = np.full((len(filters), k), GT_PAD, dtype=np.uint32)
    for qi, (qv, f) in enumerate(zip(qvecs, filters)):
        ids, _ = pre_filter_search(vecs, attrs, qv, f, k)
        out[qi, : len(ids)] = ids
    return out


def post_filter_search(
    g: JointGraph,
    qvec: np.ndarray,
    f: Filter,
    k: int,
    l_search: int,
    attrs: Optional[AttributeSet] = None,
):
    """Attribute-blind beam search, then discard non-matching results.

    The underlying index should itself be attribute-blind (a single
    effectively-infinite threshold). Returns (up to k matching ids ranked by
    vector distance, dc count).
    """
    ranked, _, _, _, dc = greedy_search(g, qvec, VectorComparator(), l_search)
    if attrs is None:
        attrs = _graph_attrs(g)
    mask = matching_mask_subset(attrs, f, ranked)
    return ranked[mask][:k], dc


def matching_mask_subset(attrs: AttributeSet, f: Filter, ids: np.ndarray) -> np.ndarray:
    sub = AttributeSet(attrs.family, 0, attrs.width)
    sub.ivalues = attrs.ivalues[ids]
    sub.fvalues = attrs.fvalues[ids]
    return matching_mask(sub, f)


def attribute_blind_params(params):
    """Copy of build params that makes the capped attribute distance
    identically zero: a single 100% quantile level."""
    from .graph import dataclass_replace

    return dataclass_replace(params, mode="threshold", levels=(1.0,), weights=None)


def _graph_attrs(g: JointGraph) -> AttributeSet:
    s = AttributeSet(g.family, 0, g.width)
    s.ivalues = g.attr_i[: g.n]
    s.fvalues = g.attr_f[: g.n]
    return s
