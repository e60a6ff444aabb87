"""Synthetic workload generation and binary dataset I/O.

Generators reproduce the mixed-selectivity filter constructions used in the
experiments at configurable scale: uniform label attributes with equality
filters, uniform integer scalars with random intervals, Bernoulli(1/2)
bitsets with required-subset filters, and random boolean predicates with
pass rates controlled into selectivity bands.

All randomness comes from seeded PCG64 generators; streams are split per
purpose by hashing (seed, purpose tag) into a SeedSequence.

File formats (all little-endian):
  fbin  u32 n, u32 d, then n*d f32
  abin  u32 n, u8 family tag, payload
          label:  n * u32
          scalar: n * f64
          bitset/bool: u32 L, then n * ceil(L/8) bytes
  qbin  u32 n_queries, u8 family tag, payload
          equality: u32 per query
          range:    2 * f64 per query
          subset:   u32 L, then ceil(L/8) bytes per query
          boolean:  u32 L, then 2^L / 8 truth-table bytes per query
  gt    u32 n_queries, u32 k, then n_queries*k u32 ids, 0xFFFFFFFF padded
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import Sequence

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
from .errors import DatasetFormatError

GT_PAD = 0xFFFFFFFF

DEFAULT_LABEL_COUNT = 12
DEFAULT_SCALAR_MAX = 10**6
DEFAULT_RANGE_DIVISORS = (1, 10, 100, 1000, 10**4, 10**5)
DEFAULT_BITSET_WIDTH = 30
DEFAULT_SUBSET_SIZES = (0, 2, 4, 6, 8, 10, 12, 14, 16)
DEFAULT_BOOL_VARS = 15
#: (low, high) pass-rate bands for boolean predicates, open intervals.
BOOL_PASS_BANDS = ((2**-4, 1.0), (2**-8, 2**-4), (2**-12, 2**-8), (0.0, 2**-12))


def _rng(seed: int, purpose: str) -> np.random.Generator:
    tag = zlib.crc32(purpose.encode())
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tag])))


@dataclass
class WorkloadSpec:
    n: int
    d: int
    n_queries: int
    family: Family
    label_count: int = DEFAULT_LABEL_COUNT
    scalar_max: int = DEFAULT_SCALAR_MAX
    range_divisors: Sequence[int] = DEFAULT_RANGE_DIVISORS
    bitset_width: int = DEFAULT_BITSET_WIDTH
    subset_sizes: Sequence[int] = DEFAULT_SUBSET_SIZES
    bool_vars: int = DEFAULT_BOOL_VARS
    seed: int = 0

    def __post_init__(self):
        if self.n <= 0 or self.d <= 0 or self.n_queries <= 0:
            raise ValueError("n, d, and n_queries must all be positive")


def gen_vectors(n: int, d: int, seed: int, purpose: str = "base-vectors") -> np.ndarray:
    if n <= 0 or d <= 0:
        raise ValueError("vector counts and dimension must be positive")
    return _rng(seed, purpose).standard_normal((n, d)).astype(np.float32)


def gen_label_workload(n: int, label_count: int, n_queries: int, seed: int):
    rng = _rng(seed, "label-workload")
    attrs = AttributeSet.from_labels(rng.integers(0, label_count, size=n))
    filters = [EqualityFilter(int(t)) for t in rng.integers(0, label_count, size=n_queries)]
    return attrs, filters


def gen_range_workload(
    n: int,
    n_queries: int,
    seed: int,
    scalar_max: int = DEFAULT_SCALAR_MAX,
    divisors: Sequence[int] = DEFAULT_RANGE_DIVISORS,
):
    """Uniform integer scalar attributes in [0, scalar_max]; each query draws
    a divisor k and a uniform interval of length scalar_max / k.

    Returns (attrs, filters, per-query divisor) so callers can bin queries
    by designed selectivity 1/k.
    """
    rng = _rng(seed, "range-workload")
    attrs = AttributeSet.from_scalars(rng.integers(0, scalar_max + 1, size=n).astype(np.float64))
    ks = rng.choice(np.asarray(divisors), size=n_queries)
    filters = []
    for k in ks:
        length = scalar_max / float(k)
        lo = float(rng.uniform(0.0, scalar_max - length))
        filters.append(RangeFilter(lo, lo + length))
    return attrs, filters, ks


def gen_subset_workload(
    n: int,
    n_queries: int,
    seed: int,
    width: int = DEFAULT_BITSET_WIDTH,
    sizes: Sequence[int] = DEFAULT_SUBSET_SIZES,
):
    """Bernoulli(1/2) bitset attributes; each query requires k uniformly
    chosen positions, k drawn from `sizes`."""
    rng = _rng(seed, "subset-workload")
    bits = rng.integers(0, 2, size=(n, width), dtype=np.int64)
    attrs = AttributeSet.from_bitsets(bits @ (np.int64(1) << np.arange(width, dtype=np.int64)), width)
    ks = rng.choice(np.asarray(sizes), size=n_queries)
    filters = []
    for k in ks:
        positions = rng.choice(width, size=int(k), replace=False)
        required = int(np.bitwise_or.reduce((np.int64(1) << positions), initial=np.int64(0)))
        filters.append(SubsetFilter(required, width))
    return attrs, filters, ks


def gen_boolean_workload(
    n: int,
    n_queries: int,
    seed: int,
    width: int = DEFAULT_BOOL_VARS,
    bands: Sequence[tuple] = BOOL_PASS_BANDS,
):
    """Uniform boolean assignments; each query picks a pass-rate band and
    rejection-samples a random truth table until its exact pass rate lands
    inside the (open) band. Unsatisfiable tables are rejected."""
    rng = _rng(seed, "boolean-workload")
    size = 1 << width
    attrs = AttributeSet.from_bool_assignments(
        rng.integers(0, size, size=n, dtype=np.int64), width
    )
    band_ids = rng.integers(0, len(bands), size=n_queries)
    filters = []
    for b in band_ids:
        lo, hi = bands[b]
        p = (lo + hi) / 2.0
        while True:
            table = rng.random(size) < p
            npass = int(table.sum())
            if npass == 0:
                continue
            rate = npass / size
            if lo < rate < hi:
                filters.append(BoolPredicateFilter(table, width))
                break
    return attrs, filters, band_ids


def gen_workload(spec: WorkloadSpec):
    """Vectors, attributes, query vectors, and query filters for a spec."""
    vecs = gen_vectors(spec.n, spec.d, spec.seed, "base-vectors")
    qvecs = gen_vectors(spec.n_queries, spec.d, spec.seed, "query-vectors")
    if spec.family == Family.LABEL:
        attrs, filters = gen_label_workload(spec.n, spec.label_count, spec.n_queries, spec.seed)
    elif spec.family == Family.SCALAR:
        attrs, filters, _ = gen_range_workload(
            spec.n, spec.n_queries, spec.seed, spec.scalar_max, spec.range_divisors
        )
    elif spec.family == Family.BITSET:
        attrs, filters, _ = gen_subset_workload(
            spec.n, spec.n_queries, spec.seed, spec.bitset_width, spec.subset_sizes
        )
    else:
        attrs, filters, _ = gen_boolean_workload(spec.n, spec.n_queries, spec.seed, spec.bool_vars)
    return vecs, attrs, qvecs, filters


# ----------------------------------------------------------------------- I/O


def write_fbin(path, vecs: np.ndarray) -> None:
    vecs = np.asarray(vecs, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", vecs.shape[0], vecs.shape[1]))
        fh.write(vecs.astype("<f4").tobytes())


def read_fbin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise DatasetFormatError("truncated fbin header")
    n, d = struct.unpack_from("<II", raw, 0)
    if len(raw) != 8 + 4 * n * d:
        raise DatasetFormatError(f"fbin payload length mismatch for n={n}, d={d}")
    return np.frombuffer(raw, dtype="<f4", count=n * d, offset=8).reshape(n, d).copy()


def _pack_bit_rows(values: np.ndarray, width: int) -> bytes:
    nbytes = (width + 7) // 8
    shifts = (8 * np.arange(nbytes, dtype=np.int64))[None, :]
    return ((values.astype(np.int64)[:, None] >> shifts) & 0xFF).astype(np.uint8).tobytes()


def _unpack_bit_rows(raw: bytes, n: int, width: int) -> np.ndarray:
    nbytes = (width + 7) // 8
    if len(raw) < n * nbytes:
        raise DatasetFormatError("truncated bit-packed payload")
    arr = np.frombuffer(raw, dtype=np.uint8, count=n * nbytes).reshape(n, nbytes).astype(np.int64)
    shifts = (8 * np.arange(nbytes, dtype=np.int64))[None, :]
    return (arr << shifts).sum(axis=1)


def write_attrs(path, attrs: AttributeSet) -> None:
    n = len(attrs)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IB", n, int(attrs.family)))
        if attrs.family == Family.LABEL:
            fh.write(attrs.ivalues.astype("<u4").tobytes())
        elif attrs.family == Family.SCALAR:
            fh.write(attrs.fvalues.astype("<f8").tobytes())
        else:
            fh.write(struct.pack("<I", attrs.width))
            fh.write(_pack_bit_rows(attrs.ivalues, attrs.width))


def read_attrs(path) -> AttributeSet:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 5:
        raise DatasetFormatError("truncated abin header")
    n, tag = struct.unpack_from("<IB", raw, 0)
    try:
        family = Family(tag)
    except ValueError as exc:
        raise DatasetFormatError(f"unknown attribute family tag {tag}") from exc
    off = 5
    try:
        if family == Family.LABEL:
            vals = np.frombuffer(raw, dtype="<u4", count=n, offset=off).astype(np.int64)
            return AttributeSet.from_labels(vals)
        if family == Family.SCALAR:
            vals = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
            return AttributeSet.from_scalars(vals)
        (width,) = struct.unpack_from("<I", raw, off)
        vals = _unpack_bit_rows(raw[off + 4 :], n, width)
        if family == Family.BITSET:
            return AttributeSet.from_bitsets(vals, width)
        return AttributeSet.from_bool_assignments(vals, width)
    except ValueError as exc:
        raise DatasetFormatError(f"truncated abin payload: {exc}") from exc


def write_filters(path, filters: Sequence[Filter]) -> None:
    if not filters:
        raise ValueError("cannot write an empty filter set")
    family = filters[0].family
    if any(f.family != family for f in filters):
        raise ValueError("all filters in one file must share a family")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IB", len(filters), int(family)))
        if family == Family.LABEL:
            for f in filters:
                fh.write(struct.pack("<I", f.target))
        elif family == Family.SCALAR:
            for f in filters:
                fh.write(struct.pack("<dd", f.lo, f.hi))
        elif family == Family.BITSET:
            width = filters[0].width
            fh.write(struct.pack("<I", width))
            req = np.array([f.required for f in filters], dtype=np.int64)
            fh.write(_pack_bit_rows(req, width))
        else:
            width = filters[0].width
            fh.write(struct.pack("<I", width))
            for f in filters:
                fh.write(np.packbits(f.table, bitorder="little").tobytes())


def read_filters(path) -> list:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 5:
        raise DatasetFormatError("truncated qbin header")
    n, tag = struct.unpack_from("<IB", raw, 0)
    try:
        family = Family(tag)
    except ValueError as exc:
        raise DatasetFormatError(f"unknown filter family tag {tag}") from exc
    off = 5
    try:
        if family == Family.LABEL:
            vals = struct.unpack_from(f"<{n}I", raw, off)
            return [EqualityFilter(v) for v in vals]
        if family == Family.SCALAR:
            vals = struct.unpack_from(f"<{2 * n}d", raw, off)
            return [RangeFilter(vals[2 * i], vals[2 * i + 1]) for i in range(n)]
        (width,) = struct.unpack_from("<I", raw, off)
        off += 4
        if family == Family.BITSET:
            req = _unpack_bit_rows(raw[off:], n, width)
            return [SubsetFilter(int(r), width) for r in req]
        tbytes = (1 << width) // 8 if width >= 3 else 1
        out = []
        for i in range(n):
            chunk = raw[off + i * tbytes : off + (i + 1) * tbytes]
            if len(chunk) < tbytes:
                raise DatasetFormatError("truncated boolean truth table")
            table = np.unpackbits(
                np.frombuffer(chunk, dtype=np.uint8), bitorder="little"
            )[: 1 << width].astype(bool)
            out.append(BoolPredicateFilter(table, width))
        return out
    except (struct.error, ValueError) as exc:
        raise DatasetFormatError(f"truncated qbin payload: {exc}") from exc


def write_gt(path, gt: np.ndarray) -> None:
    gt = np.asarray(gt, dtype=np.uint32)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", gt.shape[0], gt.shape[1]))
        fh.write(gt.astype("<u4").tobytes())


def read_gt(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise DatasetFormatError("truncated gt header")
    nq, k = struct.unpack_from("<II", raw, 0)
    if len(raw) != 8 + 4 * nq * k:
        raise DatasetFormatError(f"gt payload length mismatch for n_queries={nq}, k={k}")
    return np.frombuffer(raw, dtype="<u4", count=nq * k, offset=8).reshape(nq, k).copy()
