"""Degree-bounded joint attribute-vector proximity graph.

The index is built incrementally: each new point runs one greedy search per
threshold (or weight), the union of visited vertices is pruned down to at most
R diverse neighbors, and bidirectional edges are installed with re-pruning
when a neighbor overflows its degree budget.

Threshold mode realizes each configured quantile level as a per-point
threshold: at insertion time the distribution of attribute distances from the
new point to a sample of already-inserted points is computed and the
nearest-rank quantile at each level becomes that point's threshold.
"""

from __future__ import annotations

import math
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .attrs import AttrDistanceConfig, Attribute, AttributeSet, Family, attribute_distance
from .errors import (
    DegenerateAttributeSample,
    DimensionMismatch,
    FilterFamilyMismatch,
    IndexFormatError,
)

MAGIC = b"JAG1"
FORMAT_VERSION = 1

#: Candidate quantile levels for threshold selection.
QUANTILE_LEVELS = (1.0, 0.10, 0.01, 0.001, 0.0)

#: Candidate multipliers for weight derivation.
WEIGHT_MULTIPLIERS = (0.0, 1.0, 2.0, 5.0, 10.0, 100.0, 1000.0)


@dataclass
class BuildParams:
    degree: int = 32
    alpha: float = 1.2
    l_build: int = 64
    mode: str = "threshold"
    levels: Sequence[float] = (1.0, 0.01, 0.0)
    weights: Optional[Sequence[float]] = None
    multipliers: Sequence[float] = (0.0, 1.0, 10.0)
    threshold_sample_size: int = 500
    early_exit_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.degree <= 0:
            raise ValueError("degree bound must be positive")
        if self.alpha <= 1.0:
            raise ValueError("alpha must exceed 1")
        if self.l_build < 1:
            raise ValueError("build beam size must be positive")
        if self.mode not in ("threshold", "weight"):
            raise ValueError(f"unknown build mode {self.mode!r}")
        if not 0.0 < self.early_exit_fraction <= 1.0:
            raise ValueError("early_exit_fraction must lie in (0, 1]")
        if self.threshold_sample_size <= 0:
            raise ValueError("threshold_sample_size must be positive")
        if self.mode == "threshold":
            levels = tuple(float(v) for v in self.levels)
            if not levels or len(set(levels)) != len(levels):
                raise ValueError("quantile levels must be non-empty and distinct")
            if any(not 0.0 <= v <= 1.0 for v in levels):
                raise ValueError("quantile levels must lie in [0, 1]")
            # strictness order: loosest (highest quantile) first
            self.levels = tuple(sorted(levels, reverse=True))
        if self.weights is not None:
            ws = tuple(float(w) for w in self.weights)
            if not ws or len(set(ws)) != len(ws):
                raise ValueError("weights must be non-empty and distinct")
            if any(w < 0 for w in ws):
                raise ValueError("weights must be non-negative")
            self.weights = tuple(sorted(ws))

    @property
    def bucket_quota(self) -> int:
        n_buckets = len(self.levels) if self.mode == "threshold" else len(self.weights or (0,))
        return max(1, math.ceil(self.early_exit_fraction * self.degree / n_buckets))


def nearest_rank_quantile(values: np.ndarray, level: float) -> float:
    """Nearest-rank quantile of a multiset; level 0 is pinned to 0 exactly
    and level 1 is the sample maximum."""
    if level == 0.0:
        return 0.0
    if len(values) == 0:
        return 0.0
    s = np.sort(np.asarray(values, dtype=np.float64))
    if level >= 1.0:
        return float(s[-1])
    rank = max(1, math.ceil(level * len(s)))
    return float(s[rank - 1])


def derive_thresholds(
    a: Attribute,
    sample: Sequence[Attribute],
    levels: Sequence[float],
    cfg: Optional[AttrDistanceConfig] = None,
) -> list[float]:
    """Realize quantile levels as thresholds over dist_A(a, sample)."""
    if len(sample) == 0:
        return [0.0 for _ in levels]
    dists = np.array([attribute_distance(a, s, cfg) for s in sample])
    return [nearest_rank_quantile(dists, lv) for lv in levels]


def derive_weights(
    vecs: np.ndarray,
    attrs: AttributeSet,
    multipliers: Sequence[float],
    cfg: Optional[AttrDistanceConfig] = None,
    sample_size: int = 500,
    seed: int = 0,
    anchor: int = 0,
) -> list[float]:
    """Scale multipliers by h = sigma / sigma_A, the ratio of the vector and
    attribute distance spreads measured from a fixed anchor point."""
    n = len(attrs)
    if n < 2:
        raise ValueError("weight derivation needs at least two points")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x77])))
    others = np.setdiff1d(np.arange(n, dtype=np.int64), [anchor])
    if len(others) > sample_size:
        others = rng.choice(others, size=sample_size, replace=False)
    bw, cap_c, use_w = _cfg_arrays(cfg, attrs.width)
    da = kernels.attr_dist_batch(
        int(attrs.family), int(attrs.ivalues[anchor]), float(attrs.fvalues[anchor]),
        attrs.ivalues, attrs.fvalues, others, bw, cap_c, use_w,
    )
    dv = kernels.sq_dist_batch(np.ascontiguousarray(vecs, dtype=np.float32), vecs[anchor].astype(np.float32), others)
    sigma_a = float(np.std(da))
    if sigma_a == 0.0:
        raise DegenerateAttributeSample("all sampled attribute distances are identical")
    h = float(np.std(dv)) / sigma_a
    return [float(m) * h for m in multipliers]


def _cfg_arrays(cfg: Optional[AttrDistanceConfig], width: int):
    if cfg is not None and cfg.label_weights is not None:
        return cfg.weight_array(width), float(cfg.cap()), True
    return kernels._EMPTY_WEIGHTS, 0.0, False


class JointGraph:
    """Directed degree-bounded proximity graph with flat array storage."""

    def __init__(
        self,
        family: Family,
        dim: int,
        params: BuildParams,
        attr_cfg: Optional[AttrDistanceConfig] = None,
        width: int = 0,
        capacity: int = 16,
    ):
        if dim <= 0:
            raise ValueError("vector dimension must be positive")
        if params.mode == "weight" and params.weights is None:
            raise ValueError("weight-mode graph requires an explicit weight list "
                             "(derive one with derive_weights)")
        self.family = family
        self.dim = dim
        self.width = width
        self.params = params
        self.attr_cfg = attr_cfg
        self.entry = -1
        self.n = 0
        if params.mode == "threshold":
            self.tw = np.array(params.levels, dtype=np.float64)
        else:
            self.tw = np.array(params.weights, dtype=np.float64)
        self._mode_code = kernels.MODE_THRESHOLD if params.mode == "threshold" else kernels.MODE_WEIGHT
        self._bw, self._cap_c, self._use_w = _cfg_arrays(attr_cfg, width)

        cap = max(capacity, 16)
        self.vecs = np.zeros((cap, dim), dtype=np.float32)
        self.attr_i = np.zeros(cap, dtype=np.int64)
        self.attr_f = np.zeros(cap, dtype=np.float64)
        self.adj = np.full((cap, params.degree), -1, dtype=np.int32)
        self.deg = np.zeros(cap, dtype=np.int32)
        # realized per-point thresholds (threshold mode), reused for back-edge pruning
        self.point_tw = np.zeros((cap, len(self.tw)), dtype=np.float64)

    # ------------------------------------------------------------------ storage

    def _ensure_capacity(self, n: int) -> None:
        cap = len(self.deg)
        if n <= cap:
            return
        new = max(n, cap * 2)
        self.vecs = np.resize(self.vecs, (new, self.dim))
        self.attr_i = np.resize(self.attr_i, new)
        self.attr_f = np.resize(self.attr_f, new)
        adj = np.full((new, self.params.degree), -1, dtype=np.int32)
        adj[:cap] = self.adj
        self.adj = adj
        deg = np.zeros(new, dtype=np.int32)
        deg[:cap] = self.deg
        self.deg = deg
        ptw = np.zeros((new, len(self.tw)), dtype=np.float64)
        ptw[:cap] = self.point_tw
        self.point_tw = ptw

    def _store(self, vec: np.ndarray, attr: Attribute) -> int:
        if attr.family != self.family:
            raise FilterFamilyMismatch(
                f"point family {attr.family.name} does not match graph family {self.family.name}"
            )
        vec = np.asarray(vec, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise DimensionMismatch(f"expected dimension {self.dim}, got {vec.shape}")
        pid = self.n
        self._ensure_capacity(pid + 1)
        self.vecs[pid] = vec
        self.attr_i[pid] = attr.ivalue
        self.attr_f[pid] = attr.fvalue
        self.deg[pid] = 0
        self.n = pid + 1
        return pid

    def neighbors(self, pid: int) -> np.ndarray:
        return self.adj[pid, : self.deg[pid]]

    # ------------------------------------------------------------------- build

    def _point_rng(self, pid: int) -> np.random.Generator:
        return np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.params.seed, pid]))
        )

    def _realize_thresholds(self, pid: int, inserted: int) -> np.ndarray:
        if inserted == 0:
            return np.zeros(len(self.tw), dtype=np.float64)
        size = min(self.params.threshold_sample_size, inserted)
        if size == inserted:
            sample = np.arange(inserted, dtype=np.int64)
        else:
            sample = self._point_rng(pid).choice(inserted, size=size, replace=False).astype(np.int64)
        dists = kernels.attr_dist_batch(
            int(self.family), int(self.attr_i[pid]), float(self.attr_f[pid]),
            self.attr_i, self.attr_f, sample, self._bw, self._cap_c, self._use_w,
        )
        return np.array([nearest_rank_quantile(dists, lv) for lv in self.tw], dtype=np.float64)

    def _search_visited(self, pid: int, tw: np.ndarray) -> np.ndarray:
        parts = []
        for t in tw:
            vis, _, _, _ = kernels.greedy_search(
                self.vecs, self.attr_i, self.attr_f, self.adj, self.deg,
                self.entry, self.n,
                self.vecs[pid], int(self.attr_i[pid]), float(self.attr_f[pid]),
                self._mode_code, int(self.family), float(t),
                0, 0.0, 0.0, kernels._EMPTY_TABLE,
                self._bw, self._cap_c, self._use_w, self.params.l_build,
            )
            parts.append(vis)
        cand = np.unique(np.concatenate(parts))
        return cand[cand != pid]

    def _prune(self, pid: int, cand: np.ndarray, tw: np.ndarray) -> np.ndarray:
        return kernels.joint_robust_prune(
            self.vecs, self.attr_i, self.attr_f,
            self.vecs[pid], int(self.attr_i[pid]), float(self.attr_f[pid]),
            cand.astype(np.int64), tw, self._mode_code, int(self.family),
            float(self.params.alpha) ** 2, self.params.degree, self.params.bucket_quota,
            self._bw, self._cap_c, self._use_w,
        )

    def _point_tw(self, pid: int) -> np.ndarray:
        return self.point_tw[pid] if self._mode_code == kernels.MODE_THRESHOLD else self.tw

    def _set_neighbors(self, pid: int, nbrs: np.ndarray) -> None:
        k = len(nbrs)
        self.adj[pid, :k] = nbrs
        self.adj[pid, k:] = -1
        self.deg[pid] = k

    def _connect(self, pid: int, cand: Optional[np.ndarray] = None) -> None:
        if self.entry < 0:
            self.entry = pid
            if self._mode_code == kernels.MODE_THRESHOLD:
                self.point_tw[pid] = 0.0
            return
        tw = self._point_tw(pid)
        if cand is None:
            cand = self._search_visited(pid, tw)
        self._set_neighbors(pid, self._prune(pid, cand, tw))
        for v in self.adj[pid, : self.deg[pid]]:
            dv = int(self.deg[v])
            if dv < self.params.degree:
                self.adj[v, dv] = pid
                self.deg[v] = dv + 1
            else:
                back_cand = np.append(self.adj[v, :dv].astype(np.int64), np.int64(pid))
                self._set_neighbors(int(v), self._prune(int(v), back_cand, self._point_tw(int(v))))

    def insert(self, vec: np.ndarray, attr: Attribute) -> int:
        """Insert a single point and wire it into the graph; returns its id."""
        inserted = self.n
        pid = self._store(vec, attr)
        if self._mode_code == kernels.MODE_THRESHOLD:
            self.point_tw[pid] = self._realize_thresholds(pid, inserted)
        self._connect(pid)
        return pid

    @classmethod
    def build(
        cls,
        vecs: np.ndarray,
        attrs: AttributeSet,
        params: BuildParams,
        attr_cfg: Optional[AttrDistanceConfig] = None,
        threads: int = 1,
    ) -> "JointGraph":
        """Build a graph over a full dataset, inserting in id order.

        threads == 1 is deterministic. With threads > 1, candidate searches
        for a batch of points run concurrently against a snapshot of the
        graph and edges are installed serially, preserving all structural
        invariants but not sequential-equivalence.
        """
        vecs = np.ascontiguousarray(vecs, dtype=np.float32)
        n, dim = vecs.shape
        if n == 0:
            raise ValueError("cannot build an index over an empty dataset")
        if len(attrs) != n:
            raise ValueError("attribute count does not match vector count")
        p = params
        if p.mode == "weight" and p.weights is None:
            try:
                ws = derive_weights(vecs, attrs, p.multipliers, attr_cfg,
                                    p.threshold_sample_size, p.seed)
            except DegenerateAttributeSample:
                ws = [0.0]
            p = dataclass_replace(p, weights=tuple(dict.fromkeys(ws)))
        g = cls(attrs.family, dim, p, attr_cfg, width=attrs.width, capacity=n)
        g.vecs[:n] = vecs
        g.attr_i[:n] = attrs.ivalues
        g.attr_f[:n] = attrs.fvalues
        g.n = n

        if threads <= 1:
            for pid in range(n):
                if g._mode_code == kernels.MODE_THRESHOLD:
                    g.point_tw[pid] = g._realize_thresholds(pid, pid)
                g._connect(pid)
            return g

        # parallel mode: sequential warm-up, then batched candidate searches
        warm = min(n, 1024)
        for pid in range(warm):
            if g._mode_code == kernels.MODE_THRESHOLD:
                g.point_tw[pid] = g._realize_thresholds(pid, pid)
            g._connect(pid)
        batch = max(threads * 8, 32)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            start = warm
            while start < n:
                stop = min(start + batch, n)
                pids = range(start, stop)
                for pid in pids:
                    if g._mode_code == kernels.MODE_THRESHOLD:
                        g.point_tw[pid] = g._realize_thresholds(pid, start)
                cands = list(pool.map(lambda pid: g._search_visited(pid, g._point_tw(pid)), pids))
                for pid, cand in zip(pids, cands):
                    g._connect(pid, cand=cand[cand < pid] if len(cand) else cand)
                start = stop
        return g

    # --------------------------------------------------------------- save/load

    def save(self, path) -> None:
        mode_tag = 0 if self.params.mode == "threshold" else 1
        head = bytearray()
        head += MAGIC
        head += struct.pack(
            "<IIIBBIf", FORMAT_VERSION, self.n, self.dim, int(self.family), mode_tag,
            self.params.degree, self.params.alpha,
        )
        head += struct.pack("<I", len(self.tw))
        head += struct.pack(f"<{len(self.tw)}d", *self.tw.tolist())
        head += struct.pack("<Q", max(self.entry, 0) if self.n else 0)
        n = self.n
        body = [bytes(head), self.vecs[:n].astype("<f4").tobytes()]
        if self.family == Family.LABEL:
            body.append(self.attr_i[:n].astype("<u4").tobytes())
        elif self.family == Family.SCALAR:
            body.append(self.attr_f[:n].astype("<f8").tobytes())
        else:
            body.append(struct.pack("<I", self.width))
            body.append(_pack_bits(self.attr_i[:n], self.width))
        adj_parts = []
        for i in range(n):
            d = int(self.deg[i])
            adj_parts.append(struct.pack("<I", d))
            adj_parts.append(self.adj[i, :d].astype("<u4").tobytes())
        body.extend(adj_parts)
        blob = b"".join(body)
        crc = zlib.crc32(blob) & 0xFFFFFFFF
        with open(path, "wb") as fh:
            fh.write(blob)
            fh.write(struct.pack("<I", crc))

    @classmethod
    def load(cls, path) -> "JointGraph":
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) < 8 or blob[:4] != MAGIC:
            raise IndexFormatError("bad magic bytes: not a recognized index file")
        body, stored_crc = blob[:-4], struct.unpack("<I", blob[-4:])[0]
        if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
            raise IndexFormatError("checksum mismatch: index file is corrupt")
        off = 4
        version, n, dim, fam_tag, mode_tag, degree, alpha = struct.unpack_from("<IIIBBIf", body, off)
        off += struct.calcsize("<IIIBBIf")
        if version != FORMAT_VERSION:
            raise IndexFormatError(f"unsupported index version {version}")
        (n_tw,) = struct.unpack_from("<I", body, off)
        off += 4
        tw = struct.unpack_from(f"<{n_tw}d", body, off)
        off += 8 * n_tw
        (entry,) = struct.unpack_from("<Q", body, off)
        off += 8
        family = Family(fam_tag)
        mode = "threshold" if mode_tag == 0 else "weight"
        params = BuildParams(
            degree=degree, alpha=float(alpha), mode=mode,
            levels=tw if mode == "threshold" else (1.0,),
            weights=tw if mode == "weight" else None,
        )
        try:
            vecs = np.frombuffer(body, dtype="<f4", count=n * dim, offset=off).reshape(n, dim)
            off += 4 * n * dim
            width = 0
            if family == Family.LABEL:
                ivals = np.frombuffer(body, dtype="<u4", count=n, offset=off).astype(np.int64)
                off += 4 * n
                attrs = AttributeSet.from_labels(ivals)
            elif family == Family.SCALAR:
                fvals = np.frombuffer(body, dtype="<f8", count=n, offset=off)
                off += 8 * n
                attrs = AttributeSet.from_scalars(fvals)
            else:
                (width,) = struct.unpack_from("<I", body, off)
                off += 4
                nbytes = (width + 7) // 8
                ivals = _unpack_bits(body[off : off + nbytes * n], n, width)
                off += nbytes * n
                if family == Family.BITSET:
                    attrs = AttributeSet.from_bitsets(ivals, width)
                else:
                    attrs = AttributeSet.from_bool_assignments(ivals, width)
            g = cls(family, dim, params, width=width, capacity=max(n, 16))
            g.n = n
            g.entry = int(entry) if n else -1
            g.vecs[:n] = vecs
            g.attr_i[:n] = attrs.ivalues
            g.attr_f[:n] = attrs.fvalues
            for i in range(n):
                (d,) = struct.unpack_from("<I", body, off)
                off += 4
                g.adj[i, :d] = np.frombuffer(body, dtype="<u4", count=d, offset=off)
                g.deg[i] = d
                off += 4 * d
        except (ValueError, struct.error) as exc:
            raise IndexFormatError(f"truncated or corrupt index file: {exc}") from exc
        if off != len(body):
            raise IndexFormatError("trailing bytes after adjacency section")
        return g

    def structurally_equal(self, other: "JointGraph") -> bool:
        return (
            self.family == other.family
            and self.dim == other.dim
            and self.n == other.n
            and self.entry == other.entry
            and self.params.degree == other.params.degree
            and np.allclose(self.tw, other.tw)
            and np.array_equal(self.vecs[: self.n], other.vecs[: other.n])
            and np.array_equal(self.attr_i[: self.n], other.attr_i[: other.n])
            and np.array_equal(self.attr_f[: self.n], other.attr_f[: other.n])
            and np.array_equal(self.deg[: self.n], other.deg[: other.n])
            and np.array_equal(self.adj[: self.n], other.adj[: other.n])
        )


def dataclass_replace(params: BuildParams, **kw) -> BuildParams:
    import dataclasses

    return dataclasses.replace(params, **kw)


def _pack_bits(values: np.ndarray, width: int) -> bytes:
    nbytes = (width + 7) // 8
    shifts = (8 * np.arange(nbytes, dtype=np.int64))[None, :]
    out = (values.astype(np.int64)[:, None] >> shifts) & 0xFF
    return out.astype(np.uint8).tobytes()


def _unpack_bits(raw: bytes, n: int, width: int) -> np.ndarray:
    nbytes = (width + 7) // 8
    arr = np.frombuffer(raw, dtype=np.uint8, count=n * nbytes).reshape(n, nbytes).astype(np.int64)
    shifts = (8 * np.arange(nbytes, dtype=np.int64))[None, :]
    return (arr << shifts).sum(axis=1)
