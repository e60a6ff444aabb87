"""Numba kernels for the hot paths: distances, greedy beam search, and joint
robust pruning over flat graph arrays.

Data layout shared by all kernels:
  vecs    float32 (capacity, d)   point vectors
  attr_i  int64   (capacity,)     label id / bitset / boolean assignment
  attr_f  float64 (capacity,)     scalar attribute
  adj     int32   (capacity, R)   out-neighbor ids, -1 padded
  deg     int32   (capacity,)     out-degrees

Comparator modes:
  0  build, threshold: primary = max(dist_A - t, 0), secondary = sq dist
  1  build, weight:    primary = w * dist_A + sq dist, secondary = 0
  2  query, filter:    primary = dist_F, secondary = sq dist
  3  pure vector:      primary = 0, secondary = sq dist
Ties on (primary, secondary) always break by ascending point id.
"""

import numpy as np
from numba import njit

MODE_THRESHOLD = 0
MODE_WEIGHT = 1
MODE_FILTER = 2
MODE_VECTOR = 3

_EMPTY_TABLE = np.empty(0, dtype=np.int32)
_EMPTY_WEIGHTS = np.empty(0, dtype=np.float64)

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(cache=True, inline="always")
def _popcount(x):
    x = np.uint64(x)
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return np.int64((x * _H01) >> np.uint64(56))


@njit(cache=True, inline="always")
def _attr_dist(family, ai, af, bi, bf, bit_weights, cap_c, use_weights):
    if family == 0:  # label
        return 0.0 if ai == bi else 1.0
    elif family == 1:  # scalar
        return abs(af - bf)
    else:  # bitset / boolean assignment
        if use_weights:
            shared = np.uint64(ai) & np.uint64(bi)
            total = 0.0
            idx = 0
            while shared != np.uint64(0):
                if shared & np.uint64(1):
                    total += bit_weights[idx]
                shared >>= np.uint64(1)
                idx += 1
            return cap_c - total
        return float(_popcount(np.uint64(ai) ^ np.uint64(bi)))


@njit(cache=True, inline="always")
def _filter_dist(family, ai, af, f_i, f_lo, f_hi, f_table):
    if family == 0:
        return 0.0 if ai == f_i else 1.0
    elif family == 1:
        if af < f_lo:
            return f_lo - af
        if af > f_hi:
            return af - f_hi
        return 0.0
    elif family == 2:
        return float(_popcount(np.uint64(f_i) & ~np.uint64(ai)))
    else:
        return float(f_table[ai])


@njit(cache=True, inline="always")
def _sq_to_query(vecs, i, q):
    s = 0.0
    for j in range(q.shape[0]):
        d = np.float64(vecs[i, j]) - np.float64(q[j])
        s += d * d
    return s


@njit(cache=True, inline="always")
def _sq_between(vecs, i, j):
    s = 0.0
    for c in range(vecs.shape[1]):
        d = np.float64(vecs[i, c]) - np.float64(vecs[j, c])
        s += d * d
    return s


@njit(cache=True, inline="always")
def _lex_less(p1, s1, i1, p2, s2, i2):
    if p1 != p2:
        return p1 < p2
    if s1 != s2:
        return s1 < s2
    return i1 < i2


@njit(cache=True, inline="always")
def _candidate_key(
    vecs, attr_i, attr_f, c, qvec, q_ai, q_af,
    mode, family, t_or_w, f_i, f_lo, f_hi, f_table,
    bit_weights, cap_c, use_weights,
):
    sq = _sq_to_query(vecs, c, qvec)
    if mode == MODE_THRESHOLD:
        da = _attr_dist(family, q_ai, q_af, attr_i[c], attr_f[c], bit_weights, cap_c, use_weights)
        prim = da - t_or_w
        if prim < 0.0:
            prim = 0.0
        return prim, sq
    elif mode == MODE_WEIGHT:
        da = _attr_dist(family, q_ai, q_af, attr_i[c], attr_f[c], bit_weights, cap_c, use_weights)
        return t_or_w * da + sq, 0.0
    elif mode == MODE_FILTER:
        return _filter_dist(family, attr_i[c], attr_f[c], f_i, f_lo, f_hi, f_table), sq
    else:
        return 0.0, sq


@njit(cache=True, nogil=True)
def greedy_search(
    vecs, attr_i, attr_f, adj, deg, entry, n,
    qvec, q_ai, q_af,
    mode, family, t_or_w, f_i, f_lo, f_hi, f_table,
    bit_weights, cap_c, use_weights, l_s,
):
    """Beam search from the entry vertex under the requested comparator.

    Returns (visited ids, visited primaries, visited secondaries, dc count),
    in visit order. The beam holds the best l_s candidates seen so far; a
    candidate evicted from the beam is never re-enqueued.
    """
    beam_p = np.empty(l_s, np.float64)
    beam_s = np.empty(l_s, np.float64)
    beam_id = np.empty(l_s, np.int64)
    beam_vis = np.zeros(l_s, np.bool_)
    beam_n = 0

    enqueued = np.zeros(n, np.uint8)
    vis_ids = np.empty(n, np.int64)
    vis_p = np.empty(n, np.float64)
    vis_s = np.empty(n, np.float64)
    n_vis = 0
    dc = 0

    p0, s0 = _candidate_key(
        vecs, attr_i, attr_f, entry, qvec, q_ai, q_af,
        mode, family, t_or_w, f_i, f_lo, f_hi, f_table,
        bit_weights, cap_c, use_weights,
    )
    dc += 1
    beam_p[0] = p0
    beam_s[0] = s0
    beam_id[0] = entry
    beam_vis[0] = False
    beam_n = 1
    enqueued[entry] = 1

    while True:
        cur = -1
        for i in range(beam_n):
            if not beam_vis[i]:
                cur = i
                break
        if cur < 0:
            break
        beam_vis[cur] = True
        c = beam_id[cur]
        vis_ids[n_vis] = c
        vis_p[n_vis] = beam_p[cur]
        vis_s[n_vis] = beam_s[cur]
        n_vis += 1

        for j in range(deg[c]):
            u = adj[c, j]
            if enqueued[u]:
                continue
            enqueued[u] = 1
            pu, su = _candidate_key(
                vecs, attr_i, attr_f, u, qvec, q_ai, q_af,
                mode, family, t_or_w, f_i, f_lo, f_hi, f_table,
                bit_weights, cap_c, use_weights,
            )
            dc += 1
            if beam_n < l_s:
                pos = beam_n
                beam_n += 1
            elif _lex_less(pu, su, u, beam_p[l_s - 1], beam_s[l_s - 1], beam_id[l_s - 1]):
                pos = l_s - 1
            else:
                continue
            while pos > 0 and _lex_less(pu, su, u, beam_p[pos - 1], beam_s[pos - 1], beam_id[pos - 1]):
                beam_p[pos] = beam_p[pos - 1]
                beam_s[pos] = beam_s[pos - 1]
                beam_id[pos] = beam_id[pos - 1]
                beam_vis[pos] = beam_vis[pos - 1]
                pos -= 1
            beam_p[pos] = pu
            beam_s[pos] = su
            beam_id[pos] = u
            beam_vis[pos] = False

    return vis_ids[:n_vis], vis_p[:n_vis], vis_s[:n_vis], dc


@njit(cache=True, inline="always")
def _lex_argsort(prim, sec, ids):
    """Indices sorting ascending by (prim, sec, id), via stacked stable sorts."""
    order = np.argsort(ids, kind="mergesort")
    order = order[np.argsort(sec[order], kind="mergesort")]
    return order[np.argsort(prim[order], kind="mergesort")]


@njit(cache=True, nogil=True)
def joint_robust_prune(
    vecs, attr_i, attr_f,
    p_vec, p_ai, p_af,
    cand, thresholds_or_weights, mode, family,
    alpha2, max_degree, bucket_quota,
    bit_weights, cap_c, use_weights,
):
    """Select up to max_degree diverse neighbors for a point from `cand`.

    One bucket per threshold (or weight): candidates are scanned in comparator
    order; a fresh candidate is admitted iff no current bucket member u has
    alpha^2 * sq(u, v) <= sq(p, v). Candidates selected by an earlier bucket
    re-enter later buckets without testing and without consuming that bucket's
    quota of `bucket_quota` fresh admissions.
    """
    m = cand.shape[0]
    if m == 0:
        return np.empty(0, np.int64)

    sq_p = np.empty(m, np.float64)
    da_p = np.empty(m, np.float64)
    for i in range(m):
        sq_p[i] = _sq_to_query(vecs, cand[i], p_vec)
        da_p[i] = _attr_dist(
            family, p_ai, p_af, attr_i[cand[i]], attr_f[cand[i]],
            bit_weights, cap_c, use_weights,
        )

    selected = np.zeros(m, np.bool_)
    prim = np.empty(m, np.float64)
    sec = np.empty(m, np.float64)
    bucket = np.empty(m, np.int64)

    for ti in range(thresholds_or_weights.shape[0]):
        tw = thresholds_or_weights[ti]
        for i in range(m):
            if mode == MODE_THRESHOLD:
                v = da_p[i] - tw
                prim[i] = v if v > 0.0 else 0.0
                sec[i] = sq_p[i]
            else:
                prim[i] = tw * da_p[i] + sq_p[i]
                sec[i] = 0.0
        order = _lex_argsort(prim, sec, cand)

        bucket_n = 0
        fresh = 0
        for oi in range(m):
            v = order[oi]
            if selected[v]:
                bucket[bucket_n] = v
                bucket_n += 1
                continue
            ok = True
            for bi in range(bucket_n):
                u = bucket[bi]
                if alpha2 * _sq_between(vecs, cand[u], cand[v]) <= sq_p[v]:
                    ok = False
                    break
            if ok:
                selected[v] = True
                bucket[bucket_n] = v
                bucket_n += 1
                fresh += 1
                if fresh >= bucket_quota:
                    break

    n_sel = 0
    for i in range(m):
        if selected[i]:
            n_sel += 1

    # order the result by the last comparator's key; truncate to max_degree
    # if bucket-quota rounding overshot the budget
    order = _lex_argsort(prim, sec, cand)
    out = np.empty(min(n_sel, max_degree), np.int64)
    k = 0
    for oi in range(m):
        v = order[oi]
        if selected[v]:
            out[k] = cand[v]
            k += 1
            if k == out.shape[0]:
                break
    return out


@njit(cache=True, nogil=True)
def attr_dist_batch(family, q_ai, q_af, attr_i, attr_f, ids, bit_weights, cap_c, use_weights):
    out = np.empty(ids.shape[0], np.float64)
    for i in range(ids.shape[0]):
        c = ids[i]
        out[i] = _attr_dist(family, q_ai, q_af, attr_i[c], attr_f[c], bit_weights, cap_c, use_weights)
    return out


@njit(cache=True, nogil=True)
def sq_dist_batch(vecs, q, ids):
    out = np.empty(ids.shape[0], np.float64)
    for i in range(ids.shape[0]):
        out[i] = _sq_to_query(vecs, ids[i], q)
    return out
