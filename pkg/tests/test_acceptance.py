"""End-to-end acceptance suite.

Each test prints one `[acceptance] ... PASS/FAIL` line with its measured
runtime, and asserts both the quality target and the runtime budget. Heavy
artifacts (the 100k-point range workload and its indices) are built lazily
once and shared across the tests that need them.
"""

import math
import time

import numpy as np
import pytest

from jointann.attrs import (
    AttributeSet,
    BoolPredicateFilter,
    Family,
    filter_distance,
    matches,
)
from jointann.baselines import (
    GT_PAD,
    attribute_blind_params,
    brute_force_ground_truth,
    matching_mask,
    post_filter_search,
    pre_filter_search,
)
from jointann.bench import (
    banded_recall_under_dc_budget,
    post_filter_recall_under_dc_budget,
    recall_at_k,
)
from jointann.datasets import (
    gen_boolean_workload,
    gen_label_workload,
    gen_range_workload,
    gen_subset_workload,
    gen_vectors,
)
from jointann.graph import BuildParams, JointGraph, dataclass_replace, derive_weights
from jointann.search import SearchParams, query

from .conftest import random_attribute, random_filter
from .oracles import ReferenceVamana, exhaustive_min_hamming, unfiltered_topk

K = 10
DC_BUDGET = 5000.0
BEAMS = (20, 50, 100, 200, 500)
# Finer sweep for the budgeted-recall experiments: "best recall under a DC
# budget" is a supremum over operating points, so a denser grid measures it
# more faithfully than the coarse monotonicity grid above.
FINE_BEAMS = (20, 50, 100, 130, 160, 200, 230, 260, 320, 400, 500)
BANDS = (1, 10, 100, 1000, 10_000)  # divisors: selectivity 1 .. 1e-4

_cache = {}


def _report(capsys, name, ok, elapsed, budget, detail=""):
    verdict = "PASS" if ok else "FAIL"
    with capsys.disabled():
        print(f"[acceptance] {name}: {verdict} ({elapsed:.1f}s / budget {budget:.0f}s) {detail}")


# ----------------------------------------------------------- shared artifacts


def range_workload():
    """100k-point d=32 range workload with 5 designed selectivity bands."""
    if "workload" not in _cache:
        n, nq = 100_000, 250
        vecs = gen_vectors(n, 32, seed=7)
        qvecs = gen_vectors(nq, 32, seed=7, purpose="query-vectors")
        attrs, filters, ks = gen_range_workload(n, nq, seed=7, divisors=BANDS)
        assert all((ks == b).sum() >= 20 for b in BANDS)
        gt = brute_force_ground_truth(vecs, attrs, qvecs, filters, K)
        _cache["workload"] = (vecs, attrs, qvecs, filters, np.asarray(ks), gt)
    return _cache["workload"]


def base_params():
    return BuildParams(degree=32, alpha=1.2, l_build=64, levels=(1.0, 0.01, 0.0), seed=0)


def built_index(name, params):
    key = f"index:{name}"
    if key not in _cache:
        vecs, attrs, _, _, _, _ = range_workload()
        _cache[key] = JointGraph.build(vecs, attrs, params)
    return _cache[key]


def structural_graph():
    if "structural" not in _cache:
        vecs = gen_vectors(5000, 16, seed=3)
        attrs, _, _ = gen_range_workload(5000, 5, seed=3)
        p = BuildParams(degree=16, alpha=1.2, l_build=32, levels=(1.0, 0.01, 0.0), seed=1)
        _cache["structural"] = (JointGraph.build(vecs, attrs, p), vecs, attrs, p)
    return _cache["structural"]


# ------------------------------------------------------------------ criteria


def test_01_filter_distance_validity(capsys):
    t0 = time.monotonic()
    ok = True
    for family in Family:
        rng = np.random.Generator(np.random.PCG64(1000 + int(family)))
        n_filters = 300 if family == Family.BOOL_ASSIGN else 500
        per_filter = math.ceil(10_000 / n_filters)
        checked = 0
        for _ in range(n_filters):
            f = random_filter(rng, family)
            for _ in range(per_filter):
                a = random_attribute(rng, family)
                ok &= (filter_distance(a, f) == 0.0) == matches(a, f)
                checked += 1
            if checked >= 10_000:
                break
        assert checked >= 10_000
    elapsed = time.monotonic() - t0
    _report(capsys, "01 filter-distance validity (zero iff match, 10k pairs x 4 families)",
            ok and elapsed < 5, elapsed, 5)
    assert ok
    assert elapsed < 5


def test_02_boolean_distance_oracle(capsys):
    t0 = time.monotonic()
    rng = np.random.Generator(np.random.PCG64(2))
    ok = True
    pairs = 0
    while pairs < 1000:
        width = int(rng.integers(2, 13))
        table = rng.random(1 << width) < float(rng.uniform(0.05, 0.5))
        if not table.any():
            continue
        f = BoolPredicateFilter(table, width)
        dist = f.distance_table()
        for _ in range(10):
            a = int(rng.integers(0, 1 << width))
            ok &= int(dist[a]) == exhaustive_min_hamming(a, table, width)
            pairs += 1
    elapsed = time.monotonic() - t0
    _report(capsys, "02 boolean filter distance vs exhaustive min-Hamming (1000 pairs, width<=12)",
            ok and elapsed < 30, elapsed, 30)
    assert ok
    assert elapsed < 30


def test_03_structural_suite(capsys):
    t0 = time.monotonic()
    g, vecs, attrs, p = structural_graph()
    ok = True
    for i in range(g.n):
        nbrs = g.neighbors(i)
        ok &= len(nbrs) <= 16
        ok &= i not in nbrs
        ok &= len(set(nbrs.tolist())) == len(nbrs)
    g2 = JointGraph.build(vecs, attrs, p)
    ok &= g.structurally_equal(g2)
    ok &= bool(np.array_equal(g.adj[: g.n], g2.adj[: g2.n]))
    elapsed = time.monotonic() - t0
    _report(capsys, "03 structural suite (5k pts, degree/self-loop/dup invariants, bit-reproducible)",
            ok and elapsed < 60, elapsed, 60)
    assert ok
    assert elapsed < 60


def test_04_unfiltered_reduction(capsys):
    t0 = time.monotonic()
    n, d, nq = 10_000, 16, 200
    vecs = gen_vectors(n, d, seed=4)
    qvecs = gen_vectors(nq, d, seed=4, purpose="query-vectors")
    attrs = AttributeSet.from_scalars(np.full(n, 1.0))
    p = BuildParams(degree=12, alpha=1.2, l_build=24, levels=(0.0,),
                    early_exit_fraction=1.0, seed=0)
    g = JointGraph.build(vecs, attrs, p)
    ref = ReferenceVamana(vecs, degree=12, alpha=1.2, l_build=24).build()

    gt = [unfiltered_topk(vecs, q, K) for q in qvecs]
    mine, theirs = [], []
    from jointann.search import VectorComparator, greedy_search

    for i, q in enumerate(qvecs):
        top, _, _, _, _ = greedy_search(g, q, VectorComparator(), 100, k=K)
        mine.append(len(set(top.tolist()) & set(gt[i])) / K)
        got = ref.search_topk(q, K, 100)
        theirs.append(len(set(got) & set(gt[i])) / K)
    r_mine, r_ref = float(np.mean(mine)), float(np.mean(theirs))
    ok = abs(r_mine - r_ref) <= 0.02
    elapsed = time.monotonic() - t0
    _report(capsys, "04 unfiltered reduction vs reference pipeline",
            ok and elapsed < 120, elapsed, 120,
            f"recall {r_mine:.4f} vs reference {r_ref:.4f}")
    assert ok
    assert elapsed < 120


def test_05_range_selectivity_robustness(capsys):
    t0 = time.monotonic()
    vecs, attrs, qvecs, filters, ks, gt = range_workload()
    g = built_index("merged", base_params())
    banded = banded_recall_under_dc_budget(g, qvecs, filters, gt, ks, K, FINE_BEAMS, DC_BUDGET)

    blind = built_index("blind", attribute_blind_params(base_params()))
    band_1e3 = np.nonzero(ks == 1000)[0]
    post = post_filter_recall_under_dc_budget(
        blind, vecs, attrs, qvecs, filters, gt, band_1e3, K, FINE_BEAMS, DC_BUDGET
    )

    ok = all(banded[b] >= (0.85 if b == 10_000 else 0.9) for b in BANDS)
    ok &= post <= 0.5
    elapsed = time.monotonic() - t0
    detail = " ".join(f"1/{b}:{banded[b]:.3f}" for b in BANDS) + f" post@1e-3:{post:.3f}"
    _report(capsys, "05 banded recall at DC budget 5000 (joint index high, post-filter low)",
            ok and elapsed < 900, elapsed, 900, detail)
    assert all(banded[b] >= (0.85 if b == 10_000 else 0.9) for b in BANDS), banded
    assert post <= 0.5, post
    assert elapsed < 900


def test_06_threshold_ablation(capsys):
    t0 = time.monotonic()
    _, _, qvecs, filters, ks, gt = range_workload()
    g100 = built_index("single-1.0", dataclass_replace(base_params(), levels=(1.0,)))
    g0 = built_index("single-0.0", dataclass_replace(base_params(), levels=(0.0,)))
    merged = built_index("merged", base_params())

    r100 = banded_recall_under_dc_budget(g100, qvecs, filters, gt, ks, K, FINE_BEAMS, DC_BUDGET)
    r0 = banded_recall_under_dc_budget(g0, qvecs, filters, gt, ks, K, FINE_BEAMS, DC_BUDGET)
    rm = banded_recall_under_dc_budget(merged, qvecs, filters, gt, ks, K, FINE_BEAMS, DC_BUDGET)

    low_gap = r0[10_000] - r100[10_000]
    high_gap = r100[1] - r0[1]
    merged_ok = all(rm[b] >= max(r0[b], r100[b]) - 0.02 for b in BANDS)
    ok = low_gap >= 0.2 and high_gap >= 0.05 and merged_ok
    elapsed = time.monotonic() - t0
    track = " ".join(f"1/{b}:{rm[b]:.3f}/{max(r0[b], r100[b]):.3f}" for b in BANDS)
    _report(capsys, "06 single-threshold ablation (0% wins low selectivity, 100% wins high, merged tracks both)",
            ok and elapsed < 1200, elapsed, 1200,
            f"low-band gap {low_gap:.3f}, high-band gap {high_gap:.3f}, merged/winner {track}")
    assert low_gap >= 0.2, (r0, r100)
    assert high_gap >= 0.05, (r0, r100)
    assert merged_ok, (rm, r0, r100)
    assert elapsed < 1200


def test_07_pre_filter_oracle_identity(capsys):
    t0 = time.monotonic()
    n, d, per_family = 10_000, 16, 250
    vecs = gen_vectors(n, d, seed=9)
    qvecs = gen_vectors(per_family, d, seed=9, purpose="query-vectors")
    attrs_r, filters_r, ks_r = gen_range_workload(n, per_family, seed=9)
    attrs_s, filters_s, ks_s = gen_subset_workload(n, per_family, seed=9)
    attrs_b, filters_b, _ = gen_boolean_workload(n, per_family, seed=9)
    workloads = {
        Family.LABEL: gen_label_workload(n, 12, per_family, seed=9),
        Family.SCALAR: (attrs_r, filters_r),
        Family.BITSET: (attrs_s, filters_s),
        Family.BOOL_ASSIGN: (attrs_b, filters_b),
    }
    designed = {
        Family.LABEL: [1.0 / 12] * per_family,
        Family.SCALAR: [1.0 / k for k in ks_r],
        Family.BITSET: [2.0 ** -int(k) for k in ks_s],
        Family.BOOL_ASSIGN: [float(f.table.mean()) for f in filters_b],
    }

    ok = True
    for family, (attrs, filters) in workloads.items():
        gt = brute_force_ground_truth(vecs, attrs, qvecs, filters, K)
        for i, f in enumerate(filters):
            ids, dc = pre_filter_search(vecs, attrs, qvecs[i], f, K)
            expect = [int(v) for v in gt[i] if int(v) != GT_PAD]
            ok &= ids.tolist() == expect
            n_match = int(matching_mask(attrs, f).sum())
            ok &= dc == n_match
            p = designed[family][i]
            sigma = math.sqrt(max(p * (1 - p), 1e-12) / n)
            ok &= abs(dc / n - p) <= 4 * sigma + 2.0 / n
    elapsed = time.monotonic() - t0
    _report(capsys, "07 pre-filter identity with ground truth, DC = matching-subset size, 4-sigma selectivity",
            ok and elapsed < 120, elapsed, 120)
    assert ok
    assert elapsed < 120


def test_08_beam_monotonicity(capsys):
    t0 = time.monotonic()
    _, _, qvecs, filters, ks, gt = range_workload()
    g = built_index("merged", base_params())
    idx = np.arange(200)
    means = []
    for beam in BEAMS:
        params = SearchParams(k=K, l_search=beam)
        recalls = [
            recall_at_k(
                (res := query(g, qvecs[i], filters[i], params)).ids[res.matches], gt[i], K
            )
            for i in idx
        ]
        means.append(float(np.mean(recalls)))
    ok = all(b >= a - 1e-9 for a, b in zip(means, means[1:]))
    elapsed = time.monotonic() - t0
    _report(capsys, "08 mean recall non-decreasing across beam sweep {20,50,100,200,500}",
            ok and elapsed < 300, elapsed, 300,
            " ".join(f"{m:.3f}" for m in means))
    assert ok, means
    assert elapsed < 300


def test_09_weight_mode_parity(capsys):
    t0 = time.monotonic()
    vecs, attrs, qvecs, filters, ks, gt = range_workload()
    g_t = built_index("merged", base_params())
    ws = derive_weights(vecs, attrs, (0.0, 1.0, 10.0), seed=0)
    p_w = dataclass_replace(base_params(), mode="weight", weights=tuple(ws))
    g_w = built_index("weights", p_w)
    r_t = banded_recall_under_dc_budget(g_t, qvecs, filters, gt, ks, K, FINE_BEAMS, DC_BUDGET)
    r_w = banded_recall_under_dc_budget(g_w, qvecs, filters, gt, ks, K, FINE_BEAMS, DC_BUDGET)
    gaps = {b: r_t[b] - r_w[b] for b in BANDS}
    ok = all(abs(gaps[b]) <= 0.05 for b in BANDS)
    elapsed = time.monotonic() - t0
    _report(capsys, "09 weight-mode parity with threshold mode at equal DC budget",
            ok and elapsed < 1200, elapsed, 1200,
            " ".join(f"1/{b}:{gaps[b]:+.3f}" for b in BANDS))
    assert ok, (r_t, r_w)
    assert elapsed < 1200


def test_10_serialization(capsys, tmp_path):
    t0 = time.monotonic()
    g, vecs, attrs, _ = structural_graph()
    p1, p2 = tmp_path / "a.idx", tmp_path / "b.idx"
    g.save(p1)
    g2 = JointGraph.load(p1)
    g2.save(p2)
    ok = p1.read_bytes() == p2.read_bytes()
    rng = np.random.Generator(np.random.PCG64(10))
    _, f_all, _ = gen_range_workload(5000, 20, seed=3)
    for i in range(20):
        q = rng.standard_normal(16).astype(np.float32)
        a = query(g, q, f_all[i], SearchParams(k=K, l_search=100))
        b = query(g2, q, f_all[i], SearchParams(k=K, l_search=100))
        ok &= a.ids.tolist() == b.ids.tolist()
        ok &= a.matches.tolist() == b.matches.tolist()
        ok &= a.dc_count == b.dc_count
    elapsed = time.monotonic() - t0
    _report(capsys, "10 save/load/save byte-identical, loaded index answers identically",
            ok and elapsed < 30, elapsed, 30)
    assert ok
    assert elapsed < 30
