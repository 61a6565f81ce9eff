from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wearlab.errors import (
    DegenerateVarianceError,
    EmptyDataError,
    EmptySampleError,
    InsufficientPairsError,
    NoPositiveError,
    ResampleExhaustionError,
    SingleClassError,
)
from wearlab.stats import (
    Rating,
    aggregate_ratings,
    agreement_metrics,
    auprc,
    auroc,
    benjamini_hochberg,
    bootstrap_ci,
    icc31,
    kendalls_w,
    paired_bootstrap_test,
    parse_ratings,
    pr_curve,
    roc_curve,
    spearman,
    weighted_kappa,
    wilcoxon_bh,
    wilcoxon_rank_sum,
)

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _oracle_indices(seed: int, task: int, n: int) -> list[int]:
    key = _mix((_mix(seed & MASK) + task * GAMMA) & MASK)
    return [_mix((key + (j + 1) * GAMMA) & MASK) % n for j in range(n)]


def _pair_auroc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def _direct_ap(scores, labels) -> float:
    """Average precision: each positive contributes precision at its threshold."""
    total_pos = sum(labels)
    ap = 0.0
    for t in sorted(set(scores), reverse=True):
        above = [y for s, y in zip(scores, labels) if s >= t]
        new_pos = sum(y for s, y in zip(scores, labels) if s == t)
        if new_pos:
            ap += (new_pos / total_pos) * (sum(above) / len(above))
    return ap


# --- ranking metrics -----------------------------------------------------------------------

def test_auroc_examples():
    s = [0.9, 0.8, 0.2, 0.1]
    assert auroc(s, [1, 1, 0, 0]) == 1.0
    assert auroc(s, [1, 0, 1, 0]) == 0.75
    assert auroc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    with pytest.raises(SingleClassError):
        auroc([1, 2], [1, 1])


def test_auprc_examples():
    s = [0.9, 0.8, 0.2, 0.1]
    assert auprc(s, [1, 1, 0, 0]) == 1.0
    assert auprc(s, [1, 0, 1, 0]) == pytest.approx((1 / 1 + 2 / 3) / 2, abs=1e-15)
    with pytest.raises(NoPositiveError):
        auprc(s, [0, 0, 0, 0])


def test_auprc_chance_level():
    rng = np.random.default_rng(0)
    y = (rng.random(20_000) < 0.3).astype(int)
    assert abs(auprc(rng.random(20_000), y) - 0.3) < 0.02


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 1)), min_size=2, max_size=50))
def test_metrics_match_oracles(rows):
    scores = [s / 2 for s, _ in rows]
    labels = [y for _, y in rows]
    if 0 < sum(labels) < len(labels):
        assert abs(auroc(scores, labels) - _pair_auroc(scores, labels)) < 1e-12
    if sum(labels):
        assert abs(auprc(scores, labels) - _direct_ap(scores, labels)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-40, 40), min_size=4, max_size=40), st.integers(0, 2**31))
def test_auroc_rank_invariance(scores, seed):
    labels = np.random.default_rng(seed).integers(0, 2, len(scores))
    if labels.min() == labels.max():
        return
    s = np.array(scores) / 8  # coarse grid so exp stays strictly increasing in floats
    assert auroc(np.exp(s) * 3 + 1, labels) == auroc(s, labels)


def test_curves():
    s, y = [0.9, 0.8, 0.2, 0.1], [1, 0, 1, 0]
    roc = roc_curve(s, y)
    assert roc[0] == (math.inf, 0.0, 0.0) and roc[-1][1:] == (1.0, 1.0)
    area = sum((b[1] - a[1]) * (a[2] + b[2]) / 2 for a, b in zip(roc, roc[1:]))
    assert area == pytest.approx(auroc(s, y))
    pr = pr_curve(s, y)
    assert pr[0][1:] == (0.5, 1.0) and pr[-1][1] == 1.0


# --- bootstrap ----------------------------------------------------------------------------

def test_bootstrap_matches_rng_oracle():
    data = np.arange(1, 101, dtype=float)
    res = bootstrap_ci(np.mean, data, B=200, seed=42)
    oracle = np.array([np.mean(data[_oracle_indices(42, b, 100)]) for b in range(200)])
    lo, hi = np.percentile(oracle, [2.5, 97.5])
    assert (res.lower, res.upper) == (lo, hi)
    assert res.estimate == 50.5


def test_bootstrap_degenerate_cases():
    res = bootstrap_ci(np.mean, np.full(10, 3.0), B=50, seed=1)
    assert res.lower == res.upper == res.estimate == 3.0
    one = bootstrap_ci(np.mean, np.arange(5.0), B=1, seed=1)
    assert one.lower == one.upper == float(np.mean(np.arange(5.0)[_oracle_indices(1, 0, 5)]))
    with pytest.raises(EmptyDataError):
        bootstrap_ci(np.mean, np.array([]))


def test_bootstrap_redraws_undefined_resamples():
    y = np.array([1] + [0] * 9)
    s = np.linspace(0, 1, 10)
    res = bootstrap_ci(auroc, (s, y), B=100, seed=3)
    assert 0 <= res.lower <= res.upper <= 1
    with pytest.raises(ResampleExhaustionError):
        # two rows, one per class: half of all resamples are single-class
        bootstrap_ci(auroc, (np.array([0.0, 1.0]), np.array([0, 1])), B=200, seed=3, max_redraws=0)


def test_bootstrap_is_byte_identical():
    rng = np.random.default_rng(0)
    data = rng.normal(size=60)
    a, b = bootstrap_ci(np.mean, data, B=300, seed=9), bootstrap_ci(np.mean, data, B=300, seed=9)
    assert repr(a) == repr(b)


def test_paired_bootstrap():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 80)
    s = rng.normal(size=80)
    assert paired_bootstrap_test(auroc, s, s, y, B=200, seed=1) == 1.0
    p = paired_bootstrap_test(auroc, y + 0.1 * s, -y + 0.1 * s, y, B=200, seed=1)
    assert p < 0.01
    assert p == paired_bootstrap_test(auroc, y + 0.1 * s, -y + 0.1 * s, y, B=200, seed=1)


# --- rank-sum and BH --------------------------------------------------------------------------

def test_bh_example():
    assert benjamini_hochberg([0.01, 0.04, 0.03, 0.005]) == pytest.approx([0.02, 0.04, 0.04, 0.02])
    assert benjamini_hochberg([0.3]) == [0.3]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=30))
def test_bh_monotone_and_dominating(p):
    adj = benjamini_hochberg(p)
    assert all(a >= r for a, r in zip(adj, p))
    order = np.argsort(p, kind="mergesort")
    ranked = [adj[i] for i in order]
    assert all(x <= y for x, y in zip(ranked, ranked[1:]))


def test_rank_sum_identical_samples():
    r = wilcoxon_rank_sum([1, 2, 3, 4], [1, 2, 3, 4])
    assert r.p_value >= 0.99 and r.z == 0.0
    with pytest.raises(EmptySampleError):
        wilcoxon_rank_sum([], [1.0])


def test_rank_sum_matches_reference():
    stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(4)
    x, y = rng.integers(0, 6, 40), rng.integers(1, 7, 35)
    ours = wilcoxon_rank_sum(x, y)
    ref = stats.mannwhitneyu(x, y, alternative="two-sided", method="asymptotic", use_continuity=False)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-10)


def test_exact_rank_sum_small_sample():
    # x = {4, 5}, y = {1, 2, 3}: rank sum 9 is the most extreme of C(5,2) = 10 splits,
    # as is its mirror 3, so p = 2 / 10.
    assert wilcoxon_rank_sum([4, 5], [1, 2, 3], exact=True).p_value == pytest.approx(0.2)


def test_wilcoxon_bh_family():
    res = wilcoxon_bh([([1, 2, 3], [4, 5, 6]), ([1, 2, 3], [1, 2, 3])])
    assert [r.p_adjusted for r in res] == benjamini_hochberg([r.p_value for r in res])


# --- agreement ------------------------------------------------------------------------------

def test_perfect_agreement():
    a = [1, 2, 3, 4, 5, 3]
    assert spearman(a, a) == 1.0
    assert weighted_kappa(a, a) == 1.0
    assert icc31(np.array([a, a]).T) == 1.0
    assert kendalls_w(np.array([a, a, a])) == 1.0


def test_kappa_hand_example():
    # observed disagreement 1/32, expected 1/16 with weights (i - j)^2 / 16
    assert weighted_kappa([1, 1, 2, 2], [1, 2, 2, 3]) == pytest.approx(0.5, abs=1e-15)


def _oracle_w(ranks: np.ndarray) -> float:
    m, n = ranks.shape
    totals = ranks.sum(axis=0)
    s = sum((t - totals.mean()) ** 2 for t in totals)
    return 12 * s / (m * m * (n ** 3 - n))


def test_w_reversed_rater():
    same = [1, 2, 3, 4]
    assert kendalls_w(np.array([same, same, same[::-1]])) == pytest.approx(1 / 9, abs=1e-15)
    assert kendalls_w(np.array([same, same, same, same[::-1]])) == pytest.approx(0.25, abs=1e-15)


def test_w_matches_brute_force_without_ties():
    rng = np.random.default_rng(5)
    for _ in range(100):
        m, n = rng.integers(2, 6), rng.integers(2, 8)
        ranks = np.array([rng.permutation(n) + 1 for _ in range(m)], dtype=float)
        assert abs(kendalls_w(ranks) - _oracle_w(ranks)) < 1e-10


def _oracle_icc(x: np.ndarray) -> float:
    x = x.astype(float)
    n, k = x.shape
    grand = x.mean()
    msr = k * ((x.mean(axis=1) - grand) ** 2).sum() / (n - 1)
    resid = x - x.mean(axis=1, keepdims=True) - x.mean(axis=0) + grand
    mse = (resid ** 2).sum() / ((n - 1) * (k - 1))
    return (msr - mse) / (msr + (k - 1) * mse)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31))
def test_agreement_bounds_and_oracles(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(3, 15)), int(rng.integers(2, 5))
    x = rng.integers(1, 6, size=(n, k))
    perm = rng.permutation(n)
    for fn, lo, hi in ((lambda m: spearman(m[:, 0], m[:, 1]), -1, 1),
                       (lambda m: weighted_kappa(m[:, 0], m[:, 1]), -1, 1),
                       (icc31, -1, 1), (lambda m: kendalls_w(m.T), 0, 1)):
        try:
            v = fn(x)
        except DegenerateVarianceError:
            continue
        assert lo - 1e-12 <= v <= hi + 1e-12
        assert fn(x[perm]) == pytest.approx(v, abs=1e-12)
    try:
        assert icc31(x) == pytest.approx(_oracle_icc(x), abs=1e-10)
    except DegenerateVarianceError:
        pass


def test_icc_can_be_negative():
    assert icc31(np.array([[1, 5], [5, 1], [3, 3]])) < 0


def test_undefined_metrics_are_reported():
    with pytest.raises(DegenerateVarianceError):
        spearman([3, 3, 3], [1, 2, 3])
    with pytest.raises(InsufficientPairsError):
        weighted_kappa([1], [1])


def _table(rows) -> list[Rating]:
    return [Rating(c, s, "p", r, v) for c, s, r, v in rows]


def test_agreement_report_from_table():
    rows = [(f"c{i}", "sleep", rater, v) for i, (a, b) in enumerate([(1, 1), (2, 3), (4, 4), (5, 4), (3, 3)])
            for rater, v in (("A", a), ("B", b))]
    rep = agreement_metrics(_table(rows), "A", "B", B=100, seed=1)
    assert rep.spearman.n == 5 and rep.spearman.value == pytest.approx(spearman([1, 2, 4, 5, 3], [1, 3, 4, 4, 3]))
    const = _table([(f"c{i}", "s", r, 3) for i in range(4) for r in ("A", "B")])
    rep = agreement_metrics(const, "A", "B", B=10)
    assert rep.spearman.value is None and "DegenerateVarianceError" in rep.spearman.error
    with pytest.raises(InsufficientPairsError):
        agreement_metrics(const, "A", "Z", B=10)


def test_parse_ratings():
    text = "case_id,section,principle,rater,rating\nc1,insights,p,A,4\n"
    assert parse_ratings(text) == [Rating("c1", "insights", "p", "A", 4)]
    with pytest.raises(ValueError):
        parse_ratings("case_id,section,principle,rater,rating\nc1,s,p,A,7\n")


def test_aggregate_ratings():
    table = _table([("c1", "a", "r", 5), ("c2", "a", "r", 5), ("c1", "b", "r", 2), ("c2", "b", "r", 4)])
    out = aggregate_ratings(table, B=100)
    assert [(g.key, g.mean, g.n) for g in out] == [(("a",), 5.0, 2), (("b",), 3.0, 2)]
    assert out[0].lower == out[0].upper == 5.0
    with pytest.raises(EmptyDataError):
        aggregate_ratings([])


def test_aggregate_matches_flat_recomputation():
    rng = np.random.default_rng(7)
    table = [Rating(f"c{i}", f"s{rng.integers(3)}", f"p{rng.integers(2)}", "A", int(rng.integers(1, 6)))
             for i in range(200)]
    out = aggregate_ratings(table, ("section", "principle"), B=20)
    for g in out:
        flat = [r.rating for r in table if (r.section, r.principle) == g.key]
        assert g.n == len(flat) and g.mean == pytest.approx(sum(flat) / len(flat))
    assert [g.key for g in out] == sorted(g.key for g in out)


def test_w_tie_correction_full_ties_undefined():
    with pytest.raises(DegenerateVarianceError):
        kendalls_w(np.array([[2, 2, 2], [3, 3, 3]]))


def test_exhaustive_small_w():
    # every pair of permutations of 3 items against the deviance-sum formula
    perms = [np.array(p, dtype=float) + 1 for p in itertools.permutations(range(3))]
    for a, b in itertools.product(perms, repeat=2):
        ranks = np.stack([a, b])
        assert abs(kendalls_w(ranks) - _oracle_w(ranks)) < 1e-12
