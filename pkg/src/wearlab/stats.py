"""Evaluation statistics: ranking metrics, bootstrap inference, rank-sum tests
with FDR control, and inter-rater agreement.

Random resampling uses a counter-based SplitMix64 generator so that any
implementation following the same recipe reproduces the same resamples:

    mix64(z)          = SplitMix64 finaliser (shifts 30/27/31, the usual multipliers)
    key(seed, task)   = mix64(mix64(seed) + task * GAMMA)            (mod 2**64)
    draw(key, j)      = mix64(key + (j + 1) * GAMMA)
    index(key, j, n)  = draw(key, j) mod n

Bootstrap iteration ``b`` uses task ``b``; its ``r``-th redraw (after an
undefined statistic) continues the same stream at draws ``r*n .. r*n+n-1``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateVarianceError,
    EmptyDataError,
    EmptySampleError,
    InsufficientPairsError,
    NoPositiveError,
    OutOfRangeError,
    ResampleExhaustionError,
    SingleClassError,
    WearlabError,
)

GAMMA = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


# --- RNG -------------------------------------------------------------------------------

def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 output function on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, task: int) -> int:
    base = int(mix64(np.array([seed & _MASK], dtype=np.uint64))[0])
    return int(mix64(np.array([(base + task * GAMMA) & _MASK], dtype=np.uint64))[0])


def draws(key: int, start: int, count: int) -> np.ndarray:
    j = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(key) + j * np.uint64(GAMMA))


def resample_indices(seed: int, task: int, n: int, attempt: int = 0) -> np.ndarray:
    return (draws(stream_key(seed, task), attempt * n, n) % np.uint64(n)).astype(np.intp)


# --- ranking metrics -----------------------------------------------------------------------

def rankdata(values: Sequence[float]) -> np.ndarray:
    """Ranks starting at 1 with ties given their average rank."""
    x = np.asarray(values, dtype=float)
    if np.isnan(x).any():
        raise ValueError("NaN in values to rank")
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    return ((ends - counts + 1 + ends) / 2.0)[inverse.reshape(-1)]


def _binary(scores: Sequence[float], labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores but {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return s, y.astype(bool)


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """P(random positive scores above random negative), ties counting one half."""
    s, y = _binary(scores, labels)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUROC needs both classes")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Average precision: sum over score thresholds of precision x recall increment."""
    s, y = _binary(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise NoPositiveError("AUPRC needs at least one positive")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(y)[last_of_group]
    seen = (np.arange(1, s.size + 1))[last_of_group]
    d_tp = np.diff(np.r_[0, tp])
    return float(np.sum((tp / seen) * d_tp) / n_pos)


def _curve_counts(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, int]:
    s, y = _binary(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(y)[last_of_group]
    fp = np.cumsum(~y)[last_of_group]
    return s[last_of_group], tp, fp, int(y.sum()), int((~y).sum())


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) points from (inf, 0, 0) down to the lowest score."""
    thr, tp, fp, n_pos, n_neg = _curve_counts(scores, labels)
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC curve needs both classes")
    return [(math.inf, 0.0, 0.0)] + [(float(t), f / n_neg, p / n_pos) for t, p, f in zip(thr, tp, fp)]


def pr_curve(scores: Sequence[float], labels: Sequence[int]) -> list[tuple[float, float, float]]:
    """(threshold, recall, precision) points, one per distinct score, highest first."""
    thr, tp, fp, n_pos, _ = _curve_counts(scores, labels)
    if n_pos == 0:
        raise NoPositiveError("PR curve needs at least one positive")
    return [(float(t), p / n_pos, p / (p + f)) for t, p, f in zip(thr, tp, fp)]


# --- bootstrap --------------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricResult:
    name: str
    estimate: float
    lower: float
    upper: float
    iterations: int
    seed: int
    n: int

    def to_json(self) -> dict:
        return {"name": self.name, "estimate": self.estimate, "ci_lower": self.lower,
                "ci_upper": self.upper, "bootstrap": self.iterations, "seed": self.seed,
                "n": self.n}


def _as_columns(data) -> tuple[np.ndarray, ...]:
    cols = tuple(np.asarray(c) for c in data) if isinstance(data, tuple) else (np.asarray(data),)
    n = len(cols[0])
    if n == 0:
        raise EmptyDataError("bootstrap needs non-empty data")
    if any(len(c) != n for c in cols):
        raise ValueError("bootstrap columns must be aligned")
    return cols


def _defined(value: float) -> bool:
    return value is not None and math.isfinite(value)


def bootstrap_statistics(stat: Callable[..., float], data, B: int = 1000, seed: int = 0, *,
                         max_redraws: int = 100, task_offset: int = 0) -> np.ndarray:
    """Statistic on each of ``B`` resamples; undefined resamples are redrawn."""
    cols = _as_columns(data)
    n = len(cols[0])
    out = np.empty(B)
    for b in range(B):
        for attempt in range(max_redraws + 1):
            idx = resample_indices(seed, task_offset + b, n, attempt)
            try:
                value = stat(*(c[idx] for c in cols))
            except WearlabError:
                continue
            if _defined(value):
                out[b] = value
                break
        else:
            raise ResampleExhaustionError(
                f"iteration {b}: statistic undefined on {max_redraws + 1} consecutive resamples"
            )
    return out


def percentile_ci(values: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    tail = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(values, [tail, 100.0 - tail])
    return float(lo), float(hi)


def bootstrap_ci(stat: Callable[..., float], data, B: int = 1000, seed: int = 0, *,
                 name: str = "statistic", level: float = 0.95, max_redraws: int = 100,
                 task_offset: int = 0) -> MetricResult:
    """Point estimate plus percentile bootstrap CI.

    ``data`` is one array or a tuple of aligned arrays resampled by row; the
    statistic receives the resampled arrays as positional arguments.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    cols = _as_columns(data)
    estimate = float(stat(*cols))
    values = bootstrap_statistics(stat, cols, B, seed, max_redraws=max_redraws,
                                  task_offset=task_offset)
    lo, hi = percentile_ci(values, level)
    return MetricResult(name, estimate, lo, hi, B, seed, len(cols[0]))


def paired_bootstrap_test(metric: Callable[[np.ndarray, np.ndarray], float],
                          scores_a: Sequence[float], scores_b: Sequence[float],
                          labels: Sequence[int], B: int = 1000, seed: int = 0, *,
                          max_redraws: int = 100) -> float:
    """Two-sided p-value for metric(a) != metric(b) on shared resamples.

    p = min(1, 2 (k + 1) / (B + 1)) where k counts resamples whose difference
    is zero or has the opposite sign to the observed difference.
    """
    a, b, y = (np.asarray(v) for v in (scores_a, scores_b, labels))
    if not (len(a) == len(b) == len(y)):
        raise ValueError("scores_a, scores_b and labels must be aligned")
    observed = metric(a, y) - metric(b, y)
    if observed == 0:
        return 1.0
    diffs = bootstrap_statistics(lambda sa, sb, yy: metric(sa, yy) - metric(sb, yy), (a, b, y),
                                 B, seed, max_redraws=max_redraws)
    flips = int(np.sum(diffs * np.sign(observed) <= 0))
    return min(1.0, 2.0 * (flips + 1) / (B + 1))


# --- rank-sum test and FDR ---------------------------------------------------------------

@dataclass(frozen=True)
class RankSumResult:
    statistic: float  # rank sum of the first sample
    z: float
    p_value: float
    p_adjusted: float | None = None


def _normal_two_sided(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def wilcoxon_rank_sum(x: Sequence[float], y: Sequence[float], *, exact: bool = False) -> RankSumResult:
    """Two-sided Wilcoxon rank-sum test.

    Default: normal approximation with tie correction and no continuity
    correction. ``exact=True`` enumerates every assignment of the pooled
    (average) ranks, practical only for small samples.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise EmptySampleError("rank-sum test needs two non-empty samples")
    n1, n2 = x.size, y.size
    n = n1 + n2
    ranks = rankdata(np.concatenate([x, y]))
    r1 = float(ranks[:n1].sum())
    mu = n1 * (n + 1) / 2.0
    _, counts = np.unique(ranks, return_counts=True)
    ties = float(np.sum(counts.astype(float) ** 3 - counts))
    var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1))) if n > 1 else 0.0
    z = 0.0 if var <= 0 else (r1 - mu) / math.sqrt(var)
    if exact:
        if math.comb(n, n1) > 2_000_000:
            raise ValueError("exact enumeration too large; use the normal approximation")
        observed = abs(r1 - mu) - 1e-9
        hits = total = 0
        for combo in itertools.combinations(ranks, n1):
            total += 1
            hits += abs(sum(combo) - mu) >= observed
        return RankSumResult(r1, z, hits / total)
    p = 1.0 if var <= 0 else _normal_two_sided(z)
    return RankSumResult(r1, z, min(1.0, p))


def benjamini_hochberg(p_values: Sequence[float]) -> list[float]:
    """BH step-up adjusted p-values, returned in input order."""
    p = np.asarray(p_values, dtype=float)
    m = p.size
    if m == 0:
        return []
    if ((p < 0) | (p > 1)).any():
        raise OutOfRangeError("p-values must lie in [0, 1]")
    order = np.argsort(p, kind="mergesort")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum(1.0, np.minimum.accumulate(scaled[::-1])[::-1])
    adjusted = np.maximum(adjusted, p[order])  # guard against rounding below the raw value
    out = np.empty(m)
    out[order] = adjusted
    return [float(v) for v in out]


def wilcoxon_bh(groups: Sequence[tuple[Sequence[float], Sequence[float]]], *,
                exact: bool = False) -> list[RankSumResult]:
    """Rank-sum test per (x, y) pair with BH adjustment across the family."""
    raw = [wilcoxon_rank_sum(x, y, exact=exact) for x, y in groups]
    adjusted = benjamini_hochberg([r.p_value for r in raw])
    return [RankSumResult(r.statistic, r.z, r.p_value, a) for r, a in zip(raw, adjusted)]


# --- agreement ----------------------------------------------------------------------------

LIKERT = (1, 2, 3, 4, 5)


def _pair(a: Sequence[float], b: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("rating vectors must be aligned")
    if a.size < 2:
        raise InsufficientPairsError(f"need at least 2 paired ratings, got {a.size}")
    return a, b


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    a, b = _pair(a, b)
    ra, rb = rankdata(a), rankdata(b)
    da, db = ra - ra.mean(), rb - rb.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0:
        raise DegenerateVarianceError("Spearman undefined: a rater gave constant ratings")
    return float(np.clip((da @ db) / denom, -1.0, 1.0))


def weighted_kappa(a: Sequence[int], b: Sequence[int], categories: Sequence[int] = LIKERT) -> float:
    """Cohen's kappa with quadratic disagreement weights."""
    a, b = _pair(a, b)
    index = {c: i for i, c in enumerate(categories)}
    k = len(categories)
    observed = np.zeros((k, k))
    for x, y in zip(a, b):
        if x not in index or y not in index:
            raise OutOfRangeError(f"rating outside {tuple(categories)}")
        observed[index[x], index[y]] += 1
    observed /= a.size
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0))
    i, j = np.indices((k, k))
    weights = (i - j) ** 2 / (k - 1) ** 2
    disagreement_expected = float((weights * expected).sum())
    if disagreement_expected == 0:
        raise DegenerateVarianceError("weighted kappa undefined: no expected disagreement")
    return 1.0 - float((weights * observed).sum()) / disagreement_expected


def kendalls_w(ratings: np.ndarray) -> float:
    """Kendall's coefficient of concordance with tie correction.

    ``ratings`` is (m raters, n items); each rater's ratings are ranked with
    average ranks. W = 12 S / (m^2 (n^3 - n) - m sum_j T_j).
    """
    r = np.asarray(ratings, dtype=float)
    if r.ndim != 2 or r.shape[0] < 2 or r.shape[1] < 2:
        raise InsufficientPairsError("Kendall's W needs at least 2 raters and 2 items")
    m, n = r.shape
    ranks = np.vstack([rankdata(row) for row in r])
    totals = ranks.sum(axis=0)
    s = float(np.sum((totals - totals.mean()) ** 2))
    ties = 0.0
    for row in r:
        _, counts = np.unique(row, return_counts=True)
        ties += float(np.sum(counts.astype(float) ** 3 - counts))
    denom = m * m * (n ** 3 - n) - m * ties
    if denom == 0:
        raise DegenerateVarianceError("Kendall's W undefined: every rater tied all items")
    return float(np.clip(12.0 * s / denom, 0.0, 1.0))


def icc31(ratings: np.ndarray) -> float:
    """ICC(3,1): two-way mixed effects, single rater, consistency.

    ``ratings`` is (n items, k raters). Sums of squares are accumulated
    scaled by n*k so integer ratings stay in exact integer arithmetic.
    """
    x = np.asarray(ratings)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise InsufficientPairsError("ICC needs at least 2 items and 2 raters")
    n, k = x.shape
    if np.issubdtype(x.dtype, np.integer) or np.all(np.asarray(x, dtype=float) % 1 == 0):
        vals = [[int(v) for v in row] for row in np.asarray(x, dtype=float)]
    else:
        vals = x.astype(float).tolist()
    total = sum(sum(row) for row in vals)
    sq = sum(v * v for row in vals for v in row)
    rows = sum(sum(row) ** 2 for row in vals)
    cols = sum(sum(vals[i][j] for i in range(n)) ** 2 for j in range(k))
    ss_rows = n * rows - total * total
    ss_cols = k * cols - total * total
    ss_err = n * k * sq - total * total - ss_rows - ss_cols
    denom = (k - 1) * (ss_rows + ss_err)
    if denom == 0:
        raise DegenerateVarianceError("ICC undefined: no variance in ratings")
    return float((ss_rows * (k - 1) - ss_err) / denom)


# --- rating tables --------------------------------------------------------------------------

@dataclass(frozen=True)
class Rating:
    case_id: str
    section: str
    principle: str
    rater: str
    rating: int
    elapsed_minutes: float | None = None
    source: str = ""

    @property
    def item(self) -> tuple[str, str, str, str]:
        return (self.case_id, self.section, self.principle, self.source)


RATING_HEADER = ("case_id", "section", "principle", "rater", "rating", "elapsed_minutes", "source")


def parse_ratings(text: str) -> list[Rating]:
    reader = csv.DictReader(io.StringIO(text))
    required = set(RATING_HEADER[:5])
    if reader.fieldnames is None or not required <= set(reader.fieldnames):
        raise ValueError(f"rating CSV header must include {sorted(required)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            value = int(row["rating"])
        except ValueError:
            raise ValueError(f"line {lineno}: rating {row['rating']!r} is not an integer") from None
        if value not in LIKERT:
            raise OutOfRangeError(f"line {lineno}: rating {value} outside 1..5")
        elapsed = (row.get("elapsed_minutes") or "").strip()
        out.append(Rating(row["case_id"], row["section"], row["principle"], row["rater"], value,
                          float(elapsed) if elapsed else None, (row.get("source") or "").strip()))
    return out


@dataclass(frozen=True)
class AgreementValue:
    value: float | None
    lower: float | None
    upper: float | None
    n: int
    error: str | None = None

    def to_json(self) -> dict:
        return {"value": self.value, "ci_lower": self.lower, "ci_upper": self.upper,
                "n": self.n, "error": self.error}


@dataclass(frozen=True)
class AgreementReport:
    rater_a: str
    rater_b: str
    spearman: AgreementValue
    weighted_kappa: AgreementValue
    icc31: AgreementValue
    kendalls_w: AgreementValue
    raters: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "rater_a": self.rater_a, "rater_b": self.rater_b, "raters": list(self.raters),
            "spearman": self.spearman.to_json(), "weighted_kappa": self.weighted_kappa.to_json(),
            "icc31": self.icc31.to_json(), "kendalls_w": self.kendalls_w.to_json(),
        }


def _ratings_matrix(table: Sequence[Rating], raters: Sequence[str]) -> np.ndarray:
    """(items rated by every listed rater) x raters, items in sorted order."""
    by_item: dict[tuple, dict[str, int]] = {}
    for r in table:
        if r.rater in raters:
            cell = by_item.setdefault(r.item, {})
            if r.rater in cell:
                raise ValueError(f"rater {r.rater} rated {r.item} twice")
            cell[r.rater] = r.rating
    rows = [[cell[q] for q in raters] for _, cell in sorted(by_item.items())
            if all(q in cell for q in raters)]
    return np.array(rows, dtype=int).reshape(len(rows), len(raters))


def _agreement(fn: Callable[[np.ndarray], float], matrix: np.ndarray, B: int, seed: int,
               task_offset: int) -> AgreementValue:
    n = matrix.shape[0]
    try:
        value = fn(matrix)
    except (InsufficientPairsError, DegenerateVarianceError) as exc:
        return AgreementValue(None, None, None, n, f"{type(exc).__name__}: {exc}")
    try:
        values = bootstrap_statistics(fn, matrix, B, seed, task_offset=task_offset)
        lo, hi = percentile_ci(values)
    except ResampleExhaustionError as exc:
        return AgreementValue(value, None, None, n, f"ResampleExhaustionError: {exc}")
    return AgreementValue(value, lo, hi, n)


def agreement_metrics(table: Sequence[Rating], rater_a: str, rater_b: str, *,
                      raters: Sequence[str] | None = None, B: int = 1000,
                      seed: int = 0) -> AgreementReport:
    """Pairwise Spearman/kappa/ICC for two raters plus Kendall's W over ``raters``."""
    all_raters = tuple(sorted({r.rater for r in table})) if raters is None else tuple(raters)
    for q in (rater_a, rater_b):
        if q not in {r.rater for r in table}:
            raise InsufficientPairsError(f"rater {q!r} has no ratings")
    pair = _ratings_matrix(table, (rater_a, rater_b))
    everyone = _ratings_matrix(table, all_raters)
    return AgreementReport(
        rater_a, rater_b,
        spearman=_agreement(lambda m: spearman(m[:, 0], m[:, 1]), pair, B, seed, 0),
        weighted_kappa=_agreement(lambda m: weighted_kappa(m[:, 0], m[:, 1]), pair, B, seed, 1 << 32),
        icc31=_agreement(icc31, pair, B, seed, 2 << 32),
        kendalls_w=_agreement(lambda m: kendalls_w(m.T), everyone, B, seed, 3 << 32),
        raters=all_raters,
    )


GROUP_FIELDS = {"section": "section", "principle": "principle", "response-source": "source",
                "source": "source", "rater": "rater", "case": "case_id"}


@dataclass(frozen=True)
class GroupSummary:
    key: tuple[str, ...]
    mean: float
    n: int
    lower: float
    upper: float

    def to_json(self, group_by: Sequence[str]) -> dict:
        return {"group": dict(zip(group_by, self.key)), "mean": self.mean, "n": self.n,
                "ci_lower": self.lower, "ci_upper": self.upper}


def aggregate_ratings(table: Iterable[Rating], group_by: Sequence[str] = ("section",),
                      B: int = 1000, seed: int = 0) -> list[GroupSummary]:
    """Mean rating with a percentile bootstrap CI per group, groups in sorted order."""
    try:
        attrs = [GROUP_FIELDS[g] for g in group_by]
    except KeyError as exc:
        raise ValueError(f"cannot group by {exc.args[0]!r}; options: {sorted(GROUP_FIELDS)}") from None
    groups: dict[tuple[str, ...], list[int]] = {}
    for r in table:
        groups.setdefault(tuple(getattr(r, a) for a in attrs), []).append(r.rating)
    if not groups:
        raise EmptyDataError("no ratings to aggregate")
    out = []
    for g, (key, values) in enumerate(sorted(groups.items())):
        arr = np.asarray(values, dtype=float)
        res = bootstrap_ci(np.mean, arr, B, seed, task_offset=g << 32)
        out.append(GroupSummary(key, float(arr.mean()), arr.size, res.lower, res.upper))
    return out
