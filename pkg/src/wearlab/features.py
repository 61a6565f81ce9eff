"""Derived metrics consumed by prompts and models.

Training load follows the usual acute/chronic workload convention: acute
load is the trailing 7-day TRIMP total and chronic load is the trailing
28-day total divided by four (the average weekly load). Days without an
activity record count as rest days with zero load.

Clock-time aggregates (bedtime, wake time, midsleep) use circular
statistics on the 24 h clock. Everything else uses the sample (n-1)
standard deviation.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateBaselineError,
    EmptySeriesError,
    InsufficientHistoryError,
    MissingCohortError,
    OutOfRangeError,
    ZeroChronicLoadError,
)
from .ingest import (
    MINUTES_PER_DAY,
    DailyActivityRecord,
    Demographics,
    ExerciseLog,
    HealthRecord,
    ParticipantData,
    SleepRecord,
)

ACUTE_DAYS = 7
CHRONIC_DAYS = 28
ACWR_HIGH = 1.5
ACWR_LOW = 0.7


class AcwrBand(str, Enum):
    DETRAINING_RISK = "detraining-risk"
    NORMAL = "normal"
    ELEVATED_RISK = "elevated-risk"


# --- training load ------------------------------------------------------------

def _daily_trimp(daily: Sequence[DailyActivityRecord], as_of: date, days: int) -> list[float]:
    if not daily:
        raise EmptySeriesError("no activity records")
    first = min(r.date for r in daily)
    last = max(r.date for r in daily)
    if not first <= as_of <= last:
        raise ValueError(f"as_of {as_of} outside data range {first}..{last}")
    by_day = {r.date: (r.trimp or 0.0) for r in daily}
    return [by_day.get(as_of - timedelta(days=k), 0.0) for k in range(days)]


def acute_trimp(daily: Sequence[DailyActivityRecord], as_of: date) -> float:
    """TRIMP summed over the 7 calendar days ending at ``as_of`` (inclusive)."""
    return float(sum(_daily_trimp(daily, as_of, ACUTE_DAYS)))


def chronic_trimp(daily: Sequence[DailyActivityRecord], as_of: date) -> float:
    """Average weekly TRIMP over the 28 calendar days ending at ``as_of``."""
    loads = _daily_trimp(daily, as_of, CHRONIC_DAYS)
    first = min(r.date for r in daily)
    if (as_of - first).days + 1 < CHRONIC_DAYS:
        raise InsufficientHistoryError(
            f"need {CHRONIC_DAYS} days of history ending {as_of}, have {(as_of - first).days + 1}"
        )
    return float(sum(loads)) / 4.0


def acwr_band(ratio: float) -> AcwrBand:
    if ratio > ACWR_HIGH:
        return AcwrBand.ELEVATED_RISK
    if ratio < ACWR_LOW:
        return AcwrBand.DETRAINING_RISK
    return AcwrBand.NORMAL


def acwr_from_loads(acute: float, chronic: float) -> tuple[float, AcwrBand]:
    if chronic <= 0:
        raise ZeroChronicLoadError("chronic TRIMP is zero; ACWR undefined")
    ratio = acute / chronic
    return ratio, acwr_band(ratio)


def acwr(daily: Sequence[DailyActivityRecord], as_of: date) -> tuple[float, AcwrBand]:
    """Acute:chronic workload ratio and its risk band."""
    return acwr_from_loads(acute_trimp(daily, as_of), chronic_trimp(daily, as_of))


def format_acwr(ratio: float) -> str:
    return f"{ratio:.1f}"


@dataclass(frozen=True)
class LoadSummary:
    mean_fat_burn_per_day: float | None
    mean_vigorous_per_day: float | None
    trimp_min: float | None
    trimp_max: float | None
    acute_trimp: float
    chronic_trimp: float | None
    acwr: float | None
    acwr_band: AcwrBand | None


@dataclass(frozen=True)
class ExerciseSummary:
    logs: tuple[ExerciseLog, ...]  # most recent first, at most ``max_logs``
    mean_duration: float | None
    duration_min: float | None
    duration_max: float | None
    avg_hr_min: float | None
    avg_hr_max: float | None


def load_summary(daily: Sequence[DailyActivityRecord], as_of: date,
                 window_days: int = 30) -> LoadSummary:
    """Aggregate activity over the trailing ``window_days`` plus acute/chronic load."""
    start = as_of - timedelta(days=window_days - 1)
    window = [r for r in daily if start <= r.date <= as_of]
    fat = [r.fat_burn_minutes for r in window if r.fat_burn_minutes is not None]
    vig = [(r.cardio_minutes or 0.0) + (r.peak_minutes or 0.0) for r in window
           if r.cardio_minutes is not None or r.peak_minutes is not None]
    trimps = [r.trimp for r in window if r.trimp is not None]
    acute = acute_trimp(daily, as_of)
    try:
        chronic = chronic_trimp(daily, as_of)
        ratio, band = acwr_from_loads(acute, chronic)
    except InsufficientHistoryError:
        chronic, ratio, band = None, None, None
    except ZeroChronicLoadError:
        ratio, band = None, None
    return LoadSummary(
        mean_fat_burn_per_day=float(np.mean(fat)) if fat else None,
        mean_vigorous_per_day=float(np.mean(vig)) if vig else None,
        trimp_min=min(trimps) if trimps else None,
        trimp_max=max(trimps) if trimps else None,
        acute_trimp=acute,
        chronic_trimp=chronic,
        acwr=ratio,
        acwr_band=band,
    )


def exercise_summary(logs: Sequence[ExerciseLog], as_of: date | None = None,
                     max_logs: int = 10) -> ExerciseSummary:
    eligible = [x for x in logs if as_of is None or x.date <= as_of]
    recent = tuple(sorted(eligible, key=lambda x: x.date, reverse=True)[:max_logs])
    durations = [x.duration for x in recent]
    hrs = [x.avg_hr for x in recent if x.avg_hr is not None]
    return ExerciseSummary(
        logs=recent,
        mean_duration=float(np.mean(durations)) if durations else None,
        duration_min=min(durations) if durations else None,
        duration_max=max(durations) if durations else None,
        avg_hr_min=min(hrs) if hrs else None,
        avg_hr_max=max(hrs) if hrs else None,
    )


# --- circular clock statistics --------------------------------------------------

_TWO_PI = 2.0 * math.pi


def circular_mean(minutes: Iterable[float]) -> float | None:
    """Mean clock time in minutes after midnight, or None when undefined (R = 0)."""
    values = np.asarray(list(minutes), dtype=float)
    if values.size == 0:
        raise EmptySeriesError("no clock values")
    theta = values * _TWO_PI / MINUTES_PER_DAY
    s, c = np.sin(theta).sum(), np.cos(theta).sum()
    if math.hypot(s, c) < 1e-9 * values.size:
        return None
    return (math.atan2(s, c) * MINUTES_PER_DAY / _TWO_PI) % MINUTES_PER_DAY


def circular_sd(minutes: Iterable[float]) -> float:
    """Circular standard deviation sqrt(-2 ln R), expressed in clock minutes."""
    values = np.asarray(list(minutes), dtype=float)
    if values.size == 0:
        raise EmptySeriesError("no clock values")
    theta = values * _TWO_PI / MINUTES_PER_DAY
    r = min(1.0, math.hypot(np.sin(theta).mean(), np.cos(theta).mean()))
    if r <= 0.0:
        return math.inf
    return math.sqrt(max(0.0, -2.0 * math.log(r))) * MINUTES_PER_DAY / _TWO_PI


def anchored(minutes: float, anchor: float) -> float:
    """Linearise a clock time onto [anchor, anchor + 24h)."""
    return anchor + (minutes - anchor) % MINUTES_PER_DAY


def percentile_rank(value: float, sorted_values: Sequence[float]) -> float:
    """Midpoint empirical percentile: 100 * (#below + #equal / 2) / n."""
    n = len(sorted_values)
    if n == 0:
        raise MissingCohortError("empty cohort distribution")
    lo = bisect.bisect_left(sorted_values, value)
    hi = bisect.bisect_right(sorted_values, value)
    return 100.0 * (lo + 0.5 * (hi - lo)) / n


def sample_sd(values: Sequence[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def recent_z(values: Sequence[float], recent_window: int, baseline_window: int) -> float:
    """z of the mean of the last ``recent_window`` values against the last
    ``baseline_window`` values (sample SD)."""
    if recent_window < 1 or baseline_window < 2:
        raise ValueError("recent_window >= 1 and baseline_window >= 2 required")
    if len(values) < max(recent_window, baseline_window):
        raise InsufficientHistoryError(
            f"need {max(recent_window, baseline_window)} values, have {len(values)}"
        )
    baseline = np.asarray(values[-baseline_window:], dtype=float)
    sd = float(np.std(baseline, ddof=1))
    if sd == 0.0:
        raise DegenerateBaselineError("baseline standard deviation is zero")
    recent = np.asarray(values[-recent_window:], dtype=float)
    return (float(recent.mean()) - float(baseline.mean())) / sd


def score_band(sleep_score: float) -> str:
    """Sleep-score quality band with integer boundaries (non-integers floored)."""
    if not 0 <= sleep_score <= 100:
        raise OutOfRangeError(f"sleep score {sleep_score} outside 0..100")
    s = math.floor(sleep_score)
    if s >= 90:
        return "excellent"
    if s >= 80:
        return "good"
    if s >= 60:
        return "fair"
    return "poor"


# --- sleep summary -----------------------------------------------------------------

# Linearisation anchors (clock minutes): roughly twelve hours away from typical values.
CLOCK_ANCHORS = {"bedtime": 12 * 60, "midsleep": 15 * 60, "wake_time": 19 * 60}
STRATA = ("overall", "weekend", "workday")
PERCENTILE_STATS = ("mean", "sd", "median", "total")


@dataclass(frozen=True)
class Aggregate:
    metric: str
    stat: str
    stratum: str
    value: float | None
    kind: str  # clock | duration | number | fraction | count
    percentile: float | None = None
    cohort_p5: float | None = None
    cohort_p95: float | None = None

    @property
    def key(self) -> str:
        return f"{self.metric}.{self.stat}.{self.stratum}"


@dataclass(frozen=True)
class SleepSummary:
    aggregates: tuple[Aggregate, ...]
    n_nights: int
    n_weekend: int
    n_workday: int
    duration_z: float | None = None
    score_z: float | None = None
    missing_cohort: bool = False

    def get(self, key: str) -> Aggregate | None:
        for agg in self.aggregates:
            if agg.key == key:
                return agg
        return None

    def value(self, key: str) -> float | None:
        agg = self.get(key)
        return None if agg is None else agg.value


@dataclass(frozen=True)
class CohortReference:
    """(age bucket, gender) -> aggregate key -> sorted sample values."""

    groups: dict[tuple[str, str], dict[str, tuple[float, ...]]] = field(default_factory=dict)

    def distribution(self, demo: Demographics, key: str) -> tuple[float, ...] | None:
        return self.groups.get((demo.age_bucket, demo.gender), {}).get(key)

    def has_group(self, demo: Demographics) -> bool:
        return (demo.age_bucket, demo.gender) in self.groups


def midsleep(rec: SleepRecord) -> float | None:
    if rec.bedtime is None or rec.wake_time is None:
        return None
    span = (rec.wake_time - rec.bedtime) % MINUTES_PER_DAY
    return (rec.bedtime + span / 2.0) % MINUTES_PER_DAY


def time_to_quality_sleep(rec: SleepRecord) -> float | None:
    if rec.bedtime is None or rec.fall_asleep_time is None:
        return None
    return float((rec.fall_asleep_time - rec.bedtime) % MINUTES_PER_DAY)


def _is_weekend(d: date) -> bool:
    return d.weekday() >= 5


def _clock_aggregates(metric: str, values: list[float], stratum: str) -> list[Aggregate]:
    if not values:
        return []
    anchor = CLOCK_ANCHORS[metric]
    lin = sorted(anchored(v, anchor) for v in values)
    mean = circular_mean(values)
    return [
        Aggregate(metric, "mean", stratum, mean, "clock"),
        Aggregate(metric, "sd", stratum, circular_sd(values), "duration"),
        Aggregate(metric, "median", stratum, float(np.median(lin)) % MINUTES_PER_DAY, "clock"),
        Aggregate(metric, "earliest", stratum, lin[0] % MINUTES_PER_DAY, "clock"),
        Aggregate(metric, "latest", stratum, lin[-1] % MINUTES_PER_DAY, "clock"),
    ]


def _linear_aggregates(metric: str, values: list[float], stratum: str, kind: str,
                       stats: Sequence[str] = ("mean", "sd", "min", "max")) -> list[Aggregate]:
    if not values:
        return []
    compute = {
        "mean": lambda v: float(np.mean(v)),
        "sd": sample_sd,
        "min": lambda v: float(min(v)),
        "max": lambda v: float(max(v)),
    }
    return [Aggregate(metric, s, stratum, compute[s](values), "duration" if s == "sd" and kind == "duration" else kind)
            for s in stats]


def _cohort_scale(agg: Aggregate, value: float) -> float:
    if agg.kind == "clock":
        return anchored(value, CLOCK_ANCHORS[agg.metric])
    return value


def _nightly(nights: Sequence[SleepRecord], getter) -> list[float]:
    return [float(v) for v in (getter(r) for r in nights) if v is not None]


def sleep_summary(sleep: Sequence[SleepRecord], cohort: CohortReference | None = None,
                  demo: Demographics | None = None, *, strict: bool = False,
                  z_recent: int = 3, z_baseline: int = 30) -> SleepSummary:
    """Aggregate nightly sleep records, optionally annotated with cohort percentiles.

    With a cohort but no matching demographic group, percentiles are left
    empty and ``missing_cohort`` is set; ``strict=True`` raises instead.
    """
    if not sleep:
        raise EmptySeriesError("no sleep records")
    nights = sorted(sleep, key=lambda r: r.date)
    strata = {
        "overall": nights,
        "weekend": [r for r in nights if _is_weekend(r.date)],
        "workday": [r for r in nights if not _is_weekend(r.date)],
    }
    aggs: list[Aggregate] = []
    for stratum, recs in strata.items():
        aggs += _clock_aggregates("bedtime", _nightly(recs, lambda r: r.bedtime), stratum)
        aggs += _clock_aggregates("wake_time", _nightly(recs, lambda r: r.wake_time), stratum)
        aggs += _clock_aggregates("midsleep", _nightly(recs, midsleep), stratum)
        aggs += _linear_aggregates("sleep_duration", _nightly(recs, lambda r: r.sleep_duration),
                                   stratum, "duration")
        aggs += _linear_aggregates("sleep_score", _nightly(recs, lambda r: r.sleep_score),
                                   stratum, "number")
    aggs += _linear_aggregates("time_to_quality_sleep", _nightly(nights, time_to_quality_sleep),
                               "overall", "duration", ("mean", "min", "max"))
    for metric, getter, kind in (
        ("waso", lambda r: r.waso, "duration"),
        ("efficiency", lambda r: r.efficiency, "fraction"),
        ("light_sleep", lambda r: r.light_sleep, "duration"),
        ("deep_sleep", lambda r: r.deep_sleep, "duration"),
        ("rem_sleep", lambda r: r.rem_sleep, "duration"),
        ("restlessness", lambda r: r.restlessness, "number"),
    ):
        aggs += _linear_aggregates(metric, _nightly(nights, getter), "overall", kind, ("mean",))
    nap_counts = _nightly(nights, lambda r: r.nap_count)
    nap_minutes = _nightly(nights, lambda r: r.nap_duration)
    total_naps = sum(nap_counts)
    if nap_counts:
        aggs.append(Aggregate("nap_count", "total", "overall", float(total_naps), "count"))
    if total_naps > 0:
        aggs.append(Aggregate("nap_length", "mean", "overall", sum(nap_minutes) / total_naps,
                              "number"))

    missing = False
    if cohort is not None:
        if demo is None or not cohort.has_group(demo):
            if strict:
                raise MissingCohortError(
                    f"no cohort reference for {demo.age_bucket if demo else None}/"
                    f"{demo.gender if demo else None}"
                )
            missing = True
        else:
            aggs = [_annotate(a, cohort.distribution(demo, a.key)) for a in aggs]

    durations = _nightly(nights, lambda r: r.sleep_duration)
    scores = _nightly(nights, lambda r: r.sleep_score)
    return SleepSummary(
        aggregates=tuple(aggs),
        n_nights=len(nights),
        n_weekend=len(strata["weekend"]),
        n_workday=len(strata["workday"]),
        duration_z=_safe_z(durations, z_recent, z_baseline),
        score_z=_safe_z(scores, z_recent, z_baseline),
        missing_cohort=missing,
    )


def _safe_z(values: list[float], recent: int, baseline: int) -> float | None:
    baseline = min(baseline, len(values))
    if baseline < 2 or len(values) < recent:
        return None
    try:
        return recent_z(values, recent, baseline)
    except DegenerateBaselineError:
        return None


def _annotate(agg: Aggregate, dist: tuple[float, ...] | None) -> Aggregate:
    if agg.stat not in PERCENTILE_STATS or agg.value is None or not dist:
        return agg
    p5, p95 = np.percentile(dist, [5, 95])
    if agg.kind == "clock":
        p5, p95 = p5 % MINUTES_PER_DAY, p95 % MINUTES_PER_DAY
    return Aggregate(agg.metric, agg.stat, agg.stratum, agg.value, agg.kind,
                     percentile=percentile_rank(_cohort_scale(agg, agg.value), dist),
                     cohort_p5=float(p5), cohort_p95=float(p95))


def build_cohort_reference(participants: Iterable[ParticipantData]) -> CohortReference:
    """Collect per-participant sleep aggregates grouped by (age bucket, gender)."""
    groups: dict[tuple[str, str], dict[str, list[float]]] = {}
    for p in participants:
        if p.demographics is None or not p.sleep:
            continue
        summary = sleep_summary(p.sleep)
        bucket = groups.setdefault((p.demographics.age_bucket, p.demographics.gender), {})
        for agg in summary.aggregates:
            if agg.stat in PERCENTILE_STATS and agg.value is not None and math.isfinite(agg.value):
                bucket.setdefault(agg.key, []).append(_cohort_scale(agg, agg.value))
    return CohortReference({
        key: {k: tuple(sorted(v)) for k, v in sorted(dists.items())}
        for key, dists in sorted(groups.items())
    })


# --- health summary ---------------------------------------------------------------

HEALTH_METRICS = ("resting_hr", "hrv_rmssd", "respiratory_rate")


@dataclass(frozen=True)
class HealthMetricSummary:
    mean: float
    sd: float
    today: float | None
    z: float | None
    week_min: float | None
    week_max: float | None
    n: int


@dataclass(frozen=True)
class HealthSummary:
    as_of: date
    metrics: dict[str, HealthMetricSummary]
    errors: dict[str, EmptySeriesError]


def health_summary(health: Sequence[HealthRecord], as_of: date | None = None,
                   baseline_days: int = 30, week_days: int = 7) -> HealthSummary:
    """Per-metric baseline mean/SD, today's z-score and the past-week range.

    Missing values are skipped per metric; a metric with no values in the
    baseline window is reported in ``errors`` while the others are computed.
    """
    if not health:
        raise EmptySeriesError("no health records")
    as_of = as_of or max(r.date for r in health)
    start = as_of - timedelta(days=baseline_days - 1)
    week_start = as_of - timedelta(days=week_days - 1)
    window = sorted((r for r in health if start <= r.date <= as_of), key=lambda r: r.date)
    metrics: dict[str, HealthMetricSummary] = {}
    errors: dict[str, EmptySeriesError] = {}
    for name in HEALTH_METRICS:
        series = [(r.date, getattr(r, name)) for r in window if getattr(r, name) is not None]
        if not series:
            errors[name] = EmptySeriesError(name)
            continue
        values = [v for _, v in series]
        today = series[-1][1] if series[-1][0] == as_of else None
        z = None
        if today is not None and len(values) >= 2:
            try:
                z = recent_z(values, 1, len(values))
            except DegenerateBaselineError:
                z = None
        week = [v for d, v in series if d >= week_start]
        metrics[name] = HealthMetricSummary(
            mean=float(np.mean(values)),
            sd=sample_sd(values),
            today=today,
            z=z,
            week_min=min(week) if week else None,
            week_max=max(week) if week else None,
            n=len(values),
        )
    return HealthSummary(as_of=as_of, metrics=metrics, errors=errors)


# --- bundled feature summary --------------------------------------------------------

@dataclass(frozen=True)
class FeatureSummary:
    participant_id: str
    as_of: date
    load: LoadSummary | None
    exercise: ExerciseSummary | None
    sleep: SleepSummary | None
    recent_sleep: SleepSummary | None  # trailing 30 days, no cohort
    health: HealthSummary | None
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        def enc(obj):
            if obj is None:
                return None
            if isinstance(obj, Enum):
                return obj.value
            if isinstance(obj, date):
                return obj.isoformat()
            if isinstance(obj, dict):
                return {k: enc(v) for k, v in obj.items()}
            if isinstance(obj, (list, tuple)):
                return [enc(v) for v in obj]
            if isinstance(obj, Exception):
                return str(obj)
            if isinstance(obj, float) and not math.isfinite(obj):
                return None
            if hasattr(obj, "__dataclass_fields__"):
                return {k: enc(getattr(obj, k)) for k in obj.__dataclass_fields__}
            return obj

        doc = enc(self)
        if self.sleep is not None:
            doc["sleep"]["aggregates"] = [
                {"key": a.key, **enc(asdict(a))} for a in self.sleep.aggregates
            ]
        return doc


def featurize(participant: ParticipantData, as_of: date | None = None,
              cohort: CohortReference | None = None, window_days: int = 30) -> FeatureSummary:
    """Compute every derived block available for one participant."""
    dates = [r.date for s in (participant.activity, participant.sleep, participant.health) for r in s]
    if not dates:
        raise EmptySeriesError(f"participant {participant.id} has no daily records")
    as_of = as_of or max(dates)
    notes: list[str] = []
    load = exercise = sleep = recent = health = None
    activity = [r for r in participant.activity if r.date <= as_of]
    if activity and activity[-1].date >= as_of - timedelta(days=6):
        try:
            load = load_summary(activity, min(as_of, activity[-1].date), window_days)
        except ValueError as exc:
            notes.append(f"load: {exc}")
    if participant.exercises:
        exercise = exercise_summary(participant.exercises, as_of)
    nights = [r for r in participant.sleep if r.date <= as_of]
    if nights:
        sleep = sleep_summary(nights, cohort, participant.demographics)
        if sleep.missing_cohort:
            notes.append("sleep: no cohort reference for demographic group; percentiles omitted")
        start = as_of - timedelta(days=window_days - 1)
        recent_nights = [r for r in nights if r.date >= start]
        if recent_nights:
            recent = sleep_summary(recent_nights)
    days = [r for r in participant.health if r.date <= as_of]
    if days:
        health = health_summary(days, as_of, window_days)
        notes += [f"health: no {name} values" for name in health.errors]
    return FeatureSummary(participant.id, as_of, load, exercise, sleep, recent, health,
                          tuple(notes))
