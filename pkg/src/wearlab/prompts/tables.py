"""Plain-text tables and aggregate blocks embedded in the case-study prompts.

Tables are left-aligned columns separated by two spaces with trailing
whitespace stripped. Aggregate blocks are one statement per line.
"""

from __future__ import annotations

import math
from datetime import date
from typing import Any, Callable, Sequence

from ..errors import UnsupportedKindError
from ..features import (
    Aggregate,
    ExerciseSummary,
    HealthSummary,
    LoadSummary,
    SleepSummary,
    format_acwr,
)
from ..ingest import (
    WEEKDAYS,
    DailyActivityRecord,
    HealthRecord,
    SleepRecord,
    format_clock,
    format_duration,
)

REDACTED_DATE = "<year-month-day>"
SLEEP_GOAL_MINUTES = 480
NA = "N/A"


def fmt_date(d: date, redact: bool = False) -> str:
    return REDACTED_DATE if redact else d.isoformat()


def fmt_day(d: date, redact: bool = False) -> str:
    return f"{WEEKDAYS[d.weekday()]} {fmt_date(d, redact)}"


def _f1(v: float | None) -> str:
    return "NaN" if v is None else f"{float(v):.1f}"


def _f2(v: float | None) -> str:
    return "NaN" if v is None else f"{float(v):.2f}"


def _int(v: float | None) -> str:
    return NA if v is None else str(int(round(v)))


def _trunc(v: float | None) -> str:
    """Whole part only, truncated toward zero; used for spreads."""
    return NA if v is None else str(int(v))


def _plain(v: float | None) -> str:
    """Whole numbers without a decimal point, otherwise one decimal."""
    if v is None:
        return "NaN"
    return str(int(v)) if float(v).is_integer() else f"{v:.1f}"


def _clock(v: float | None) -> str:
    return "NaN" if v is None else format_clock(v)


def _hhmm(v: float | None) -> str:
    return "NaN" if v is None else format_duration(v)


def _z(v: float | None) -> str:
    """One decimal, or N/A when the value is undefined."""
    return NA if v is None else f"{v:.1f}"


def align(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip()
             for line in [list(header), *rows]]
    return "\n".join(lines)


# --- daily tables ------------------------------------------------------------------

ACTIVITY_HEADER = ("Day of the week", "date", "Fat-burn zone minutes", "Cardio zone minutes",
                   "Peak zone minutes", "TRIMP", "Steps")


def activity_table(records: Sequence[DailyActivityRecord], redact: bool = False) -> str:
    rows = [(WEEKDAYS[r.date.weekday()], fmt_date(r.date, redact), _f1(r.fat_burn_minutes),
             _f1(r.cardio_minutes), _f1(r.peak_minutes), _f1(r.trimp),
             "NaN" if r.steps is None else str(r.steps)) for r in records]
    return align(ACTIVITY_HEADER, rows)


SLEEP_LOG_HEADER = ("Date", "Day of Week", "Sleep Score", "Light Sleep (hh:mm)", "REM Sleep (hh:mm)",
                    "Deep Sleep (hh:mm)", "Sleep Duration (hh:mm)", "Fall Asleep Time",
                    "Wake after Sleep Onset (hh:mm)", "Efficiency", "Fraction of Sleep Goal",
                    "Wakeup Count", "Heart Rate (bpm)", "Nap Duration (min)", "Naps", "Wake Time")


def sleep_logs_table(records: Sequence[SleepRecord], redact: bool = False) -> str:
    rows = []
    for r in records:
        goal = None if r.sleep_duration is None else r.sleep_duration / SLEEP_GOAL_MINUTES
        rows.append((
            fmt_date(r.date, redact), WEEKDAYS[r.date.weekday()], _f1(r.sleep_score),
            _hhmm(r.light_sleep), _hhmm(r.rem_sleep), _hhmm(r.deep_sleep),
            _hhmm(r.sleep_duration), _clock(r.fall_asleep_time), _hhmm(r.waso),
            _f2(r.efficiency), _f2(goal), _f1(r.wakeup_count), _f1(r.heart_rate),
            _f1(r.nap_duration), _f1(r.nap_count), _clock(r.wake_time),
        ))
    return align(SLEEP_LOG_HEADER, rows)


FITNESS_SLEEP_HEADER = ("Day of the week", "Date", "Sleep start time", "Sleep end (wake) time",
                        "Sleep time (hours)", "Awake time (minutes)", "Deep sleep (minutes)",
                        "REM sleep (minutes)", "Sleep score")


def fitness_sleep_table(records: Sequence[SleepRecord], redact: bool = False) -> str:
    rows = [(WEEKDAYS[r.date.weekday()], fmt_date(r.date, redact), _clock(r.bedtime),
             _clock(r.wake_time),
             "NaN" if r.sleep_duration is None else str(r.sleep_duration // 60),
             _plain(r.awake_minutes), _plain(r.deep_sleep), _plain(r.rem_sleep),
             "NaN" if r.sleep_score is None else _int(r.sleep_score)) for r in records]
    return align(FITNESS_SLEEP_HEADER, rows)


HEALTH_HEADER = ("Day of the week", "Date", "Resting Heart Rate (bpm)", "HRV RMSSD (ms)",
                 "Respiratory Rate (breaths/minute)")


def health_table(records: Sequence[HealthRecord], redact: bool = False) -> str:
    rows = [(WEEKDAYS[r.date.weekday()], fmt_date(r.date, redact), _f1(r.resting_hr),
             _plain(r.hrv_rmssd), _plain(r.respiratory_rate)) for r in records]
    return align(HEALTH_HEADER, rows)


# --- aggregate blocks -----------------------------------------------------------------

def load_block(load: LoadSummary, exercise: ExerciseSummary | None = None,
               redact: bool = False) -> str:
    lines = [
        f"Mean moderate activity per day (Fat-burn): {_z(load.mean_fat_burn_per_day)} mins",
        f"Mean vigorous activity per day (Cardio and Peak): {_z(load.mean_vigorous_per_day)} mins",
        f"TRIMP ranges from {_int(load.trimp_min)} to {_int(load.trimp_max)}",
        f"Acute TRIMP (7-day total training load): {_int(load.acute_trimp)}",
        f"Chronic TRIMP (28-day average acute training load): {_int(load.chronic_trimp)}",
        f"Acute-Chronic Workload Ratio (ACWR): {NA if load.acwr is None else format_acwr(load.acwr)}",
    ]
    if exercise is not None and exercise.logs:
        lines += ["", "These are exercise logs from most recent days."]
        blocks = []
        for x in exercise.logs:
            blocks.append("\n".join([
                f"{x.activity_name} on {fmt_day(x.date, redact)}",
                f"Duration: {_int(x.duration)} mins",
                f"Average Heart Rate: {_int(x.avg_hr)} bpm",
                f"Time in Fat-burn zone: {_int(x.fat_burn_minutes)} mins",
                f"Time in Cardio zone: {_int(x.cardio_minutes)} mins",
                f"Time in Peak zone: {_int(x.peak_minutes)} mins",
                f"Distance: {_int(x.distance_km)} km",
                f"TRIMP that day: {NA if x.day_trimp is None else _f1(x.day_trimp)}",
            ]))
        lines.append("\n\n".join(blocks))
        lines += [
            "",
            f"Average workout duration: {_f1(exercise.mean_duration)} mins",
            f"Workout duration ranges from {_int(exercise.duration_min)} to {_int(exercise.duration_max)} mins",
            f"Average heart rate ranges from {_int(exercise.avg_hr_min)} to {_int(exercise.avg_hr_max)} bpm",
        ]
    return "\n".join(lines)


def fitness_sleep_block(summary: SleepSummary) -> str:
    def v(key: str) -> float | None:
        return summary.value(key)

    def hours(x: float | None) -> str:
        return NA if x is None else f"{x / 60:.1f}"

    return "\n".join([
        f"Mean bedtime: {NA if v('bedtime.mean.overall') is None else format_clock(v('bedtime.mean.overall'))}",
        f"Mean wake-time: {NA if v('wake_time.mean.overall') is None else format_clock(v('wake_time.mean.overall'))}",
        f"Mean sleep duration: {hours(v('sleep_duration.mean.overall'))} hours",
        f"Standard deviation sleep duration: {hours(v('sleep_duration.sd.overall'))} hours",
        f"Sleep duration Z-score (recent days relative to month): {_z(summary.duration_z)}",
        f"Mean sleep score: {_int(v('sleep_score.mean.overall'))}",
        f"Standard deviation sleep score: {_z(v('sleep_score.sd.overall'))}",
        f"Sleep score Z-score (recent days relative to month): {_z(summary.score_z)}",
    ])


# label, unit, mean format, sd format
_HEALTH_LINES = (
    ("resting_hr", "Resting Heart Rate", "bpm", "bpm", _int, _trunc),
    ("hrv_rmssd", "HRV RMSSD", "ms", "ms", _int, _trunc),
    ("respiratory_rate", "Respiratory Rate", "breaths/minute", "breaths/min", _int,
     lambda x: f"{x:.2f}"),
)


def health_block(summary: HealthSummary) -> str:
    lines: list[str] = []
    for key, label, unit, _, fmt_mean, fmt_sd in _HEALTH_LINES:
        m = summary.metrics.get(key)
        if m is None:
            lines.append(f"{label}: no data")
            continue
        lines += [
            f"Mean {label}: {fmt_mean(m.mean)} {unit}",
            f"Standard deviation {label}: {fmt_sd(m.sd)} {unit}",
            f"{label} Z-score: {_z(m.z)}",
        ]
    lines.append("Past week:")
    for key, label, _, short_unit, _, _ in _HEALTH_LINES:
        m = summary.metrics.get(key)
        if m is None or m.week_min is None:
            lines.append(f"{label} range: {NA}")
        else:
            lines.append(f"{label} range: {_int(m.week_min)} to {_int(m.week_max)} {short_unit}")
    return "\n".join(lines)


# --- sleep summary statements -----------------------------------------------------------

_STRATUM_SUFFIX = {"overall": "", "weekend": " on the weekend", "workday": " on a workday"}
# metric -> (singular, plural, low word, high word)
_SUMMARY_NAMES = {
    "bedtime": ("bedtime", "bedtimes", "Earliest", "Latest"),
    "wake_time": ("wake time", "wake times", "Earliest", "Latest"),
    "midsleep": ("midsleep point", "midsleep points", "Earliest", "Latest"),
    "sleep_duration": ("sleep duration", "sleep durations", "Shortest", "Longest"),
    "sleep_score": ("sleep score", "sleep scores", "Lowest", "Highest"),
    "time_to_quality_sleep": ("time to quality sleep", "times to quality sleep", "Shortest", "Longest"),
    "waso": ("wake time after sleep onset", "wake times after sleep onset", "Shortest", "Longest"),
    "efficiency": ("sleep efficiency", "sleep efficiencies", "Lowest", "Highest"),
    "light_sleep": ("light sleep duration", "light sleep durations", "Shortest", "Longest"),
    "deep_sleep": ("deep sleep duration", "deep sleep durations", "Shortest", "Longest"),
    "rem_sleep": ("REM sleep duration", "REM sleep durations", "Shortest", "Longest"),
    "restlessness": ("restlessness score", "restlessness scores", "Lowest", "Highest"),
    "nap_length": ("nap length", "nap lengths", "Shortest", "Longest"),
}
_WHOLE_NUMBER_METRICS = ("sleep_score", "nap_length")


def ordinal(n: int) -> str:
    if 10 <= n % 100 <= 20:
        suffix = "th"
    else:
        suffix = {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


def format_aggregate(agg: Aggregate, value: float | None = None) -> str:
    value = agg.value if value is None else value
    if value is None or not math.isfinite(value):
        return NA
    if agg.kind == "clock":
        return format_clock(value)
    if agg.kind == "duration":
        return format_duration(value)
    if agg.kind == "fraction":
        return f"{value * 100:.0f}%"
    if agg.kind == "count" or agg.metric in _WHOLE_NUMBER_METRICS:
        return str(int(round(value)))
    return f"{value:.2f}"


def _percentile_line(subject: str, agg: Aggregate) -> list[str]:
    if agg.percentile is None:
        return []
    return [f"{subject} is in the {ordinal(int(round(agg.percentile)))} percentile"]


def _cohort_lines(agg: Aggregate, adjective: str, plural: str, suffix: str) -> list[str]:
    if agg.cohort_p5 is None:
        return []
    return [
        f"Bottom 5th percentile of similar users' {adjective} {plural}{suffix} is {format_aggregate(agg, agg.cohort_p5)}",
        f"Top 95th percentile of similar users' {adjective} {plural}{suffix} is {format_aggregate(agg, agg.cohort_p95)}",
    ]


def _metric_paragraphs(summary: SleepSummary, metric: str, stratum: str) -> list[list[str]]:
    singular, plural, low, high = _SUMMARY_NAMES[metric]
    suffix = _STRATUM_SUFFIX[stratum]
    paragraphs: list[list[str]] = []
    mean = summary.get(f"{metric}.mean.{stratum}")
    if mean is not None:
        subject = f"Average {singular}{suffix}"
        para = [f"{subject} is {format_aggregate(mean)}", *_percentile_line(subject, mean)]
        for word, stat in ((low, "earliest" if mean.kind == "clock" else "min"),
                           (high, "latest" if mean.kind == "clock" else "max")):
            agg = summary.get(f"{metric}.{stat}.{stratum}")
            if agg is not None:
                para.append(f"{word} {singular}{suffix} is {format_aggregate(agg)}")
        para += _cohort_lines(mean, "average", plural, suffix)
        paragraphs.append(para)
    sd = summary.get(f"{metric}.sd.{stratum}")
    if sd is not None:
        subject = f"{singular[0].upper()}{singular[1:]} standard deviation{suffix}"
        paragraphs.append([f"{subject} is {format_aggregate(sd)}", *_percentile_line(subject, sd)])
    median = summary.get(f"{metric}.median.{stratum}")
    if median is not None:
        subject = f"Median {singular}{suffix}"
        paragraphs.append([f"{subject} is {format_aggregate(median)}",
                           *_percentile_line(subject, median),
                           *_cohort_lines(median, "median", plural, suffix)])
    return paragraphs


def sleep_summary_block(summary: SleepSummary) -> str:
    paragraphs: list[list[str]] = []
    for metric in ("bedtime", "wake_time", "midsleep", "sleep_duration", "sleep_score"):
        for stratum in ("overall", "weekend", "workday"):
            paragraphs += _metric_paragraphs(summary, metric, stratum)
    for metric in ("time_to_quality_sleep", "waso", "efficiency", "light_sleep", "deep_sleep",
                   "rem_sleep", "restlessness", "nap_length"):
        paragraphs += _metric_paragraphs(summary, metric, "overall")
    total = summary.get("nap_count.total.overall")
    if total is not None:
        paragraphs.append([f"Total number of naps is {format_aggregate(total)}"])
    return "\n\n".join("\n".join(p) for p in paragraphs)


# --- dispatch ---------------------------------------------------------------------------

TABLE_KINDS: dict[str, Callable[..., str]] = {
    "activity": activity_table,
    "sleep_logs": sleep_logs_table,
    "fitness_sleep": fitness_sleep_table,
    "health": health_table,
    "load_aggregates": load_block,
    "sleep_aggregates": fitness_sleep_block,
    "health_aggregates": health_block,
    "sleep_summary": sleep_summary_block,
}
_REDACTABLE = {"activity", "sleep_logs", "fitness_sleep", "health", "load_aggregates"}


def render_table(kind: str, data: Any, *, redact: bool = False, **extra: Any) -> str:
    """Render one table or aggregate block by kind name."""
    try:
        fn = TABLE_KINDS[kind]
    except KeyError:
        raise UnsupportedKindError(
            f"unknown table kind {kind!r}; expected one of {sorted(TABLE_KINDS)}"
        ) from None
    if kind in _REDACTABLE:
        return fn(data, redact=redact, **extra)
    return fn(data, **extra)
