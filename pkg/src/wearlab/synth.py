"""Seeded synthetic cohort generator.

Each participant carries one latent "sleep trouble" factor that shifts the
sleep, health and activity streams and the survey severities together, so
the PRO labels are weakly predictable from the sensors. Everything produced
here passes the ingest invariants.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .ingest import (
    GENDERS,
    MINUTES_PER_DAY,
    DailyActivityRecord,
    Demographics,
    ExerciseLog,
    HealthRecord,
    ParticipantData,
    SleepRecord,
    SurveyResponseSet,
    items_for,
    SURVEY_KINDS,
    serialize_records,
    serialize_survey,
    validate_participant,
)

AGE_BUCKETS = ("18-29", "30-39", "40-49", "50-59", "60-69")
EXERCISES = ("Run", "Walk", "Bike", "Swim", "Weights")
# latent thresholds between severities 1|2, 2|3, 3|4, 4|5
_SEVERITY_CUTS = np.array([-1.2, -0.4, 0.3, 0.9])


@dataclass(frozen=True)
class SynthConfig:
    n_participants: int = 100
    days: int = 30
    start: date = date(2024, 1, 1)
    short_fraction: float = 0.05  # participants with fewer than 15 days
    missing_rate: float = 0.02  # per-cell dropout
    day_drop_rate: float = 0.02  # whole-day dropout per stream
    signal: float = 0.5  # loading of the latent factor on survey answers


def _maybe(rng: np.random.Generator, rate: float, value):
    return None if rng.random() < rate else value


def _sleep_night(rng, d: date, u: float, miss: float) -> SleepRecord:
    bedtime = int(round(23 * 60 + 30 * u + rng.normal(0, 35))) % MINUTES_PER_DAY
    latency = int(max(1, round(12 + 6 * u + rng.normal(0, 5))))
    asleep = int(np.clip(round(430 - 25 * u + rng.normal(0, 40)), 180, 660))
    waso = int(max(0, round(35 + 10 * u + rng.normal(0, 10))))
    awake = latency + waso
    deep = int(asleep * np.clip(0.16 - 0.02 * u + rng.normal(0, 0.02), 0.05, 0.3))
    rem = int(asleep * np.clip(0.21 - 0.01 * u + rng.normal(0, 0.02), 0.05, 0.35))
    light = asleep - deep - rem
    fall_asleep = (bedtime + latency) % MINUTES_PER_DAY
    wake = (fall_asleep + asleep + waso) % MINUTES_PER_DAY
    naps = int(rng.poisson(0.2 + 0.1 * max(u, 0)))
    return SleepRecord(
        date=d,
        bedtime=_maybe(rng, miss, bedtime),
        fall_asleep_time=_maybe(rng, miss, fall_asleep),
        wake_time=_maybe(rng, miss, wake),
        sleep_duration=asleep,
        light_sleep=_maybe(rng, miss, light),
        deep_sleep=_maybe(rng, miss, deep),
        rem_sleep=_maybe(rng, miss, rem),
        awake_minutes=_maybe(rng, miss, awake),
        waso=_maybe(rng, miss, waso),
        sleep_score=_maybe(rng, miss, float(np.clip(round(78 - 5 * u + rng.normal(0, 6)), 0, 100))),
        efficiency=_maybe(rng, miss, round(asleep / (asleep + awake), 3)),
        wakeup_count=_maybe(rng, miss, int(rng.poisson(max(0.5, 3 + u)))),
        heart_rate=_maybe(rng, miss, round(float(58 + 2 * u + rng.normal(0, 3)), 1)),
        nap_duration=float(naps * int(rng.integers(15, 60))) if naps else 0.0,
        nap_count=naps,
        restlessness=_maybe(rng, miss, round(float(max(0.0, 0.08 + 0.02 * u + rng.normal(0, 0.02))), 3)),
        revitalization_score=_maybe(rng, miss, round(float(np.clip(70 - 6 * u + rng.normal(0, 8), 0, 100)), 1)),
    )


def _health_day(rng, d: date, u: float, fitness: float, miss: float) -> HealthRecord:
    return HealthRecord(
        date=d,
        resting_hr=_maybe(rng, miss, round(float(max(35.0, 60 + 2 * u - 4 * fitness + rng.normal(0, 2.5))), 1)),
        hrv_rmssd=_maybe(rng, miss, float(round(max(5.0, 38 - 5 * u + 6 * fitness + rng.normal(0, 6))))),
        respiratory_rate=_maybe(rng, miss, round(float(max(8.0, 15 + 0.4 * u + rng.normal(0, 0.8))), 1)),
    )


def _activity_day(rng, d: date, u: float, fitness: float, miss: float
                  ) -> tuple[DailyActivityRecord, ExerciseLog | None]:
    scale = float(np.exp(0.3 * fitness))
    fat = float(round(rng.gamma(2.0, 12 * scale)))
    cardio = float(round(rng.gamma(1.2, 6 * scale)))
    peak = float(round(rng.gamma(0.6, 3 * scale)))
    trimp = round(fat * 1.0 + cardio * 2.0 + peak * 3.0, 1)
    steps = int(max(0, rng.normal(8000 + 1500 * fitness - 800 * u, 2500)))
    log = None
    if cardio + peak > 15:
        log = ExerciseLog(
            date=d, activity_name=EXERCISES[int(rng.integers(len(EXERCISES)))],
            duration=float(round(cardio + peak + fat / 2)),
            avg_hr=round(float(120 + 20 * rng.random()), 1),
            fat_burn_minutes=fat / 2, cardio_minutes=cardio, peak_minutes=peak,
            distance_km=round(float(rng.gamma(2.0, 2.5)), 2), day_trimp=trimp,
        )
    rec = DailyActivityRecord(
        date=d,
        fat_burn_minutes=_maybe(rng, miss, fat),
        cardio_minutes=_maybe(rng, miss, cardio),
        peak_minutes=_maybe(rng, miss, peak),
        trimp=_maybe(rng, miss, trimp),
        steps=_maybe(rng, miss, steps),
    )
    return rec, log


def _surveys(rng, pid: str, u: float, signal: float) -> list[SurveyResponseSet]:
    out = []
    for kind in SURVEY_KINDS:
        responses = []
        for item in items_for(kind):
            latent = signal * u + rng.normal(0, 1)
            responses.append((item.item_id, int(np.searchsorted(_SEVERITY_CUTS, latent) + 1)))
        out.append(SurveyResponseSet(pid, kind, tuple(responses)))
    return out


def _demographics(rng) -> Demographics:
    height = round(float(rng.normal(1.72, 0.09)), 2)
    weight = round(float(np.clip(rng.normal(75, 13), 40, 160)), 1)
    return Demographics(
        age_bucket=AGE_BUCKETS[int(rng.integers(len(AGE_BUCKETS)))],
        gender=GENDERS[int(rng.choice(3, p=[0.48, 0.48, 0.04]))],
        height_m=height, weight_kg=weight, bmi=round(weight / height ** 2, 1),
    )


def participant_id(index: int) -> str:
    return f"P{index:05d}"


def synth_participant(index: int, seed: int, config: SynthConfig = SynthConfig()) -> ParticipantData:
    """One participant; depends only on (index, seed, config)."""
    rng = np.random.default_rng([seed, index])
    pid = participant_id(index)
    u = float(rng.normal())
    fitness = float(rng.normal())
    n_days = int(rng.integers(5, 15)) if rng.random() < config.short_fraction else config.days
    sleep, health, activity, exercises = [], [], [], []
    for k in range(n_days):
        d = config.start + timedelta(days=k)
        if rng.random() >= config.day_drop_rate:
            sleep.append(_sleep_night(rng, d, u, config.missing_rate))
        if rng.random() >= config.day_drop_rate:
            health.append(_health_day(rng, d, u, fitness, config.missing_rate))
        rec, log = _activity_day(rng, d, u, fitness, config.missing_rate)
        activity.append(rec)
        if log is not None:
            exercises.append(log)
    return validate_participant(
        pid, demographics=_demographics(rng), activity=activity, sleep=sleep, health=health,
        exercises=exercises, surveys=_surveys(rng, pid, u, config.signal),
    )


def synth_cohort(seed: int, config: SynthConfig = SynthConfig()) -> list[ParticipantData]:
    return [synth_participant(i, seed, config) for i in range(config.n_participants)]


def write_csv_bundle(p: ParticipantData, directory: str | Path) -> list[Path]:
    """Export one participant as the CSV files ``wearlab ingest`` accepts."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, records in (("activity", p.activity), ("sleep", p.sleep), ("health", p.health),
                          ("exercise", p.exercises)):
        path = directory / f"{p.id}_{kind}.csv"
        path.write_text(serialize_records(kind, records), encoding="utf-8")
        written.append(path)
    if p.demographics is not None:
        path = directory / f"{p.id}_demographics.csv"
        path.write_text(serialize_records("demographics", [p.demographics]), encoding="utf-8")
        written.append(path)
    for survey in p.surveys:
        path = directory / f"{p.id}_survey_{survey.kind}.csv"
        path.write_text(serialize_survey(survey), encoding="utf-8")
        written.append(path)
    return written
