"""Patient-reported-outcome dataset construction.

Per participant: build a 20-feature daily sensor grid, keep the 15-day
window with the fewest missing cells, drop outliers further than four
training SDs from the training median, impute the training median, then
encode each feature as (mean, variance) across the window and z-score the
encoding with training-split statistics. Labels are 1 when the survey item
was answered at its most severe level.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateFeatureError,
    EmptyDatasetError,
    InsufficientDataError,
    OutOfRangeError,
    UnknownItemError,
)
from .ingest import ITEM_IDS, MINUTES_PER_DAY, SURVEY_KINDS, ParticipantData

WINDOW_DAYS = 15
OUTLIER_SDS = 4.0
DEFAULT_RATIOS = (0.70, 0.10, 0.20)
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Feature:
    id: str
    label: str  # text used in PRO prompts


FEATURES: tuple[Feature, ...] = (
    Feature("hrv_rmssd", "heart rate variability root mean square of successive differences"),
    Feature("respiratory_rate", "respiratory rate breaths per minute"),
    Feature("resting_hr", "resting heart rate beats per minute"),
    Feature("awake_minutes", "awake minutes"),
    Feature("deep_sleep_minutes", "deep sleep minutes"),
    Feature("duration_minutes", "sleep duration minutes"),
    Feature("efficiency", "efficiency"),
    Feature("sleep_score", "overall sleep score"),
    Feature("rem_sleep_percent", "percent of sleep in REM"),
    Feature("restlessness", "restlessness"),
    Feature("revitalization_score", "revitalization score"),
    Feature("sleep_end_time", "sleep end time"),
    Feature("sleep_start_time", "sleep start time"),
    Feature("sleep_time_minutes", "sleep time minutes"),
    Feature("waso", "total number of minutes in awake state after sleep onset"),
    Feature("steps", "number of steps walked during the day"),
    Feature("cardio_minutes", "number of minutes spent in cardio zone during the day"),
    Feature("fat_burn_minutes", "number of minutes spent in fat burn zone during the day"),
    Feature("peak_minutes", "number of minutes spent in peak zone during the day"),
    Feature("total_multiplied_minutes", "total multiplied minutes of exercise during the day"),
)
FEATURE_IDS = tuple(f.id for f in FEATURES)
N_FEATURES = len(FEATURES)


# --- sensor grid ---------------------------------------------------------------------

def signed_clock(minutes: int | None) -> float | None:
    """Clock time as signed minutes from midnight in [-720, 720)."""
    if minutes is None:
        return None
    return float(minutes - MINUTES_PER_DAY if minutes >= MINUTES_PER_DAY // 2 else minutes)


def _sum(*values: float | None) -> float | None:
    return None if any(v is None for v in values) else float(sum(values))


def _day_features(sleep, health, activity) -> list[float | None]:
    s, h, a = sleep, health, activity
    rem_pct = None
    if s is not None and s.rem_sleep is not None and s.sleep_duration:
        rem_pct = 100.0 * s.rem_sleep / s.sleep_duration
    multiplied = None
    if a is not None and None not in (a.fat_burn_minutes, a.cardio_minutes, a.peak_minutes):
        multiplied = a.fat_burn_minutes + 2.0 * (a.cardio_minutes + a.peak_minutes)
    return [
        h and h.hrv_rmssd,
        h and h.respiratory_rate,
        h and h.resting_hr,
        s and s.awake_minutes,
        s and s.deep_sleep,
        s and _sum(s.sleep_duration, s.awake_minutes),
        s and s.efficiency,
        s and s.sleep_score,
        rem_pct,
        s and s.restlessness,
        s and s.revitalization_score,
        s and signed_clock(s.wake_time),
        s and signed_clock(s.bedtime),
        s and s.sleep_duration,
        s and s.waso,
        a and a.steps,
        a and a.cardio_minutes,
        a and a.fat_burn_minutes,
        a and a.peak_minutes,
        multiplied,
    ]


@dataclass(frozen=True)
class SensorSeries:
    participant_id: str
    start: date
    values: np.ndarray  # (20, n_days), NaN where missing

    @property
    def n_days(self) -> int:
        return int(self.values.shape[1])


def sensor_series(p: ParticipantData) -> SensorSeries:
    """Daily 20-feature grid over the participant's full calendar span."""
    by_stream = [{r.date: r for r in stream} for stream in (p.sleep, p.health, p.activity)]
    dates = set().union(*by_stream)
    if not dates:
        raise InsufficientDataError(f"{p.id}: no daily sensor records")
    start, end = min(dates), max(dates)
    n = (end - start).days + 1
    grid = np.full((N_FEATURES, n), np.nan)
    for d in dates:
        col = _day_features(*(stream.get(d) for stream in by_stream))
        grid[:, (d - start).days] = [np.nan if v is None else float(v) for v in col]
    grid.setflags(write=False)
    return SensorSeries(p.id, start, grid)


@dataclass(frozen=True)
class SensorMatrix:
    participant_id: str
    start: date
    values: np.ndarray  # (20, 15)
    notes: tuple[str, ...] = ()

    @property
    def mask(self) -> np.ndarray:
        return np.isnan(self.values)


def select_window(series: SensorSeries, min_days: int = WINDOW_DAYS) -> SensorMatrix:
    """Contiguous ``min_days`` window with the fewest missing cells (earliest on ties)."""
    observed_days = int((~np.isnan(series.values)).any(axis=0).sum())
    if series.n_days < min_days or observed_days < min_days:
        raise InsufficientDataError(
            f"{series.participant_id}: {observed_days} observed days over a "
            f"{series.n_days}-day span; need {min_days}"
        )
    missing = np.isnan(series.values).sum(axis=0)
    csum = np.concatenate([[0], np.cumsum(missing)])
    window_missing = csum[min_days:] - csum[:-min_days]
    start = int(np.argmin(window_missing))  # argmin returns the first minimum
    values = series.values[:, start:start + min_days].copy()
    values.setflags(write=False)
    return SensorMatrix(series.participant_id, series.start + timedelta(days=start), values)


# --- population statistics, filtering and imputation ----------------------------------------

def _fingerprint(ids: Iterable[str]) -> str:
    return hashlib.sha256("\n".join(sorted(ids)).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class PopulationStats:
    """Per-feature training statistics over observed (pre-imputation) cells."""

    median: tuple[float, ...]
    mean: tuple[float, ...]
    sd: tuple[float, ...]
    n_cells: tuple[int, ...]
    train_ids: tuple[str, ...]

    @property
    def fingerprint(self) -> str:
        return _fingerprint(self.train_ids)


def population_stats(train: Sequence[SensorMatrix]) -> PopulationStats:
    if not train:
        raise EmptyDatasetError("no training matrices for population statistics")
    stacked = np.concatenate([m.values for m in train], axis=1)
    med, mean, sd, counts = [], [], [], []
    for row in stacked:
        obs = row[~np.isnan(row)]
        counts.append(int(obs.size))
        med.append(float(np.median(obs)) if obs.size else float("nan"))
        mean.append(float(obs.mean()) if obs.size else float("nan"))
        sd.append(float(obs.std(ddof=1)) if obs.size > 1 else 0.0)
    return PopulationStats(tuple(med), tuple(mean), tuple(sd), tuple(counts),
                           tuple(sorted(m.participant_id for m in train)))


def filter_and_impute(matrix: SensorMatrix, stats: PopulationStats, *,
                      strict: bool = False) -> SensorMatrix:
    """Mark cells beyond 4 SD of the median as missing, then fill with the median.

    A feature whose training SD is zero cannot be screened; the filter is
    skipped for it and a note is recorded (``strict`` raises instead).
    """
    values = np.array(matrix.values, dtype=float)
    notes = list(matrix.notes)
    for f, feat in enumerate(FEATURES):
        med, sd = stats.median[f], stats.sd[f]
        row = values[f]
        if np.isnan(med):
            if strict:
                raise DegenerateFeatureError(f"{feat.id}: no training observations")
            notes.append(f"{feat.id}: no training observations; imputed 0")
            med = 0.0
        elif not sd > 0:
            if strict:
                raise DegenerateFeatureError(f"{feat.id}: training SD is zero")
            notes.append(f"{feat.id}: training SD is zero; outlier filter skipped")
        else:
            row[np.abs(row - med) > OUTLIER_SDS * sd] = np.nan
        row[np.isnan(row)] = med
    values.setflags(write=False)
    return SensorMatrix(matrix.participant_id, matrix.start, values, tuple(notes))


# --- encoding ------------------------------------------------------------------------------

def encode(matrix: SensorMatrix) -> np.ndarray:
    """Per-feature (mean, sample variance) across days: shape (20, 2)."""
    if np.isnan(matrix.values).any():
        raise ValueError(f"{matrix.participant_id}: matrix still has missing cells")
    return np.stack([matrix.values.mean(axis=1), matrix.values.var(axis=1, ddof=1)], axis=1)


@dataclass(frozen=True)
class EncodingStats:
    mean: tuple[tuple[float, float], ...]  # (20, 2)
    sd: tuple[tuple[float, float], ...]
    train_ids: tuple[str, ...]

    @property
    def fingerprint(self) -> str:
        return _fingerprint(self.train_ids)


def encoding_stats(train_ids: Sequence[str], encoded: Sequence[np.ndarray]) -> EncodingStats:
    if not encoded:
        raise EmptyDatasetError("no training encodings")
    stack = np.stack(encoded)
    sd = stack.std(axis=0, ddof=1) if len(encoded) > 1 else np.zeros(stack.shape[1:])
    as_tuple = lambda a: tuple(tuple(float(x) for x in row) for row in a)  # noqa: E731
    return EncodingStats(as_tuple(stack.mean(axis=0)), as_tuple(sd), tuple(sorted(train_ids)))


def zscore(encoded: np.ndarray, stats: EncodingStats, *, strict: bool = False) -> np.ndarray:
    """(v - train mean) / train SD per encoded cell; zero-SD cells map to 0."""
    mean, sd = np.asarray(stats.mean), np.asarray(stats.sd)
    degenerate = ~(sd > 0)
    if strict and degenerate.any():
        bad = [f"{FEATURE_IDS[i]}.{('mean', 'var')[j]}" for i, j in zip(*np.nonzero(degenerate))]
        raise DegenerateFeatureError(f"zero training SD for {bad}")
    safe = np.where(degenerate, 1.0, sd)
    return np.where(degenerate, 0.0, (encoded - mean) / safe)


# --- labels and splitting ---------------------------------------------------------------

def binarize_response(item: str, severity: int) -> int:
    if item not in ITEM_IDS:
        raise UnknownItemError(f"unknown survey item {item!r}")
    if not 1 <= severity <= 5:
        raise OutOfRangeError(f"{item}: severity {severity} outside 1..5")
    return int(severity == 5)


def allocate(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder allocation of ``n`` items to ``ratios`` (ties to earlier splits)."""
    ratios = [float(r) for r in ratios]
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")
    quotas = [n * r for r in ratios]
    sizes = [int(np.floor(q + 1e-9)) for q in quotas]
    # remainders are rounded so float noise cannot break exact ties
    order = sorted(range(len(ratios)), key=lambda i: (-round(quotas[i] - sizes[i], 9), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split(ids: Sequence[str], ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0) -> dict[str, str]:
    """Deterministic participant-level assignment to train/val/test."""
    if not ids:
        raise EmptyDatasetError("nothing to split")
    if len(ratios) != len(SPLITS):
        raise ValueError(f"expected {len(SPLITS)} ratios")
    ordered = sorted(set(ids))
    if len(ordered) != len(ids):
        raise ValueError("duplicate participant ids")
    perm = np.random.default_rng(seed).permutation(len(ordered))
    sizes = allocate(len(ordered), ratios)
    tags: dict[str, str] = {}
    pos = 0
    for tag, size in zip(SPLITS, sizes):
        for k in perm[pos:pos + size]:
            tags[ordered[k]] = tag
        pos += size
    return {pid: tags[pid] for pid in ordered}


# --- dataset ------------------------------------------------------------------------------

@dataclass(frozen=True)
class PROExample:
    participant_id: str
    age_bucket: str
    split: str
    matrix: SensorMatrix  # imputed 20 x 15
    encoded_raw: np.ndarray  # (20, 2) mean, variance
    encoded: np.ndarray  # (20, 2) z-scored with training statistics
    labels: Mapping[str, int]

    @property
    def feature_means(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.encoded_raw[:, 0])

    @property
    def flat(self) -> np.ndarray:
        """Encoded features flattened row-major to length 40."""
        return self.encoded.reshape(-1)


@dataclass(frozen=True)
class ProDataset:
    examples: tuple[PROExample, ...]
    population: PopulationStats
    encoding: EncodingStats
    excluded: Mapping[str, str]
    seed: int
    ratios: tuple[float, ...]
    notes: tuple[str, ...] = field(default=())

    def subset(self, tag: str) -> list[PROExample]:
        return [ex for ex in self.examples if ex.split == tag]

    def arrays(self, tag: str, item: str) -> tuple[np.ndarray, np.ndarray]:
        """(X, y) for one split and survey item: X is (n, 40)."""
        rows = self.subset(tag)
        X = np.array([ex.flat for ex in rows]).reshape(len(rows), 2 * N_FEATURES)
        y = np.array([ex.labels[item] for ex in rows], dtype=int)
        return X, y

    def check_provenance(self) -> None:
        """Raise if any statistic was derived from something other than the training split."""
        train = tuple(sorted(ex.participant_id for ex in self.examples if ex.split == "train"))
        for name, stats in (("population", self.population), ("encoding", self.encoding)):
            if stats.train_ids != train:
                raise AssertionError(f"{name} statistics not derived from the training split")


def participant_labels(p: ParticipantData) -> dict[str, int]:
    missing = [k for k in SURVEY_KINDS if p.survey(k) is None]
    if missing:
        raise InsufficientDataError(f"{p.id}: missing survey(s) {missing}")
    labels = {}
    for kind in SURVEY_KINDS:
        for item, severity in p.survey(kind).responses:
            labels[item] = binarize_response(item, severity)
    return {item: labels[item] for item in ITEM_IDS}


def build_dataset(participants: Iterable[ParticipantData], seed: int,
                  ratios: Sequence[float] = DEFAULT_RATIOS, *, min_days: int = WINDOW_DAYS,
                  strict: bool = False) -> ProDataset:
    """Window, split, filter/impute, encode and z-score a cohort."""
    windows: dict[str, SensorMatrix] = {}
    labels: dict[str, dict[str, int]] = {}
    ages: dict[str, str] = {}
    excluded: dict[str, str] = {}
    for p in sorted(participants, key=lambda q: q.id):
        try:
            labels[p.id] = participant_labels(p)
            windows[p.id] = select_window(sensor_series(p), min_days)
        except InsufficientDataError as exc:
            excluded[p.id] = str(exc)
            labels.pop(p.id, None)
            continue
        ages[p.id] = p.demographics.age_bucket if p.demographics else "unknown"
    if not windows:
        raise EmptyDatasetError("no participant satisfies the inclusion criteria")
    tags = split(list(windows), ratios, seed)
    train_ids = [pid for pid, tag in tags.items() if tag == "train"]
    pop = population_stats([windows[pid] for pid in train_ids])
    imputed = {pid: filter_and_impute(m, pop, strict=strict) for pid, m in windows.items()}
    raw = {pid: encode(m) for pid, m in imputed.items()}
    enc = encoding_stats(train_ids, [raw[pid] for pid in train_ids])
    examples = tuple(
        PROExample(pid, ages[pid], tags[pid], imputed[pid], raw[pid],
                   zscore(raw[pid], enc, strict=strict), labels[pid])
        for pid in sorted(windows)
    )
    notes = sorted({n for m in imputed.values() for n in m.notes})
    return ProDataset(examples, pop, enc, excluded, int(seed), tuple(float(r) for r in ratios),
                      tuple(notes))


# --- JSON ---------------------------------------------------------------------------------

FORMAT_VERSION = 1


def _nullable(values: Iterable[float]) -> list[float | None]:
    return [None if v != v else v for v in values]  # NaN -> null


def _nan(values: Iterable[float | None]) -> tuple[float, ...]:
    return tuple(float("nan") if v is None else float(v) for v in values)


def dataset_to_json(ds: ProDataset) -> dict:
    return {
        "format": "wearlab.pro_dataset",
        "version": FORMAT_VERSION,
        "seed": ds.seed,
        "ratios": list(ds.ratios),
        "features": list(FEATURE_IDS),
        "items": list(ITEM_IDS),
        "population_stats": {
            "median": _nullable(ds.population.median),
            "mean": _nullable(ds.population.mean),
            "sd": list(ds.population.sd),
            "n_cells": list(ds.population.n_cells),
            "train_ids": list(ds.population.train_ids),
            "fingerprint": ds.population.fingerprint,
        },
        "encoding_stats": {
            "mean": [list(r) for r in ds.encoding.mean],
            "sd": [list(r) for r in ds.encoding.sd],
            "train_ids": list(ds.encoding.train_ids),
            "fingerprint": ds.encoding.fingerprint,
        },
        "excluded": dict(sorted(ds.excluded.items())),
        "notes": list(ds.notes),
        "examples": [
            {
                "participant_id": ex.participant_id,
                "age_bucket": ex.age_bucket,
                "split": ex.split,
                "window_start": ex.matrix.start.isoformat(),
                "matrix": ex.matrix.values.tolist(),
                "encoded_raw": ex.encoded_raw.tolist(),
                "encoded": ex.encoded.tolist(),
                "labels": dict(ex.labels),
                "notes": list(ex.matrix.notes),
            }
            for ex in ds.examples
        ],
    }


def dataset_from_json(doc: dict) -> ProDataset:
    if doc.get("format") != "wearlab.pro_dataset":
        raise ValueError("not a PRO dataset document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset version {doc.get('version')}")
    ps = doc["population_stats"]
    es = doc["encoding_stats"]
    examples = []
    for e in doc["examples"]:
        matrix = np.array(e["matrix"], dtype=float)
        matrix.setflags(write=False)
        examples.append(PROExample(
            e["participant_id"], e["age_bucket"], e["split"],
            SensorMatrix(e["participant_id"], date.fromisoformat(e["window_start"]), matrix,
                         tuple(e.get("notes", ()))),
            np.array(e["encoded_raw"], dtype=float), np.array(e["encoded"], dtype=float),
            {k: int(v) for k, v in e["labels"].items()},
        ))
    return ProDataset(
        tuple(examples),
        PopulationStats(_nan(ps["median"]), _nan(ps["mean"]), tuple(ps["sd"]),
                        tuple(ps["n_cells"]), tuple(ps["train_ids"])),
        EncodingStats(tuple(tuple(r) for r in es["mean"]), tuple(tuple(r) for r in es["sd"]),
                      tuple(es["train_ids"])),
        dict(doc["excluded"]), int(doc["seed"]), tuple(doc["ratios"]), tuple(doc.get("notes", ())),
    )


def dumps_dataset(ds: ProDataset) -> str:
    return json.dumps(dataset_to_json(ds), indent=1, allow_nan=False) + "\n"
