"""Parsing and validation of per-participant wearable data streams.

Every stream kind is a header-bearing UTF-8 CSV with a fixed column set
(see ``SCHEMAS``). Empty cells and ``NaN`` (any case) are read as missing
and stored as ``None``. Clock times are ``HH:MM`` 24-hour values stored as
minutes after midnight; sleep durations may be written ``hh:mm`` or as
plain minutes and are stored as integer minutes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, fields, replace
from datetime import date
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import (
    CellParseError,
    DuplicateDateError,
    InvariantViolation,
    OutOfRangeError,
    SchemaError,
    UnknownItemError,
)

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")
GENDERS = ("Male", "Female", "Other")
MINUTES_PER_DAY = 24 * 60


@dataclass(frozen=True)
class DailyActivityRecord:
    date: date
    fat_burn_minutes: float | None = None
    cardio_minutes: float | None = None
    peak_minutes: float | None = None
    trimp: float | None = None
    steps: int | None = None


@dataclass(frozen=True)
class SleepRecord:
    date: date
    bedtime: int | None = None  # clock, minutes after midnight
    fall_asleep_time: int | None = None  # clock
    wake_time: int | None = None  # clock
    sleep_duration: int | None = None  # minutes asleep
    light_sleep: int | None = None
    deep_sleep: int | None = None
    rem_sleep: int | None = None
    awake_minutes: int | None = None
    waso: int | None = None
    sleep_score: float | None = None
    efficiency: float | None = None  # fraction in [0, 1]
    wakeup_count: int | None = None
    heart_rate: float | None = None
    nap_duration: float | None = None
    nap_count: int | None = None
    restlessness: float | None = None
    revitalization_score: float | None = None


@dataclass(frozen=True)
class HealthRecord:
    date: date
    resting_hr: float | None = None
    hrv_rmssd: float | None = None
    respiratory_rate: float | None = None


@dataclass(frozen=True)
class ExerciseLog:
    date: date
    activity_name: str
    duration: float
    avg_hr: float | None = None
    fat_burn_minutes: float | None = None
    cardio_minutes: float | None = None
    peak_minutes: float | None = None
    distance_km: float | None = None
    day_trimp: float | None = None


@dataclass(frozen=True)
class Demographics:
    age_bucket: str
    gender: str
    height_m: float | None = None
    weight_kg: float | None = None
    bmi: float | None = None


@dataclass(frozen=True)
class SurveyItem:
    item_id: str
    kind: str  # "disturbance" | "impairment"
    label: str
    statement: str
    scale: tuple[str, ...]  # options in printed order, position 1..5
    reverse: bool


@dataclass(frozen=True)
class SurveyResponseSet:
    participant_id: str
    kind: str
    responses: tuple[tuple[str, int], ...]  # (item_id, severity) in survey order

    def severity(self, item_id: str) -> int:
        for key, value in self.responses:
            if key == item_id:
                return value
        raise UnknownItemError(item_id)

    def as_dict(self) -> dict[str, int]:
        return dict(self.responses)


@dataclass(frozen=True)
class ParticipantData:
    id: str
    demographics: Demographics | None = None
    activity: tuple[DailyActivityRecord, ...] = ()
    sleep: tuple[SleepRecord, ...] = ()
    health: tuple[HealthRecord, ...] = ()
    exercises: tuple[ExerciseLog, ...] = ()
    surveys: tuple[SurveyResponseSet, ...] = ()
    is_sorted: bool = field(default=False, compare=False)

    def survey(self, kind: str) -> SurveyResponseSet | None:
        for s in self.surveys:
            if s.kind == kind:
                return s
        return None


# --- survey catalogue -------------------------------------------------------

_NOT_AT_ALL = ("Not at all", "A little bit", "Somewhat", "Quite a bit", "Very much")
_NEVER = ("Never", "Rarely", "Sometimes", "Often", "Always")
_QUALITY = ("Very poor", "Poor", "Fair", "Good", "Very good")

SURVEY_ITEMS: tuple[SurveyItem, ...] = (
    SurveyItem("very_restless", "disturbance", "Very restless",
               "In the past 7 days, my sleep was restless.", _NOT_AT_ALL, False),
    SurveyItem("satisfied", "disturbance", "Satisfied",
               "In the past 7 days, I was satisfied with my sleep.", _NOT_AT_ALL, True),
    SurveyItem("refreshed", "disturbance", "Refreshed",
               "In the past 7 days, my sleep was refreshing.", _NOT_AT_ALL, True),
    SurveyItem("trouble_falling_asleep", "disturbance", "Trouble falling asleep",
               "In the past 7 days, I had difficulty falling asleep.", _NOT_AT_ALL, False),
    SurveyItem("trouble_staying_asleep", "disturbance", "Trouble staying asleep",
               "In the past 7 days, I had trouble staying asleep.", _NEVER, False),
    SurveyItem("trouble_sleeping", "disturbance", "Trouble sleeping",
               "In the past 7 days, I had trouble sleeping.", _NEVER, False),
    SurveyItem("enough_sleep", "disturbance", "Enough sleep",
               "In the past 7 days, I got enough sleep.", _NEVER, True),
    SurveyItem("quality", "disturbance", "Quality",
               "In the past 7 days, my sleep quality was.", _QUALITY, True),
    SurveyItem("trouble_being_productive", "impairment", "Trouble being productive",
               "In the past 7 days, I had a hard time getting things done because I was sleepy.",
               _NOT_AT_ALL, False),
    SurveyItem("alert", "impairment", "Alert",
               "In the past 7 days, I felt alert when I woke up.", _NOT_AT_ALL, True),
    SurveyItem("tiredness", "impairment", "Tiredness",
               "In the past 7 days, I felt tired.", _NOT_AT_ALL, False),
    SurveyItem("having_problems", "impairment", "Having problems",
               "In the past 7 days, I had problems during the day because of poor sleep.",
               _NOT_AT_ALL, False),
    SurveyItem("si_trouble_concentrating", "impairment",
               "Sleep impairment due to trouble concentrating",
               "In the past 7 days, I had a hard time concentrating because of poor sleep.",
               _NOT_AT_ALL, False),
    SurveyItem("si_irritability", "impairment", "Sleep impairment due to irritability",
               "In the past 7 days, I felt irritable because of poor sleep.", _NOT_AT_ALL, False),
    SurveyItem("sleepy_during_daytime", "impairment", "Sleepy during daytime",
               "In the past 7 days, I was sleepy during the daytime.", _NOT_AT_ALL, False),
    SurveyItem("trouble_staying_awake", "impairment", "Trouble staying awake",
               "In the past 7 days, I had trouble staying awake during the day.",
               _NOT_AT_ALL, False),
)
SURVEY_ITEM_INDEX = {item.item_id: item for item in SURVEY_ITEMS}
SURVEY_KINDS = ("disturbance", "impairment")
ITEM_IDS = tuple(item.item_id for item in SURVEY_ITEMS)


def items_for(kind: str) -> tuple[SurveyItem, ...]:
    if kind not in SURVEY_KINDS:
        raise ValueError(f"unknown survey kind {kind!r}; expected one of {SURVEY_KINDS}")
    return tuple(item for item in SURVEY_ITEMS if item.kind == kind)


def severity_from_position(item: SurveyItem, position: int) -> int:
    """Map a printed-scale position (1..5) to a severity where 5 is worst."""
    if not 1 <= position <= 5:
        raise OutOfRangeError(f"{item.item_id}: option {position} outside 1..5")
    return 6 - position if item.reverse else position


# --- cell codecs --------------------------------------------------------------

def _is_missing(cell: str) -> bool:
    return cell.strip() == "" or cell.strip().lower() == "nan"


def parse_clock(text: str) -> int:
    hh, sep, mm = text.strip().partition(":")
    if not sep or not hh.isdigit() or not mm.isdigit() or len(mm) != 2:
        raise ValueError(f"{text!r} is not HH:MM")
    h, m = int(hh), int(mm)
    if not (0 <= h < 24 and 0 <= m < 60):
        raise ValueError(f"{text!r} outside [00:00, 24:00)")
    return h * 60 + m


def format_clock(minutes: float) -> str:
    total = int(round(minutes)) % MINUTES_PER_DAY
    return f"{total // 60:02d}:{total % 60:02d}"


def parse_duration(text: str) -> int:
    text = text.strip()
    if ":" in text:
        hh, _, mm = text.partition(":")
        if not hh.isdigit() or not mm.isdigit() or len(mm) != 2 or int(mm) >= 60:
            raise ValueError(f"{text!r} is not hh:mm")
        return int(hh) * 60 + int(mm)
    value = float(text)
    if not math.isfinite(value) or value != int(value):
        raise ValueError(f"{text!r} is not a whole number of minutes")
    return int(value)


def format_duration(minutes: float) -> str:
    total = int(round(minutes))
    sign = "-" if total < 0 else ""
    total = abs(total)
    return f"{sign}{total // 60:02d}:{total % 60:02d}"


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def _parse_int(text: str) -> int:
    value = _parse_float(text)
    if value != int(value):
        raise ValueError("not an integer")
    return int(value)


_PARSERS = {
    "float": _parse_float,
    "int": _parse_int,
    "clock": parse_clock,
    "duration": parse_duration,
    "date": date.fromisoformat,
    "text": str.strip,
}


def _format_cell(kind: str, value: Any) -> str:
    if value is None:
        return ""
    if kind == "clock":
        return format_clock(value)
    if kind == "duration":
        return format_duration(value)
    if kind == "date":
        return value.isoformat()
    return str(value) if kind in ("text", "int") else repr(float(value))


# --- schemas ------------------------------------------------------------------

@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    required: bool = False


@dataclass(frozen=True)
class StreamSchema:
    kind: str
    record_type: type
    columns: tuple[Column, ...]
    weekday_column: bool = True
    unique_dates: bool = True

    @property
    def header(self) -> tuple[str, ...]:
        names = tuple(c.name for c in self.columns)
        return ("day_of_week",) + names if self.weekday_column else names


def _cols(spec: str) -> tuple[Column, ...]:
    out = []
    for token in spec.split():
        name, kind = token.split(":")
        required = kind.endswith("!")
        out.append(Column(name, kind.rstrip("!"), required))
    return tuple(out)


SCHEMAS: dict[str, StreamSchema] = {
    "activity": StreamSchema(
        "activity", DailyActivityRecord,
        _cols("date:date! fat_burn_minutes:float cardio_minutes:float peak_minutes:float "
              "trimp:float steps:int"),
    ),
    "sleep": StreamSchema(
        "sleep", SleepRecord,
        _cols("date:date! bedtime:clock fall_asleep_time:clock wake_time:clock "
              "sleep_duration:duration light_sleep:duration deep_sleep:duration "
              "rem_sleep:duration awake_minutes:duration waso:duration sleep_score:float "
              "efficiency:float wakeup_count:int heart_rate:float nap_duration:float "
              "nap_count:int restlessness:float revitalization_score:float"),
    ),
    "health": StreamSchema(
        "health", HealthRecord,
        _cols("date:date! resting_hr:float hrv_rmssd:float respiratory_rate:float"),
    ),
    "exercise": StreamSchema(
        "exercise", ExerciseLog,
        _cols("date:date! activity_name:text! duration:float! avg_hr:float "
              "fat_burn_minutes:float cardio_minutes:float peak_minutes:float "
              "distance_km:float day_trimp:float"),
        unique_dates=False,
    ),
    "demographics": StreamSchema(
        "demographics", Demographics,
        _cols("age_bucket:text! gender:text! height_m:float weight_kg:float bmi:float"),
        weekday_column=False, unique_dates=False,
    ),
}
STREAM_KINDS = ("activity", "sleep", "health", "exercise")


def _read_rows(text: str, expected: Sequence[str], kind: str) -> list[dict[str, str]]:
    reader = csv.reader(io.StringIO(text.lstrip("﻿")))
    header = next(reader, None)
    if header is None:
        raise SchemaError(kind, list(expected), [])
    header = [h.strip() for h in header]
    missing = [h for h in expected if h not in header]
    extra = [h for h in header if h not in expected]
    if missing or extra or len(set(header)) != len(header):
        raise SchemaError(kind, missing, extra)
    rows = []
    for line in reader:
        if not line or all(not cell.strip() for cell in line):
            continue
        if len(line) != len(header):
            raise CellParseError(len(rows) + 1, "*", ",".join(line),
                                 f"a row with {len(line)} cells (expected {len(header)})")
        rows.append(dict(zip(header, line)))
    return rows


def parse_records(kind: str, text: str) -> list:
    """Parse one stream's CSV text into a list of records, preserving row order.

    Raises SchemaError on header mismatch, CellParseError (a ValueError) on a
    bad cell, and DuplicateDateError when a date repeats in a date-unique stream.
    """
    if kind not in SCHEMAS:
        raise ValueError(f"unknown stream kind {kind!r}")
    schema = SCHEMAS[kind]
    rows = _read_rows(text, schema.header, kind)
    records = []
    seen: dict[date, int] = {}
    for i, row in enumerate(rows, start=1):
        values: dict[str, Any] = {}
        for col in schema.columns:
            cell = row[col.name]
            if _is_missing(cell):
                if col.required:
                    raise CellParseError(i, col.name, cell, "missing but required")
                values[col.name] = None
                continue
            try:
                values[col.name] = _PARSERS[col.kind](cell)
            except ValueError as exc:
                raise CellParseError(i, col.name, cell, f"invalid ({exc})") from None
        if schema.weekday_column:
            dow = row["day_of_week"].strip()
            if dow and dow != WEEKDAYS[values["date"].weekday()]:
                raise CellParseError(i, "day_of_week", dow,
                                     f"inconsistent with {values['date'].isoformat()}")
        if schema.unique_dates:
            d = values["date"]
            if d in seen:
                raise DuplicateDateError(f"{kind}: date {d} on rows {seen[d]} and {i}")
            seen[d] = i
        if kind == "demographics":
            values["gender"] = _canonical_gender(values["gender"], i)
        records.append(schema.record_type(**values))
    return records


def serialize_records(kind: str, records: Iterable) -> str:
    """Inverse of parse_records: canonical CSV text for a list of records."""
    schema = SCHEMAS[kind]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schema.header)
    for rec in records:
        row = [_format_cell(c.kind, getattr(rec, c.name)) for c in schema.columns]
        if schema.weekday_column:
            row.insert(0, WEEKDAYS[rec.date.weekday()])
        writer.writerow(row)
    return buf.getvalue()


def _canonical_gender(text: str, row: int) -> str:
    for g in GENDERS:
        if text.strip().lower() == g.lower():
            return g
    raise CellParseError(row, "gender", text, f"not one of {GENDERS}")


def parse_survey(text: str, kind: str, participant_id: str = "") -> SurveyResponseSet:
    """Parse an ``item_id,response`` CSV into severity-coded responses.

    ``response`` is either the 1-based position on the printed option scale
    or the option text itself (case-insensitive). Reverse-coded items are
    flipped so that 5 always means the most disturbance or impairment.
    """
    expected = items_for(kind)
    rows = _read_rows(text, ("item_id", "response"), "survey")
    got: dict[str, int] = {}
    for i, row in enumerate(rows, start=1):
        item_id = row["item_id"].strip()
        item = SURVEY_ITEM_INDEX.get(item_id)
        if item is None or item.kind != kind:
            raise UnknownItemError(f"row {i}: {item_id!r} is not a {kind} survey item")
        if item_id in got:
            raise InvariantViolation("survey item answered twice", item_id)
        got[item_id] = severity_from_position(item, _response_position(item, row["response"], i))
    missing = [it.item_id for it in expected if it.item_id not in got]
    if missing:
        raise InvariantViolation(f"survey items missing: {missing}", participant_id)
    return SurveyResponseSet(participant_id, kind,
                             tuple((it.item_id, got[it.item_id]) for it in expected))


def _response_position(item: SurveyItem, cell: str, row: int) -> int:
    cell = cell.strip()
    try:
        value = float(cell)
    except ValueError:
        lowered = cell.lower()
        for pos, option in enumerate(item.scale, start=1):
            if option.lower() == lowered:
                return pos
        raise OutOfRangeError(f"row {row}: {cell!r} is not an option of {item.item_id}") from None
    if value != int(value):
        raise OutOfRangeError(f"row {row}: {cell!r} is not an option index")
    position = int(value)
    if not 1 <= position <= 5:
        raise OutOfRangeError(f"row {row}: option {position} outside 1..5")
    return position


def serialize_survey(responses: SurveyResponseSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("item_id", "response"))
    for item_id, severity in responses.responses:
        item = SURVEY_ITEM_INDEX[item_id]
        writer.writerow((item_id, 6 - severity if item.reverse else severity))
    return buf.getvalue()


# --- validation ---------------------------------------------------------------

def _check_nonnegative(rec: object, names: Iterable[str]) -> None:
    for name in names:
        value = getattr(rec, name)
        if value is not None and (not math.isfinite(value) or value < 0):
            raise InvariantViolation(name, rec)


def _check_activity(rec: DailyActivityRecord) -> None:
    _check_nonnegative(rec, ("fat_burn_minutes", "cardio_minutes", "peak_minutes", "trimp", "steps"))


def _check_sleep(rec: SleepRecord) -> None:
    if rec.sleep_score is not None and not 0 <= rec.sleep_score <= 100:
        raise InvariantViolation("sleep_score", rec)
    if rec.efficiency is not None and not 0 <= rec.efficiency <= 1:
        raise InvariantViolation("efficiency", rec)
    for name in ("bedtime", "fall_asleep_time", "wake_time"):
        value = getattr(rec, name)
        if value is not None and not 0 <= value < MINUTES_PER_DAY:
            raise InvariantViolation(name, rec)
    _check_nonnegative(rec, ("sleep_duration", "light_sleep", "deep_sleep", "rem_sleep",
                             "awake_minutes", "waso", "wakeup_count", "nap_duration",
                             "nap_count", "heart_rate"))
    stages = (rec.light_sleep, rec.deep_sleep, rec.rem_sleep)
    if None not in stages and rec.sleep_duration is not None:
        budget = rec.sleep_duration + (rec.awake_minutes or 0)
        if sum(stages) > budget:
            raise InvariantViolation("stage minutes exceed sleep_duration + awake_minutes", rec)


def _check_health(rec: HealthRecord) -> None:
    for name in ("resting_hr", "hrv_rmssd", "respiratory_rate"):
        value = getattr(rec, name)
        if value is not None and (not math.isfinite(value) or value <= 0):
            raise InvariantViolation(name, rec)


def _check_exercise(rec: ExerciseLog) -> None:
    if not rec.duration > 0:
        raise InvariantViolation("duration", rec)
    _check_nonnegative(rec, ("fat_burn_minutes", "cardio_minutes", "peak_minutes",
                             "distance_km", "day_trimp", "avg_hr"))


def check_demographics(demo: Demographics) -> None:
    if demo.gender not in GENDERS:
        raise InvariantViolation("gender", demo)
    for name in ("height_m", "weight_kg", "bmi"):
        value = getattr(demo, name)
        if value is not None and (not math.isfinite(value) or value <= 0):
            raise InvariantViolation(name, demo)
    if None not in (demo.bmi, demo.height_m, demo.weight_kg):
        if abs(demo.weight_kg / demo.height_m ** 2 - demo.bmi) > 0.5:
            raise InvariantViolation("bmi", demo)


_CHECKS = {
    "activity": _check_activity,
    "sleep": _check_sleep,
    "health": _check_health,
    "exercise": _check_exercise,
}


def _sorted_stream(kind: str, records: Iterable) -> tuple:
    out = tuple(sorted(records, key=lambda r: r.date))
    check = _CHECKS[kind]
    prev = None
    for rec in out:
        check(rec)
        if SCHEMAS[kind].unique_dates and prev is not None and rec.date == prev:
            raise DuplicateDateError(f"{kind}: duplicate date {rec.date}")
        prev = rec.date
    return out


def validate_participant(
    participant_id: str,
    *,
    demographics: Demographics | None = None,
    activity: Iterable[DailyActivityRecord] = (),
    sleep: Iterable[SleepRecord] = (),
    health: Iterable[HealthRecord] = (),
    exercises: Iterable[ExerciseLog] = (),
    surveys: Iterable[SurveyResponseSet] = (),
) -> ParticipantData:
    """Sort every stream by date, enforce record invariants, and assemble."""
    if demographics is not None:
        check_demographics(demographics)
    survey_sets = []
    kinds_seen = set()
    for s in surveys:
        if s.kind in kinds_seen:
            raise InvariantViolation("one response set per survey kind", s.kind)
        kinds_seen.add(s.kind)
        expected = [it.item_id for it in items_for(s.kind)]
        if [k for k, _ in s.responses] != expected:
            raise InvariantViolation("survey items", s)
        if any(not 1 <= v <= 5 for _, v in s.responses):
            raise InvariantViolation("survey severity in 1..5", s)
        survey_sets.append(replace(s, participant_id=participant_id))
    survey_sets.sort(key=lambda s: SURVEY_KINDS.index(s.kind))
    return ParticipantData(
        id=participant_id,
        demographics=demographics,
        activity=_sorted_stream("activity", activity),
        sleep=_sorted_stream("sleep", sleep),
        health=_sorted_stream("health", health),
        exercises=_sorted_stream("exercise", exercises),
        surveys=tuple(survey_sets),
        is_sorted=True,
    )


# --- JSON store ---------------------------------------------------------------

def _record_to_json(rec: object) -> dict[str, Any]:
    out = {}
    for f in fields(rec):
        value = getattr(rec, f.name)
        out[f.name] = value.isoformat() if isinstance(value, date) else value
    return out


def _record_from_json(cls: type, doc: dict[str, Any]) -> object:
    values = dict(doc)
    if "date" in values:
        values["date"] = date.fromisoformat(values["date"])
    return cls(**values)


def participant_to_json(p: ParticipantData) -> dict[str, Any]:
    return {
        "id": p.id,
        "demographics": _record_to_json(p.demographics) if p.demographics else None,
        "activity": [_record_to_json(r) for r in p.activity],
        "sleep": [_record_to_json(r) for r in p.sleep],
        "health": [_record_to_json(r) for r in p.health],
        "exercises": [_record_to_json(r) for r in p.exercises],
        "surveys": [
            {"kind": s.kind, "responses": {k: v for k, v in s.responses}} for s in p.surveys
        ],
    }


def participant_from_json(doc: dict[str, Any]) -> ParticipantData:
    demo = doc.get("demographics")
    return validate_participant(
        doc["id"],
        demographics=Demographics(**demo) if demo else None,
        activity=[_record_from_json(DailyActivityRecord, r) for r in doc.get("activity", [])],
        sleep=[_record_from_json(SleepRecord, r) for r in doc.get("sleep", [])],
        health=[_record_from_json(HealthRecord, r) for r in doc.get("health", [])],
        exercises=[_record_from_json(ExerciseLog, r) for r in doc.get("exercises", [])],
        surveys=[
            SurveyResponseSet(doc["id"], s["kind"], tuple(s["responses"].items()))
            for s in doc.get("surveys", [])
        ],
    )


def dumps_canonical(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ParticipantStore:
    """A directory holding one canonical JSON document per participant."""

    def __init__(self, root: str | os.PathLike) -> None:
        self.root = Path(root)

    def path_for(self, participant_id: str) -> Path:
        if not participant_id or "/" in participant_id or participant_id.startswith("."):
            raise ValueError(f"invalid participant id {participant_id!r}")
        return self.root / f"{participant_id}.json"

    def ids(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.stem for p in self.root.glob("*.json"))

    def load(self, participant_id: str) -> ParticipantData:
        path = self.path_for(participant_id)
        if not path.exists():
            raise FileNotFoundError(str(path))
        return participant_from_json(json.loads(path.read_text(encoding="utf-8")))

    def get(self, participant_id: str) -> ParticipantData | None:
        return self.load(participant_id) if self.path_for(participant_id).exists() else None

    def save(self, participant: ParticipantData) -> Path:
        path = self.path_for(participant.id)
        atomic_write_text(path, dumps_canonical(participant_to_json(participant)))
        return path

    def __iter__(self):
        for pid in self.ids():
            yield self.load(pid)


def merge_stream(participant: ParticipantData | None, participant_id: str, kind: str,
                 payload: Any) -> ParticipantData:
    """Replace one stream (or survey/demographics) of a participant and revalidate."""
    base = participant or ParticipantData(id=participant_id)
    parts = dict(
        demographics=base.demographics, activity=base.activity, sleep=base.sleep,
        health=base.health, exercises=base.exercises, surveys=base.surveys,
    )
    if kind == "demographics":
        parts["demographics"] = payload
    elif kind == "survey":
        parts["surveys"] = tuple(s for s in base.surveys if s.kind != payload.kind) + (payload,)
    elif kind == "exercise":
        parts["exercises"] = tuple(payload)
    elif kind in STREAM_KINDS:
        parts[kind] = tuple(payload)
    else:
        raise ValueError(f"unknown stream kind {kind!r}")
    return validate_participant(participant_id, **parts)
