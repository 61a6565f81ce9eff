from __future__ import annotations

from datetime import date, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wearlab.errors import (
    CellParseError,
    DuplicateDateError,
    InvariantViolation,
    OutOfRangeError,
    SchemaError,
    UnknownItemError,
)
from wearlab.ingest import (
    SURVEY_ITEM_INDEX,
    SURVEY_ITEMS,
    DailyActivityRecord,
    Demographics,
    HealthRecord,
    ParticipantStore,
    SleepRecord,
    items_for,
    merge_stream,
    parse_clock,
    parse_duration,
    parse_records,
    parse_survey,
    participant_from_json,
    participant_to_json,
    serialize_records,
    serialize_survey,
    severity_from_position,
    validate_participant,
)

HEALTH_HEADER = "day_of_week,date,resting_hr,hrv_rmssd,respiratory_rate\n"
ACTIVITY_HEADER = "day_of_week,date,fat_burn_minutes,cardio_minutes,peak_minutes,trimp,steps\n"


def test_health_row_with_nan_cells():
    recs = parse_records("health", HEALTH_HEADER + "Wednesday,2024-01-10,58.0,NaN,NaN\n")
    assert recs == [HealthRecord(date(2024, 1, 10), 58.0, None, None)]


def test_empty_and_lowercase_nan_are_missing():
    recs = parse_records("health", HEALTH_HEADER + "Wednesday,2024-01-10,,nan, \n")
    assert recs[0].resting_hr is None and recs[0].hrv_rmssd is None and recs[0].respiratory_rate is None


def test_header_only_gives_empty_list():
    assert parse_records("health", HEALTH_HEADER) == []


def test_activity_steps_parse_as_int():
    recs = parse_records("activity", ACTIVITY_HEADER + "Wednesday,2024-01-03,15.0,27.0,0.0,62.0,16200\n")
    assert recs[0].steps == 16200 and isinstance(recs[0].steps, int)
    assert recs[0].trimp == 62.0


def test_schema_error_lists_missing_and_extra():
    with pytest.raises(SchemaError) as info:
        parse_records("health", "day_of_week,date,resting_hr,hrv,respiratory_rate\n")
    assert info.value.missing == ["hrv_rmssd"]
    assert info.value.extra == ["hrv"]


def test_bad_numeric_cell_names_row_and_column():
    text = HEALTH_HEADER + "Wednesday,2024-01-10,58.0,20,14\nThursday,2024-01-11,abc,20,14\n"
    with pytest.raises(ValueError) as info:
        parse_records("health", text)
    assert isinstance(info.value, CellParseError)
    assert (info.value.row, info.value.column) == (2, "resting_hr")


def test_weekday_must_match_date():
    with pytest.raises(CellParseError):
        parse_records("health", HEALTH_HEADER + "Monday,2024-01-10,58.0,20,14\n")


def test_duplicate_date_rejected():
    text = HEALTH_HEADER + "Wednesday,2024-01-10,58,20,14\nWednesday,2024-01-10,59,21,14\n"
    with pytest.raises(DuplicateDateError):
        parse_records("health", text)


def test_exercise_stream_allows_repeated_dates():
    header = ("day_of_week,date,activity_name,duration,avg_hr,fat_burn_minutes,cardio_minutes,"
              "peak_minutes,distance_km,day_trimp\n")
    rows = ("Wednesday,2024-01-03,Walk,17,98,18,0,0,0,47.0\n"
            "Wednesday,2024-01-03,Walk,11,88,8,0,0,0,47.0\n")
    recs = parse_records("exercise", header + rows)
    assert [r.duration for r in recs] == [17.0, 11.0]


def test_sleep_durations_and_clocks():
    assert parse_clock("23:01") == 23 * 60 + 1
    assert parse_duration("07:05") == 425
    assert parse_duration("53") == 53
    for bad in ("24:00", "7:5", "x"):
        with pytest.raises(ValueError):
            parse_clock(bad)


def test_survey_reverse_and_forward_coding():
    disturbance = "item_id,response\n" + "".join(
        f"{it.item_id},{'Not at all' if it.item_id == 'satisfied' else 'Very much' if it.item_id == 'very_restless' else 3}\n"
        for it in items_for("disturbance"))
    s = parse_survey(disturbance, "disturbance", "p1")
    assert s.severity("satisfied") == 5
    assert s.severity("very_restless") == 5


def test_survey_option_out_of_range():
    text = "item_id,response\n" + "".join(f"{it.item_id},6\n" for it in items_for("impairment"))
    with pytest.raises(OutOfRangeError):
        parse_survey(text, "impairment")


def test_survey_unknown_item():
    with pytest.raises(UnknownItemError):
        parse_survey("item_id,response\nnot_an_item,1\n", "impairment")


def test_severity_rule_for_every_item():
    for item in SURVEY_ITEMS:
        for pos in range(1, 6):
            expected = 6 - pos if item.reverse else pos
            assert severity_from_position(item, pos) == expected


def test_survey_roundtrip():
    s = parse_survey("item_id,response\n" + "".join(f"{it.item_id},{1 + i % 5}\n"
                                                     for i, it in enumerate(items_for("impairment"))),
                     "impairment", "p")
    assert parse_survey(serialize_survey(s), "impairment", "p") == s


def test_validate_sorts_and_flags():
    d0 = date(2024, 1, 1)
    recs = [DailyActivityRecord(d0 + timedelta(days=i), trimp=float(i)) for i in (2, 0, 1)]
    p = validate_participant("p", activity=recs)
    assert [r.date.day for r in p.activity] == [1, 2, 3]
    assert p.is_sorted
    again = validate_participant("p", activity=p.activity)
    assert again == p


def test_efficiency_bound():
    with pytest.raises(InvariantViolation) as info:
        validate_participant("p", sleep=[SleepRecord(date(2024, 1, 1), efficiency=1.2)])
    assert info.value.rule == "efficiency"


def test_stage_minutes_bound():
    rec = SleepRecord(date(2024, 1, 1), sleep_duration=300, awake_minutes=10,
                      light_sleep=200, deep_sleep=80, rem_sleep=60)
    with pytest.raises(InvariantViolation):
        validate_participant("p", sleep=[rec])


def test_duplicate_dates_in_validation():
    recs = [DailyActivityRecord(date(2024, 1, 1), trimp=1.0)] * 2
    with pytest.raises(DuplicateDateError):
        validate_participant("p", activity=recs)


def test_health_values_must_be_positive():
    with pytest.raises(InvariantViolation):
        validate_participant("p", health=[HealthRecord(date(2024, 1, 1), resting_hr=0.0)])


def test_bmi_consistency():
    validate_participant("p", demographics=Demographics("40-49", "Male", 1.8, 81.0, 25.0))
    with pytest.raises(InvariantViolation):
        validate_participant("p", demographics=Demographics("40-49", "Male", 1.8, 81.0, 27.0))


def test_store_roundtrip(tmp_path, small_cohort):
    store = ParticipantStore(tmp_path)
    p = small_cohort[0]
    store.save(p)
    assert store.ids() == [p.id]
    assert store.load(p.id) == p
    assert participant_from_json(participant_to_json(p)) == p


def test_merge_stream_replaces_one_stream(small_cohort):
    p = small_cohort[1]
    health = p.health[:3]
    merged = merge_stream(p, p.id, "health", health)
    assert merged.health == health and merged.sleep == p.sleep


def test_parse_is_deterministic(small_cohort):
    text = serialize_records("sleep", small_cohort[2].sleep)
    assert parse_records("sleep", text) == parse_records("sleep", text)


_opt_float = st.one_of(st.none(), st.integers(0, 10_000).map(lambda v: v / 4))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(_opt_float, _opt_float, _opt_float, _opt_float,
                          st.one_of(st.none(), st.integers(0, 50_000))), max_size=20))
def test_activity_roundtrip(rows):
    recs = [DailyActivityRecord(date(2024, 1, 1) + timedelta(days=i), *row) for i, row in enumerate(rows)]
    assert parse_records("activity", serialize_records("activity", recs)) == recs


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.one_of(st.none(), st.integers(0, 1439)),
                          st.one_of(st.none(), st.integers(0, 900)),
                          st.one_of(st.none(), st.integers(0, 100)),
                          st.one_of(st.none(), st.integers(0, 100).map(lambda v: v / 100))),
                max_size=15))
def test_sleep_roundtrip(rows):
    recs = [SleepRecord(date(2024, 1, 1) + timedelta(days=i), bedtime=b, sleep_duration=d,
                        sleep_score=None if s is None else float(s), efficiency=e)
            for i, (b, d, s, e) in enumerate(rows)]
    assert parse_records("sleep", serialize_records("sleep", recs)) == recs


def test_item_labels_cover_prompt_questions():
    assert SURVEY_ITEM_INDEX["very_restless"].label.lower() == "very restless"
    assert len(SURVEY_ITEMS) == 16
