from __future__ import annotations

from datetime import date, timedelta

import pytest

from wearlab.ingest import DailyActivityRecord, HealthRecord
from wearlab.synth import SynthConfig, synth_cohort

# Seven activity days, Wednesday to Tuesday: (fat burn, cardio, peak, trimp, steps)
ACTIVITY_WEEK = [
    (15.0, 27.0, 0.0, 62.0, 16200),
    (19.0, 23.0, 1.0, 62.0, 9900),
    (6.0, 0.0, 0.0, 6.0, 5950),
    (20.0, 0.0, 0.0, 20.0, 11210),
    (1.0, 0.0, 0.0, 1.0, 8160),
    (7.0, 0.0, 0.0, 7.0, 13120),
    (12.0, 0.0, 0.0, 12.0, 15490),
]

# Thirty health days, Wednesday to Thursday; None marks a missing cell.
HEALTH_MONTH_RHR = [53, 54, 55, 56, 57, 56, 56, 58, 61, 64, 62, 63, 62, 60, 61,
                    59, 57, 58, 58, 60, 58, 56, 54, 56, 57, 60, 62, 65, 67, 66]
HEALTH_MONTH_HRV = [27, 22, 27, 23, 23, 31, 19, None, 17, 13, 23, 16, 26, 28, 17,
                    30, 35, 25, 20, 16, 29, 40, 41, 28, None, 17, 15, 19, 16, 18]
HEALTH_MONTH_RR = [14, 13, 13, 15, 14, 14, 15, None, 15, 15, 15, 15, 14, 14, 15,
                   14, 15, 16, 16, 15, 14, 13, 14, 15, None, 16, 15, 16, 16, 16]

WEDNESDAY = date(2024, 1, 3)


def _f(v):
    return None if v is None else float(v)


@pytest.fixture
def activity_week() -> list[DailyActivityRecord]:
    return [DailyActivityRecord(WEDNESDAY + timedelta(days=i), *row[:4], row[4])
            for i, row in enumerate(ACTIVITY_WEEK)]


@pytest.fixture
def health_month() -> list[HealthRecord]:
    return [HealthRecord(WEDNESDAY + timedelta(days=i), _f(a), _f(b), _f(c))
            for i, (a, b, c) in enumerate(zip(HEALTH_MONTH_RHR, HEALTH_MONTH_HRV, HEALTH_MONTH_RR))]


def trimp_series(start: date, values) -> list[DailyActivityRecord]:
    return [DailyActivityRecord(start + timedelta(days=i), trimp=float(v)) for i, v in enumerate(values)]


@pytest.fixture(scope="session")
def small_cohort():
    return synth_cohort(11, SynthConfig(n_participants=40))


# --- acceptance summary: one PASS/FAIL line per criterion ---------------------------------

_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1][len("test_"):]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{_ACCEPTANCE[name]}  {name}")
