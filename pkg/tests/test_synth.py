from __future__ import annotations

from wearlab.ingest import ParticipantStore, parse_records, parse_survey
from wearlab.synth import SynthConfig, synth_cohort, synth_participant, write_csv_bundle


def test_participant_is_seeded():
    a = synth_participant(3, 7, SynthConfig())
    assert a == synth_participant(3, 7, SynthConfig())
    assert a != synth_participant(3, 8, SynthConfig())
    assert a.id == "P00003"


def test_cohort_prefix_is_stable():
    small = synth_cohort(2, SynthConfig(n_participants=5))
    large = synth_cohort(2, SynthConfig(n_participants=9))
    assert list(small) == list(large)[:5]


def test_csv_bundle_parses_back(tmp_path, small_cohort):
    p = small_cohort[0]
    write_csv_bundle(p, tmp_path)
    assert parse_records("sleep", (tmp_path / f"{p.id}_sleep.csv").read_text()) == list(p.sleep)
    survey = p.surveys[0]
    text = (tmp_path / f"{p.id}_survey_{survey.kind}.csv").read_text()
    assert parse_survey(text, survey.kind, p.id) == survey


def test_store_accepts_cohort(tmp_path, small_cohort):
    store = ParticipantStore(tmp_path)
    for p in small_cohort[:3]:
        store.save(p)
    assert [store.load(i) for i in store.ids()] == list(small_cohort[:3])
