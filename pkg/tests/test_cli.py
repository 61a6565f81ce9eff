from __future__ import annotations

import json
from pathlib import Path

import pytest

from wearlab.cli import main
from wearlab.ingest import ParticipantStore, serialize_records


def _run(capsys, *argv) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _err_json(err: str) -> dict:
    return json.loads(err.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def store(tmp_path_factory):
    path = tmp_path_factory.mktemp("store")
    assert main(["synth", "--out", str(path), "--n", "40", "--seed", "5"]) == 0
    return path


@pytest.fixture(scope="module")
def dataset(store, tmp_path_factory):
    out = tmp_path_factory.mktemp("ds") / "dataset.json"
    assert main(["pro", "build", "--store", str(store), "--seed", "5", "--out", str(out)]) == 0
    return out


def test_unknown_flag_exits_2(capsys):
    code, _, err = _run(capsys, "eval", "--bogus")
    assert code == 2 and "usage:" in err
    assert _err_json(err)["error"] == "UsageError"


def test_missing_seed_exits_2(capsys, store, tmp_path):
    code, _, err = _run(capsys, "pro", "build", "--store", store, "--out", tmp_path / "d.json")
    assert code == 2 and "seed" in _err_json(err)["message"]


def test_eval_missing_predictions(capsys, dataset, tmp_path):
    missing = tmp_path / "nope.csv"
    code, _, err = _run(capsys, "eval", "--dataset", dataset, "--predictions", missing,
                        "--seed", 1, "--out", tmp_path / "r.json")
    doc = _err_json(err)
    assert code == 1 and doc["path"] == str(missing) and doc["error"] == "FileNotFoundError"
    assert not (tmp_path / "r.json").exists()


def test_ingest_and_featurize(capsys, store, tmp_path):
    p = ParticipantStore(store).load(ParticipantStore(store).ids()[0])
    csv = tmp_path / "health.csv"
    csv.write_text(serialize_records("health", p.health), encoding="utf-8")
    new_store = tmp_path / "s"
    code, _, _ = _run(capsys, "ingest", "--kind", "health", "--in", csv, "--out", new_store,
                      "--participant", "X1")
    assert code == 0 and ParticipantStore(new_store).load("X1").health == p.health
    bad = tmp_path / "bad.csv"
    bad.write_text("day_of_week,date,resting_hr\n", encoding="utf-8")
    code, _, err = _run(capsys, "ingest", "--kind", "health", "--in", bad, "--out", new_store,
                        "--participant", "X1")
    assert code == 1 and _err_json(err)["error"] == "SchemaError"
    out = tmp_path / "f.json"
    code, _, _ = _run(capsys, "featurize", "--store", store, "--participant", p.id, "--cohort",
                      "--out", out)
    assert code == 0 and json.loads(out.read_text())["participant_id"] == p.id


def test_render_and_score(capsys, store, tmp_path):
    pid = ParticipantStore(store).ids()[1]
    out = tmp_path / "insights.txt"
    code, _, _ = _run(capsys, "render", "--store", store, "--vertical", "sleep", "--section",
                      "insights", "--participant", pid, "--redact", "--out", out)
    assert code == 0 and out.read_text().rstrip().endswith("# Sleep insights report")
    code, _, err = _run(capsys, "render", "--store", store, "--vertical", "sleep", "--section",
                        "etiology", "--participant", pid, "--out", tmp_path / "e.txt")
    assert code == 1 and _err_json(err)["error"] == "MissingDependencyError"
    prior = tmp_path / "prior.txt"
    prior.write_text("X", encoding="utf-8")
    code, _, _ = _run(capsys, "render", "--store", store, "--vertical", "sleep", "--section",
                      "etiology", "--participant", pid, "--prior", f"insights={prior}",
                      "--out", tmp_path / "e.txt")
    assert code == 0 and "following insights:\nX" in (tmp_path / "e.txt").read_text()
    code, out_text, _ = _run(capsys, "score", "--client", "stub", "--seed", 1, "--prompt-file", out)
    scores = json.loads(out_text)
    code2, out_text2, _ = _run(capsys, "score", "--client", "stub", "--seed", 1, "--prompt-file", out)
    assert code == code2 == 0 and json.loads(out_text2) == scores


def test_train_predict_eval(capsys, dataset, tmp_path):
    model = tmp_path / "m.json"
    code, _, _ = _run(capsys, "train", "--model", "logistic", "--dataset", dataset, "--item",
                      "very_restless", "--seed", 1, "--out", model)
    assert code == 0 and json.loads(model.read_text())["kind"] == "logistic"
    preds = tmp_path / "p.csv"
    code, _, _ = _run(capsys, "predict", "--dataset", dataset, "--model", model, "--seed", 1,
                      "--out", preds)
    lines = preds.read_text().splitlines()
    assert code == 0 and lines[0] == "participant_id,item,model,loglik_yes,loglik_no"
    report = tmp_path / "r.json"
    code, _, _ = _run(capsys, "eval", "--dataset", dataset, "--predictions", preds, "--seed", 1,
                      "--bootstrap", 50, "--emit-plot-data", tmp_path / "plots", "--out", report)
    doc = json.loads(report.read_text())
    entry = doc["models"]["logistic"]["very_restless"]
    assert code == 0 and {"auroc", "auprc"} <= set(entry)
    assert any((tmp_path / "plots").iterdir())


def test_zero_shot_predictions_with_stub(capsys, dataset, tmp_path):
    preds = tmp_path / "z.csv"
    code, _, _ = _run(capsys, "predict", "--dataset", dataset, "--mode", "few_shot", "--item",
                      "very_restless", "--client", "stub", "--shots", 3, "--seed", 2, "--out", preds)
    rows = preds.read_text().splitlines()[1:]
    assert code == 0 and rows and all(",few_shot," in r for r in rows)


def test_agreement(capsys, tmp_path):
    ratings = tmp_path / "ratings.csv"
    lines = ["case_id,section,principle,rater,rating"]
    for i, (a, b) in enumerate([(1, 2), (3, 3), (4, 5), (5, 5), (2, 2), (4, 3)]):
        lines += [f"c{i},insights,p,A,{a}", f"c{i},insights,p,B,{b}"]
    ratings.write_text("\n".join(lines) + "\n", encoding="utf-8")
    out = tmp_path / "a.json"
    code, _, _ = _run(capsys, "agreement", "--ratings", ratings, "--rater-a", "A", "--rater-b", "B",
                      "--bootstrap", 50, "--seed", 1, "--out", out)
    doc = json.loads(out.read_text())
    assert code == 0 and -1 <= doc["agreement"]["spearman"]["value"] <= 1


def test_config_file_and_override(capsys, store, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"store": str(store), "seed": 5}), encoding="utf-8")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _run(capsys, "pro", "build", "--config", cfg, "--out", a)[0] == 0
    assert _run(capsys, "pro", "build", "--config", cfg, "--seed", 6, "--out", b)[0] == 0
    assert json.loads(a.read_text())["seed"] == 5 and json.loads(b.read_text())["seed"] == 6
    cfg.write_text(json.dumps({"seed": 5, "colour": "red"}), encoding="utf-8")
    code, _, err = _run(capsys, "pro", "build", "--config", cfg, "--out", a)
    assert code == 2 and "colour" in err


def _report_without_timestamp(path: Path) -> dict:
    doc = json.loads(path.read_text())
    doc.pop("generated_at")
    return doc


def test_pipeline_is_deterministic(capsys, tmp_path):
    args = ("pipeline", "--seed", 4, "--n", 60, "--bootstrap", 50)
    assert _run(capsys, *args, "--out", tmp_path / "a")[0] == 0
    assert _run(capsys, *args, "--out", tmp_path / "b")[0] == 0
    a, b = (_report_without_timestamp(tmp_path / d / "report.json") for d in "ab")
    assert a == b
    assert set(a["models"]["logistic"]) == set(json.loads((tmp_path / "a" / "dataset.json").read_text())["items"])
    assert (tmp_path / "a" / "predictions.csv").read_bytes() == (tmp_path / "b" / "predictions.csv").read_bytes()
