"""Batch command line: ``wearlab <command> ...``.

Settings resolve in this order, later winning: built-in defaults, the JSON
document passed with ``--config``, then explicit flags. Unknown config keys
are rejected before anything runs.

Exit status is 0 on success, 2 on usage errors (bad flags, bad config) and
1 on pipeline errors; failures print one JSON object on stderr with the
error type, originating module and message. Every output file is written
to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import errno
import io
import json
import sys
from dataclasses import dataclass, fields, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import WearlabError
from .features import build_cohort_reference, featurize
from .ingest import (
    ITEM_IDS,
    STREAM_KINDS,
    SURVEY_KINDS,
    ParticipantStore,
    atomic_write_text,
    merge_stream,
    parse_records,
    parse_survey,
)
from .models import (
    AdapterConfig,
    FrozenScorer,
    LogisticConfig,
    LogisticModel,
    TrainConfig,
    adapter_logliks,
    adapter_prompt,
    adapter_to_json,
    dumps_model,
    logistic_to_json,
    model_from_json,
    predict_proba,
    prompt_vector,
    score_outcome,
    train_adapter,
    train_logistic,
)
from .pro import DEFAULT_RATIOS, WINDOW_DAYS, ProDataset, build_dataset, dataset_from_json, dumps_dataset
from .stats import (
    agreement_metrics,
    aggregate_ratings,
    auprc,
    auroc,
    bootstrap_ci,
    parse_ratings,
    pr_curve,
    roc_curve,
)
from .synth import SynthConfig, synth_cohort, write_csv_bundle

METRICS = {"auroc": auroc, "auprc": auprc}
REPORT_FORMAT = "wearlab.report"
PREDICTION_HEADER = ("participant_id", "item", "model", "loglik_yes", "loglik_no")


class UsageError(Exception):
    """Bad command line or configuration (exit status 2)."""


# --- configuration ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    store: str | None = None
    seed: int | None = None
    split_ratios: tuple[float, ...] = DEFAULT_RATIOS
    min_days: int = WINDOW_DAYS
    l2: float = 1.0
    adapter_d: int = 32
    adapter_hidden: tuple[int, ...] = (64, 256, 64)
    learning_rate: float = TrainConfig.learning_rate
    batch_size: int = TrainConfig.batch_size
    epochs: int = TrainConfig.epochs
    patience: int = TrainConfig.patience
    weight_decay: float = TrainConfig.weight_decay
    bootstrap: int = 1000
    endpoint: str | None = None
    timeout: float = 30.0
    retries: int = 3
    redact: bool = False
    n_participants: int = 200

    def validate(self) -> "RunConfig":
        r = self.split_ratios
        if len(r) != 3 or any(x <= 0 for x in r) or abs(sum(r) - 1.0) > 1e-9:
            raise UsageError(f"split_ratios must be three positive numbers summing to 1, got {list(r)}")
        for name in ("min_days", "adapter_d", "batch_size", "epochs", "patience", "bootstrap",
                     "retries", "n_participants"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be at least 1")
        if not self.adapter_hidden or any(h < 1 for h in self.adapter_hidden):
            raise UsageError("adapter_hidden must list positive layer sizes")
        for name in ("l2", "learning_rate", "weight_decay", "timeout"):
            if getattr(self, name) < 0:
                raise UsageError(f"{name} must be non-negative")
        return self

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, batch_size=self.batch_size,
                           epochs=self.epochs, seed=seed, patience=self.patience,
                           weight_decay=self.weight_decay)

    def adapter_config(self) -> AdapterConfig:
        return AdapterConfig(hidden=tuple(self.adapter_hidden), d=self.adapter_d)


_FIELD_TYPES = {
    "store": (str, type(None)), "seed": (int, type(None)), "endpoint": (str, type(None)),
    "split_ratios": (list,), "adapter_hidden": (list,), "redact": (bool,),
    "timeout": (int, float), "l2": (int, float), "learning_rate": (int, float),
    "weight_decay": (int, float),
}


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except ValueError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    for key, value in doc.items():
        expected = _FIELD_TYPES.get(key, (int,))
        if isinstance(value, bool) and bool not in expected:
            raise UsageError(f"config key {key!r} has the wrong type")
        if not isinstance(value, expected):
            raise UsageError(f"config key {key!r} has the wrong type")
    for key in ("split_ratios", "adapter_hidden"):
        if key in doc:
            doc[key] = tuple(doc[key])
    return RunConfig(**doc).validate()


def resolve(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Overlay flags that were given explicitly on top of the config file."""
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)
                 if getattr(args, f.name, None) is not None}
    return replace(config, **overrides).validate()


def require_seed(config: RunConfig, command: str) -> int:
    if config.seed is None:
        raise UsageError(f"{command} is stochastic: pass --seed or set seed in the config")
    return config.seed


# --- helpers ----------------------------------------------------------------------------------

def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(errno.ENOENT, "no such file", str(path)) from None


def _store(config: RunConfig) -> ParticipantStore:
    if not config.store:
        raise UsageError("no participant store: pass --store or set store in the config")
    return ParticipantStore(config.store)


def _load_dataset(path: str) -> ProDataset:
    return dataset_from_json(json.loads(_read_text(path)))


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}") from None


def _parse_ratios(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _parse_hidden(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of sizes: {text!r}") from None


def _make_client(config: RunConfig, kind: str):
    from .prompts import HttpLlmClient, RetryPolicy, StubLlmClient

    if kind == "stub":
        return StubLlmClient(seed=require_seed(config, "the stub client"))
    return HttpLlmClient(config.endpoint, timeout=config.timeout,
                         retry=RetryPolicy(attempts=config.retries))


# --- commands -----------------------------------------------------------------------------------

def cmd_ingest(args, config: RunConfig) -> dict:
    store = _store(config)
    text = _read_text(args.input)
    if args.kind == "survey":
        if args.survey_kind is None:
            raise UsageError("--survey-kind is required when --kind survey")
        payload = parse_survey(text, args.survey_kind, args.participant)
        count = len(payload.responses)
    elif args.kind == "demographics":
        rows = parse_records("demographics", text)
        if len(rows) != 1:
            raise UsageError(f"demographics file must hold exactly one row, found {len(rows)}")
        payload, count = rows[0], 1
    else:
        payload = parse_records(args.kind, text)
        count = len(payload)
    merged = merge_stream(store.get(args.participant), args.participant, args.kind, payload)
    path = store.save(merged)
    return {"participant": args.participant, "kind": args.kind, "records": count, "path": str(path)}


def cmd_featurize(args, config: RunConfig) -> dict:
    store = _store(config)
    cohort = build_cohort_reference(iter(store)) if args.cohort else None
    summary = featurize(store.load(args.participant), args.as_of, cohort)
    atomic_write_text(args.out, _dumps(summary.to_json()))
    return {"participant": args.participant, "as_of": summary.as_of.isoformat(), "out": args.out}


def cmd_render(args, config: RunConfig) -> dict:
    from .prompts import CaseContext, render_case_prompt

    store = _store(config)
    participant = store.load(args.participant)
    cohort = build_cohort_reference(iter(store)) if args.cohort else None
    features = featurize(participant, args.as_of, cohort)
    prior = {}
    for spec in args.prior or ():
        name, sep, path = spec.partition("=")
        if not sep:
            raise UsageError(f"--prior expects section=path, got {spec!r}")
        prior[name] = _read_text(path)
    ctx = CaseContext(participant, features, redact_dates=config.redact,
                      subjective_readiness=args.readiness, muscle_soreness=args.soreness)
    doc = render_case_prompt(args.vertical, args.section, ctx, prior)
    atomic_write_text(args.out, doc.body)
    return {"vertical": args.vertical, "section": args.section, "out": args.out}


def cmd_score(args, config: RunConfig) -> dict:
    from .prompts import llm_score

    prompt = _read_text(args.prompt_file)
    completions = [c for c in args.completions.split(",") if c]
    scores = llm_score(_make_client(config, args.client), prompt, completions)
    doc = {"completions": completions, "log_likelihoods": scores}
    if args.out:
        atomic_write_text(args.out, _dumps(doc))
    return doc


def cmd_pro_build(args, config: RunConfig) -> dict:
    seed = require_seed(config, "pro build")
    ds = build_dataset(iter(_store(config)), seed, config.split_ratios, min_days=config.min_days,
                       strict=args.strict)
    atomic_write_text(args.out, dumps_dataset(ds))
    counts = {tag: len(ds.subset(tag)) for tag in ("train", "val", "test")}
    return {"examples": len(ds.examples), "excluded": len(ds.excluded), "splits": counts, "out": args.out}


def _check_item(item: str) -> str:
    if item not in ITEM_IDS:
        raise UsageError(f"unknown item {item!r}; expected one of {list(ITEM_IDS)}")
    return item


def train_model(ds: ProDataset, kind: str, item: str, seed: int, config: RunConfig) -> dict:
    X, y = ds.arrays("train", item)
    if kind == "logistic":
        cfg = LogisticConfig(l2=config.l2, seed=seed)
        return logistic_to_json(train_logistic(X, y, cfg), item, cfg)
    acfg = config.adapter_config()
    scorer = FrozenScorer.create(seed, d=acfg.d, n_tokens=acfg.n_tokens)
    prompt = prompt_vector(adapter_prompt(item), scorer.prompt_dim)
    Xv, yv = ds.arrays("val", item)
    val = (Xv, yv) if len(set(yv.tolist())) == 2 else (None, None)
    tcfg = config.train_config(seed)
    adapter, history = train_adapter(X, y, scorer, prompt, tcfg, acfg, *val)
    return adapter_to_json(adapter, scorer, item, tcfg, history)


def cmd_train(args, config: RunConfig) -> dict:
    seed = require_seed(config, "train")
    ds = _load_dataset(args.dataset)
    doc = train_model(ds, args.model, _check_item(args.item), seed, config)
    atomic_write_text(args.out, dumps_model(doc))
    return {"model": args.model, "item": args.item, "out": args.out}


def model_predictions(ds: ProDataset, doc: dict, split: str) -> list[tuple]:
    model = model_from_json(doc)
    item = doc["item"]
    rows = ds.subset(split)
    if not rows:
        return []
    X = np.array([ex.flat for ex in rows])
    if isinstance(model, LogisticModel):
        p = predict_proba(model, X)
        ll = np.column_stack([np.log(p), np.log1p(-p)])
    else:
        adapter, scorer = model
        ll = adapter_logliks(adapter, scorer, X, prompt_vector(adapter_prompt(item), scorer.prompt_dim))
    return [(ex.participant_id, item, doc["kind"], float(a), float(b)) for ex, (a, b) in zip(rows, ll)]


def llm_predictions(ds: ProDataset, mode: str, item: str, client, split: str, shots: int,
                    seed: int) -> list[tuple]:
    exemplars = ()
    if mode == "few_shot":
        train = ds.subset("train")
        pick = np.random.default_rng(seed).choice(len(train), size=min(shots, len(train)), replace=False)
        exemplars = tuple(train[i] for i in sorted(pick))
    out = []
    for ex in ds.subset(split):
        ly, ln = score_outcome(mode, ex, item, client=client, exemplars=exemplars)
        out.append((ex.participant_id, item, mode, ly, ln))
    return out


def format_predictions(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PREDICTION_HEADER)
    for pid, item, model, ly, ln in rows:
        w.writerow((pid, item, model, repr(float(ly)), repr(float(ln))))
    return buf.getvalue()


def cmd_predict(args, config: RunConfig) -> dict:
    ds = _load_dataset(args.dataset)
    rows: list[tuple] = []
    for path in args.model or ():
        rows += model_predictions(ds, json.loads(_read_text(path)), args.split)
    if args.mode:
        if not args.item:
            raise UsageError("--mode needs at least one --item")
        seed = require_seed(config, f"{args.mode} prediction")
        client = _make_client(config, args.client)
        for item in args.item:
            rows += llm_predictions(ds, args.mode, _check_item(item), client, args.split, args.shots, seed)
    if not rows:
        raise UsageError("nothing to predict: pass --model and/or --mode")
    atomic_write_text(args.out, format_predictions(rows))
    return {"predictions": len(rows), "out": args.out}


def read_predictions(path: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(_read_text(path)))
    if reader.fieldnames is None or list(reader.fieldnames) != list(PREDICTION_HEADER):
        raise ValueError(f"{path}: prediction header must be {','.join(PREDICTION_HEADER)}")
    out = []
    for row in reader:
        row["loglik_yes"], row["loglik_no"] = float(row["loglik_yes"]), float(row["loglik_no"])
        out.append(row)
    return out


def evaluate(ds: ProDataset, predictions: list[dict], metrics: Sequence[str], B: int, seed: int,
             plot_dir: str | None = None) -> dict:
    """Per-model, per-item metric estimates with percentile bootstrap CIs."""
    labels = {ex.participant_id: ex.labels for ex in ds.examples}
    grouped: dict[str, dict[str, list[tuple[float, int]]]] = {}
    for row in predictions:
        pid = row["participant_id"]
        if pid not in labels:
            raise ValueError(f"prediction for {pid!r}, who is not in the dataset")
        item = _check_item(row["item"])
        score = row["loglik_yes"] - row["loglik_no"]
        grouped.setdefault(row["model"], {}).setdefault(item, []).append((score, labels[pid][item]))
    models = {}
    for model in sorted(grouped):
        items = {}
        for item in [i for i in ITEM_IDS if i in grouped[model]]:
            pairs = grouped[model][item]
            s = np.array([p[0] for p in pairs])
            y = np.array([p[1] for p in pairs], dtype=int)
            entry: dict[str, Any] = {"n": int(y.size), "positives": int(y.sum())}
            for name in metrics:
                task = (ITEM_IDS.index(item) * len(METRICS) + list(METRICS).index(name)) << 32
                try:
                    entry[name] = bootstrap_ci(METRICS[name], (s, y), B, seed, name=name,
                                               task_offset=task).to_json()
                except WearlabError as exc:
                    entry[name] = {"name": name, "error": f"{type(exc).__name__}: {exc}"}
            items[item] = entry
            if plot_dir:
                _emit_curves(Path(plot_dir), model, item, s, y)
        models[model] = items
    return models


def _emit_curves(directory: Path, model: str, item: str, s: np.ndarray, y: np.ndarray) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for kind, fn, header in (("roc", roc_curve, "threshold,fpr,tpr"),
                             ("pr", pr_curve, "threshold,recall,precision")):
        try:
            points = fn(s, y)
        except WearlabError:
            continue
        lines = [header] + [",".join(repr(float(v)) for v in p) for p in points]
        atomic_write_text(directory / f"{model}_{item}_{kind}.csv", "\n".join(lines) + "\n")


def build_report(models: dict, metrics: Sequence[str], B: int, seed: int, dataset: ProDataset) -> dict:
    return {
        "format": REPORT_FORMAT,
        "version": 1,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wearlab_version": __version__,
        "metrics": list(metrics),
        "bootstrap": B,
        "seed": seed,
        "split_seed": dataset.seed,
        "population_fingerprint": dataset.population.fingerprint,
        "models": models,
    }


def cmd_eval(args, config: RunConfig) -> dict:
    seed = require_seed(config, "eval")
    metrics = [m for m in args.metrics.split(",") if m]
    bad = [m for m in metrics if m not in METRICS]
    if bad or not metrics:
        raise UsageError(f"unknown metrics {bad}; choose from {sorted(METRICS)}")
    ds = _load_dataset(args.dataset)
    predictions = read_predictions(args.predictions)
    models = evaluate(ds, predictions, metrics, config.bootstrap, seed, args.emit_plot_data)
    atomic_write_text(args.out, _dumps(build_report(models, metrics, config.bootstrap, seed, ds)))
    return {"models": sorted(models), "out": args.out}


def cmd_agreement(args, config: RunConfig) -> dict:
    seed = require_seed(config, "agreement")
    table = parse_ratings(_read_text(args.ratings))
    raters = sorted({r.rater for r in table})
    if len(raters) < 2 and not (args.rater_a and args.rater_b):
        raise UsageError("agreement needs ratings from at least two raters")
    a = args.rater_a or raters[0]
    b = args.rater_b or raters[1]
    report = agreement_metrics(table, a, b, B=config.bootstrap, seed=seed)
    group_by = [g for g in args.group_by.split(",") if g]
    groups = aggregate_ratings(table, group_by, config.bootstrap, seed)
    doc = {"format": "wearlab.agreement", "version": 1, "bootstrap": config.bootstrap, "seed": seed,
           "agreement": report.to_json(), "group_by": group_by,
           "groups": [g.to_json(group_by) for g in groups]}
    atomic_write_text(args.out, _dumps(doc))
    return {"raters": [a, b], "out": args.out}


def cmd_synth(args, config: RunConfig) -> dict:
    seed = require_seed(config, "synth")
    scfg = SynthConfig(n_participants=config.n_participants, days=args.days,
                       missing_rate=args.missing_rate, short_fraction=args.short_fraction)
    store = _store(config)
    cohort = synth_cohort(seed, scfg)
    for p in cohort:
        store.save(p)
        if args.csv_dir:
            write_csv_bundle(p, args.csv_dir)
    return {"participants": len(cohort), "store": str(store.root)}


def cmd_pipeline(args, config: RunConfig) -> dict:
    """Synthetic cohort (or an existing store) through to report.json."""
    seed = require_seed(config, "pipeline")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if config.store is None:
        config = replace(config, store=str(out / "store"))
        store = _store(config)
        for p in synth_cohort(seed, SynthConfig(n_participants=config.n_participants)):
            store.save(p)
    store = _store(config)
    ds = build_dataset(iter(store), seed, config.split_ratios, min_days=config.min_days)
    atomic_write_text(out / "dataset.json", dumps_dataset(ds))
    kinds = [k for k in args.models.split(",") if k]
    for k in kinds:
        if k not in ("logistic", "adapter"):
            raise UsageError(f"unknown model kind {k!r}")
    rows: list[tuple] = []
    for kind in kinds:
        for item in ITEM_IDS:
            doc = train_model(ds, kind, item, seed, config)
            atomic_write_text(out / "models" / f"{kind}_{item}.json", dumps_model(doc))
            rows += model_predictions(ds, doc, "test")
    atomic_write_text(out / "predictions.csv", format_predictions(rows))
    predictions = read_predictions(str(out / "predictions.csv"))
    metrics = list(METRICS)
    models = evaluate(ds, predictions, metrics, config.bootstrap, seed,
                      str(out / "plots") if args.emit_plot_data else None)
    atomic_write_text(out / "report.json", _dumps(build_report(models, metrics, config.bootstrap, seed, ds)))
    return {"examples": len(ds.examples), "models": kinds, "report": str(out / "report.json")}


# --- argument parsing ------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, *, store=False, seed=False) -> None:
    p.add_argument("--config", help="JSON run configuration")
    if store:
        p.add_argument("--store", help="participant store directory")
    if seed:
        p.add_argument("--seed", type=int, help="random seed (required)")


def _training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ratios", dest="split_ratios", type=_parse_ratios, help="train,val,test fractions")
    p.add_argument("--l2", type=float)
    p.add_argument("--adapter-d", dest="adapter_d", type=int)
    p.add_argument("--adapter-hidden", dest="adapter_hidden", type=_parse_hidden)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)


def _client_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--client", choices=("http", "stub"), default="http")
    p.add_argument("--endpoint", help="LLM service URL (else $WEARLAB_LLM_ENDPOINT)")
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wearlab", description="Wearable-health feature, prompt and evaluation toolkit.")
    parser.add_argument("--version", action="version", version=f"wearlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse a CSV into the participant store")
    _common(p)
    p.add_argument("--kind", required=True, choices=(*STREAM_KINDS, "demographics", "survey"))
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="store", required=True, help="participant store directory")
    p.add_argument("--participant", required=True)
    p.add_argument("--survey-kind", choices=SURVEY_KINDS)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="write a participant's feature summary")
    _common(p, store=True)
    p.add_argument("--participant", required=True)
    p.add_argument("--as-of", dest="as_of", type=_parse_date)
    p.add_argument("--cohort", action="store_true", help="attach cohort percentiles from the store")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("render", help="render one case-study prompt")
    _common(p, store=True)
    p.add_argument("--vertical", required=True, choices=("sleep", "fitness"))
    p.add_argument("--section", required=True)
    p.add_argument("--participant", required=True)
    p.add_argument("--as-of", dest="as_of", type=_parse_date)
    p.add_argument("--cohort", action="store_true")
    p.add_argument("--redact", action="store_const", const=True, default=None)
    p.add_argument("--prior", action="append", metavar="SECTION=PATH",
                   help="earlier section response (repeatable)")
    p.add_argument("--readiness", help="subjective readiness text")
    p.add_argument("--soreness", help="muscle soreness text")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("score", help="log-likelihoods of completions from the LLM client")
    _common(p, seed=True)
    _client_flags(p)
    p.add_argument("--prompt-file", required=True)
    p.add_argument("--completions", default="yes,no")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("pro", help="PRO dataset commands")
    pro_sub = p.add_subparsers(dest="pro_command", required=True, parser_class=_Parser)
    b = pro_sub.add_parser("build", help="window, split and encode the cohort")
    _common(b, store=True, seed=True)
    b.add_argument("--ratios", dest="split_ratios", type=_parse_ratios)
    b.add_argument("--min-days", dest="min_days", type=int)
    b.add_argument("--strict", action="store_true")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_pro_build)

    p = sub.add_parser("train", help="fit a model for one survey item")
    _common(p, seed=True)
    _training_flags(p)
    p.add_argument("--model", required=True, choices=("logistic", "adapter"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--item", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write per-example log-likelihoods")
    _common(p, seed=True)
    _client_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", action="append", help="model JSON (repeatable)")
    p.add_argument("--mode", choices=("zero_shot", "few_shot"))
    p.add_argument("--item", action="append", help="survey item for LLM modes (repeatable)")
    p.add_argument("--shots", type=int, default=7)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="bootstrap AUROC/AUPRC per model and item")
    _common(p, seed=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--metrics", default="auroc,auprc")
    p.add_argument("--bootstrap", type=int)
    p.add_argument("--emit-plot-data", dest="emit_plot_data", metavar="DIR")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("agreement", help="inter-rater agreement and grouped mean ratings")
    _common(p, seed=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--rater-a", dest="rater_a")
    p.add_argument("--rater-b", dest="rater_b")
    p.add_argument("--group-by", dest="group_by", default="section")
    p.add_argument("--bootstrap", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("synth", help="generate a synthetic cohort into a store")
    _common(p, seed=True)
    p.add_argument("--out", dest="store", required=True, help="participant store directory")
    p.add_argument("--n", dest="n_participants", type=int)
    p.add_argument("--days", type=int, default=SynthConfig.days)
    p.add_argument("--missing-rate", dest="missing_rate", type=float, default=SynthConfig.missing_rate)
    p.add_argument("--short-fraction", dest="short_fraction", type=float, default=SynthConfig.short_fraction)
    p.add_argument("--csv-dir", dest="csv_dir", help="also export per-participant CSV files")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="synth (or store) -> dataset -> models -> report.json")
    _common(p, store=True, seed=True)
    _training_flags(p)
    p.add_argument("--n", dest="n_participants", type=int)
    p.add_argument("--models", default="logistic")
    p.add_argument("--bootstrap", type=int)
    p.add_argument("--emit-plot-data", dest="emit_plot_data", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _error_doc(exc: BaseException) -> dict:
    doc = {"error": type(exc).__name__, "module": getattr(exc, "module", "cli"), "message": str(exc)}
    if isinstance(exc, FileNotFoundError):
        doc["path"] = exc.filename
    return doc


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = resolve(load_config(args.config), args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        print(json.dumps({"error": "UsageError", "module": "cli", "message": str(exc).splitlines()[-1]}),
              file=sys.stderr)
        return 2
    try:
        result = args.func(args, config)
    except UsageError as exc:
        print(parser.format_usage().strip(), file=sys.stderr)
        print(json.dumps({"error": "UsageError", "module": "cli", "message": str(exc)}), file=sys.stderr)
        return 2
    except (WearlabError, OSError, ValueError, KeyError) as exc:
        print(json.dumps(_error_doc(exc)), file=sys.stderr)
        return 1
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
