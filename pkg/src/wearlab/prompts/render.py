"""Assemble case-study, PRO and AutoEval prompt documents from templates."""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import timedelta
from functools import lru_cache
from importlib import resources
from typing import Mapping, Protocol, Sequence

from ..errors import (
    MissingDependencyError,
    MissingPlaceholderError,
    OptionCountError,
    TooManyExemplarsError,
    UnsupportedKindError,
)
from ..features import FeatureSummary
from ..ingest import SURVEY_ITEM_INDEX, ParticipantData
from . import tables

PLACEHOLDER = re.compile(r"<([a-z][a-z0-9_]*)>")
MAX_EXEMPLARS = 7

SECTIONS: dict[str, tuple[str, ...]] = {
    "sleep": ("insights", "etiology", "recommendations"),
    "fitness": ("demographics", "training_load", "sleep", "health", "assessment"),
}
DEPENDENCIES: dict[tuple[str, str], tuple[str, ...]] = {
    ("sleep", "etiology"): ("insights",),
    ("sleep", "recommendations"): ("insights", "etiology"),
    ("fitness", "assessment"): ("demographics", "training_load", "sleep", "health"),
}
# template placeholder that carries each prior section's response
_RESPONSE_SLOT = {
    "insights": "insights_response",
    "etiology": "etiology_response",
    "demographics": "demographics_response",
    "training_load": "training_load_response",
    "sleep": "sleep_response",
    "health": "health_response",
}


@dataclass(frozen=True)
class PromptDocument:
    vertical: str
    section: str
    body: str
    placeholders_resolved: bool = True


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    path = resources.files("wearlab.prompts") / "templates" / f"{name}.txt"
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UnsupportedKindError(f"no template named {name!r}") from None


def template_placeholders(template: str) -> list[str]:
    return list(dict.fromkeys(PLACEHOLDER.findall(template)))


def substitute(template: str, values: Mapping[str, str]) -> str:
    """Single-pass placeholder substitution; inserted text is never re-scanned."""
    missing = [name for name in template_placeholders(template) if values.get(name) is None]
    if missing:
        raise MissingPlaceholderError(missing)
    return PLACEHOLDER.sub(lambda m: str(values[m.group(1)]), template)


# --- case-study prompts ------------------------------------------------------------------

@dataclass(frozen=True)
class CaseContext:
    """Everything needed to fill the case-study templates for one participant."""

    participant: ParticipantData
    features: FeatureSummary
    redact_dates: bool = False
    window_days: int = 30
    subjective_readiness: str | None = None
    muscle_soreness: str | None = None


def _fmt_optional(value: float | None, fmt: str) -> str | None:
    return None if value is None else format(value, fmt)


def case_fields(ctx: CaseContext) -> dict[str, str | None]:
    """Render every data placeholder available from the context (None when absent)."""
    p, fs, redact = ctx.participant, ctx.features, ctx.redact_dates
    start = fs.as_of - timedelta(days=ctx.window_days - 1)
    week_start = fs.as_of - timedelta(days=6)
    nights = [r for r in p.sleep if start <= r.date <= fs.as_of]
    days = [r for r in p.activity if start <= r.date <= fs.as_of]
    health = [r for r in p.health if start <= r.date <= fs.as_of]
    demo = p.demographics
    return {
        "gender": demo.gender.lower() if demo else None,
        "age": demo.age_bucket if demo else None,
        "height": (_fmt_optional(demo.height_m, ".2f") or tables.NA) + " m" if demo else None,
        "weight": (_fmt_optional(demo.weight_kg, ".1f") or tables.NA) + " kg" if demo else None,
        "bmi": (_fmt_optional(demo.bmi, ".1f") or tables.NA) if demo else None,
        "today": tables.fmt_day(fs.as_of, redact),
        "sleep_logs": tables.sleep_logs_table(nights, redact) if nights else None,
        "sleep_summary": tables.sleep_summary_block(fs.sleep) if fs.sleep else None,
        "activity_table": tables.activity_table(days, redact) if days else None,
        "load_aggregates": tables.load_block(fs.load, fs.exercise, redact) if fs.load else None,
        "sleep_metrics_table": tables.fitness_sleep_table(nights, redact) if nights else None,
        "sleep_aggregates": tables.fitness_sleep_block(fs.recent_sleep) if fs.recent_sleep else None,
        "health_month_table": tables.health_table(health, redact) if health else None,
        "health_week_table": tables.health_table([r for r in health if r.date >= week_start], redact)
        if health else None,
        "health_aggregates": tables.health_block(fs.health) if fs.health else None,
        "subjective_readiness": ctx.subjective_readiness,
        "muscle_soreness": ctx.muscle_soreness,
    }


def _check_section(vertical: str, section: str) -> None:
    if vertical not in SECTIONS:
        raise UnsupportedKindError(f"unknown vertical {vertical!r}; expected one of {sorted(SECTIONS)}")
    if section not in SECTIONS[vertical]:
        raise UnsupportedKindError(
            f"unknown {vertical} section {section!r}; expected one of {SECTIONS[vertical]}"
        )


def render_case_prompt(vertical: str, section: str, data: CaseContext | Mapping[str, str | None],
                       prior_responses: Mapping[str, str] | None = None) -> PromptDocument:
    """Fill the template for one case-study section.

    ``data`` is either a :class:`CaseContext` or a mapping of already rendered
    placeholder text. Sections that build on earlier answers need those
    answers in ``prior_responses`` keyed by section name.
    """
    _check_section(vertical, section)
    prior = dict(prior_responses or {})
    missing = [dep for dep in DEPENDENCIES.get((vertical, section), ()) if prior.get(dep) is None]
    if missing:
        raise MissingDependencyError(missing)
    values = dict(case_fields(data) if isinstance(data, CaseContext) else data)
    for dep, text in prior.items():
        if dep in _RESPONSE_SLOT:
            values[_RESPONSE_SLOT[dep]] = text
    body = substitute(load_template(f"{vertical}_{section}"), values)
    return PromptDocument(vertical, section, body)


# --- PRO prompts ----------------------------------------------------------------------------

class ProPromptInput(Protocol):
    age_bucket: str
    feature_means: tuple[float, ...]
    labels: Mapping[str, int]


def _pro_value(v: float) -> str:
    return repr(round(float(v), 2) + 0.0)


def question_label(item_id: str) -> str:
    try:
        return SURVEY_ITEM_INDEX[item_id].label.lower()
    except KeyError:
        raise UnsupportedKindError(f"unknown survey item {item_id!r}") from None


def _pro_block(example: ProPromptInput, question: str, answer: str | None) -> str:
    from ..pro import FEATURES  # local import: pro does not depend on prompts

    if len(example.feature_means) != len(FEATURES):
        raise ValueError(f"expected {len(FEATURES)} feature means, got {len(example.feature_means)}")
    label = question_label(question)
    lines = [f"Use the information provided to predict ``{label}''.", "", f"age: [{example.age_bucket}]."]
    lines += [f"{f.label}: {_pro_value(v)}." for f, v in zip(FEATURES, example.feature_means)]
    lines += ["", f"{label}: {'yes or no?' if answer is None else answer + '.'}"]
    return "\n".join(lines)


def render_pro_prompt(example: ProPromptInput, question: str, mode: str = "zero_shot",
                      exemplars: Sequence[ProPromptInput] = ()) -> str:
    """Text prompt for one PRO item; few-shot prepends labelled exemplar blocks."""
    if mode == "zero_shot":
        if exemplars:
            raise ValueError("zero-shot prompts take no exemplars")
    elif mode == "few_shot":
        if len(exemplars) > MAX_EXEMPLARS:
            raise TooManyExemplarsError(f"{len(exemplars)} exemplars; at most {MAX_EXEMPLARS}")
        if not exemplars:
            raise ValueError("few-shot prompts need at least one exemplar")
    else:
        raise UnsupportedKindError(f"unknown PRO prompt mode {mode!r}")
    blocks = [_pro_block(ex, question, "yes" if ex.labels[question] else "no") for ex in exemplars]
    blocks.append(_pro_block(example, question, None))
    return "\n\n".join(blocks) + "\n"


# --- AutoEval prompts ------------------------------------------------------------------------

def render_autoeval_prompt(vertical: str, section_label: str, objective: str, case_data: str,
                           response: str, criteria: str, options: Sequence[str]) -> str:
    if len(options) != 5:
        raise OptionCountError(f"expected exactly 5 Likert options, got {len(options)}")
    values = {
        "vertical": vertical,
        "tag_label": section_label,
        "objective": objective,
        "case_study_data": case_data,
        "assistant_text": response,
        "principle_criteria": criteria,
        **{f"option_{i + 1}": text for i, text in enumerate(options)},
    }
    return substitute(load_template("autoeval"), values)


def autoeval_target(rating: int, options: Sequence[str]) -> str:
    """Expected rater output for a Likert rating, used as a training target."""
    if len(options) != 5:
        raise OptionCountError(f"expected exactly 5 Likert options, got {len(options)}")
    if not 1 <= rating <= 5:
        raise ValueError(f"rating {rating} outside 1..5")
    return f"{rating}. {options[rating - 1]}"
