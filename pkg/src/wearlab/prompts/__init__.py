"""Prompt rendering and the language-model client contract."""

from .client import HttpLlmClient, LlmClient, RetryPolicy, StubLlmClient, llm_score
from .render import (
    CaseContext,
    PromptDocument,
    autoeval_target,
    render_autoeval_prompt,
    render_case_prompt,
    render_pro_prompt,
)
from .tables import render_table

__all__ = [
    "CaseContext",
    "HttpLlmClient",
    "LlmClient",
    "PromptDocument",
    "RetryPolicy",
    "StubLlmClient",
    "autoeval_target",
    "llm_score",
    "render_autoeval_prompt",
    "render_case_prompt",
    "render_pro_prompt",
    "render_table",
]
