"""Level 1: split a natural-language scenario into per-page modules.

The primary path asks the LLM to do the segmentation and validates the result
strictly; `baseline_modularize` is a deterministic, LLM-free fallback splitter
driven by literal URL mentions and configurable navigation phrases.
"""

from __future__ import annotations

import json
import logging
from urllib.parse import urlsplit

from e2egen import gateway
from e2egen.config import PipelineConfig
from e2egen.gateway import (
    ChatRequest,
    GatewayError,
    PromptTemplate,
    Transcript,
    build_messages,
    extract_json,
    render_prompt,
)
from e2egen.model import (
    BoundaryViolationError,
    ExecutionStep,
    PageModule,
    SpecError,
    TestScenario,
    TestSpecification,
    parse_specification,
    scenario_to_text,
    validate_boundaries,
)

logger = logging.getLogger(__name__)

DEFAULT_NAV_PHRASES = ("navigate to",)


class LlmOutputInvalid(Exception):
    """The model's output failed parsing or validation; raw text is retained."""

    def __init__(self, stage: str, reason: str, raw_response: str):
        self.stage = stage
        self.reason = reason
        self.raw_response = raw_response
        super().__init__(f"{stage}: {reason}")


def build_modularize_request(
    scenario: TestScenario, template: PromptTemplate, config: PipelineConfig
) -> ChatRequest:
    """The chat request the modularization stage sends (also used to seed transcripts)."""
    rendered = render_prompt(
        template,
        {
            "scenario_text": scenario_to_text(scenario),
            "urls": json.dumps(list(scenario.urls)),
        },
        char_budget=config.prompt_char_budget,
    )
    return ChatRequest(
        model=config.model,
        messages=build_messages(rendered, config.schema_role),
        temperature=config.temperature,
    )


def modularize(
    scenario: TestScenario,
    template: PromptTemplate,
    transcript: Transcript,
    config: PipelineConfig,
) -> TestSpecification:
    """Run the modularization prompt and return the validated specification.

    Raises LlmOutputInvalid when the response is not a valid Level-1
    specification, and BoundaryViolationError when the structure disagrees
    with the scenario.  There is no silent repair loop: a bad output fails
    the case with the raw response kept for inspection.
    """
    request = build_modularize_request(scenario, template, config)
    raw = gateway.complete(
        request,
        transcript,
        base_url=config.base_url,
        timeout=config.request_timeout,
        max_attempts=config.retry_attempts,
        backoff_base=config.retry_backoff,
    )
    try:
        spec = parse_specification(extract_json(raw))
    except BoundaryViolationError:
        raise
    except (GatewayError, SpecError) as exc:
        raise LlmOutputInvalid("modularize", str(exc), raw) from exc
    if not spec.is_level1():
        raise LlmOutputInvalid("modularize", "extracted_data must be empty at Level 1", raw)
    violations = validate_boundaries(spec, scenario)
    if violations:
        raise BoundaryViolationError(violations)
    return spec


def baseline_modularize(
    scenario: TestScenario, nav_phrases: tuple[str, ...] = DEFAULT_NAV_PHRASES
) -> TestSpecification:
    """Deterministic splitter used with --baseline-modularizer (no LLM).

    A step containing one of the scenario URLs or a navigation phrase starts a
    new module; a step that names the next URL's trailing path segment (such
    as clicking the link that leads to ``/login``) closes the current one.
    Module i is assigned ``urls[min(i, len(urls) - 1)]``, reusing the last URL
    with a warning when the split produces more modules than URLs.
    """
    urls = scenario.urls
    lowered_urls = [u.lower() for u in urls]
    phrases = tuple(p.lower() for p in nav_phrases)
    parts: list[list[str]] = []
    current: list[str] = []
    for step in scenario.steps:
        low = step.lower()
        opens_new = any(u in low for u in lowered_urls) or any(p in low for p in phrases)
        if current and opens_new:
            parts.append(current)
            current = []
        current.append(step)
        token = _next_url_token(urls, len(parts) + 1)
        if token and token in low:
            parts.append(current)
            current = []
    if current:
        parts.append(current)
    if len(parts) > len(urls):
        logger.warning(
            "scenario %r splits into %d modules but lists %d url(s); last url reused",
            scenario.title,
            len(parts),
            len(urls),
        )
    modules = tuple(
        PageModule(
            url=urls[min(i, len(urls) - 1)],
            purpose="auto",
            execution_steps=tuple(ExecutionStep(step=s) for s in steps),
        )
        for i, steps in enumerate(parts)
    )
    return TestSpecification(test_case=scenario.title, modules=modules)


def _next_url_token(urls: tuple[str, ...], next_index: int) -> str | None:
    """Distinguishing path token of the upcoming URL, if any (min 3 chars)."""
    if next_index >= len(urls):
        return None
    segments = [s for s in urlsplit(urls[next_index]).path.split("/") if s]
    if not segments:
        return None
    token = segments[-1].lower()
    return token if len(token) >= 3 else None
