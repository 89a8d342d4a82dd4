"""Level 2: fill each step's extracted UI elements, then refine and validate them.

Modules are processed one page at a time — one extraction call and one
refinement call per module, each seeing only that page's pruned HTML.  The
LLM refinement pass is followed by a deterministic post-pass: duplicate
entries collapse onto the best-ranked selector, and every surviving selector
is classified against the snapshot DOM (Unique / Multiple(n) / None) for the
validation report.  An unresolvable selector is advisory, not fatal: pages
that inject elements only after user actions legitimately produce locators a
static snapshot cannot resolve.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace

from e2egen import gateway
from e2egen.config import PipelineConfig
from e2egen.crawl import PageSnapshot
from e2egen.dom import DomNode, parse_html
from e2egen.gateway import ChatRequest, GatewayError, PromptTemplate, Transcript
from e2egen.model import (
    PageModule,
    SpecError,
    UiElementRef,
    module_from_obj,
    normalize_step,
    serialize_module,
)
from e2egen.modularize import LlmOutputInvalid
from e2egen.xpath import Position, TextContains, UnsupportedXPath, classify, parse_xpath

logger = logging.getLogger(__name__)


class StepMismatch(Exception):
    """The model added, dropped, or renamed execution steps."""

    def __init__(self, stage: str, detail: str):
        self.stage = stage
        super().__init__(f"{stage}: {detail}")


@dataclass(frozen=True)
class ValidationRow:
    """One selector's uniqueness classification for the validation report."""

    module_index: int
    step: str
    expression: str
    classification: str


def build_extract_request(
    module: PageModule,
    snapshot: PageSnapshot,
    template: PromptTemplate,
    config: PipelineConfig,
) -> ChatRequest:
    return _module_request(module, snapshot, template, config)


def build_refine_request(
    module: PageModule,
    snapshot: PageSnapshot,
    template: PromptTemplate,
    config: PipelineConfig,
) -> ChatRequest:
    return _module_request(module, snapshot, template, config)


def _module_request(
    module: PageModule,
    snapshot: PageSnapshot,
    template: PromptTemplate,
    config: PipelineConfig,
) -> ChatRequest:
    rendered = gateway.render_prompt(
        template,
        {
            "module_json": serialize_module(module),
            "pruned_html": snapshot.pruned_html,
        },
        char_budget=config.prompt_char_budget,
    )
    return ChatRequest(
        model=config.model,
        messages=gateway.build_messages(rendered, config.schema_role),
        temperature=config.temperature,
    )


def _call_for_module(
    stage: str,
    module: PageModule,
    snapshot: PageSnapshot,
    template: PromptTemplate,
    transcript: Transcript,
    config: PipelineConfig,
) -> PageModule:
    """Send one module prompt and parse the response back into a module."""
    request = _module_request(module, snapshot, template, config)
    raw = gateway.complete(
        request,
        transcript,
        base_url=config.base_url,
        timeout=config.request_timeout,
        max_attempts=config.retry_attempts,
        backoff_base=config.retry_backoff,
    )
    try:
        payload = json.loads(gateway.extract_json(raw))
        payload = _unwrap_module(payload)
        parsed = module_from_obj(payload, "module")
    except (GatewayError, SpecError) as exc:
        raise LlmOutputInvalid(stage, str(exc), raw) from exc
    return _graft_elements(stage, module, parsed)


def _unwrap_module(payload: object) -> object:
    # tolerate a response wrapped as {"testCase":…, "modules":[module]}
    if isinstance(payload, dict) and "modules" in payload and "url" not in payload:
        modules = payload["modules"]
        if isinstance(modules, list) and len(modules) == 1:
            return modules[0]
    return payload


def _graft_elements(stage: str, original: PageModule, response: PageModule) -> PageModule:
    """Keep the input module's steps verbatim; take only extracted_data from the response."""
    if len(response.execution_steps) != len(original.execution_steps):
        raise StepMismatch(
            stage,
            f"expected {len(original.execution_steps)} steps, "
            f"response has {len(response.execution_steps)}",
        )
    for ours, theirs in zip(original.execution_steps, response.execution_steps):
        if normalize_step(ours.step) != normalize_step(theirs.step):
            raise StepMismatch(
                stage, f"step renamed: expected {ours.step!r}, got {theirs.step!r}"
            )
    steps = tuple(
        replace(
            ours,
            extracted_data=tuple(
                _with_step_ref(el, ours.step) for el in theirs.extracted_data
            ),
        )
        for ours, theirs in zip(original.execution_steps, response.execution_steps)
    )
    return replace(original, execution_steps=steps)


def _with_step_ref(element: UiElementRef, step_text: str) -> UiElementRef:
    object.__setattr__(element, "step_ref", step_text)
    return element


def extract_elements(
    module: PageModule,
    snapshot: PageSnapshot,
    template: PromptTemplate,
    transcript: Transcript,
    config: PipelineConfig,
) -> PageModule:
    """Fill extracted_data for every step of a Level-1-pure module."""
    if any(s.extracted_data for s in module.execution_steps):
        raise ValueError("extract_elements expects a module with empty extracted_data")
    return _call_for_module("extract", module, snapshot, template, transcript, config)


def refine_elements(
    module: PageModule,
    snapshot: PageSnapshot,
    template: PromptTemplate,
    transcript: Transcript,
    config: PipelineConfig,
    module_index: int = 0,
) -> tuple[PageModule, list[ValidationRow]]:
    """Refine an extracted module and classify every surviving selector.

    The LLM pass may be skipped (with a warning) when it fails; the
    deterministic dedup + validation still runs, so refinement is total.
    """
    refined = module
    try:
        refined = _call_for_module("refine", module, snapshot, template, transcript, config)
    except (LlmOutputInvalid, StepMismatch, GatewayError) as exc:
        logger.warning("refinement prompt failed (%s); falling back to dedup only", exc)
    refined = dedup_elements(refined)
    report = validate_selectors(refined, snapshot, module_index)
    return refined, report


def dedup_elements(module: PageModule) -> PageModule:
    """Collapse entries sharing (step, type, description) onto the best selector."""
    steps = []
    for step in module.execution_steps:
        best: dict[tuple[str, str, str], UiElementRef] = {}
        order: list[tuple[str, str, str]] = []
        for element in step.extracted_data:
            key = (step.step, element.element_type, element.request_description)
            if key not in best:
                best[key] = element
                order.append(key)
            elif rank_selector(element, best[key]) < 0:
                best[key] = element
        steps.append(replace(step, extracted_data=tuple(best[k] for k in order)))
    return replace(module, execution_steps=tuple(steps))


def validate_selectors(
    module: PageModule, snapshot: PageSnapshot, module_index: int = 0
) -> list[ValidationRow]:
    """Classify each element's selector against the snapshot DOM."""
    dom = parse_html(snapshot.pruned_html)
    rows: list[ValidationRow] = []
    for step in module.execution_steps:
        for element in step.extracted_data:
            rows.append(
                ValidationRow(
                    module_index=module_index,
                    step=step.step,
                    expression=element.identifier_tracking,
                    classification=_classify_expression(element, dom),
                )
            )
    return rows


def _classify_expression(element: UiElementRef, dom: DomNode) -> str:
    if element.identifier_type != "XPath":
        return "Unchecked"  # CSS/Id locators are accepted as data, not evaluated
    return classify(parse_xpath(element.identifier_tracking), dom).kind


# ---------------------------------------------------------------------------
# Selector ranking
# ---------------------------------------------------------------------------

_RANK_ID = 0
_RANK_ATTRIBUTE = 1
_RANK_TEXT = 2
_RANK_POSITIONAL = 3


def selector_category(element: UiElementRef) -> int:
    """Stability class of a locator: id anchors > attributes > text > position.

    Any positional predicate makes the whole selector positional — a path like
    ``//*[@id='x']/div[2]/ul/li[1]/a`` breaks on layout changes no matter how
    stable its head anchor is.
    """
    if element.identifier_type == "Id":
        return _RANK_ID
    if element.identifier_type == "CSS":
        if "#" in element.identifier_tracking:
            return _RANK_ID
        if "[" in element.identifier_tracking or "." in element.identifier_tracking:
            return _RANK_ATTRIBUTE
        return _RANK_POSITIONAL
    try:
        expr = parse_xpath(element.identifier_tracking)
    except UnsupportedXPath:
        return _RANK_POSITIONAL
    categories = set()
    for step in expr.steps:
        for pred in step.predicates:
            if isinstance(pred, Position):
                return _RANK_POSITIONAL
            name = getattr(pred, "name", None)
            if name == "id":
                categories.add(_RANK_ID)
            elif name is not None:
                categories.add(_RANK_ATTRIBUTE)
            elif isinstance(pred, TextContains):
                categories.add(_RANK_TEXT)
    return min(categories) if categories else _RANK_POSITIONAL


def rank_key(element: UiElementRef) -> tuple[int, int, str]:
    return (
        selector_category(element),
        len(element.identifier_tracking),
        element.identifier_tracking,
    )


def rank_selector(a: UiElementRef, b: UiElementRef) -> int:
    """Total order over selectors; negative means ``a`` is preferred."""
    ka, kb = rank_key(a), rank_key(b)
    return -1 if ka < kb else (1 if ka > kb else 0)
