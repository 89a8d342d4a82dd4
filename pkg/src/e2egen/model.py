"""Domain types for the test-generation pipeline and their JSON interchange schema.

The specification JSON (`<case-id>.spec.json`) is the contract between all
pipeline stages: a test case name plus ordered page modules, each holding the
execution steps for one page and, once element extraction has run, the UI
elements each step needs.  Parsing is strict — a missing or mistyped field
raises SchemaError naming the JSON path — while unknown extra fields are
carried through serialization untouched.

All types are frozen dataclasses, safe to share across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any
from urllib.parse import urlsplit

from e2egen.xpath import UnsupportedXPath, parse_xpath

ELEMENT_TYPES = ("input", "button", "link", "checkbox", "select", "text", "other")
IDENTIFIER_TYPES = ("XPath", "CSS", "Id")

# Violation reason codes reported by validate_boundaries.
UNKNOWN_URL = "unknown-url"
STEP_MISMATCH = "step-mismatch"
TRANSITION_NOT_FINAL = "transition-not-final"

_URL_IN_TEXT_RE = re.compile(r"https?://[^\s'\"<>)\]]+")
_QUOTE_MAP = str.maketrans({"‘": "'", "’": "'", "“": '"', "”": '"'})


class SpecError(Exception):
    """Base class for specification-level failures."""


class SchemaError(SpecError):
    """A required field is missing or mistyped; carries the JSON path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{message} (at {path})")


class BoundaryViolationError(SpecError):
    """Raised when a parsed module keeps going after a page-transition step."""

    def __init__(self, violations: list["BoundaryViolation"]):
        self.violations = violations
        detail = "; ".join(str(v) for v in violations)
        super().__init__(f"module boundary violated: {detail}")


@dataclass(frozen=True)
class BoundaryViolation:
    """One structural inconsistency between a specification and its scenario."""

    kind: str  # UNKNOWN_URL | STEP_MISMATCH | TRANSITION_NOT_FINAL
    module_index: int
    step_index: int | None
    message: str

    def __str__(self) -> str:
        where = f"module {self.module_index}"
        if self.step_index is not None:
            where += f", step {self.step_index}"
        return f"[{self.kind}] {where}: {self.message}"


@dataclass(frozen=True)
class TestScenario:
    """A natural-language test case: title, visited URLs, ordered steps."""

    title: str
    urls: tuple[str, ...]
    steps: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.urls:
            raise SchemaError("$.urls", "urls must be non-empty")
        for i, url in enumerate(self.urls):
            if not is_absolute_http_url(url):
                raise SchemaError(f"$.urls[{i}]", f"not an absolute http(s) URL: {url!r}")
        if not self.steps:
            raise SchemaError("$.steps", "steps must be non-empty")
        for i, step in enumerate(self.steps):
            if not step.strip():
                raise SchemaError(f"$.steps[{i}]", "step text must not be blank")


@dataclass(frozen=True)
class UiElementRef:
    """One UI element a step interacts with, plus the locator to find it."""

    element_type: str  # normalized member of ELEMENT_TYPES
    request_description: str
    identifier_type: str  # XPath | CSS | Id
    identifier_tracking: str
    type_text: str = ""  # original 'type' value, preserved for round-trips
    step_ref: str | None = field(default=None, compare=False)  # owning step, not serialized
    extra: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if self.element_type not in ELEMENT_TYPES:
            raise SchemaError("$.type", f"unknown element type {self.element_type!r}")
        if self.identifier_type not in IDENTIFIER_TYPES:
            raise SchemaError(
                "$.identifier_type", f"unknown locator strategy {self.identifier_type!r}"
            )
        if not self.identifier_tracking.strip():
            raise SchemaError("$.identifier_tracking", "locator expression must not be blank")
        if self.identifier_type == "XPath":
            try:
                parse_xpath(self.identifier_tracking)
            except UnsupportedXPath as exc:
                raise SchemaError("$.identifier_tracking", f"invalid XPath: {exc}") from exc
        if not self.type_text:
            object.__setattr__(self, "type_text", self.element_type)


@dataclass(frozen=True)
class ExecutionStep:
    """One user action, with the UI elements extraction attached to it."""

    step: str
    extracted_data: tuple[UiElementRef, ...] = ()
    extra: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if not self.step.strip():
            raise SchemaError("$.step", "step text must not be blank")


@dataclass(frozen=True)
class PageModule:
    """All execution steps taking place on one page URL."""

    url: str
    purpose: str
    execution_steps: tuple[ExecutionStep, ...]
    extra: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if not is_absolute_http_url(self.url):
            raise SchemaError("$.url", f"not an absolute http(s) URL: {self.url!r}")
        if not self.execution_steps:
            raise SchemaError("$.execution_steps", "execution_steps must be non-empty")

    @property
    def steps(self) -> tuple[str, ...]:
        return tuple(s.step for s in self.execution_steps)


@dataclass(frozen=True)
class TestSpecification:
    """The staged interchange artifact: a test case split into page modules."""

    test_case: str
    modules: tuple[PageModule, ...]
    extra: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if not self.modules:
            raise SchemaError("$.modules", "modules must be non-empty")

    @property
    def all_steps(self) -> tuple[str, ...]:
        return tuple(step for m in self.modules for step in m.steps)

    def is_level1(self) -> bool:
        """True when no step carries extracted elements yet."""
        return all(not s.extracted_data for m in self.modules for s in m.execution_steps)


def is_absolute_http_url(url: str) -> bool:
    try:
        parts = urlsplit(url)
    except ValueError:
        return False
    return parts.scheme in ("http", "https") and bool(parts.netloc)


def normalize_step(text: str) -> str:
    """Whitespace-collapsed, straight-quoted form used for step comparisons."""
    return re.sub(r"\s+", " ", text.translate(_QUOTE_MAP)).strip()


def urls_in_text(text: str) -> list[str]:
    """Absolute http(s) URLs literally present in a step's text."""
    return [m.group(0).rstrip(".,;:!?") for m in _URL_IN_TEXT_RE.finditer(text)]


def _same_url(a: str, b: str) -> bool:
    return a.rstrip("/") == b.rstrip("/")


# ---------------------------------------------------------------------------
# JSON schema (field names are the interchange contract)
# ---------------------------------------------------------------------------

_ELEMENT_KEYS = ("type", "request_description", "identifier_type", "identifier_tracking")
_STEP_KEYS = ("step", "extracted_data")
_MODULE_KEYS = ("url", "purpose", "execution_steps")
_SPEC_KEYS = ("testCase", "modules")


def _require(obj: dict, key: str, path: str, kind: type, kind_name: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}.{key}", f"{key} is required")
    value = obj[key]
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        raise SchemaError(f"{path}.{key}", f"{key} must be {kind_name}")
    return value


def _extras(obj: dict, known: tuple[str, ...]) -> tuple[tuple[str, Any], ...]:
    return tuple((k, obj[k]) for k in obj if k not in known)


def normalize_element_type(raw: str) -> str:
    """Map free-form element type text onto the closed enumeration."""
    lowered = raw.strip().lower()
    return lowered if lowered in ELEMENT_TYPES else "other"


def _normalize_identifier_type(raw: str, path: str) -> str:
    for canonical in IDENTIFIER_TYPES:
        if raw.strip().lower() == canonical.lower():
            return canonical
    raise SchemaError(path, f"identifier_type must be one of {'/'.join(IDENTIFIER_TYPES)}")


def element_from_obj(obj: Any, path: str) -> UiElementRef:
    if not isinstance(obj, dict):
        raise SchemaError(path, "element must be an object")
    raw_type = _require(obj, "type", path, str, "a string")
    description = _require(obj, "request_description", path, str, "a string")
    id_type = _normalize_identifier_type(
        _require(obj, "identifier_type", path, str, "a string"), f"{path}.identifier_type"
    )
    tracking = _require(obj, "identifier_tracking", path, str, "a string")
    try:
        return UiElementRef(
            element_type=normalize_element_type(raw_type),
            request_description=description,
            identifier_type=id_type,
            identifier_tracking=tracking,
            type_text=raw_type,
            extra=_extras(obj, _ELEMENT_KEYS),
        )
    except SchemaError as exc:
        raise SchemaError(path + exc.path.lstrip("$"), exc.message) from None


def step_from_obj(obj: Any, path: str) -> ExecutionStep:
    if not isinstance(obj, dict):
        raise SchemaError(path, "execution step must be an object")
    text = _require(obj, "step", path, str, "a string")
    if not text.strip():
        raise SchemaError(f"{path}.step", "step text must not be blank")
    raw_elements = _require(obj, "extracted_data", path, list, "a list")
    elements = tuple(
        element_from_obj(e, f"{path}.extracted_data[{i}]") for i, e in enumerate(raw_elements)
    )
    step = ExecutionStep(step=text, extracted_data=elements, extra=_extras(obj, _STEP_KEYS))
    for element in elements:
        object.__setattr__(element, "step_ref", text)
    return step


def module_from_obj(obj: Any, path: str, index: int = 0) -> PageModule:
    if not isinstance(obj, dict):
        raise SchemaError(path, "module must be an object")
    url = _require(obj, "url", path, str, "a string")
    if not is_absolute_http_url(url):
        raise SchemaError(f"{path}.url", f"not an absolute http(s) URL: {url!r}")
    purpose = _require(obj, "purpose", path, str, "a string")
    raw_steps = _require(obj, "execution_steps", path, list, "a list")
    if not raw_steps:
        raise SchemaError(f"{path}.execution_steps", "execution_steps must be non-empty")
    steps = tuple(
        step_from_obj(s, f"{path}.execution_steps[{i}]") for i, s in enumerate(raw_steps)
    )
    module = PageModule(
        url=url, purpose=purpose, execution_steps=steps, extra=_extras(obj, _MODULE_KEYS)
    )
    _check_module_boundary(module, path, index)
    return module


def _transition_step_indexes(module: PageModule) -> list[int]:
    """Steps whose text names a URL other than the module's own page."""
    out = []
    for i, step in enumerate(module.execution_steps):
        mentioned = urls_in_text(step.step)
        if any(not _same_url(u, module.url) for u in mentioned):
            out.append(i)
    return out


def _check_module_boundary(module: PageModule, path: str, index: int) -> None:
    last = len(module.execution_steps) - 1
    for i in _transition_step_indexes(module):
        if i != last:
            raise BoundaryViolationError(
                [
                    BoundaryViolation(
                        TRANSITION_NOT_FINAL,
                        module_index=index,
                        step_index=i,
                        message=(
                            f"step at {path}.execution_steps[{i}] names another page's URL "
                            "but is not the module's final step"
                        ),
                    )
                ]
            )


def parse_specification(json_text: str) -> TestSpecification:
    """Parse and validate specification JSON; raises SchemaError with a JSON path."""
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not well-formed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("$", "top level must be an object")
    test_case = _require(obj, "testCase", "$", str, "a string")
    raw_modules = _require(obj, "modules", "$", list, "a list")
    if not raw_modules:
        raise SchemaError("$.modules", "modules must be non-empty")
    modules = tuple(
        module_from_obj(m, f"$.modules[{i}]", i) for i, m in enumerate(raw_modules)
    )
    return TestSpecification(test_case=test_case, modules=modules, extra=_extras(obj, _SPEC_KEYS))


def element_to_obj(element: UiElementRef) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "type": element.type_text,
        "request_description": element.request_description,
        "identifier_type": element.identifier_type,
        "identifier_tracking": element.identifier_tracking,
    }
    obj.update(dict(element.extra))
    return obj


def step_to_obj(step: ExecutionStep) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "step": step.step,
        "extracted_data": [element_to_obj(e) for e in step.extracted_data],
    }
    obj.update(dict(step.extra))
    return obj


def module_to_obj(module: PageModule) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "url": module.url,
        "purpose": module.purpose,
        "execution_steps": [step_to_obj(s) for s in module.execution_steps],
    }
    obj.update(dict(module.extra))
    return obj


def spec_to_obj(spec: TestSpecification) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "testCase": spec.test_case,
        "modules": [module_to_obj(m) for m in spec.modules],
    }
    obj.update(dict(spec.extra))
    return obj


def serialize_specification(spec: TestSpecification) -> str:
    """Canonical JSON: 2-space indent, schema key order, UTF-8 text, trailing newline."""
    return json.dumps(spec_to_obj(spec), indent=2, ensure_ascii=False) + "\n"


def serialize_module(module: PageModule) -> str:
    """Canonical JSON for a single module (the per-page prompt payload)."""
    return json.dumps(module_to_obj(module), indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Cross-validation against the original scenario
# ---------------------------------------------------------------------------


def validate_boundaries(
    spec: TestSpecification, scenario: TestScenario
) -> list[BoundaryViolation]:
    """Check a specification's structure against its source scenario.

    Returns an empty list iff every module URL appears in the scenario's URL
    list, the module steps concatenate to exactly the scenario's steps (after
    whitespace/quote normalization), and no step that names a foreign page URL
    sits in the middle of a module.  Violations are data, not exceptions.
    """
    violations: list[BoundaryViolation] = []
    known = {u.rstrip("/") for u in scenario.urls}
    for m_idx, module in enumerate(spec.modules):
        if module.url.rstrip("/") not in known:
            violations.append(
                BoundaryViolation(
                    UNKNOWN_URL,
                    module_index=m_idx,
                    step_index=None,
                    message=f"module URL {module.url!r} is not in the scenario's url list",
                )
            )
        last = len(module.execution_steps) - 1
        for s_idx in _transition_step_indexes(module):
            if s_idx != last:
                violations.append(
                    BoundaryViolation(
                        TRANSITION_NOT_FINAL,
                        module_index=m_idx,
                        step_index=s_idx,
                        message="page-transition step is followed by more steps in its module",
                    )
                )
    violations.extend(_step_sequence_violations(spec, scenario))
    return violations


def _step_sequence_violations(
    spec: TestSpecification, scenario: TestScenario
) -> list[BoundaryViolation]:
    expected = [normalize_step(s) for s in scenario.steps]
    position = 0
    for m_idx, module in enumerate(spec.modules):
        for s_idx, step in enumerate(module.execution_steps):
            actual = normalize_step(step.step)
            if position >= len(expected) or actual != expected[position]:
                wanted = expected[position] if position < len(expected) else "<end of scenario>"
                return [
                    BoundaryViolation(
                        STEP_MISMATCH,
                        module_index=m_idx,
                        step_index=s_idx,
                        message=f"expected step {wanted!r}, found {actual!r}",
                    )
                ]
            position += 1
    if position != len(expected):
        last_module = len(spec.modules) - 1
        return [
            BoundaryViolation(
                STEP_MISMATCH,
                module_index=last_module,
                step_index=len(spec.modules[last_module].execution_steps) - 1,
                message=f"specification is missing {len(expected) - position} scenario step(s)",
            )
        ]
    return []


# ---------------------------------------------------------------------------
# Scenario text format (title line, `urls = [...]` line, numbered steps)
# ---------------------------------------------------------------------------

_STEP_LINE_RE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")
_URLS_LINE_RE = re.compile(r"^\s*urls\s*=\s*(\[.*\])\s*$", re.IGNORECASE)
_TITLE_PREFIX_RE = re.compile(r"^\s*test\s*case(?:\s*\d+)?\s*:\s*", re.IGNORECASE)


class ScenarioFormatError(SpecError):
    """Raised when a scenario text file does not follow the expected layout."""


def parse_scenario_text(text: str) -> TestScenario:
    """Parse the plain-text scenario layout.

    One `urls = [...]` line (JSON array of absolute URLs), one title line
    (optionally prefixed 'Test Case N:'), and numbered step lines.  The urls
    line may come before or after the title.
    """
    urls: list[str] | None = None
    title: str | None = None
    steps: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _URLS_LINE_RE.match(line)
        if m:
            if urls is not None:
                raise ScenarioFormatError(f"line {lineno}: duplicate urls line")
            try:
                parsed = json.loads(m.group(1))
            except json.JSONDecodeError as exc:
                raise ScenarioFormatError(f"line {lineno}: bad urls list: {exc}") from exc
            if not isinstance(parsed, list) or not all(isinstance(u, str) for u in parsed):
                raise ScenarioFormatError(f"line {lineno}: urls must be a list of strings")
            urls = parsed
            continue
        m = _STEP_LINE_RE.match(line)
        if m:
            steps.append(m.group(1))
            continue
        if title is None:
            title = _TITLE_PREFIX_RE.sub("", line).strip()
            continue
        raise ScenarioFormatError(f"line {lineno}: unexpected line {line.strip()!r}")
    if urls is None:
        raise ScenarioFormatError("missing `urls = [...]` line")
    if title is None:
        raise ScenarioFormatError("missing title line")
    if not steps:
        raise ScenarioFormatError("no numbered step lines found")
    return TestScenario(title=title, urls=tuple(urls), steps=tuple(steps))


def scenario_to_text(scenario: TestScenario) -> str:
    """Render a scenario back to its text layout (used in prompt bindings)."""
    lines = [f"urls = {json.dumps(list(scenario.urls))}"]
    lines.append(f"Test Case: {scenario.title}")
    lines.extend(f"{i}. {step}" for i, step in enumerate(scenario.steps, start=1))
    return "\n".join(lines)


def slugify(title: str) -> str:
    """Stable case id derived from the scenario title."""
    slug = re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")
    return slug or "case"
