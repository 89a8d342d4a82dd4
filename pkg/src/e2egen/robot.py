"""Robot Framework script handling: parse, emit, lint, and LLM generation.

Parsing follows the plain-space-separated format: cells split on a tab or on
two-plus spaces, ``#`` starts a comment, sections open with ``*** Name ***``
headers.  The linter is the deterministic safety net behind the LLM-driven
generator; its rules mirror the fixes scripts typically need before they run
(unknown keyword names, missing waits after navigation, undefined variables).

The keyword whitelist is a swappable text asset so other keyword-driven
frameworks can be targeted without code changes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from e2egen import gateway
from e2egen.config import PipelineConfig
from e2egen.gateway import ChatRequest, PromptTemplate, Transcript
from e2egen.model import TestSpecification, serialize_specification
from e2egen.modularize import LlmOutputInvalid
from e2egen.xpath import UnsupportedXPath, parse_xpath

SETTINGS = "Settings"
VARIABLES = "Variables"
TEST_CASES = "Test Cases"
CANONICAL_SECTIONS = (SETTINGS, VARIABLES, TEST_CASES)

_SECTION_RE = re.compile(r"^\*{3}\s*(.+?)\s*\*{3}\s*$")
_CELL_SPLIT_RE = re.compile(r"\t+| {2,}")
_VARIABLE_NAME_RE = re.compile(r"^\$\{([^}]+)\}$")
_VARIABLE_REF_RE = re.compile(r"\$\{([^}]+)\}")

# Robot resolves these without a Variables entry.
BUILTIN_VARIABLES = frozenset(
    name.upper().replace(" ", "").replace("_", "")
    for name in (
        "CURDIR", "TEMPDIR", "EXECDIR", "OUTPUT_DIR", "OUTPUT_FILE", "LOG_FILE",
        "REPORT_FILE", "DEBUG_FILE", "LOG_LEVEL", "EMPTY", "SPACE", "True", "False",
        "None", "null", "TEST_NAME", "SUITE_NAME", "SUITE_SOURCE", "PREV_TEST_NAME",
        "PREV_TEST_STATUS", "PREV_TEST_MESSAGE",
    )
)

NAVIGATION_KEYWORDS = frozenset({"open browser", "go to"})
INTERACTION_KEYWORDS = frozenset(
    {"click element", "click button", "click link", "input text", "input password"}
)
WAIT_KEYWORDS = frozenset(
    {
        "sleep",
        "wait until element is visible",
        "wait until page contains",
        "wait until page contains element",
        "wait until element is enabled",
        "page should contain element",
    }
)
LOCATOR_KEYWORDS = frozenset(
    {
        "click element", "click button", "click link", "input text", "input password",
        "element should be visible", "wait until element is visible",
        "wait until page contains element", "page should contain element",
        "scroll element into view",
    }
)


class ParseError(Exception):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ScriptInvalid(Exception):
    """Generated text is not a parseable script."""

    def __init__(self, reason: str, raw_response: str = ""):
        self.raw_response = raw_response
        super().__init__(reason)


@dataclass(frozen=True)
class KeywordCall:
    name: str
    args: tuple[str, ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RobotTestCase:
    title: str
    calls: tuple[KeywordCall, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RobotScript:
    """Parsed script: settings, variables and test cases, plus raw extra sections."""

    settings: tuple[tuple[str, tuple[str, ...]], ...] = ()
    variables: tuple[tuple[str, str], ...] = ()
    test_cases: tuple[RobotTestCase, ...] = ()
    extra_sections: tuple[tuple[str, tuple[str, ...]], ...] = ()  # parse-only
    section_order: tuple[str, ...] = field(default=(), compare=False)
    section_lines: tuple[int, ...] = field(default=(), compare=False)

    def variable_map(self) -> dict[str, str]:
        return dict(self.variables)


def _split_cells(line: str) -> list[str]:
    cells = [c for c in _CELL_SPLIT_RE.split(line.strip()) if c]
    out: list[str] = []
    for cell in cells:
        if cell.startswith("#"):
            break
        out.append(cell)
    return out


def parse_robot(text: str) -> RobotScript:
    """Parse script text into an AST; raises ParseError with the offending line."""
    settings: list[tuple[str, tuple[str, ...]]] = []
    variables: list[tuple[str, str]] = []
    test_cases: list[RobotTestCase] = []
    extra_sections: list[tuple[str, list[str]]] = []
    section_order: list[str] = []
    section_lines: list[int] = []
    section: str | None = None
    current_case: list[KeywordCall] | None = None
    current_title: str | None = None
    current_line = 0

    def close_case() -> None:
        nonlocal current_case, current_title
        if current_title is not None:
            test_cases.append(
                RobotTestCase(current_title, tuple(current_case or ()), line=current_line)
            )
        current_case, current_title = None, None

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.rstrip()
        if not line.strip() or line.strip().startswith("#"):
            continue
        m = _SECTION_RE.match(line.strip())
        if m:
            close_case()
            name = m.group(1).strip()
            canonical = next(
                (c for c in CANONICAL_SECTIONS if c.lower() == name.lower()), None
            )
            section = canonical or name.title()
            section_order.append(section)
            section_lines.append(lineno)
            if canonical is None:
                extra_sections.append((section, []))
            continue
        if section is None:
            raise ParseError(lineno, "content before any *** section ***")
        if section == SETTINGS:
            cells = _split_cells(line)
            if cells:
                settings.append((cells[0], tuple(cells[1:])))
        elif section == VARIABLES:
            cells = _split_cells(line)
            if not cells:
                continue
            m_var = _VARIABLE_NAME_RE.match(cells[0])
            if not m_var:
                raise ParseError(lineno, f"expected ${{NAME}} in Variables, got {cells[0]!r}")
            variables.append((m_var.group(1), "    ".join(cells[1:])))
        elif section == TEST_CASES:
            indented = raw_line[:1] in (" ", "\t")
            cells = _split_cells(line)
            if not cells:
                continue
            if not indented:
                close_case()
                current_title = line.strip()
                current_case = []
                current_line = lineno
            else:
                if current_case is None:
                    raise ParseError(lineno, "keyword call before any test case title")
                if cells[0] == "...":
                    if not current_case:
                        raise ParseError(lineno, "continuation with nothing to continue")
                    prev = current_case.pop()
                    current_case.append(
                        KeywordCall(prev.name, prev.args + tuple(cells[1:]), line=prev.line)
                    )
                else:
                    current_case.append(
                        KeywordCall(cells[0], tuple(cells[1:]), line=lineno)
                    )
        else:
            extra_sections[-1][1].append(line)
    close_case()
    if not section_order:
        raise ParseError(0, "no sections")
    return RobotScript(
        settings=tuple(settings),
        variables=tuple(variables),
        test_cases=tuple(test_cases),
        extra_sections=tuple((n, tuple(ls)) for n, ls in extra_sections),
        section_order=tuple(section_order),
        section_lines=tuple(section_lines),
    )


def emit(script: RobotScript) -> str:
    """Canonical text for an AST; parse_robot(emit(s)) round-trips."""
    blocks: list[str] = []
    if script.settings:
        lines = ["*** Settings ***"]
        lines += ["    ".join((name, *values)) for name, values in script.settings]
        blocks.append("\n".join(lines))
    if script.variables:
        lines = ["*** Variables ***"]
        lines += [
            "    ".join((f"${{{name}}}", value)) if value else f"${{{name}}}"
            for name, value in script.variables
        ]
        blocks.append("\n".join(lines))
    if script.test_cases:
        lines = ["*** Test Cases ***"]
        for case in script.test_cases:
            lines.append(case.title)
            lines += ["    " + "    ".join((call.name, *call.args)) for call in case.calls]
        blocks.append("\n".join(lines))
    for name, raw_lines in script.extra_sections:
        blocks.append("\n".join([f"*** {name} ***", *raw_lines]))
    return "\n\n".join(blocks) + "\n"


def normalize_script(text: str) -> str:
    """Whitespace normalization used for golden comparisons.

    Runs of two or more spaces collapse to the canonical four-space separator
    (the framework treats them identically); trailing whitespace and trailing
    blank lines are stripped.
    """
    lines = [
        re.sub(r" {2,}", "    ", line).rstrip()
        for line in text.replace("\r\n", "\n").split("\n")
    ]
    return "\n".join(lines).strip("\n") + "\n"


# ---------------------------------------------------------------------------
# Lint
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LintFinding:
    severity: str  # Error | Warning
    rule: str  # R1..R6
    line: int
    message: str
    suggestion: str | None = None

    def to_obj(self) -> dict:
        obj = {
            "severity": self.severity,
            "rule": self.rule,
            "line": self.line,
            "message": self.message,
        }
        if self.suggestion:
            obj["suggestion"] = self.suggestion
        return obj


RULES = {
    "R1": "unknown keyword",
    "R2": "undefined variable",
    "R3": "section order",
    "R4": "missing synchronization after navigation",
    "R5": "locator outside the supported XPath subset",
    "R6": "test case title differs from the specification",
}


def _normalize_keyword(name: str) -> str:
    return re.sub(r"[\s_]+", " ", name).strip().lower()


def load_whitelist(path: Path | None = None) -> tuple[str, ...]:
    """Keyword whitelist: one keyword per line, '#' comments allowed."""
    if path is not None:
        raw = Path(path).read_text(encoding="utf-8")
    else:
        raw = resources.files("e2egen").joinpath("assets/keyword_whitelist.txt").read_text("utf-8")
    keywords = []
    for line in raw.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            keywords.append(line)
    return tuple(keywords)


def _closest_keyword(name: str, whitelist: tuple[str, ...]) -> str | None:
    import difflib

    matches = difflib.get_close_matches(
        _normalize_keyword(name), [_normalize_keyword(k) for k in whitelist], n=1, cutoff=0.5
    )
    if not matches:
        return None
    for keyword in whitelist:
        if _normalize_keyword(keyword) == matches[0]:
            return keyword
    return None


def lint(
    script: RobotScript,
    spec: TestSpecification | None = None,
    whitelist: tuple[str, ...] | None = None,
) -> list[LintFinding]:
    """Apply the rule set; deterministic and ordered by rule then location."""
    if whitelist is None:
        whitelist = load_whitelist()
    known = {_normalize_keyword(k): k for k in whitelist}
    findings: list[LintFinding] = []
    findings += _lint_unknown_keywords(script, known, whitelist)
    findings += _lint_undefined_variables(script)
    findings += _lint_section_order(script)
    findings += _lint_synchronization(script)
    findings += _lint_locators(script)
    if spec is not None:
        findings += _lint_title(script, spec)
    return findings


def _iter_calls(script: RobotScript):
    for case in script.test_cases:
        for call in case.calls:
            yield case, call


def _lint_unknown_keywords(script, known, whitelist) -> list[LintFinding]:
    out = []
    for _, call in _iter_calls(script):
        if call.name.startswith("["):  # [Documentation] and friends
            continue
        if _normalize_keyword(call.name) not in known:
            suggestion = _closest_keyword(call.name, whitelist)
            message = f"unknown keyword {call.name!r}"
            if suggestion:
                message += f"; did you mean {suggestion!r}?"
            out.append(LintFinding("Error", "R1", call.line, message, suggestion))
    return out


def _lint_undefined_variables(script) -> list[LintFinding]:
    defined = {
        name.upper().replace(" ", "").replace("_", "") for name, _ in script.variables
    } | BUILTIN_VARIABLES
    out = []
    for _, call in _iter_calls(script):
        for arg in call.args:
            for ref in _VARIABLE_REF_RE.findall(arg):
                if ref.upper().replace(" ", "").replace("_", "") not in defined:
                    out.append(
                        LintFinding(
                            "Error", "R2", call.line, f"variable ${{{ref}}} is not defined"
                        )
                    )
    return out


def _lint_section_order(script) -> list[LintFinding]:
    ranked = [
        (name, line)
        for name, line in zip(script.section_order, script.section_lines)
        if name in CANONICAL_SECTIONS
    ]
    out = []
    for (prev, _), (name, line) in zip(ranked, ranked[1:]):
        if CANONICAL_SECTIONS.index(name) < CANONICAL_SECTIONS.index(prev):
            out.append(
                LintFinding(
                    "Error",
                    "R3",
                    line,
                    f"section {name} must come before {prev}",
                )
            )
    return out


def _lint_synchronization(script) -> list[LintFinding]:
    out = []
    for case in script.test_cases:
        pending_navigation: str | None = None
        for call in case.calls:
            name = _normalize_keyword(call.name)
            if name in NAVIGATION_KEYWORDS:
                pending_navigation = call.name
            elif name in WAIT_KEYWORDS:
                pending_navigation = None
            elif name in INTERACTION_KEYWORDS and pending_navigation:
                out.append(
                    LintFinding(
                        "Warning",
                        "R4",
                        call.line,
                        f"{call.name!r} right after {pending_navigation!r} with no wait; "
                        "the page may not be ready",
                        "Sleep    2s  (or Wait Until Element Is Visible    <locator>)",
                    )
                )
                pending_navigation = None
    return out


def _lint_locators(script) -> list[LintFinding]:
    out = []
    for _, call in _iter_calls(script):
        if _normalize_keyword(call.name) not in LOCATOR_KEYWORDS or not call.args:
            continue
        locator = call.args[0]
        if locator.lower().startswith(("xpath=", "xpath:")):
            locator = locator[6:]
        if not locator.startswith("/"):
            continue  # id=, css=, name= and friends are not XPath
        if "${" in locator:
            continue  # resolved at runtime
        try:
            parse_xpath(locator)
        except UnsupportedXPath as exc:
            out.append(
                LintFinding(
                    "Warning",
                    "R5",
                    call.line,
                    f"locator {locator!r} is outside the supported XPath subset: {exc}",
                )
            )
    return out


def _lint_title(script, spec: TestSpecification) -> list[LintFinding]:
    wanted = re.sub(r"\s+", " ", spec.test_case).strip().casefold()
    out = []
    for case in script.test_cases:
        actual = re.sub(r"\s+", " ", case.title).strip().casefold()
        if actual != wanted:
            out.append(
                LintFinding(
                    "Warning",
                    "R6",
                    case.line,
                    f"test case title {case.title!r} differs from the specification "
                    f"name {spec.test_case!r}",
                )
            )
    return out


def findings_to_json(findings: list[LintFinding]) -> str:
    return json.dumps([f.to_obj() for f in findings], indent=2, ensure_ascii=False) + "\n"


def has_errors(findings: list[LintFinding]) -> bool:
    return any(f.severity == "Error" for f in findings)


# ---------------------------------------------------------------------------
# Generation (Level 3)
# ---------------------------------------------------------------------------


def build_generate_request(
    spec: TestSpecification, template: PromptTemplate, config: PipelineConfig
) -> ChatRequest:
    rendered = gateway.render_prompt(
        template,
        {"spec_json": serialize_specification(spec)},
        char_budget=config.prompt_char_budget,
    )
    return ChatRequest(
        model=config.model,
        messages=gateway.build_messages(rendered, config.schema_role),
        temperature=config.temperature,
    )


def generate_script(
    spec: TestSpecification,
    template: PromptTemplate,
    transcript: Transcript,
    config: PipelineConfig,
) -> str:
    """Produce the script text for a refined specification via the LLM.

    The returned text is fence-stripped and guaranteed to parse; anything else
    raises ScriptInvalid with the raw response attached.
    """
    request = build_generate_request(spec, template, config)
    raw = gateway.complete(
        request,
        transcript,
        base_url=config.base_url,
        timeout=config.request_timeout,
        max_attempts=config.retry_attempts,
        backoff_base=config.retry_backoff,
    )
    text = gateway.strip_code_fences(raw).strip("\n") + "\n"
    if not text.strip():
        raise LlmOutputInvalid("generate", "empty response", raw)
    try:
        parse_robot(text)
    except ParseError as exc:
        raise ScriptInvalid(f"generated script does not parse: {exc}", raw) from exc
    return text
