"""Prompt rendering and chat-completion access with record/replay transcripts.

Each pipeline stage has one editable text template ([persona]/[task]/
[output_schema] sections with ``{{slot}}`` placeholders).  Requests are
fingerprinted over a canonical encoding so a recorded transcript can replay
responses byte-for-byte with no network access.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import requests

logger = logging.getLogger(__name__)

API_KEY_ENV = "GENIA_API_KEY"

LEVEL_MODULARIZE = "modularize"
LEVEL_EXTRACT = "extract"
LEVEL_REFINE = "refine"
LEVEL_GENERATE = "generate"
LEVELS = (LEVEL_MODULARIZE, LEVEL_EXTRACT, LEVEL_REFINE, LEVEL_GENERATE)

SLOT_NAMES = frozenset({"scenario_text", "urls", "module_json", "pruned_html", "spec_json"})
REQUIRED_SLOTS: dict[str, frozenset[str]] = {
    LEVEL_MODULARIZE: frozenset({"scenario_text", "urls"}),
    LEVEL_EXTRACT: frozenset({"module_json", "pruned_html"}),
    LEVEL_REFINE: frozenset({"module_json", "pruned_html"}),
    LEVEL_GENERATE: frozenset({"spec_json"}),
}

MODE_LIVE = "live"
MODE_RECORD = "record"
MODE_REPLAY = "replay"

_SLOT_RE = re.compile(r"\{\{(\w+)\}\}")
_FENCE_LINE_RE = re.compile(r"^\s*```.*$", re.MULTILINE)

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


class GatewayError(Exception):
    """Base class for prompt/completion failures."""


class TemplateError(GatewayError):
    """Template asset is malformed or missing required content."""


class MissingSlot(GatewayError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no binding provided for slot {{{{{name}}}}}")


class ProviderError(GatewayError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body[:500]
        super().__init__(f"provider returned {status}: {self.body}")


class RequestTimeout(GatewayError):
    pass


class ReplayMiss(GatewayError):
    def __init__(self, fingerprint: str):
        self.fingerprint = fingerprint
        super().__init__(f"no transcript entry for request {fingerprint}")


class NoJsonFound(GatewayError):
    pass


class TranscriptError(GatewayError):
    pass


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptTemplate:
    """One stage's prompt: persona + task instructions + output schema."""

    level: str
    persona: str
    task_instructions: str
    output_schema: str
    placeholders: frozenset[str]

    @property
    def body(self) -> str:
        return f"{self.persona}\n\n{self.task_instructions}\n\n{self.output_schema}"


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully substituted prompt, with its character count reported."""

    persona_text: str
    task_text: str
    schema_text: str
    char_count: int
    truncated: bool = False

    @property
    def text(self) -> str:
        return f"{self.persona_text}\n\n{self.task_text}\n\n{self.schema_text}"


def _split_sections(raw: str, origin: str) -> dict[str, str]:
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in raw.splitlines():
        m = re.match(r"^\[(\w+)\]\s*$", line)
        if m:
            current = m.group(1)
            sections.setdefault(current, [])
            continue
        if current is None:
            if line.strip():
                raise TemplateError(f"{origin}: content before first [section] header")
            continue
        sections[current].append(line)
    return {name: "\n".join(lines).strip() for name, lines in sections.items()}


def parse_template(raw: str, level: str, origin: str = "<template>") -> PromptTemplate:
    """Parse a template asset and enforce its content requirements."""
    if level not in LEVELS:
        raise TemplateError(f"unknown template level {level!r}")
    sections = _split_sections(raw, origin)
    for name in ("persona", "task", "output_schema"):
        if name not in sections:
            raise TemplateError(f"{origin}: missing [{name}] section")
    persona = sections["persona"]
    task = sections["task"]
    schema = sections["output_schema"]
    if not persona.strip():
        raise TemplateError(f"{origin}: persona must not be empty")
    referenced = frozenset(_SLOT_RE.findall(task + "\n" + schema))
    unknown = referenced - SLOT_NAMES
    if unknown:
        raise TemplateError(f"{origin}: unknown placeholder(s) {sorted(unknown)}")
    missing = REQUIRED_SLOTS[level] - referenced
    if missing:
        raise TemplateError(f"{origin}: required placeholder(s) {sorted(missing)} not referenced")
    if "json" not in schema.lower():
        raise TemplateError(f"{origin}: output schema must describe the JSON/text shape")
    if re.search(r"^\s*example\s*:", task + "\n" + schema, re.IGNORECASE | re.MULTILINE):
        raise TemplateError(f"{origin}: templates are zero-shot; no worked examples allowed")
    return PromptTemplate(
        level=level,
        persona=persona,
        task_instructions=task,
        output_schema=schema,
        placeholders=referenced,
    )


def load_templates(template_dir: Path | None = None) -> dict[str, PromptTemplate]:
    """Load the four stage templates from a directory or the packaged assets."""
    out: dict[str, PromptTemplate] = {}
    for level in LEVELS:
        if template_dir is not None:
            path = Path(template_dir) / f"{level}.txt"
            try:
                raw = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise TemplateError(f"cannot read template {path}: {exc}") from exc
            origin = str(path)
        else:
            raw = (
                resources.files("e2egen").joinpath(f"templates/{level}.txt").read_text("utf-8")
            )
            origin = f"e2egen/templates/{level}.txt"
        out[level] = parse_template(raw, level, origin)
    return out


def render_prompt(
    template: PromptTemplate,
    bindings: dict[str, str],
    char_budget: int | None = None,
) -> RenderedPrompt:
    """Substitute slot bindings literally; oversized prompts lose HTML tail first.

    When the rendered prompt exceeds ``char_budget`` and a ``pruned_html``
    binding is present, that binding is cut from the tail until the prompt
    fits; instructions are never truncated.
    """
    truncated = False
    rendered = _substitute(template, bindings)
    if char_budget is not None and rendered.char_count > char_budget:
        overflow = rendered.char_count - char_budget
        html = bindings.get("pruned_html", "")
        if html:
            keep = max(0, len(html) - overflow)
            logger.warning(
                "prompt for %s is %d chars (budget %d); truncating pruned_html to %d chars",
                template.level,
                rendered.char_count,
                char_budget,
                keep,
            )
            bindings = dict(bindings)
            bindings["pruned_html"] = html[:keep]
            rendered = _substitute(template, bindings)
            truncated = True
        else:
            logger.warning(
                "prompt for %s is %d chars, over budget %d, and has no HTML to trim",
                template.level,
                rendered.char_count,
                char_budget,
            )
    return RenderedPrompt(
        persona_text=rendered.persona_text,
        task_text=rendered.task_text,
        schema_text=rendered.schema_text,
        char_count=rendered.char_count,
        truncated=truncated,
    )


def _substitute(template: PromptTemplate, bindings: dict[str, str]) -> RenderedPrompt:
    def fill(text: str) -> str:
        def repl(m: re.Match[str]) -> str:
            name = m.group(1)
            if name not in bindings:
                raise MissingSlot(name)
            return bindings[name]

        return _SLOT_RE.sub(repl, text)

    task = fill(template.task_instructions)
    schema = fill(template.output_schema)
    return RenderedPrompt(
        persona_text=template.persona,
        task_text=task,
        schema_text=schema,
        char_count=len(template.persona) + len(task) + len(schema) + 4,
    )


def build_messages(
    rendered: RenderedPrompt, schema_role: str = "user"
) -> tuple[tuple[str, str], ...]:
    """Message layout for a rendered prompt; where the schema goes is config-driven."""
    if schema_role == "system":
        return (
            ("system", f"{rendered.persona_text}\n\n{rendered.schema_text}"),
            ("user", rendered.task_text),
        )
    if schema_role == "user":
        return (
            ("system", rendered.persona_text),
            ("user", f"{rendered.task_text}\n\n{rendered.schema_text}"),
        )
    raise GatewayError(f"schema_role must be 'system' or 'user', got {schema_role!r}")


# ---------------------------------------------------------------------------
# Requests and transcripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[tuple[str, str], ...]  # (role, content)
    temperature: float = 0.0
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise GatewayError("messages must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise GatewayError(f"temperature {self.temperature} outside [0, 2]")
        for role, _ in self.messages:
            if role not in ("system", "user"):
                raise GatewayError(f"unsupported message role {role!r}")


def _normalize_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def canonicalize_request(request: ChatRequest) -> str:
    """Stable encoding: sorted keys, whitespace-normalized message content."""
    payload = {
        "max_tokens": request.max_tokens,
        "messages": [
            {"content": _normalize_ws(content), "role": role}
            for role, content in request.messages
        ],
        "model": request.model,
        "temperature": request.temperature,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def fingerprint_request(request: ChatRequest) -> str:
    return hashlib.sha256(canonicalize_request(request).encode("utf-8")).hexdigest()


@dataclass
class Transcript:
    """Recorded (fingerprint, response) pairs for one pipeline stage."""

    mode: str = MODE_REPLAY
    entries: list[tuple[str, str]] = field(default_factory=list)
    path: Path | None = None
    _index: dict[str, str] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self) -> None:
        if self.mode not in (MODE_LIVE, MODE_RECORD, MODE_REPLAY):
            raise TranscriptError(f"unknown transcript mode {self.mode!r}")
        for fp, response in self.entries:
            if self.mode == MODE_REPLAY and fp in self._index:
                raise TranscriptError(f"duplicate fingerprint in replay transcript: {fp}")
            self._index[fp] = response

    def lookup(self, fingerprint: str) -> str:
        if fingerprint not in self._index:
            raise ReplayMiss(fingerprint)
        return self._index[fingerprint]

    def append(self, fingerprint: str, response: str) -> None:
        # Record-mode appends are serialized; writers on other threads queue here.
        with self._lock:
            self.entries.append((fingerprint, response))
            self._index[fingerprint] = response
            if self.path is not None:
                save_transcript(self, self.path)


def load_transcript(path: Path, mode: str) -> Transcript:
    """Load a transcript file; a missing file yields an empty transcript."""
    path = Path(path)
    entries: list[tuple[str, str]] = []
    if path.exists():
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise TranscriptError(f"cannot load transcript {path}: {exc}") from exc
        if not isinstance(raw, list):
            raise TranscriptError(f"{path}: transcript must be a JSON array")
        for i, item in enumerate(raw):
            if not isinstance(item, dict) or "fingerprint" not in item or "response" not in item:
                raise TranscriptError(f"{path}: entry {i} needs fingerprint and response")
            entries.append((str(item["fingerprint"]), str(item["response"])))
    return Transcript(mode=mode, entries=entries, path=path)


def save_transcript(transcript: Transcript, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = [{"fingerprint": fp, "response": r} for fp, r in transcript.entries]
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    tmp.replace(path)


# ---------------------------------------------------------------------------
# Completion
# ---------------------------------------------------------------------------


def complete(
    request: ChatRequest,
    transcript: Transcript,
    *,
    base_url: str = "https://api.openai.com/v1",
    timeout: float = 120.0,
    max_attempts: int = 3,
    backoff_base: float = 2.0,
) -> str:
    """Return the completion text for a request, honoring the transcript mode.

    Replay never touches the network.  Record performs the live call, then
    appends the (fingerprint, response) pair.  Transient provider failures
    (429/5xx) are retried with exponential backoff up to ``max_attempts``
    total attempts.
    """
    fingerprint = fingerprint_request(request)
    if transcript.mode == MODE_REPLAY:
        return transcript.lookup(fingerprint)
    response = _complete_live(
        request,
        base_url=base_url,
        timeout=timeout,
        max_attempts=max_attempts,
        backoff_base=backoff_base,
    )
    if transcript.mode == MODE_RECORD:
        transcript.append(fingerprint, response)
    return response


def _complete_live(
    request: ChatRequest,
    *,
    base_url: str,
    timeout: float,
    max_attempts: int,
    backoff_base: float,
) -> str:
    api_key = os.environ.get(API_KEY_ENV, "")
    if not api_key:
        raise ProviderError(0, f"{API_KEY_ENV} is not set; cannot call the provider")
    body: dict = {
        "model": request.model,
        "messages": [{"role": r, "content": c} for r, c in request.messages],
        "temperature": request.temperature,
    }
    if request.max_tokens is not None:
        body["max_tokens"] = request.max_tokens
    url = base_url.rstrip("/") + "/chat/completions"
    headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
    last_error: ProviderError | None = None
    for attempt in range(max_attempts):
        if attempt:
            time.sleep(backoff_base * (2 ** (attempt - 1)))
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=timeout)
        except requests.Timeout as exc:
            raise RequestTimeout(f"provider did not answer within {timeout}s") from exc
        except requests.RequestException as exc:
            last_error = ProviderError(0, str(exc))
            continue
        if resp.status_code in RETRYABLE_STATUSES:
            last_error = ProviderError(resp.status_code, resp.text)
            logger.warning(
                "provider returned %d (attempt %d/%d)", resp.status_code, attempt + 1, max_attempts
            )
            continue
        if resp.status_code != 200:
            raise ProviderError(resp.status_code, resp.text)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(resp.status_code, f"malformed completion body: {resp.text[:200]}") from exc
    assert last_error is not None
    raise last_error


# ---------------------------------------------------------------------------
# Response post-processing
# ---------------------------------------------------------------------------


def strip_code_fences(text: str) -> str:
    """Drop markdown fence lines (``` markers), keeping the fenced content."""
    return _FENCE_LINE_RE.sub("", text)


def extract_json(response_text: str) -> str:
    """Return the first maximal well-formed JSON object/array in a response.

    Models tend to wrap their JSON in prose or markdown fences; this scans the
    fence-stripped text for the first position where a complete object or
    array parses.  The input itself is never modified.
    """
    stripped = strip_code_fences(response_text)
    decoder = json.JSONDecoder()
    for i, ch in enumerate(stripped):
        if ch not in "{[":
            continue
        try:
            _, end = decoder.raw_decode(stripped, i)
        except json.JSONDecodeError:
            continue
        return stripped[i:end]
    raise NoJsonFound("response contains no JSON object or array")
