"""Page snapshotting: fetch or load HTML, prune it for prompts, persist it.

Pruning keeps the interaction-relevant skeleton of a page under a character
budget: scripts, styles and similar noise are dropped, long text is clipped,
and if the page is still too large, non-interactive subtrees are removed
deepest-first.  Interactive elements (links, form controls, labels) are kept
verbatim, attributes included, since locators target them.

Each module page is fetched independently with no session state carried
between fetches; pages whose content depends on prior interactions therefore
snapshot in their unvisited state.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import requests

from e2egen.dom import DomChild, DomNode, parse_html, serialize_html
from e2egen.model import is_absolute_http_url

logger = logging.getLogger(__name__)

SOURCE_LIVE = "live"
SOURCE_FILE = "file"

DEFAULT_PRUNE_BUDGET = 200_000
DEFAULT_FETCH_TIMEOUT = 30.0
TEXT_CLIP = 120
ELLIPSIS = "…"

# Timestamp recorded for file-sourced snapshots; a wall-clock value here would
# break byte-identical replay runs.
EPOCH_TIMESTAMP = "1970-01-01T00:00:00+00:00"

USER_AGENT = (
    "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 "
    "(KHTML, like Gecko) Chrome/124.0 Safari/537.36"
)

INTERACTIVE_TAGS = frozenset({"a", "button", "input", "select", "textarea", "form", "label"})
NOISE_TAGS = frozenset({"script", "style", "noscript", "svg"})
SIGNATURE_ATTRS = ("id", "name", "type", "href", "class")


class CrawlError(Exception):
    """Base class for snapshotting failures."""


class FetchError(CrawlError):
    def __init__(self, url: str, detail: str, status: int | None = None):
        self.url = url
        self.status = status
        super().__init__(f"fetch failed for {url}: {detail}")


class NonHtmlContent(CrawlError):
    def __init__(self, url: str, content_type: str):
        self.url = url
        self.content_type = content_type
        super().__init__(f"{url} served non-HTML content-type {content_type!r}")


class IoError(CrawlError):
    pass


@dataclass(frozen=True)
class PageSnapshot:
    """Raw and pruned HTML for one module URL, with provenance metadata."""

    url: str
    fetched_at: str
    http_status: int
    raw_html: str
    pruned_html: str
    source: str  # SOURCE_LIVE | SOURCE_FILE


# ---------------------------------------------------------------------------
# Pruning
# ---------------------------------------------------------------------------


def prune(raw_html: str, budget: int = DEFAULT_PRUNE_BUDGET) -> str:
    """Reduce a page to its interaction-relevant skeleton within ``budget`` chars."""
    root = parse_html(raw_html)
    _strip_noise(root)
    _clip_text(root, inside_interactive=False)
    html = serialize_html(root)
    if len(html) <= budget:
        return html
    # Drop non-interactive subtrees deepest-first until the page fits.
    candidates = _droppable_subtrees(root)
    candidates.sort(key=lambda item: item[0], reverse=True)
    excess = len(html) - budget
    for _, parent, child in candidates:
        if excess <= 0:
            break
        size = len(serialize_html(child)) if isinstance(child, DomNode) else len(child)
        parent.children.remove(child)
        excess -= size
    html = serialize_html(root)
    if len(html) > budget:
        # Interactive content alone exceeds the budget; budget compliance wins.
        logger.warning(
            "pruned page still %d chars over budget %d; dropping interactive content",
            len(html) - budget,
            budget,
        )
        while len(html) > budget and _drop_last_element(root):
            html = serialize_html(root)
        html = html[:budget]
    return html


def _strip_noise(node: DomNode) -> None:
    kept: list[DomChild] = []
    for child in node.children:
        if isinstance(child, DomNode):
            if child.tag in NOISE_TAGS:
                continue
            _strip_noise(child)
        kept.append(child)
    node.children[:] = kept


def _clip_text(node: DomNode, inside_interactive: bool) -> None:
    inside = inside_interactive or node.tag in INTERACTIVE_TAGS
    for i, child in enumerate(node.children):
        if isinstance(child, str):
            if not inside and len(child) > TEXT_CLIP:
                node.children[i] = child[:TEXT_CLIP] + ELLIPSIS
        else:
            _clip_text(child, inside)


def _contains_interactive(node: DomNode) -> bool:
    if node.tag in INTERACTIVE_TAGS:
        return True
    return any(
        isinstance(c, DomNode) and _contains_interactive(c) for c in node.children
    )


def _droppable_subtrees(
    node: DomNode, depth: int = 0, inside_interactive: bool = False
) -> list[tuple[int, DomNode, DomChild]]:
    """(depth, parent, child) for every subtree safe to drop, leaves deepest."""
    out: list[tuple[int, DomNode, DomChild]] = []
    inside = inside_interactive or node.tag in INTERACTIVE_TAGS
    for child in node.children:
        if isinstance(child, str):
            if not inside:
                out.append((depth + 1, node, child))
            continue
        if inside or child.tag in INTERACTIVE_TAGS or _contains_interactive(child):
            # never drop interactive elements, their contents, or their carriers
            out.extend(_droppable_subtrees(child, depth + 1, inside))
        else:
            out.append((depth + 1, node, child))
    return out


def _drop_last_element(node: DomNode) -> bool:
    if not node.children:
        return False
    node.children.pop()
    return True


def interactive_signature(html: str) -> Counter:
    """Multiset of (tag, id, name, type, href, class, text) over interactive tags.

    Pruning must leave this signature unchanged; tests rely on it.
    """
    root = parse_html(html)
    signature: Counter = Counter()
    _collect_signature(root, signature)
    return signature


def _collect_signature(node: DomNode, signature: Counter) -> None:
    for child in node.children:
        if not isinstance(child, DomNode):
            continue
        if child.tag in NOISE_TAGS:
            continue
        if child.tag in INTERACTIVE_TAGS:
            signature[
                (child.tag, *(child.attributes.get(a, "") for a in SIGNATURE_ATTRS),
                 child.text_content)
            ] += 1
        _collect_signature(child, signature)


# ---------------------------------------------------------------------------
# Acquisition
# ---------------------------------------------------------------------------


def fetch(
    url: str,
    *,
    timeout: float = DEFAULT_FETCH_TIMEOUT,
    budget: int = DEFAULT_PRUNE_BUDGET,
) -> PageSnapshot:
    """GET a page and snapshot it; raises FetchError / NonHtmlContent."""
    if not is_absolute_http_url(url):
        raise FetchError(url, "not an absolute http(s) URL")
    try:
        resp = requests.get(url, timeout=timeout, headers={"User-Agent": USER_AGENT})
    except requests.RequestException as exc:
        raise FetchError(url, str(exc)) from exc
    if resp.status_code >= 400:
        raise FetchError(url, f"HTTP {resp.status_code}", status=resp.status_code)
    content_type = resp.headers.get("Content-Type", "text/html")
    if "html" not in content_type.lower():
        raise NonHtmlContent(url, content_type)
    raw = resp.text
    return PageSnapshot(
        url=url,
        fetched_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        http_status=resp.status_code,
        raw_html=raw,
        pruned_html=prune(raw, budget),
        source=SOURCE_LIVE,
    )


def load_snapshot_from_file(
    path: Path | str, url: str, *, budget: int = DEFAULT_PRUNE_BUDGET
) -> PageSnapshot:
    """Snapshot a page from an on-disk HTML file (offline corpus support)."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoError(f"cannot read snapshot file {path}: {exc}") from exc
    if not raw.strip():
        logger.warning("snapshot file %s is empty; page will have an empty DOM", path)
    return PageSnapshot(
        url=url,
        fetched_at=EPOCH_TIMESTAMP,
        http_status=200,
        raw_html=raw,
        pruned_html=prune(raw, budget),
        source=SOURCE_FILE,
    )


# ---------------------------------------------------------------------------
# Snapshot store
# ---------------------------------------------------------------------------


def snapshot_path(store_dir: Path | str, url: str) -> Path:
    return Path(store_dir) / (hashlib.sha256(url.encode("utf-8")).hexdigest() + ".json")


def save_snapshot(snapshot: PageSnapshot, store_dir: Path | str) -> Path:
    """Persist a snapshot keyed by its URL hash (atomic write-then-rename)."""
    path = snapshot_path(store_dir, snapshot.url)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(
        json.dumps(asdict(snapshot), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    tmp.replace(path)
    return path


def load_snapshot(store_dir: Path | str, url: str) -> PageSnapshot:
    """Load a stored snapshot for ``url``; raises IoError when absent or corrupt."""
    path = snapshot_path(store_dir, url)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return PageSnapshot(**data)
    except FileNotFoundError as exc:
        raise IoError(f"no stored snapshot for {url} (expected {path})") from exc
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise IoError(f"cannot load snapshot {path}: {exc}") from exc
