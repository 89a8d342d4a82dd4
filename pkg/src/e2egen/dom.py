"""Forgiving HTML parsing into a minimal immutable-by-convention DOM tree.

Built on the stdlib tokenizer so malformed markup degrades gracefully: stray
end tags are ignored, unclosed elements are closed implicitly, void elements
never swallow siblings, and character references are decoded.  Comments are
dropped.  Text is kept verbatim, including whitespace, because visible labels
matter to locator matching.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html import escape
from html.parser import HTMLParser
from typing import Iterator, Union

VOID_ELEMENTS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)

DomChild = Union["DomNode", str]


@dataclass(eq=False)
class DomNode:
    """One element (or the '#document' container); children mix nodes and text."""

    tag: str
    attributes: dict[str, str] = field(default_factory=dict)
    children: list[DomChild] = field(default_factory=list)

    @property
    def element_children(self) -> list["DomNode"]:
        return [c for c in self.children if isinstance(c, DomNode)]

    @property
    def direct_text(self) -> str:
        """Concatenation of the node's own text children."""
        return "".join(c for c in self.children if isinstance(c, str))

    @property
    def text_content(self) -> str:
        """Concatenation of all descendant text, in document order."""
        parts: list[str] = []
        self._collect_text(parts)
        return "".join(parts)

    def _collect_text(self, parts: list[str]) -> None:
        for child in self.children:
            if isinstance(child, str):
                parts.append(child)
            else:
                child._collect_text(parts)

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"<DomNode {self.tag} attrs={self.attributes} children={len(self.children)}>"


def iter_elements(node: DomNode) -> Iterator[DomNode]:
    """Preorder iteration over descendant elements (the node itself excluded)."""
    for child in node.children:
        if isinstance(child, DomNode):
            yield child
            yield from iter_elements(child)


class _TreeBuilder(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root = DomNode("#document")
        self.stack = [self.root]

    def _attrs(self, attrs: list[tuple[str, str | None]]) -> dict[str, str]:
        out: dict[str, str] = {}
        for name, value in attrs:
            out[name.lower()] = value if value is not None else ""
        return out

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        node = DomNode(tag.lower(), self._attrs(attrs))
        self.stack[-1].children.append(node)
        if tag.lower() not in VOID_ELEMENTS:
            self.stack.append(node)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        self.stack[-1].children.append(DomNode(tag.lower(), self._attrs(attrs)))

    def handle_endtag(self, tag: str) -> None:
        tag = tag.lower()
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # stray end tag: ignore

    def handle_data(self, data: str) -> None:
        if not data:
            return
        children = self.stack[-1].children
        if children and isinstance(children[-1], str):
            children[-1] += data
        else:
            children.append(data)


def parse_html(text: str) -> DomNode:
    """Parse HTML into a '#document' node; degenerate input yields an empty one."""
    builder = _TreeBuilder()
    builder.feed(text or "")
    builder.close()
    return builder.root


def serialize_html(node: DomNode) -> str:
    """Render a tree back to HTML text (attributes double-quoted, text escaped)."""
    parts: list[str] = []
    if node.tag == "#document":
        for child in node.children:
            _serialize_into(child, parts)
    else:
        _serialize_into(node, parts)
    return "".join(parts)


def outer_html(node: DomNode) -> str:
    return serialize_html(node)


def _serialize_into(child: DomChild, parts: list[str]) -> None:
    if isinstance(child, str):
        parts.append(escape(child, quote=False))
        return
    attrs = "".join(
        f' {name}="{escape(value, quote=True)}"' for name, value in child.attributes.items()
    )
    if child.tag in VOID_ELEMENTS:
        parts.append(f"<{child.tag}{attrs}>")
        return
    parts.append(f"<{child.tag}{attrs}>")
    for grandchild in child.children:
        _serialize_into(grandchild, parts)
    parts.append(f"</{child.tag}>")
