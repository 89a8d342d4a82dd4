"""XPath subset parser and evaluator for validating UI element locators.

The supported grammar covers the selector shapes that show up in generated
web-test locators:

    expr      := ('/' | '//') step (('/' | '//') step)*
    step      := (NAME | '*') predicate*
    predicate := '[' term (' and ' term)* ']'
    term      := INTEGER
               | '@' NAME '=' STRING
               | 'contains(' '@' NAME ',' STRING ')'
               | 'contains(' 'text()' ',' STRING ')'

Anything outside this raises UnsupportedXPath instead of guessing at
semantics.  Tag names match case-insensitively (HTML convention), attribute
values case-sensitively.  Positional predicates are 1-based within the
sibling group of each context parent, as in standard XPath.

One deliberate deviation from XPath 1.0: ``contains(text(), ...)`` tests the
concatenation of the element's direct text children, not just the first text
node.  Locators written against visible labels expect the whole label.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from e2egen.dom import DomNode, iter_elements, outer_html

CHILD = "child"
DESCENDANT = "descendant"

_NAME_RE = re.compile(r"[A-Za-z_][\w.-]*")


class UnsupportedXPath(Exception):
    """Raised for any expression outside the supported subset."""

    def __init__(self, position: int, construct: str):
        self.position = position
        self.construct = construct
        super().__init__(f"unsupported XPath at position {position}: {construct}")


@dataclass(frozen=True)
class Position:
    index: int  # 1-based


@dataclass(frozen=True)
class AttrEquals:
    name: str
    value: str


@dataclass(frozen=True)
class AttrContains:
    name: str
    value: str


@dataclass(frozen=True)
class TextContains:
    value: str


Predicate = Position | AttrEquals | AttrContains | TextContains


@dataclass(frozen=True)
class Step:
    axis: str  # CHILD or DESCENDANT
    test: str  # lowercase tag name or '*'
    predicates: tuple[Predicate, ...] = ()


@dataclass(frozen=True)
class XPathExpr:
    steps: tuple[Step, ...]

    def __str__(self) -> str:
        return serialize_xpath(self)


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self, n: int = 1) -> str:
        return self.text[self.pos : self.pos + n]

    def skip_ws(self) -> None:
        while not self.eof() and self.text[self.pos].isspace():
            self.pos += 1

    def take(self, literal: str) -> bool:
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str, construct: str) -> None:
        if not self.take(literal):
            raise UnsupportedXPath(self.pos, construct)

    def name(self) -> str:
        m = _NAME_RE.match(self.text, self.pos)
        if not m:
            raise UnsupportedXPath(self.pos, "name expected")
        self.pos = m.end()
        return m.group(0)

    def string(self) -> str:
        if self.eof() or self.text[self.pos] not in "'\"":
            raise UnsupportedXPath(self.pos, "quoted string expected")
        quote = self.text[self.pos]
        end = self.text.find(quote, self.pos + 1)
        if end < 0:
            raise UnsupportedXPath(self.pos, "unterminated string")
        value = self.text[self.pos + 1 : end]
        self.pos = end + 1
        return value

    def integer(self) -> int | None:
        m = re.match(r"\d+", self.text[self.pos :])
        if not m:
            return None
        self.pos += m.end()
        return int(m.group(0))


def parse_xpath(text: str) -> XPathExpr:
    """Parse an expression in the supported subset, or raise UnsupportedXPath."""
    sc = _Scanner(text.strip())
    if sc.eof():
        raise UnsupportedXPath(0, "empty expression")
    steps: list[Step] = []
    first = True
    while not sc.eof():
        if sc.take("//"):
            axis = DESCENDANT
        elif sc.take("/"):
            axis = CHILD
        elif first:
            raise UnsupportedXPath(sc.pos, "expression must start with / or //")
        else:
            raise UnsupportedXPath(sc.pos, sc.peek())
        first = False
        steps.append(_parse_step(sc, axis))
    return XPathExpr(tuple(steps))


def _parse_step(sc: _Scanner, axis: str) -> Step:
    if sc.take("*"):
        test = "*"
    else:
        start = sc.pos
        name = sc.name()
        if sc.peek(2) == "::":
            raise UnsupportedXPath(start, f"axis {name}:: not supported")
        if sc.peek() == "(":
            raise UnsupportedXPath(start, f"node test {name}() not supported")
        test = name.lower()
    predicates: list[Predicate] = []
    while sc.peek() == "[":
        sc.take("[")
        first = _parse_term(sc)
        predicates.append(first)
        sc.skip_ws()
        while sc.take("and"):
            extra = _parse_term(sc)
            # 'and' mixes boolean terms; a bare position is not one of those
            if isinstance(extra, Position) or isinstance(first, Position):
                raise UnsupportedXPath(sc.pos, "positional predicate inside 'and'")
            predicates.append(extra)
            sc.skip_ws()
        sc.expect("]", "']' expected")
    return Step(axis, test, tuple(predicates))


def _parse_term(sc: _Scanner) -> Predicate:
    sc.skip_ws()
    idx = sc.integer()
    if idx is not None:
        if idx < 1:
            raise UnsupportedXPath(sc.pos, "positions are 1-based")
        return Position(idx)
    if sc.take("@"):
        attr = sc.name().lower()
        sc.skip_ws()
        sc.expect("=", "only @attr='value' comparisons supported")
        sc.skip_ws()
        return AttrEquals(attr, sc.string())
    start = sc.pos
    if sc.take("contains"):
        sc.skip_ws()
        sc.expect("(", "contains(")
        sc.skip_ws()
        if sc.take("@"):
            attr = sc.name().lower()
            sc.skip_ws()
            sc.expect(",", "contains arguments")
            sc.skip_ws()
            value = sc.string()
            sc.skip_ws()
            sc.expect(")", "contains close")
            return AttrContains(attr, value)
        if sc.take("text()"):
            sc.skip_ws()
            sc.expect(",", "contains arguments")
            sc.skip_ws()
            value = sc.string()
            sc.skip_ws()
            sc.expect(")", "contains close")
            return TextContains(value)
        raise UnsupportedXPath(start, "contains() supports @attr or text() only")
    raise UnsupportedXPath(sc.pos, sc.peek(12) or "end of input")


def serialize_xpath(expr: XPathExpr) -> str:
    """Render an AST back to canonical text; parse_xpath round-trips it."""
    parts: list[str] = []
    for step in expr.steps:
        parts.append("//" if step.axis == DESCENDANT else "/")
        parts.append(step.test)
        for pred in step.predicates:
            parts.append(_serialize_predicate(pred))
    return "".join(parts)


def _quote(value: str) -> str:
    if "'" not in value:
        return f"'{value}'"
    if '"' not in value:
        return f'"{value}"'
    raise ValueError("string literal cannot hold both quote characters")


def _serialize_predicate(pred: Predicate) -> str:
    if isinstance(pred, Position):
        return f"[{pred.index}]"
    if isinstance(pred, AttrEquals):
        return f"[@{pred.name}={_quote(pred.value)}]"
    if isinstance(pred, AttrContains):
        return f"[contains(@{pred.name},{_quote(pred.value)})]"
    return f"[contains(text(),{_quote(pred.value)})]"


def _test_matches(test: str, node: DomNode) -> bool:
    return test == "*" or node.tag == test


def _apply_predicate(pred: Predicate, group: list[DomNode]) -> list[DomNode]:
    # Position indexes into the group as filtered by the preceding predicates,
    # mirroring XPath's left-to-right predicate evaluation.
    if isinstance(pred, Position):
        return [group[pred.index - 1]] if pred.index <= len(group) else []
    if isinstance(pred, AttrEquals):
        return [n for n in group if n.attributes.get(pred.name, "") == pred.value]
    if isinstance(pred, AttrContains):
        return [n for n in group if pred.value in n.attributes.get(pred.name, "")]
    return [n for n in group if pred.value in n.direct_text]


def _select_children(parent: DomNode, step: Step) -> list[DomNode]:
    group = [c for c in parent.element_children if _test_matches(step.test, c)]
    for pred in step.predicates:
        group = _apply_predicate(pred, group)
        if not group:
            break
    return group


def evaluate(expr: XPathExpr, dom: DomNode) -> list[DomNode]:
    """Evaluate an expression against a tree, returning matches in document order.

    ``dom`` may be a document node (children are the top-level elements) or a
    bare element, which is then treated as the single document child.
    """
    if dom.tag == "#document":
        document = dom
    else:
        document = DomNode("#document", {}, [dom])
    order = {id(n): i for i, n in enumerate(iter_elements(document))}
    contexts: list[DomNode] = [document]
    for step in expr.steps:
        found: list[DomNode] = []
        seen: set[int] = set()
        for ctx in contexts:
            if step.axis == CHILD:
                parents = [ctx]
            else:
                # '//' expands to descendant-or-self::node()/child::test
                parents = [ctx, *iter_elements(ctx)]
            for parent in parents:
                for node in _select_children(parent, step):
                    if id(node) not in seen:
                        seen.add(id(node))
                        found.append(node)
        found.sort(key=lambda n: order[id(n)])
        contexts = found
    return contexts


@dataclass(frozen=True)
class MatchResult:
    """Uniqueness classification of a selector against a DOM."""

    count: int

    @property
    def kind(self) -> str:
        if self.count == 0:
            return "None"
        if self.count == 1:
            return "Unique"
        return f"Multiple({self.count})"

    def __str__(self) -> str:
        return self.kind


def classify(expr: XPathExpr, dom: DomNode) -> MatchResult:
    """Classify a selector as Unique, Multiple(n) or None on the given DOM."""
    return MatchResult(len(evaluate(expr, dom)))


def describe_matches(expr: XPathExpr, dom: DomNode, limit: int = 10) -> list[str]:
    """Outer HTML of the first matches, for the xpath-eval debug command."""
    return [outer_html(n) for n in evaluate(expr, dom)[:limit]]
