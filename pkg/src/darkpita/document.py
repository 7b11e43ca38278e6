"""Error-tolerant HTML document model with stable element addressing.

Parses markup into a navigable node tree the way a browser would repair
it (implied end tags, misnested inline elements closed, stray end tags
dropped), serializes trees back to markup under a fixed normalization
(attribute order preserved, double-quoted attributes, no whitespace
re-flow), and addresses elements through :class:`NodeLocator` values
that survive sibling churn via an attribute fingerprint fallback.

Scripts and styles are carried as opaque text: their content is never
entity-decoded, escaped, or executed.
"""

from __future__ import annotations

from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Iterator

from .selectors import Selector, parse_selector


class DocumentError(ValueError):
    """Unrecoverable input, e.g. an empty byte stream."""


class MalformedFragmentError(ValueError):
    """Markup offered as a fragment did not parse cleanly."""


class StaleLocatorError(LookupError):
    """A locator no longer resolves; distinguishes how it failed."""

    def __init__(self, message: str, *, path_missed: bool, fingerprint_missed: bool | None):
        super().__init__(message)
        self.path_missed = path_missed
        # None when the locator carried no fingerprint to try.
        self.fingerprint_missed = fingerprint_missed


VOID_ELEMENTS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)
RAW_TEXT_ELEMENTS = frozenset(("script", "style"))

# Starting the key tag implies an end tag for an open element in the value set.
_CLOSE_BEFORE = {
    "li": {"li"},
    "dt": {"dt", "dd"},
    "dd": {"dt", "dd"},
    "tr": {"tr", "td", "th"},
    "td": {"td", "th"},
    "th": {"td", "th"},
    "option": {"option"},
    "optgroup": {"option", "optgroup"},
    "tbody": {"thead", "tr", "td", "th"},
    "tfoot": {"tbody", "tr", "td", "th"},
}
# Tags whose start implies </p> when a p is open, per browser behavior.
_P_CLOSERS = frozenset(
    (
        "address article aside blockquote div dl fieldset figure footer form "
        "h1 h2 h3 h4 h5 h6 header hr main nav ol p pre section table ul"
    ).split()
)

_FINGERPRINT_ATTRS = ("id", "data-uia", "data-testid", "data-pagelet", "aria-label", "name")

_DOCUMENT_TAG = "#document"


class Node:
    __slots__ = ("parent",)
    is_element = False

    def __init__(self) -> None:
        self.parent: Element | None = None


class TextNode(Node):
    __slots__ = ("text",)

    def __init__(self, text: str) -> None:
        super().__init__()
        self.text = text

    def __repr__(self) -> str:
        return f"TextNode({self.text!r})"


class CommentNode(Node):
    __slots__ = ("text",)

    def __init__(self, text: str) -> None:
        super().__init__()
        self.text = text

    def __repr__(self) -> str:
        return f"CommentNode({self.text!r})"


class DoctypeNode(Node):
    """Raw declaration content, e.g. ``DOCTYPE html``."""

    __slots__ = ("text",)

    def __init__(self, text: str) -> None:
        super().__init__()
        self.text = text

    def __repr__(self) -> str:
        return f"DoctypeNode({self.text!r})"


class Element(Node):
    __slots__ = ("tag", "attrs", "children")
    is_element = True

    def __init__(self, tag: str, attrs: dict[str, str] | None = None) -> None:
        super().__init__()
        self.tag = tag
        self.attrs: dict[str, str] = dict(attrs) if attrs else {}
        self.children: list[Node] = []

    def __repr__(self) -> str:
        return f"Element(<{self.tag}> attrs={self.attrs} children={len(self.children)})"

    @property
    def is_document_root(self) -> bool:
        return self.tag == _DOCUMENT_TAG

    def append_child(self, node: Node) -> Node:
        node.parent = self
        self.children.append(node)
        return node

    def insert_child(self, index: int, node: Node) -> Node:
        node.parent = self
        self.children.insert(index, node)
        return node

    def remove_child(self, node: Node) -> Node:
        self.children.remove(node)
        node.parent = None
        return node

    def index_of(self, node: Node) -> int:
        for i, child in enumerate(self.children):
            if child is node:
                return i
        raise ValueError("node is not a child of this element")

    def ancestors(self) -> Iterator["Element"]:
        """Proper ancestors, nearest first, excluding the document root."""
        node = self.parent
        while node is not None and not node.is_document_root:
            yield node
            node = node.parent

    def iter_elements(self) -> Iterator["Element"]:
        """Descendant elements in document order, excluding self."""
        for child in self.children:
            if isinstance(child, Element):
                yield child
                yield from child.iter_elements()

    def inner_text(self) -> str:
        """Concatenated descendant text, skipping script/style content."""
        parts: list[str] = []

        def walk(el: Element) -> None:
            if el.tag in RAW_TEXT_ELEMENTS:
                return
            for child in el.children:
                if isinstance(child, TextNode):
                    parts.append(child.text)
                elif isinstance(child, Element):
                    walk(child)

        walk(self)
        return "".join(parts)


class HtmlDocument:
    """A parsed markup tree rooted at a synthetic document node."""

    __slots__ = ("root", "provenance", "warnings")

    def __init__(self, root: Element, provenance: str | None = None,
                 warnings: tuple[str, ...] = ()) -> None:
        self.root = root
        self.provenance = provenance
        self.warnings = warnings

    def iter_elements(self) -> Iterator[Element]:
        return self.root.iter_elements()


@dataclass(frozen=True)
class NodeLocator:
    """Stable address of an element: a child-index path plus an optional
    (attribute, value) fingerprint used to re-anchor when the path goes
    stale after the document changes."""

    path: tuple[int, ...]
    fingerprint: tuple[str, str] | None = None

    def to_json(self) -> dict:
        return {
            "path": list(self.path),
            "fingerprint": list(self.fingerprint) if self.fingerprint else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> "NodeLocator":
        fp = data.get("fingerprint")
        return cls(tuple(data["path"]), (fp[0], fp[1]) if fp else None)


class _TreeBuilder(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root = Element(_DOCUMENT_TAG)
        self.stack: list[Element] = [self.root]
        self.repairs: list[str] = []

    # -- helpers ------------------------------------------------------

    @property
    def top(self) -> Element:
        return self.stack[-1]

    def _append_text(self, text: str) -> None:
        if not text:
            return
        children = self.top.children
        if children and isinstance(children[-1], TextNode):
            children[-1].text += text
        else:
            self.top.append_child(TextNode(text))

    def _imply_end_tags(self, tag: str) -> None:
        closers = _CLOSE_BEFORE.get(tag, frozenset())
        while len(self.stack) > 1:
            open_tag = self.top.tag
            if open_tag in closers or (tag in _P_CLOSERS and open_tag == "p"):
                self.stack.pop()
            else:
                break

    # -- HTMLParser callbacks -----------------------------------------

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        self._imply_end_tags(tag)
        attr_map: dict[str, str] = {}
        for name, value in attrs:
            if name in attr_map:
                self.repairs.append(f"duplicate attribute {name!r} on <{tag}> dropped")
                continue
            attr_map[name] = value if value is not None else ""
        element = Element(tag, attr_map)
        self.top.append_child(element)
        if tag not in VOID_ELEMENTS:
            self.stack.append(element)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        self.handle_starttag(tag, attrs)
        if tag not in VOID_ELEMENTS:
            self.stack.pop()

    def handle_endtag(self, tag: str) -> None:
        if tag in VOID_ELEMENTS:
            self.repairs.append(f"stray end tag </{tag}> ignored")
            return
        for depth in range(len(self.stack) - 1, 0, -1):
            if self.stack[depth].tag == tag:
                skipped = [el.tag for el in self.stack[depth + 1:]]
                if skipped:
                    self.repairs.append(
                        f"end tag </{tag}> closed open <{'>, <'.join(skipped)}>"
                    )
                del self.stack[depth:]
                return
        self.repairs.append(f"stray end tag </{tag}> ignored")

    def handle_data(self, data: str) -> None:
        self._append_text(data)

    def handle_comment(self, data: str) -> None:
        self.top.append_child(CommentNode(data))

    def handle_decl(self, decl: str) -> None:
        self.top.append_child(DoctypeNode(decl))

    def handle_pi(self, data: str) -> None:
        # Processing instructions are rare in page snapshots; keep as comments.
        self.top.append_child(CommentNode(f"?{data}"))

    def finish(self) -> None:
        self.close()
        unclosed = [el.tag for el in self.stack[1:]]
        if unclosed:
            self.repairs.append(f"unclosed <{'>, <'.join(unclosed)}> at end of input")
        del self.stack[1:]


def parse_html(data: bytes | str, provenance: str | None = None) -> HtmlDocument:
    """Parse markup tolerantly into an HtmlDocument.

    Raises DocumentError only for empty input; anything else is repaired
    and the repairs recorded on ``document.warnings``.
    """
    warnings: list[str] = []
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            text = data.decode("utf-8", errors="replace")
            warnings.append("input was not valid UTF-8; decoded lossily")
    else:
        text = data
    if not text:
        raise DocumentError("empty input stream")
    builder = _TreeBuilder()
    builder.feed(text)
    builder.finish()
    warnings.extend(builder.repairs)
    return HtmlDocument(builder.root, provenance=provenance, warnings=tuple(warnings))


def parse_fragment(markup: str) -> list[Node]:
    """Parse a well-formed markup fragment into detached nodes.

    Unlike :func:`parse_html`, any repair makes the fragment invalid:
    fragments are engine inputs, not wild pages.
    """
    if not markup or not markup.strip():
        raise MalformedFragmentError("empty markup fragment")
    builder = _TreeBuilder()
    builder.feed(markup)
    builder.close()
    unclosed = [el.tag for el in builder.stack[1:]]
    if unclosed:
        builder.repairs.append(f"unclosed <{'>, <'.join(unclosed)}>")
    if builder.repairs:
        raise MalformedFragmentError(
            f"fragment is not well-formed: {'; '.join(builder.repairs)}"
        )
    nodes = list(builder.root.children)
    for node in nodes:
        node.parent = None
    return nodes


# -- serialization ----------------------------------------------------

def _escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _escape_attr(value: str) -> str:
    return value.replace("&", "&amp;").replace('"', "&quot;")


def _write_node(node: Node, out: list[str], raw: bool) -> None:
    if isinstance(node, TextNode):
        out.append(node.text if raw else _escape_text(node.text))
    elif isinstance(node, CommentNode):
        out.append(f"<!--{node.text}-->")
    elif isinstance(node, DoctypeNode):
        out.append(f"<!{node.text}>")
    elif isinstance(node, Element):
        parts = [node.tag]
        for name, value in node.attrs.items():
            parts.append(f'{name}="{_escape_attr(value)}"')
        out.append(f"<{' '.join(parts)}>")
        if node.tag in VOID_ELEMENTS:
            return
        child_raw = node.tag in RAW_TEXT_ELEMENTS
        for child in node.children:
            _write_node(child, out, child_raw)
        out.append(f"</{node.tag}>")
    else:  # pragma: no cover - node types are closed
        raise TypeError(f"cannot serialize {type(node).__name__}")


def serialize_node(node: Node) -> str:
    """Serialize a single node (and its subtree) to markup."""
    out: list[str] = []
    _write_node(node, out, raw=False)
    return "".join(out)


def serialize(document: HtmlDocument) -> str:
    """Serialize a document back to markup.

    Normalization contract: attribute order as parsed, all attribute
    values double-quoted, text content untouched (no re-indentation or
    whitespace re-flow), void elements without self-closing slashes.
    """
    out: list[str] = []
    for child in document.root.children:
        _write_node(child, out, raw=False)
    return "".join(out)


def serialize_bytes(document: HtmlDocument) -> bytes:
    return serialize(document).encode("utf-8")


# -- structural comparison -------------------------------------------

def structural_equal(a: Node | HtmlDocument, b: Node | HtmlDocument) -> bool:
    """Tree equality over tags, attributes (order-sensitive), and text."""
    if isinstance(a, HtmlDocument):
        a = a.root
    if isinstance(b, HtmlDocument):
        b = b.root
    if type(a) is not type(b):
        return False
    if isinstance(a, Element):
        assert isinstance(b, Element)
        if a.tag != b.tag or list(a.attrs.items()) != list(b.attrs.items()):
            return False
        if len(a.children) != len(b.children):
            return False
        return all(structural_equal(x, y) for x, y in zip(a.children, b.children))
    return a.text == b.text  # type: ignore[union-attr]


# -- locators ---------------------------------------------------------

def _fingerprint_for(element: Element) -> tuple[str, str] | None:
    for name in _FINGERPRINT_ATTRS:
        value = element.attrs.get(name)
        if value:
            return (name, value)
    return None


def locator_of(document: HtmlDocument, element: Element) -> NodeLocator:
    """Compute the locator of an element currently in the document."""
    indices: list[int] = []
    node: Node = element
    while node.parent is not None:
        indices.append(node.parent.index_of(node))
        node = node.parent
    if node is not document.root:
        raise ValueError("element does not belong to this document")
    indices.reverse()
    return NodeLocator(tuple(indices), _fingerprint_for(element))


def resolve(document: HtmlDocument, locator: NodeLocator) -> Element:
    """Resolve a locator to its element.

    Follows the path first; on a path miss or fingerprint mismatch falls
    back to a document-order search for the fingerprint attribute.
    """
    node: Node = document.root
    path_ok = True
    for index in locator.path:
        if not isinstance(node, Element) or index >= len(node.children) or index < 0:
            path_ok = False
            break
        node = node.children[index]
    if path_ok and isinstance(node, Element) and not node.is_document_root:
        if locator.fingerprint is None:
            return node
        name, value = locator.fingerprint
        if node.attrs.get(name) == value:
            return node
        path_ok = False
    if locator.fingerprint is not None:
        name, value = locator.fingerprint
        for element in document.iter_elements():
            if element.attrs.get(name) == value:
                return element
        raise StaleLocatorError(
            f"locator path {list(locator.path)} missed and fingerprint "
            f"{name}={value!r} not found",
            path_missed=True,
            fingerprint_missed=True,
        )
    raise StaleLocatorError(
        f"locator path {list(locator.path)} does not resolve and no "
        "fingerprint was captured",
        path_missed=True,
        fingerprint_missed=None,
    )


def query(document: HtmlDocument, selector: str | Selector) -> list[NodeLocator]:
    """All elements matching the selector, as locators in document order."""
    if isinstance(selector, str):
        selector = parse_selector(selector)
    return [
        locator_of(document, element)
        for element in document.iter_elements()
        if selector.matches(element)
    ]


def copy_document(document: HtmlDocument) -> HtmlDocument:
    """Deep structural copy; the original is left untouched."""

    def copy_node(node: Node) -> Node:
        if isinstance(node, Element):
            clone = Element(node.tag, dict(node.attrs))
            for child in node.children:
                clone.append_child(copy_node(child))
            return clone
        if isinstance(node, TextNode):
            return TextNode(node.text)
        if isinstance(node, CommentNode):
            return CommentNode(node.text)
        return DoctypeNode(node.text)  # type: ignore[union-attr]

    root = copy_node(document.root)
    assert isinstance(root, Element)
    return HtmlDocument(root, provenance=document.provenance, warnings=document.warnings)
