"""Deliberately small CSS-selector subset used for element queries.

Supported grammar: a tag name or ``*``, ``#id``, ``.class``, ``[attr]``,
``[attr=value]`` (value bare or quoted), compounds of those, and the
descendant combinator (whitespace).  Nothing else — child/sibling
combinators, pseudo-classes, and attribute operators beyond ``=`` are
rejected so rule authors cannot quietly depend on them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class SelectorSyntaxError(ValueError):
    """Raised when a selector string falls outside the supported subset."""


_IDENT = r"[A-Za-z_][-A-Za-z0-9_]*"
_TOKEN_RE = re.compile(
    r"""
    (?P<tag>\*|[A-Za-z][-A-Za-z0-9_]*)
  | \#(?P<id>%(ident)s)
  | \.(?P<cls>%(ident)s)
  | \[(?P<attr>[-A-Za-z0-9_:]+)
      (?:=(?P<quote>["']?)(?P<val>[^\]"']*)(?P=quote))?
    \]
  | (?P<ws>\s+)
    """
    % {"ident": _IDENT},
    re.VERBOSE,
)


@dataclass(frozen=True)
class CompoundSelector:
    """One whitespace-free selector unit, e.g. ``div.card[role=feed]``."""

    tag: str | None = None
    id: str | None = None
    classes: tuple[str, ...] = ()
    attrs: tuple[tuple[str, str | None], ...] = ()

    def matches(self, element) -> bool:
        if self.tag is not None and self.tag != "*" and element.tag != self.tag:
            return False
        if self.id is not None and element.attrs.get("id") != self.id:
            return False
        for cls in self.classes:
            if cls not in (element.attrs.get("class") or "").split():
                return False
        for name, value in self.attrs:
            if name not in element.attrs:
                return False
            if value is not None and element.attrs[name] != value:
                return False
        return True


@dataclass(frozen=True)
class Selector:
    """A descendant chain of compound selectors, last part the subject."""

    parts: tuple[CompoundSelector, ...]
    source: str = field(default="", compare=False)

    def matches(self, element) -> bool:
        """True iff element matches the subject and its ancestors satisfy
        the remaining parts in order (standard descendant semantics)."""
        if not self.parts[-1].matches(element):
            return False
        remaining = list(self.parts[:-1])
        node = element.parent
        while remaining and node is not None:
            if getattr(node, "is_element", False) and remaining[-1].matches(node):
                remaining.pop()
            node = node.parent
        return not remaining


def parse_selector(source: str) -> Selector:
    """Parse a selector string, raising SelectorSyntaxError outside the subset."""
    if not source or not source.strip():
        raise SelectorSyntaxError("empty selector")
    parts: list[CompoundSelector] = []
    tag: str | None = None
    id_: str | None = None
    classes: list[str] = []
    attrs: list[tuple[str, str | None]] = []
    started = False

    def flush() -> None:
        nonlocal tag, id_, classes, attrs, started
        if started:
            parts.append(CompoundSelector(tag, id_, tuple(classes), tuple(attrs)))
        tag, id_, classes, attrs, started = None, None, [], [], False

    pos = 0
    stripped = source.strip()
    while pos < len(stripped):
        m = _TOKEN_RE.match(stripped, pos)
        if m is None:
            raise SelectorSyntaxError(
                f"unsupported selector syntax at {pos} in {source!r}"
            )
        if m.group("ws") is not None:
            flush()
        else:
            if m.group("tag") is not None:
                if started:
                    raise SelectorSyntaxError(
                        f"tag must lead its compound in {source!r}"
                    )
                tag = m.group("tag").lower()
            elif m.group("id") is not None:
                id_ = m.group("id")
            elif m.group("cls") is not None:
                classes.append(m.group("cls"))
            else:
                attrs.append((m.group("attr").lower(), m.group("val")))
            started = True
        pos = m.end()
    flush()
    if not parts:
        raise SelectorSyntaxError(f"no selector parts in {source!r}")
    return Selector(tuple(parts), source=source)
