"""Evaluates catalog detection rules against a document.

Rules within a pattern are OR-combined. Attribute regexes match
case-insensitively (site markup casing is unstable); literal text rules
are case-sensitive (labels like "Sponsored" are cased deliberately).
A rule's scope selector restricts matches to elements at or under a
scope match. Nested matches of one pattern are deduplicated keeping the
outermost element, so one widget yields one detection.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from .catalog import Catalog, DarkPatternSpec, DetectionRule, RuleKind
from .document import Element, HtmlDocument, NodeLocator, locator_of, resolve
from .selectors import Selector, parse_selector

EXCERPT_LIMIT = 120


@dataclass(frozen=True)
class Detection:
    """One element flagged as an instance of one pattern."""

    pattern_id: str
    locator: NodeLocator
    site: str
    rule_index: int
    matched_excerpt: str

    def to_json(self) -> dict:
        return {
            "pattern_id": self.pattern_id,
            "locator": self.locator.to_json(),
            "site": self.site,
            "rule_index": self.rule_index,
            "matched_excerpt": self.matched_excerpt,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Detection":
        return cls(
            pattern_id=data["pattern_id"],
            locator=NodeLocator.from_json(data["locator"]),
            site=data.get("site", ""),
            rule_index=int(data.get("rule_index", 0)),
            matched_excerpt=data.get("matched_excerpt", ""),
        )


@lru_cache(maxsize=256)
def _compiled(pattern: str) -> re.Pattern:
    return re.compile(pattern, re.IGNORECASE)


@lru_cache(maxsize=256)
def _cached_selector(source: str) -> Selector:
    return parse_selector(source)


def _in_scope(element: Element, scope: str | None) -> bool:
    if scope is None:
        return True
    selector = _cached_selector(scope)
    if selector.matches(element):
        return True
    return any(selector.matches(ancestor) for ancestor in element.ancestors())


def _rule_hit(rule: DetectionRule, document: HtmlDocument, element: Element) -> str | None:
    """The matched excerpt if the rule matches this element, else None."""
    if not _in_scope(element, rule.scope):
        return None
    if rule.kind is RuleKind.ATTRIBUTE_REGEX:
        value = element.attrs.get(rule.target)
        if value is not None and _compiled(rule.pattern).search(value):
            return value[:EXCERPT_LIMIT]
        return None
    if rule.kind is RuleKind.INNER_TEXT_CONTAINS:
        text = element.inner_text()
        index = text.find(rule.pattern)
        if index < 0:
            return None
        return text[index:index + EXCERPT_LIMIT]
    # structural-selector
    if _cached_selector(rule.target).matches(element):
        tag = f"<{element.tag}>"
        return f"{tag} matched {rule.target}"[:EXCERPT_LIMIT]
    return None


def match_rule(rule: DetectionRule, document: HtmlDocument, locator: NodeLocator) -> bool:
    """Whether one rule matches the element a locator resolves to."""
    element = resolve(document, locator)
    return _rule_hit(rule, document, element) is not None


def _pattern_matches(
    pattern: DarkPatternSpec, document: HtmlDocument
) -> list[tuple[Element, int, str]]:
    """(element, first firing rule index, excerpt) for every matching element."""
    hits: dict[int, tuple[Element, int, str]] = {}
    for order, element in enumerate(document.iter_elements()):
        for index, rule in enumerate(pattern.rules):
            excerpt = _rule_hit(rule, document, element)
            if excerpt is not None:
                hits[order] = (element, index, excerpt)
                break
    return [hits[key] for key in sorted(hits)]


def _outermost(matches: list[tuple[Element, int, str]]) -> list[tuple[Element, int, str]]:
    matched_elements = {id(element) for element, _, _ in matches}
    kept = []
    for element, index, excerpt in matches:
        if any(id(ancestor) in matched_elements for ancestor in element.ancestors()):
            continue
        kept.append((element, index, excerpt))
    return kept


def scan(document: HtmlDocument, catalog: Catalog, site: str) -> list[Detection]:
    """All detections for a site's patterns, in document order then
    pattern id; may legitimately report the same pattern many times."""
    results: list[tuple[tuple[int, ...], str, Detection]] = []
    for pattern in catalog.patterns_for_site(site):
        for element, rule_index, excerpt in _outermost(_pattern_matches(pattern, document)):
            locator = locator_of(document, element)
            detection = Detection(
                pattern_id=pattern.id,
                locator=locator,
                site=site,
                rule_index=rule_index,
                matched_excerpt=excerpt,
            )
            results.append((locator.path, pattern.id, detection))
    results.sort(key=lambda item: (item[0], item[1]))
    return [detection for _, _, detection in results]


# -- report ------------------------------------------------------------


@dataclass(frozen=True)
class ReportGroup:
    pattern_id: str
    name: str
    attributes: tuple[str, ...]
    welfare: str
    mechanism_text: str
    count: int
    excerpts: tuple[str, ...]


@dataclass(frozen=True)
class Report:
    source: str | None
    site: str
    total: int
    groups: tuple[ReportGroup, ...]

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "site": self.site,
            "total": self.total,
            "groups": [
                {
                    "pattern_id": g.pattern_id,
                    "name": g.name,
                    "attributes": list(g.attributes),
                    "welfare": g.welfare,
                    "mechanism_text": g.mechanism_text,
                    "count": g.count,
                    "excerpts": list(g.excerpts),
                }
                for g in self.groups
            ],
        }

    def to_text(self) -> str:
        if not self.groups:
            return "0 dark patterns detected"
        lines = [f"{self.total} dark pattern instance(s) detected"]
        for g in self.groups:
            lines.append(f"- {g.name} [{g.pattern_id}] x{g.count}")
            lines.append(f"    attributes: {', '.join(g.attributes)}")
            lines.append(f"    welfare: {g.welfare}")
            for excerpt in g.excerpts:
                lines.append(f"    matched: {excerpt!r}")
        return "\n".join(lines)


def scan_report(detections: list[Detection], catalog: Catalog,
                site: str = "", source: str | None = None) -> Report:
    """Group detections by pattern with their catalog metadata attached."""
    order: list[str] = []
    grouped: dict[str, list[Detection]] = {}
    for detection in detections:
        if detection.pattern_id not in catalog.patterns:
            raise KeyError(f"detection references unknown pattern {detection.pattern_id!r}")
        if detection.pattern_id not in grouped:
            order.append(detection.pattern_id)
            grouped[detection.pattern_id] = []
        grouped[detection.pattern_id].append(detection)
        site = site or detection.site
    groups = []
    for pattern_id in order:
        pattern = catalog.patterns[pattern_id]
        members = grouped[pattern_id]
        groups.append(
            ReportGroup(
                pattern_id=pattern_id,
                name=pattern.name,
                attributes=tuple(sorted(a.value for a in pattern.attributes)),
                welfare=pattern.impact.category.value,
                mechanism_text=pattern.mechanism_text,
                count=len(members),
                excerpts=tuple(d.matched_excerpt for d in members),
            )
        )
    return Report(source=source, site=site, total=len(detections), groups=tuple(groups))
