"""Declarative catalog of dark-pattern specs and UI-enhancement specs.

A catalog is a versioned, human-editable JSON file; the bundled seed
catalog covers thirteen pattern instances across five sites with
thirty-one enhancements. Loading is pure; every structural rule the
types promise is enforced either at load time or by
:func:`validate_catalog`. Keys beginning with ``_`` anywhere in the
file are editorial comments and are ignored.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import IO, Iterable, Mapping

from . import primitives
from .document import MalformedFragmentError, parse_fragment
from .selectors import SelectorSyntaxError, parse_selector


class CatalogSyntaxError(ValueError):
    """Malformed catalog file; carries a locus description."""


class CatalogValidationError(ValueError):
    """Structurally parsed catalog that breaks a catalog rule."""

    def __init__(self, violations: list["Violation"]):
        summary = "; ".join(f"{v.code}: {v.subject_id}" for v in violations)
        super().__init__(f"catalog validation failed: {summary}")
        self.violations = violations


class UnknownPatternError(KeyError):
    def __init__(self, pattern_id: str):
        super().__init__(pattern_id)
        self.pattern_id = pattern_id


@dataclass(frozen=True)
class Violation:
    """Machine-readable validation finding: a code plus the offending id."""

    code: str
    subject_id: str
    detail: str


class DarkAttribute(Enum):
    """The six high-level manipulation properties a pattern can carry."""

    ASYMMETRIC = "asymmetric"
    COVERT = "covert"
    DECEPTIVE = "deceptive"
    INFORMATION_HIDING = "information-hiding"
    RESTRICTIVE = "restrictive"
    DISPARATE_TREATMENT = "disparate-treatment"

    @property
    def tooltip(self) -> str:
        return _ATTRIBUTE_TOOLTIPS[self]


# User-facing hover texts. The restrictive wording is fixed; the other five
# are editable paraphrases of the usual attribute definitions.
_ATTRIBUTE_TOOLTIPS = {
    DarkAttribute.ASYMMETRIC: "places unequal weight or burden on the choices shown to you",
    DarkAttribute.COVERT: "steers your decision through mechanisms you are unlikely to notice",
    DarkAttribute.DECEPTIVE: "induces false beliefs through misleading statements or omissions",
    DarkAttribute.INFORMATION_HIDING: "obscures or delays information you need to decide",
    DarkAttribute.RESTRICTIVE: "eliminates certain choices that should be available to you",
    DarkAttribute.DISPARATE_TREATMENT: "treats one group of users differently from another",
}


class WelfareCategory(Enum):
    FINANCIAL_LOSS = "financial-loss"
    PRIVACY_INVASION = "privacy-invasion"
    COGNITIVE_BURDEN = "cognitive-burden"


class Dimension(Enum):
    """When an intervention acts relative to the user's interaction with
    the pattern: before (design), during (behavior), or after (outcome)."""

    DESIGN = "design"
    BEHAVIOR = "behavior"
    OUTCOME = "outcome"


class InterventionStrategy(Enum):
    HIDING = "hiding"
    FAIRNESS = "fairness"
    INFORMATION_DISCLOSURE = "information-disclosure"
    COUNTERFACTUAL_THINKING = "counterfactual-thinking"
    DISABLING = "disabling"
    ACTION_GUIDE = "action-guide"
    FRICTION = "friction"
    REFLECTION = "reflection"

    @property
    def dimension(self) -> Dimension:
        return _STRATEGY_DIMENSIONS[self]

    @property
    def definition(self) -> str:
        return _STRATEGY_DEFINITIONS[self]


# Single source of truth for the strategy -> dimension partition (3/4/1).
_STRATEGY_DIMENSIONS = {
    InterventionStrategy.HIDING: Dimension.DESIGN,
    InterventionStrategy.FAIRNESS: Dimension.DESIGN,
    InterventionStrategy.INFORMATION_DISCLOSURE: Dimension.DESIGN,
    InterventionStrategy.COUNTERFACTUAL_THINKING: Dimension.BEHAVIOR,
    InterventionStrategy.DISABLING: Dimension.BEHAVIOR,
    InterventionStrategy.ACTION_GUIDE: Dimension.BEHAVIOR,
    InterventionStrategy.FRICTION: Dimension.BEHAVIOR,
    InterventionStrategy.REFLECTION: Dimension.OUTCOME,
}

_STRATEGY_DEFINITIONS = {
    InterventionStrategy.HIDING: "Hide the dark pattern",
    InterventionStrategy.FAIRNESS: "Eliminate visual prominence of one option over others",
    InterventionStrategy.INFORMATION_DISCLOSURE: "Expose the information the dark pattern hides",
    InterventionStrategy.COUNTERFACTUAL_THINKING: "Trigger users to be suspicious of the dark pattern",
    InterventionStrategy.DISABLING: "Disable the functionality of the dark pattern",
    InterventionStrategy.ACTION_GUIDE: "Provide helpful behavioral guidance against the dark pattern",
    InterventionStrategy.FRICTION: "Add extra steps to the interaction flow of the dark pattern",
    InterventionStrategy.REFLECTION: "Provoke users to reflect on the outcomes of the dark pattern",
}


class RuleKind(Enum):
    ATTRIBUTE_REGEX = "attribute-regex"
    INNER_TEXT_CONTAINS = "inner-text-contains"
    STRUCTURAL_SELECTOR = "structural-selector"


@dataclass(frozen=True)
class DetectionRule:
    """One declarative predicate over document elements.

    target: attribute name (attribute-regex), selector (structural-selector),
    or empty (inner-text-contains). pattern: regex source or literal
    substring. scope: optional selector restricting matches to elements at
    or under a scope match.
    """

    kind: RuleKind
    target: str = ""
    pattern: str = ""
    scope: str | None = None


@dataclass(frozen=True)
class PatternImpact:
    category: WelfareCategory
    severity_text: str


@dataclass(frozen=True)
class DarkPatternSpec:
    id: str
    name: str
    site: str
    pattern_types: tuple[str, ...]
    attributes: frozenset[DarkAttribute]
    mechanism_text: str
    impact: PatternImpact
    rules: tuple[DetectionRule, ...]
    enhancement_ids: tuple[str, ...]


@dataclass(frozen=True)
class EnhancementSpec:
    """One selectable intervention. Its design/behavior/outcome dimension
    is always derived from the strategy, never stored."""

    id: str
    pattern_id: str
    strategy: InterventionStrategy
    effect_text: str
    patch: tuple[primitives.PatchPrimitive, ...]
    preview: tuple[str, str] | None = None

    @property
    def dimension(self) -> Dimension:
        return self.strategy.dimension


@dataclass(frozen=True)
class Catalog:
    version: str
    patterns: Mapping[str, DarkPatternSpec]
    enhancements: Mapping[str, EnhancementSpec]

    def patterns_for_site(self, site: str) -> list[DarkPatternSpec]:
        """All patterns registered for a site, in catalog order."""
        return [p for p in self.patterns.values() if p.site == site]

    def enhancements_for_pattern(self, pattern_id: str) -> list[EnhancementSpec]:
        """The pattern's enhancements in its declared order."""
        pattern = self.patterns.get(pattern_id)
        if pattern is None:
            raise UnknownPatternError(pattern_id)
        return [self.enhancements[eid] for eid in pattern.enhancement_ids]

    def sites(self) -> list[str]:
        seen: dict[str, None] = {}
        for pattern in self.patterns.values():
            seen.setdefault(pattern.site, None)
        return list(seen)


def patterns_for_site(catalog: Catalog, site: str) -> list[DarkPatternSpec]:
    return catalog.patterns_for_site(site)


def enhancements_for_pattern(catalog: Catalog, pattern_id: str) -> list[EnhancementSpec]:
    return catalog.enhancements_for_pattern(pattern_id)


# -- loading ------------------------------------------------------------

# Rule patterns stay within the common regex subset so any engine can run
# them: no backreferences, no lookbehind.
_REGEX_BACKREF = re.compile(r"\\[1-9]|\(\?P=")
_REGEX_LOOKBEHIND = re.compile(r"\(\?<[=!]")


def _strip_comments(value):
    if isinstance(value, dict):
        return {k: _strip_comments(v) for k, v in value.items() if not k.startswith("_")}
    if isinstance(value, list):
        return [_strip_comments(v) for v in value]
    return value


def _require(mapping: Mapping, key: str, where: str):
    if key not in mapping:
        raise CatalogSyntaxError(f"missing field {key!r} in {where}")
    return mapping[key]


def _enum_value(enum_cls, raw: str, where: str):
    try:
        return enum_cls(raw)
    except ValueError:
        raise CatalogSyntaxError(
            f"unknown {enum_cls.__name__} value {raw!r} in {where}"
        ) from None


def _parse_rule(data: Mapping, where: str) -> DetectionRule:
    kind = _enum_value(RuleKind, _require(data, "kind", where), where)
    if kind is not RuleKind.STRUCTURAL_SELECTOR:
        _require(data, "pattern", where)
    scope = data.get("scope")
    return DetectionRule(
        kind=kind,
        target=data.get("target", "") or "",
        pattern=data.get("pattern", "") or "",
        scope=scope if scope else None,
    )


def _parse_pattern(data: Mapping) -> DarkPatternSpec:
    pid = _require(data, "id", "pattern entry")
    where = f"pattern {pid!r}"
    impact_data = _require(data, "impact", where)
    impact = PatternImpact(
        category=_enum_value(WelfareCategory, _require(impact_data, "category", where), where),
        severity_text=_require(impact_data, "severity_text", where),
    )
    return DarkPatternSpec(
        id=pid,
        name=_require(data, "name", where),
        site=_require(data, "site", where),
        pattern_types=tuple(data.get("pattern_types", [])),
        attributes=frozenset(
            _enum_value(DarkAttribute, raw, where)
            for raw in _require(data, "attributes", where)
        ),
        mechanism_text=_require(data, "mechanism_text", where),
        impact=impact,
        rules=tuple(
            _parse_rule(rule, f"{where} rule {i}")
            for i, rule in enumerate(_require(data, "rules", where))
        ),
        enhancement_ids=tuple(_require(data, "enhancement_ids", where)),
    )


def _parse_enhancement(data: Mapping) -> EnhancementSpec:
    eid = _require(data, "id", "enhancement entry")
    where = f"enhancement {eid!r}"
    preview_data = data.get("preview")
    preview = None
    if preview_data:
        preview = (
            _require(preview_data, "before", where),
            _require(preview_data, "after", where),
        )
    try:
        patch = tuple(
            primitives.primitive_from_json(p) for p in _require(data, "patch", where)
        )
    except (KeyError, ValueError) as exc:
        raise CatalogSyntaxError(f"bad patch primitive in {where}: {exc}") from None
    return EnhancementSpec(
        id=eid,
        pattern_id=_require(data, "pattern_id", where),
        strategy=_enum_value(InterventionStrategy, _require(data, "strategy", where), where),
        effect_text=_require(data, "effect_text", where),
        patch=patch,
        preview=preview,
    )


def load_catalog(source: bytes | str | IO) -> Catalog:
    """Load and fully validate a catalog from JSON bytes, text, or a file
    object. Raises CatalogSyntaxError for malformed files and
    CatalogValidationError (with per-violation codes and ids) for
    structurally broken ones."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as exc:
        raise CatalogSyntaxError(f"not valid JSON: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise CatalogSyntaxError("catalog root must be an object")
    data = _strip_comments(raw)

    version = _require(data, "version", "catalog")
    patterns: dict[str, DarkPatternSpec] = {}
    for entry in _require(data, "patterns", "catalog"):
        pattern = _parse_pattern(entry)
        if pattern.id in patterns:
            raise CatalogSyntaxError(f"duplicate pattern id {pattern.id!r}")
        patterns[pattern.id] = pattern
    enhancements: dict[str, EnhancementSpec] = {}
    for entry in _require(data, "enhancements", "catalog"):
        enhancement = _parse_enhancement(entry)
        if enhancement.id in enhancements:
            raise CatalogSyntaxError(f"duplicate enhancement id {enhancement.id!r}")
        enhancements[enhancement.id] = enhancement

    catalog = Catalog(version=version, patterns=patterns, enhancements=enhancements)
    violations = validate_catalog(catalog)
    if violations:
        raise CatalogValidationError(violations)
    return catalog


def load_catalog_path(path) -> Catalog:
    with open(path, "rb") as handle:
        return load_catalog(handle)


def load_seed_catalog() -> Catalog:
    """The bundled seed catalog: 13 patterns, 31 enhancements."""
    data = resources.files("darkpita.data").joinpath("seed_catalog.json").read_bytes()
    return load_catalog(data)


# -- validation ----------------------------------------------------------

def _check_rule(rule: DetectionRule, pid: str, index: int, out: list[Violation]) -> None:
    where = f"{pid}#rule{index}"
    if rule.kind is RuleKind.ATTRIBUTE_REGEX:
        if not rule.target:
            out.append(Violation("rule-missing-attribute", pid, f"{where} has no attribute name"))
        if _REGEX_BACKREF.search(rule.pattern) or _REGEX_LOOKBEHIND.search(rule.pattern):
            out.append(Violation(
                "rule-regex-dialect", pid,
                f"{where} uses backreferences or lookbehind, outside the supported subset",
            ))
        else:
            try:
                re.compile(rule.pattern)
            except re.error as exc:
                out.append(Violation("rule-bad-regex", pid, f"{where}: {exc}"))
    elif rule.kind is RuleKind.INNER_TEXT_CONTAINS:
        if not rule.pattern:
            out.append(Violation("rule-empty-substring", pid, f"{where} has no literal substring"))
    elif rule.kind is RuleKind.STRUCTURAL_SELECTOR:
        try:
            parse_selector(rule.target)
        except SelectorSyntaxError as exc:
            out.append(Violation("rule-bad-selector", pid, f"{where}: {exc}"))
    if rule.scope is not None:
        try:
            parse_selector(rule.scope)
        except SelectorSyntaxError as exc:
            out.append(Violation("rule-bad-scope", pid, f"{where}: {exc}"))


def _check_patch(enhancement: EnhancementSpec, out: list[Violation]) -> None:
    eid = enhancement.id
    if not enhancement.patch:
        out.append(Violation("patch-empty", eid, "enhancement has no patch primitives"))
    for i, primitive in enumerate(enhancement.patch):
        markup = None
        if isinstance(primitive, (primitives.InsertLabel, primitives.WrapOverlay)):
            markup = primitive.markup
        if isinstance(primitive, primitives.InsertLabel) and \
                primitive.position not in primitives.INSERT_POSITIONS:
            out.append(Violation("patch-bad-position", eid, f"primitive {i}: {primitive.position!r}"))
        if isinstance(primitive, primitives.InjectWidget) and \
                primitive.kind not in primitives.WIDGET_KINDS:
            out.append(Violation("patch-bad-widget-kind", eid, f"primitive {i}: {primitive.kind!r}"))
        if markup is not None:
            try:
                parse_fragment(markup)
            except MalformedFragmentError as exc:
                out.append(Violation("patch-malformed-markup", eid, f"primitive {i}: {exc}"))


def validate_catalog(catalog: Catalog) -> list[Violation]:
    """Every catalog rule, as data: empty list iff the catalog is sound."""
    out: list[Violation] = []
    for pid, pattern in catalog.patterns.items():
        if pid != pattern.id:
            out.append(Violation("pattern-key-mismatch", pid, "map key differs from spec id"))
        if not pattern.attributes:
            out.append(Violation("pattern-no-attributes", pid, "attributes must be non-empty"))
        if not pattern.mechanism_text:
            out.append(Violation("pattern-no-mechanism", pid, "mechanism_text must be non-empty"))
        if not pattern.impact.severity_text:
            out.append(Violation("pattern-no-severity", pid, "severity_text must be non-empty"))
        if not pattern.rules:
            out.append(Violation("pattern-no-rules", pid, "rules must be non-empty"))
        if not 1 <= len(pattern.enhancement_ids) <= 4:
            out.append(Violation(
                "pattern-enhancement-count", pid,
                f"{len(pattern.enhancement_ids)} enhancements, must be 1-4",
            ))
        for i, rule in enumerate(pattern.rules):
            _check_rule(rule, pid, i, out)
        for eid in pattern.enhancement_ids:
            enhancement = catalog.enhancements.get(eid)
            if enhancement is None:
                out.append(Violation("dangling-enhancement", pid, f"enhancement {eid!r} not defined"))
            elif enhancement.pattern_id != pid:
                out.append(Violation(
                    "enhancement-owner-mismatch", pid,
                    f"{eid!r} declares pattern_id {enhancement.pattern_id!r}",
                ))
    for eid, enhancement in catalog.enhancements.items():
        if eid != enhancement.id:
            out.append(Violation("enhancement-key-mismatch", eid, "map key differs from spec id"))
        if not enhancement.effect_text:
            out.append(Violation("enhancement-no-effect-text", eid, "effect_text must be non-empty"))
        owner = catalog.patterns.get(enhancement.pattern_id)
        if owner is None:
            out.append(Violation("dangling-pattern", eid, f"pattern {enhancement.pattern_id!r} not defined"))
        elif eid not in owner.enhancement_ids:
            out.append(Violation(
                "enhancement-not-listed", eid,
                f"not listed in enhancement_ids of {enhancement.pattern_id!r}",
            ))
        _check_patch(enhancement, out)
    return out


# -- serialization back to the file format --------------------------------

def catalog_to_json(catalog: Catalog) -> dict:
    """Round-trippable plain-data form of a catalog."""
    return {
        "version": catalog.version,
        "patterns": [
            {
                "id": p.id,
                "name": p.name,
                "site": p.site,
                "pattern_types": list(p.pattern_types),
                "attributes": sorted(a.value for a in p.attributes),
                "mechanism_text": p.mechanism_text,
                "impact": {
                    "category": p.impact.category.value,
                    "severity_text": p.impact.severity_text,
                },
                "rules": [
                    {
                        "kind": r.kind.value,
                        "target": r.target,
                        "pattern": r.pattern,
                        "scope": r.scope,
                    }
                    for r in p.rules
                ],
                "enhancement_ids": list(p.enhancement_ids),
            }
            for p in catalog.patterns.values()
        ],
        "enhancements": [
            {
                "id": e.id,
                "pattern_id": e.pattern_id,
                "strategy": e.strategy.value,
                "effect_text": e.effect_text,
                "patch": [primitives.primitive_to_json(p) for p in e.patch],
                **(
                    {"preview": {"before": e.preview[0], "after": e.preview[1]}}
                    if e.preview
                    else {}
                ),
            }
            for e in catalog.enhancements.values()
        ],
    }


def dump_catalog(catalog: Catalog) -> str:
    return json.dumps(catalog_to_json(catalog), indent=2, ensure_ascii=False)


def iter_rules(catalog: Catalog) -> Iterable[tuple[DarkPatternSpec, int, DetectionRule]]:
    for pattern in catalog.patterns.values():
        for index, rule in enumerate(pattern.rules):
            yield pattern, index, rule
