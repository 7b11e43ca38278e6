"""Applies enhancement patches to detected elements, reversibly.

Every apply is functional (the input document is never mutated) and
produces a :class:`PatchReceipt` whose entries capture the inverse data
needed to restore the element exactly: prior attribute values, the prior
inline style string, or the location of inserted nodes. Reverting walks
the entries in reverse, so each undo sees the tree exactly as the entry
left it.

A patched element is marked with ``data-pita-enhancement="<id>"``.
Re-applying the same enhancement is a guarded no-op; applying a
different one to a marked element is a conflict, never a layering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

from . import primitives as prim
from .catalog import Catalog, EnhancementSpec
from .detector import Detection, scan
from .document import (
    Element,
    HtmlDocument,
    Node,
    NodeLocator,
    copy_document,
    locator_of,
    parse_fragment,
    resolve,
    serialize_node,
)

MARKER_ATTR = "data-pita-enhancement"
HIDDEN_ATTR = "data-pita-hidden"
OVERLAY_ATTR = "data-pita-overlay-for"
HIDE_STYLE_VALUE = "none !important"


class PatchError(ValueError):
    pass


class EnhancementConflictError(PatchError):
    """A different enhancement already covers this element."""


class ReceiptMismatchError(PatchError):
    """A receipt does not describe the document it was asked to revert."""


@dataclass(frozen=True)
class ReceiptEntry:
    primitive: prim.PatchPrimitive
    inverse: dict

    def to_json(self) -> dict:
        return {"primitive": prim.primitive_to_json(self.primitive), "inverse": self.inverse}

    @classmethod
    def from_json(cls, data: dict) -> "ReceiptEntry":
        return cls(prim.primitive_from_json(data["primitive"]), dict(data["inverse"]))


@dataclass(frozen=True)
class PatchReceipt:
    enhancement_id: str
    pattern_id: str
    locator: NodeLocator
    entries: tuple[ReceiptEntry, ...]
    applied_at: str
    noop: bool = False

    def to_json(self) -> dict:
        return {
            "enhancement_id": self.enhancement_id,
            "pattern_id": self.pattern_id,
            "locator": self.locator.to_json(),
            "entries": [entry.to_json() for entry in self.entries],
            "applied_at": self.applied_at,
            "noop": self.noop,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PatchReceipt":
        return cls(
            enhancement_id=data["enhancement_id"],
            pattern_id=data["pattern_id"],
            locator=NodeLocator.from_json(data["locator"]),
            entries=tuple(ReceiptEntry.from_json(e) for e in data.get("entries", [])),
            applied_at=data.get("applied_at", ""),
            noop=bool(data.get("noop", False)),
        )


@dataclass(frozen=True)
class DiffSummary:
    """Before/after fragments of the affected element span plus one change
    record per primitive; purely descriptive, nothing is mutated."""

    before_fragment: str
    after_fragment: str
    changes: tuple[dict, ...]

    def to_json(self) -> dict:
        return {
            "before_fragment": self.before_fragment,
            "after_fragment": self.after_fragment,
            "changes": list(self.changes),
        }


# -- inline style handling ---------------------------------------------

def _parse_style(style: str | None) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    for part in (style or "").split(";"):
        part = part.strip()
        if not part or ":" not in part:
            continue
        name, value = part.split(":", 1)
        pairs.append((name.strip(), value.strip()))
    return pairs


def _style_string(pairs: list[tuple[str, str]]) -> str:
    return "; ".join(f"{name}: {value}" for name, value in pairs)


def _set_style_property(element: Element, name: str, value: str) -> str | None:
    prior = element.attrs.get("style")
    pairs = _parse_style(prior)
    for i, (existing, _) in enumerate(pairs):
        if existing.lower() == name.lower():
            pairs[i] = (existing, value)
            break
    else:
        pairs.append((name, value))
    element.attrs["style"] = _style_string(pairs)
    return prior


def _restore_style(element: Element, prior: str | None) -> None:
    if prior is None:
        element.attrs.pop("style", None)
    else:
        element.attrs["style"] = prior


# -- fragment construction ---------------------------------------------

def _reveal_button() -> Element:
    button = Element("button", {"class": "pita-reveal", "data-pita-action": "reveal"})
    button.append_child(_text("Show it anyway"))
    return button


def _text(value: str):
    from .document import TextNode

    return TextNode(value)


def _widget_nodes(primitive: prim.InjectWidget, enhancement_id: str) -> list[Node]:
    attrs = {
        "class": f"pita-widget pita-widget-{primitive.kind}",
        "data-pita-widget": primitive.kind,
        OVERLAY_ATTR: enhancement_id,
    }
    for key, value in primitive.params.items():
        attrs[f"data-pita-param-{key}"] = value
    aside = Element("aside", attrs)
    title = Element("span", {"class": "pita-widget-title"})
    title.append_child(_text(
        "Your recent activity" if primitive.kind == "reflection" else "Before you decide"
    ))
    aside.append_child(title)
    if primitive.kind == "reflection":
        for slot in ("active-time", "flagged-interactions", "attributed-extra-time", "extra-cost"):
            span = Element("span", {"class": "pita-slot", "data-pita-slot": slot})
            aside.append_child(span)
    else:
        aside.append_child(Element("ul", {"class": "pita-guide", "data-pita-slot": "guide-items"}))
    return [aside]


def _overlay_nodes(primitive: prim.WrapOverlay, enhancement_id: str) -> list[Node]:
    nodes = parse_fragment(primitive.markup)
    roots = [node for node in nodes if isinstance(node, Element)]
    if not roots:
        raise PatchError("overlay markup must contain an element root")
    root = roots[0]
    root.attrs[OVERLAY_ATTR] = enhancement_id
    if primitive.revealable:
        root.append_child(_reveal_button())
    return nodes


def _insert_nodes(element: Element, position: str, nodes: list[Node]) -> dict:
    """Insert nodes at the position and return the inverse record."""
    if position in ("prepend", "append"):
        parent = element
        start = 0 if position == "prepend" else len(element.children)
    else:
        parent = element.parent
        if parent is None:
            raise PatchError("cannot insert beside an element with no parent")
        index = parent.index_of(element)
        start = index if position == "before" else index + 1
    for offset, node in enumerate(nodes):
        parent.insert_child(start + offset, node)
    return {
        "parent_path": list(_path_of(parent)),
        "start": start,
        "count": len(nodes),
    }


def _path_of(node: Node) -> tuple[int, ...]:
    indices: list[int] = []
    while node.parent is not None:
        indices.append(node.parent.index_of(node))
        node = node.parent
    indices.reverse()
    return tuple(indices)


def _element_at(document: HtmlDocument, path: list[int] | tuple[int, ...]) -> Element:
    node: Node = document.root
    for index in path:
        if not isinstance(node, Element) or not 0 <= index < len(node.children):
            raise ReceiptMismatchError(f"receipt path {list(path)} not present in document")
        node = node.children[index]
    if not isinstance(node, Element):
        raise ReceiptMismatchError(f"receipt path {list(path)} is not an element")
    return node


# -- primitive application ---------------------------------------------

def _apply_primitive(
    document: HtmlDocument,
    element: Element,
    primitive: prim.PatchPrimitive,
    enhancement_id: str,
) -> ReceiptEntry:
    if isinstance(primitive, prim.Hide):
        prior = _set_style_property(element, "display", HIDE_STYLE_VALUE)
        element.attrs[HIDDEN_ATTR] = "true"
        return ReceiptEntry(primitive, {"prior_style": prior})
    if isinstance(primitive, prim.SetStyle):
        prior = _set_style_property(element, primitive.property, primitive.value)
        return ReceiptEntry(primitive, {"prior_style": prior})
    if isinstance(primitive, prim.SetAttribute):
        prior = element.attrs.get(primitive.name)
        element.attrs[primitive.name] = primitive.value
        return ReceiptEntry(primitive, {"prior": prior})
    if isinstance(primitive, prim.RemoveAttribute):
        index = None
        if primitive.name in element.attrs:
            index = list(element.attrs).index(primitive.name)
        prior = element.attrs.pop(primitive.name, None)
        return ReceiptEntry(primitive, {"prior": prior, "index": index})
    if isinstance(primitive, prim.InsertLabel):
        nodes = parse_fragment(primitive.markup)
        inverse = _insert_nodes(element, primitive.position, nodes)
        return ReceiptEntry(primitive, inverse)
    if isinstance(primitive, prim.WrapOverlay):
        nodes = _overlay_nodes(primitive, enhancement_id)
        inverse = _insert_nodes(element, "after", nodes)
        inverse["prior_style"] = _set_style_property(element, "display", HIDE_STYLE_VALUE)
        return ReceiptEntry(primitive, inverse)
    if isinstance(primitive, prim.Annotate):
        prior = _set_style_property(element, "outline", primitive.marker)
        return ReceiptEntry(primitive, {"prior_style": prior})
    if isinstance(primitive, prim.InjectWidget):
        nodes = _widget_nodes(primitive, enhancement_id)
        inverse = _insert_nodes(element, "after", nodes)
        return ReceiptEntry(primitive, inverse)
    raise PatchError(f"unknown primitive {primitive!r}")


def _undo_entry(document: HtmlDocument, element: Element, entry: ReceiptEntry) -> None:
    primitive = entry.primitive
    inverse = entry.inverse
    if isinstance(primitive, prim.Hide):
        _restore_style(element, inverse.get("prior_style"))
        element.attrs.pop(HIDDEN_ATTR, None)
    elif isinstance(primitive, (prim.SetStyle, prim.Annotate)):
        _restore_style(element, inverse.get("prior_style"))
    elif isinstance(primitive, prim.SetAttribute):
        prior = inverse.get("prior")
        if prior is None:
            element.attrs.pop(primitive.name, None)
        else:
            element.attrs[primitive.name] = prior
    elif isinstance(primitive, prim.RemoveAttribute):
        prior = inverse.get("prior")
        if prior is not None:
            # Reinsert at the recorded position: attribute order is part of
            # the serialization contract.
            items = list(element.attrs.items())
            index = inverse.get("index")
            index = len(items) if index is None else min(index, len(items))
            items.insert(index, (primitive.name, prior))
            element.attrs.clear()
            element.attrs.update(items)
    elif isinstance(primitive, (prim.InsertLabel, prim.WrapOverlay, prim.InjectWidget)):
        parent = _element_at(document, inverse["parent_path"])
        start, count = inverse["start"], inverse["count"]
        if start + count > len(parent.children):
            raise ReceiptMismatchError("receipt insertion range exceeds current children")
        for _ in range(count):
            node = parent.children[start]
            parent.remove_child(node)
        if isinstance(primitive, prim.WrapOverlay):
            _restore_style(element, inverse.get("prior_style"))
    else:  # pragma: no cover - primitive set is closed
        raise PatchError(f"unknown primitive {primitive!r}")


# -- public operations ---------------------------------------------------

def apply_enhancement(
    document: HtmlDocument,
    detection: Detection,
    enhancement: EnhancementSpec,
    *,
    now: datetime | None = None,
) -> tuple[HtmlDocument, PatchReceipt]:
    """Apply an enhancement to its detected element on a copy of the
    document; returns the patched copy and the receipt that reverts it."""
    if detection.pattern_id != enhancement.pattern_id:
        raise PatchError(
            f"detection is for {detection.pattern_id!r} but enhancement "
            f"{enhancement.id!r} targets {enhancement.pattern_id!r}"
        )
    patched = copy_document(document)
    element = resolve(patched, detection.locator)
    timestamp = (now or datetime.now(timezone.utc)).isoformat()

    existing = element.attrs.get(MARKER_ATTR)
    if existing == enhancement.id:
        locator = NodeLocator(_path_of(element), (MARKER_ATTR, enhancement.id))
        receipt = PatchReceipt(
            enhancement_id=enhancement.id,
            pattern_id=enhancement.pattern_id,
            locator=locator,
            entries=(),
            applied_at=timestamp,
            noop=True,
        )
        return patched, receipt
    if existing is not None:
        raise EnhancementConflictError(
            f"element already carries enhancement {existing!r}; revert it first"
        )

    entries = [
        _apply_primitive(patched, element, primitive, enhancement.id)
        for primitive in enhancement.patch
    ]
    element.attrs[MARKER_ATTR] = enhancement.id
    locator = NodeLocator(_path_of(element), (MARKER_ATTR, enhancement.id))
    receipt = PatchReceipt(
        enhancement_id=enhancement.id,
        pattern_id=enhancement.pattern_id,
        locator=locator,
        entries=tuple(entries),
        applied_at=timestamp,
    )
    return patched, receipt


def revert(document: HtmlDocument, receipt: PatchReceipt) -> HtmlDocument:
    """Undo a receipt on a copy of the document, restoring the pre-apply
    tree. Raises ReceiptMismatchError when the receipt does not match."""
    restored = copy_document(document)
    if receipt.noop:
        return restored
    try:
        element = resolve(restored, receipt.locator)
    except LookupError as exc:
        raise ReceiptMismatchError(f"receipt element not found: {exc}") from None
    marker = element.attrs.get(MARKER_ATTR)
    if marker != receipt.enhancement_id:
        raise ReceiptMismatchError(
            f"element carries marker {marker!r}, receipt expects {receipt.enhancement_id!r}"
        )
    del element.attrs[MARKER_ATTR]
    for entry in reversed(receipt.entries):
        _undo_entry(restored, element, entry)
    return restored


def _affected_span(patched: HtmlDocument, receipt: PatchReceipt) -> tuple[Element, int, int]:
    """The contiguous child span of the element's parent that the patch
    touched: the element itself plus adjacent inserted nodes."""
    element = resolve(patched, receipt.locator)
    parent = element.parent
    if parent is None:
        raise PatchError("patched element has no parent")
    index = parent.index_of(element)
    start, end = index, index
    parent_path = list(_path_of(parent))
    for entry in receipt.entries:
        inverse = entry.inverse
        if "parent_path" not in inverse or list(inverse["parent_path"]) != parent_path:
            continue
        start = min(start, inverse["start"])
        end = max(end, inverse["start"] + inverse["count"] - 1)
    return parent, start, end


def _span_markup(parent: Element, start: int, end: int) -> str:
    return "".join(serialize_node(parent.children[i]) for i in range(start, end + 1))


def preview_diff(
    document: HtmlDocument, detection: Detection, enhancement: EnhancementSpec
) -> DiffSummary:
    """Before/after fragments and the change list, without mutating
    anything; this is what action-panel previews render."""
    before_element = resolve(document, detection.locator)
    before = serialize_node(before_element)
    patched, receipt = apply_enhancement(document, detection, enhancement)
    if receipt.noop:
        return DiffSummary(before_fragment=before, after_fragment=before, changes=())
    parent, start, end = _affected_span(patched, receipt)
    after = _span_markup(parent, start, end)
    changes = tuple(
        {"op": prim.op_name(entry.primitive), **prim.primitive_to_json(entry.primitive)}
        for entry in receipt.entries
    )
    return DiffSummary(before_fragment=before, after_fragment=after, changes=changes)


@dataclass(frozen=True)
class ProfileApplication:
    document: HtmlDocument
    receipts: tuple[PatchReceipt, ...]
    warnings: tuple[str, ...] = field(default=())


def apply_profile(
    document: HtmlDocument,
    catalog: Catalog,
    selections: list[tuple[str, str]],
    site: str,
) -> ProfileApplication:
    """Scan and apply each selected (pattern, enhancement) pair to every
    matching detection. Per-detection failures become warnings, never
    aborts. Detections of unselected patterns are untouched.

    Receipts come back in document order, which is the reverse of the
    internal application order; reverting them first-to-last restores
    the original document.
    """
    chosen: dict[str, str] = {}
    for pattern_id, enhancement_id in selections:
        enhancement = catalog.enhancements.get(enhancement_id)
        if enhancement is None or enhancement.pattern_id != pattern_id:
            raise PatchError(
                f"selection ({pattern_id!r}, {enhancement_id!r}) is not a valid catalog pair"
            )
        chosen[pattern_id] = enhancement_id

    detections = scan(document, catalog, site)
    relevant = [d for d in detections if d.pattern_id in chosen]
    current = document
    receipts: list[tuple[tuple[int, ...], PatchReceipt]] = []
    warnings: list[str] = []
    # Deepest-last-first keeps earlier locator paths valid across inserts.
    for detection in sorted(relevant, key=lambda d: d.locator.path, reverse=True):
        enhancement = catalog.enhancements[chosen[detection.pattern_id]]
        try:
            current, receipt = apply_enhancement(current, detection, enhancement)
        except (PatchError, LookupError) as exc:
            warnings.append(f"{detection.pattern_id} at {list(detection.locator.path)}: {exc}")
            continue
        receipts.append((detection.locator.path, receipt))
    receipts.sort(key=lambda item: item[0])
    return ProfileApplication(
        document=current,
        receipts=tuple(receipt for _, receipt in receipts),
        warnings=tuple(warnings),
    )
