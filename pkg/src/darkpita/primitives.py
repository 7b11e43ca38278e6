"""Patch primitive vocabulary shared by the catalog and the patch engine.

Each primitive is one reversible edit against a single detected element.
The JSON encoding (``{"op": "set-style", ...}``) is the catalog file's
and wire protocol's representation; kinds are kebab-case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union


@dataclass(frozen=True)
class Hide:
    """Mark the element non-rendered (style-based, never node removal)."""


@dataclass(frozen=True)
class SetStyle:
    property: str
    value: str


@dataclass(frozen=True)
class SetAttribute:
    name: str
    value: str


@dataclass(frozen=True)
class RemoveAttribute:
    name: str


@dataclass(frozen=True)
class InsertLabel:
    """Insert a markup fragment relative to the element.

    position: before | after (siblings) or prepend | append (children).
    """

    position: str
    markup: str


@dataclass(frozen=True)
class WrapOverlay:
    """Cover the element with an overlay fragment; the element itself is
    made non-rendered until revealed. With ``revealable`` the engine adds
    a reveal control to the overlay."""

    markup: str
    revealable: bool = False


@dataclass(frozen=True)
class Annotate:
    """Attention-drawing outline mark, a CSS outline declaration."""

    marker: str = "3px dashed #c5221f"


@dataclass(frozen=True)
class InjectWidget:
    """Insert an inert widget shell with data slots the UI fills from
    telemetry queries. kind: reflection | action-guide."""

    kind: str
    params: Mapping[str, str] = field(default_factory=dict)


PatchPrimitive = Union[
    Hide, SetStyle, SetAttribute, RemoveAttribute,
    InsertLabel, WrapOverlay, Annotate, InjectWidget,
]

INSERT_POSITIONS = ("before", "after", "prepend", "append")
WIDGET_KINDS = ("reflection", "action-guide")

_OP_NAMES = {
    Hide: "hide",
    SetStyle: "set-style",
    SetAttribute: "set-attribute",
    RemoveAttribute: "remove-attribute",
    InsertLabel: "insert-label",
    WrapOverlay: "wrap-overlay",
    Annotate: "annotate",
    InjectWidget: "inject-widget",
}


def op_name(primitive: PatchPrimitive) -> str:
    return _OP_NAMES[type(primitive)]


def primitive_to_json(primitive: PatchPrimitive) -> dict:
    data: dict = {"op": op_name(primitive)}
    if isinstance(primitive, SetStyle):
        data.update(property=primitive.property, value=primitive.value)
    elif isinstance(primitive, SetAttribute):
        data.update(name=primitive.name, value=primitive.value)
    elif isinstance(primitive, RemoveAttribute):
        data.update(name=primitive.name)
    elif isinstance(primitive, InsertLabel):
        data.update(position=primitive.position, markup=primitive.markup)
    elif isinstance(primitive, WrapOverlay):
        data.update(markup=primitive.markup, revealable=primitive.revealable)
    elif isinstance(primitive, Annotate):
        data.update(marker=primitive.marker)
    elif isinstance(primitive, InjectWidget):
        data.update(kind=primitive.kind, params=dict(primitive.params))
    return data


def primitive_from_json(data: Mapping) -> PatchPrimitive:
    op = data.get("op")
    if op == "hide":
        return Hide()
    if op == "set-style":
        return SetStyle(data["property"], data["value"])
    if op == "set-attribute":
        return SetAttribute(data["name"], data["value"])
    if op == "remove-attribute":
        return RemoveAttribute(data["name"])
    if op == "insert-label":
        position = data["position"]
        if position not in INSERT_POSITIONS:
            raise ValueError(f"unknown insert-label position {position!r}")
        return InsertLabel(position, data["markup"])
    if op == "wrap-overlay":
        return WrapOverlay(data["markup"], bool(data.get("revealable", False)))
    if op == "annotate":
        return Annotate(data["marker"]) if "marker" in data else Annotate()
    if op == "inject-widget":
        kind = data["kind"]
        if kind not in WIDGET_KINDS:
            raise ValueError(f"unknown widget kind {kind!r}")
        return InjectWidget(kind, dict(data.get("params", {})))
    raise ValueError(f"unknown patch primitive op {op!r}")
