"""Local service surface: one JSON message endpoint wiring all modules.

The wire contract is the message schema, not the transport: a request is
``{"type", "request_id", "payload"}`` POSTed to ``/v1/message`` on a
loopback-only HTTP server, and every request gets exactly one response
``{"request_id", "ok", "payload" | "error"}``. The same dispatcher can
be driven in-process; the CLI and the panel UI both speak it.

The service holds no per-request state: everything durable lives in the
profile store and the telemetry sink, so a restart changes nothing.
"""

from __future__ import annotations

import json
import threading
import warnings as _warnings
from dataclasses import dataclass
from datetime import datetime, timedelta
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .catalog import (
    Catalog,
    CatalogSyntaxError,
    CatalogValidationError,
    UnknownPatternError,
)
from .detector import Detection, scan
from .document import (
    DocumentError,
    MalformedFragmentError,
    StaleLocatorError,
    parse_html,
    serialize_node,
)
from .patch import (
    EnhancementConflictError,
    PatchError,
    PatchReceipt,
    ReceiptMismatchError,
    apply_enhancement,
    preview_diff,
    revert,
    _affected_span,
    _element_at,
    _path_of,
    _span_markup,
)
from .profiles import (
    CorruptProfileError,
    ProfileStore,
    SelectionValidationError,
)
from .telemetry import (
    DiaryNote,
    JsonlSink,
    TelemetryEvent,
    parse_timestamp,
    read_log_dir,
    reflection_query,
)

PROTOCOL_VERSION = 1

MESSAGE_TYPES = (
    "detect", "apply", "revert", "save_selection", "clear_selection",
    "get_profile", "log_event", "submit_note", "get_reflection", "ping",
)


class MessageError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


_ERROR_CODES = (
    (UnknownPatternError, "unknown-pattern"),
    (StaleLocatorError, "stale-locator"),
    (EnhancementConflictError, "conflict"),
    (ReceiptMismatchError, "receipt-mismatch"),
    (MalformedFragmentError, "malformed-markup"),
    (SelectionValidationError, "validation"),
    (CatalogValidationError, "bad-catalog"),
    (CatalogSyntaxError, "bad-catalog"),
    (CorruptProfileError, "corrupt-profile"),
    (DocumentError, "bad-document"),
    (PatchError, "patch-error"),
)


def _error_code(exc: Exception) -> str:
    for exc_type, code in _ERROR_CODES:
        if isinstance(exc, exc_type):
            return code
    return "bad-request"


def _pattern_metadata(catalog: Catalog, pattern_id: str) -> dict:
    pattern = catalog.patterns[pattern_id]
    return {
        "id": pattern.id,
        "name": pattern.name,
        "site": pattern.site,
        "pattern_types": list(pattern.pattern_types),
        "attributes": sorted(a.value for a in pattern.attributes),
        "attribute_tooltips": {a.value: a.tooltip for a in sorted(pattern.attributes, key=lambda x: x.value)},
        "mechanism_text": pattern.mechanism_text,
        "impact": {
            "category": pattern.impact.category.value,
            "severity_text": pattern.impact.severity_text,
        },
        "enhancements": [
            {
                "id": e.id,
                "strategy": e.strategy.value,
                "dimension": e.dimension.value,
                "effect_text": e.effect_text,
            }
            for e in catalog.enhancements_for_pattern(pattern_id)
        ],
    }


@dataclass
class GatewayConfig:
    catalog: Catalog
    profile_path: Path
    log_dir: Path
    consent: bool = False


class GatewayApp:
    """Transport-independent dispatcher for wire messages."""

    def __init__(self, config: GatewayConfig):
        self.catalog = config.catalog
        self.store = ProfileStore(config.profile_path)
        self.sink = JsonlSink(config.log_dir, consent=config.consent)
        self.log_dir = Path(config.log_dir)
        # Profile writes are serialized; reads see the last completed write.
        self._profile_lock = threading.Lock()

    # -- envelope -------------------------------------------------------

    def handle(self, message: dict) -> dict:
        request_id = message.get("request_id") if isinstance(message, dict) else None
        try:
            if not isinstance(message, dict):
                raise MessageError("bad-request", "message must be a JSON object")
            msg_type = message.get("type")
            if msg_type not in MESSAGE_TYPES:
                raise MessageError("unknown-type", f"unknown message type {msg_type!r}")
            if not isinstance(request_id, str) or not request_id:
                raise MessageError("bad-request", "request_id must be a non-empty string")
            payload = message.get("payload") or {}
            if not isinstance(payload, dict):
                raise MessageError("bad-request", "payload must be an object")
            handler = getattr(self, f"_handle_{msg_type}")
            result = handler(payload)
            return {"request_id": request_id, "ok": True, "payload": result}
        except MessageError as exc:
            return self._error(request_id, exc.code, str(exc))
        except (KeyError, TypeError) as exc:
            return self._error(request_id, "bad-request", f"malformed payload: {exc!r}")
        except Exception as exc:  # noqa: BLE001 - every fault becomes a response
            return self._error(request_id, _error_code(exc), str(exc))

    @staticmethod
    def _error(request_id, code: str, message: str) -> dict:
        return {
            "request_id": request_id if isinstance(request_id, str) else None,
            "ok": False,
            "error": {"code": code, "message": message},
        }

    # -- handlers ---------------------------------------------------------

    def _handle_ping(self, payload: dict) -> dict:
        return {"pong": True, "protocol_version": PROTOCOL_VERSION}

    def _handle_detect(self, payload: dict) -> dict:
        site = payload["site"]
        document = parse_html(payload["html"], provenance="wire:detect")
        detections = scan(document, self.catalog, site)
        return {
            "site": site,
            "detections": [
                {**d.to_json(), "pattern": _pattern_metadata(self.catalog, d.pattern_id)}
                for d in detections
            ],
        }

    def _handle_apply(self, payload: dict) -> dict:
        document = parse_html(payload["html"], provenance="wire:apply")
        detection = Detection.from_json(payload["detection"])
        enhancement = self.catalog.enhancements.get(payload["enhancement_id"])
        if enhancement is None:
            raise MessageError(
                "unknown-enhancement", f"enhancement {payload['enhancement_id']!r} is not in the catalog"
            )
        diff = preview_diff(document, detection, enhancement)
        patched, receipt = apply_enhancement(document, detection, enhancement)
        parent, start, end = _affected_span(patched, receipt)
        # The client replaces one original node at `start` with the span
        # markup; live pages are never shipped back whole.
        splice = {
            "parent_path": list(_path_of(parent)),
            "start": start,
            "remove_count": 1,
            "markup": _span_markup(parent, start, end),
        }
        return {"receipt": receipt.to_json(), "diff": diff.to_json(), "splice": splice}

    def _handle_revert(self, payload: dict) -> dict:
        document = parse_html(payload["html"], provenance="wire:revert")
        receipt = PatchReceipt.from_json(payload["receipt"])
        restored = revert(document, receipt)
        if receipt.noop:
            return {"splice": None}
        parent, start, end = _affected_span(document, receipt)
        parent_path = list(_path_of(parent))
        # After undo the span collapses back to the one original element,
        # which now sits at the span's start index.
        element = _element_at(restored, parent_path + [start])
        splice = {
            "parent_path": parent_path,
            "start": start,
            "remove_count": end - start + 1,
            "markup": serialize_node(element),
        }
        return {"splice": splice}

    def _handle_save_selection(self, payload: dict) -> dict:
        with self._profile_lock:
            profile = self._load_profile_quiet()
            profile = self.store.save_selection(
                profile,
                self.catalog,
                site=payload["site"],
                pattern_id=payload["pattern_id"],
                enhancement_id=payload["enhancement_id"],
            )
        return {"profile": profile.to_json()}

    def _handle_clear_selection(self, payload: dict) -> dict:
        with self._profile_lock:
            profile = self._load_profile_quiet()
            profile = self.store.clear_selection(
                profile, site=payload["site"], pattern_id=payload["pattern_id"]
            )
        return {"profile": profile.to_json()}

    def _handle_get_profile(self, payload: dict) -> dict:
        profile = self._load_profile_quiet()
        return {"profile": profile.to_json()}

    def _handle_log_event(self, payload: dict) -> dict:
        event = TelemetryEvent.from_json(payload["event"])
        ack = self.sink.record_event(event, consent=payload.get("consent"))
        return {"ack": ack.value}

    def _handle_submit_note(self, payload: dict) -> dict:
        note = DiaryNote.from_json(payload["note"])
        ack = self.sink.record_note(note, consent=payload.get("consent"))
        return {"ack": ack.value}

    def _handle_get_reflection(self, payload: dict) -> dict:
        loaded = read_log_dir(self.log_dir)
        window = None
        if payload.get("window"):
            window = (
                parse_timestamp(payload["window"]["start"]),
                parse_timestamp(payload["window"]["end"]),
            )
        figures = reflection_query(
            loaded.events,
            payload["site"],
            window,
            idle_threshold=timedelta(minutes=float(payload.get("idle_minutes", 5))),
            attribution_window=timedelta(minutes=float(payload.get("attribution_minutes", 10))),
        )
        return {"figures": figures.to_json()}

    def _load_profile_quiet(self):
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            try:
                return self.store.load(self.catalog)
            except CorruptProfileError as exc:
                return exc.recovered



# -- HTTP transport --------------------------------------------------------

class _Handler(BaseHTTPRequestHandler):
    app: GatewayApp  # set by server factory
    protocol_version = "HTTP/1.1"

    def do_POST(self) -> None:  # noqa: N802 - stdlib naming
        if self.path != "/v1/message":
            self._respond(404, {"ok": False, "error": {"code": "not-found", "message": self.path}})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(length)
            message = json.loads(body)
        except (ValueError, json.JSONDecodeError) as exc:
            self._respond(200, {
                "request_id": None, "ok": False,
                "error": {"code": "parse-error", "message": f"body is not JSON: {exc}"},
            })
            return
        self._respond(200, self.app.handle(message))

    def do_GET(self) -> None:  # noqa: N802
        self._respond(404, {"ok": False, "error": {"code": "not-found", "message": self.path}})

    def _respond(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        pass


class GatewayServer:
    """Loopback-only HTTP server around a GatewayApp."""

    def __init__(self, app: GatewayApp, port: int = 0, host: str = "127.0.0.1"):
        handler = type("BoundHandler", (_Handler,), {"app": app})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> int:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self.port

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
