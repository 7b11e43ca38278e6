"""Interaction events and diary notes with local PII scrubbing, plus the
engagement statistics computed over them.

Everything that reaches a sink file has been through :func:`scrub`
first: emails, separated phone-number shapes, and URL query strings are
replaced by fixed redaction tokens, and configured literals (names a
participant asked to hide) are blanked. Scrubbing is idempotent and the
redaction tokens themselves never re-match the scrub rules, so a clean
log stays clean under any number of passes.

Recording is consent-gated: with consent off, sinks are untouched and
the caller gets a distinct ``SUPPRESSED`` acknowledgment.
"""

from __future__ import annotations

import json
import os
import re
import statistics
import threading
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 parse that also accepts the RFC-3339 'Z' suffix clients
    commonly emit (datetime.fromisoformat rejects it on Python 3.10)."""
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    return datetime.fromisoformat(value)


def new_participant_id() -> str:
    """Random opaque token minted at install time; never derived from
    user identity."""
    import uuid

    return uuid.uuid4().hex


class EventKind(Enum):
    PAGE_VISITED = "page-visited"
    PROBE_TRIGGERED = "probe-triggered"
    AWARENESS_PANEL_OPENED = "awareness-panel-opened"
    ACTION_PANEL_OPENED = "action-panel-opened"
    ENHANCEMENT_SAVED = "enhancement-saved"
    ENHANCEMENT_TRIGGERED = "enhancement-triggered"
    ENHANCEMENT_CLEARED = "enhancement-cleared"


_ENHANCEMENT_KINDS = frozenset(
    (EventKind.ENHANCEMENT_SAVED, EventKind.ENHANCEMENT_TRIGGERED, EventKind.ENHANCEMENT_CLEARED)
)


@dataclass(frozen=True)
class TelemetryEvent:
    kind: EventKind
    timestamp: datetime
    site: str
    participant_id: str
    pattern_id: str | None = None
    enhancement_id: str | None = None
    # Opaque per-page token; PageVisited pairs (site, page_token) define
    # the "distinct pages" metric. Never a raw URL.
    page_token: str | None = None

    def __post_init__(self) -> None:
        if self.kind in _ENHANCEMENT_KINDS:
            if not self.pattern_id or not self.enhancement_id:
                raise ValueError(f"{self.kind.value} events need pattern_id and enhancement_id")
        if self.kind is EventKind.PAGE_VISITED and (self.pattern_id or self.enhancement_id):
            raise ValueError("page-visited events carry no pattern or enhancement ids")

    def to_json(self) -> dict:
        data = {
            "kind": self.kind.value,
            "timestamp": self.timestamp.isoformat(),
            "site": self.site,
            "participant_id": self.participant_id,
        }
        if self.pattern_id is not None:
            data["pattern_id"] = self.pattern_id
        if self.enhancement_id is not None:
            data["enhancement_id"] = self.enhancement_id
        if self.page_token is not None:
            data["page_token"] = self.page_token
        return data

    @classmethod
    def from_json(cls, data: dict) -> "TelemetryEvent":
        return cls(
            kind=EventKind(data["kind"]),
            timestamp=parse_timestamp(data["timestamp"]),
            site=data.get("site", ""),
            participant_id=data.get("participant_id", ""),
            pattern_id=data.get("pattern_id"),
            enhancement_id=data.get("enhancement_id"),
            page_token=data.get("page_token"),
        )


@dataclass(frozen=True)
class DiaryNote:
    timestamp: datetime
    participant_id: str
    body: str
    # Opaque references (filenames, storage keys); bytes never inline.
    attachments: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "timestamp": self.timestamp.isoformat(),
            "participant_id": self.participant_id,
            "body": self.body,
            "attachments": list(self.attachments),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DiaryNote":
        return cls(
            timestamp=parse_timestamp(data["timestamp"]),
            participant_id=data.get("participant_id", ""),
            body=data.get("body", ""),
            attachments=tuple(data.get("attachments", [])),
        )


# -- scrubbing ----------------------------------------------------------

EMAIL_TOKEN = "[REDACTED-EMAIL]"
PHONE_TOKEN = "[REDACTED-PHONE]"
QUERY_TOKEN = "[REDACTED-QUERY]"
NAME_TOKEN = "[REDACTED-NAME]"

_EMAIL_RE = re.compile(r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+")
# Separated phone shapes only; bare digit runs stay untouched so ids and
# timestamps are not mangled.
_PHONE_RE = re.compile(
    r"(?<![\d.])(?:\+\d{1,3}[ .-]?)?(?:\(\d{3}\)[ .-]?|\d{3}[ .-])\d{3}[ .-]\d{4}(?![\d-])"
)
_QUERY_RE = re.compile(r"\?(?!%s(?!\S))\S+" % re.escape(QUERY_TOKEN))


@dataclass(frozen=True)
class ScrubConfig:
    """Built-in matchers plus participant-provided literals to blank."""

    extra_literals: tuple[str, ...] = ()


DEFAULT_SCRUB = ScrubConfig()


def scrub(text: str, config: ScrubConfig = DEFAULT_SCRUB) -> str:
    """Redact emails, phone shapes, URL query strings, and configured
    literals. Idempotent: scrubbing scrubbed text changes nothing."""
    out = _QUERY_RE.sub(f"?{QUERY_TOKEN}", text)
    out = _EMAIL_RE.sub(EMAIL_TOKEN, out)
    out = _PHONE_RE.sub(PHONE_TOKEN, out)
    for literal in config.extra_literals:
        if literal:
            out = re.sub(re.escape(literal), NAME_TOKEN, out, flags=re.IGNORECASE)
    return out


def scrub_findings(text: str, config: ScrubConfig = DEFAULT_SCRUB) -> list[str]:
    """Every substring the scrub matchers would still flag; the no-PII
    postcondition is exactly 'this list is empty'."""
    findings = _EMAIL_RE.findall(text) + _PHONE_RE.findall(text) + _QUERY_RE.findall(text)
    for literal in config.extra_literals:
        if literal:
            findings.extend(m.group(0) for m in re.finditer(re.escape(literal), text, re.IGNORECASE))
    return findings


def scrub_event(event: TelemetryEvent, config: ScrubConfig = DEFAULT_SCRUB) -> TelemetryEvent:
    return TelemetryEvent(
        kind=event.kind,
        timestamp=event.timestamp,
        site=scrub(event.site, config),
        participant_id=scrub(event.participant_id, config),
        pattern_id=scrub(event.pattern_id, config) if event.pattern_id else event.pattern_id,
        enhancement_id=(
            scrub(event.enhancement_id, config) if event.enhancement_id else event.enhancement_id
        ),
        page_token=scrub(event.page_token, config) if event.page_token else event.page_token,
    )


def scrub_note(note: DiaryNote, config: ScrubConfig = DEFAULT_SCRUB) -> DiaryNote:
    return DiaryNote(
        timestamp=note.timestamp,
        participant_id=scrub(note.participant_id, config),
        body=scrub(note.body, config),
        attachments=tuple(scrub(ref, config) for ref in note.attachments),
    )


# -- sinks --------------------------------------------------------------

class Ack(Enum):
    RECORDED = "recorded"
    SUPPRESSED = "suppressed"


class JsonlSink:
    """Append-only JSONL files (events.jsonl + notes.jsonl) in one
    directory. Appends are serialized by a lock and fsynced before the
    acknowledgment, so an acked record survives a crash."""

    def __init__(self, directory: str | Path, *, consent: bool = False,
                 scrub_config: ScrubConfig = DEFAULT_SCRUB):
        self.directory = Path(directory)
        self.consent = consent
        self.scrub_config = scrub_config
        self.events_path = self.directory / "events.jsonl"
        self.notes_path = self.directory / "notes.jsonl"
        self._lock = threading.Lock()

    def _append(self, path: Path, payload: dict) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        line = json.dumps(payload, ensure_ascii=False)
        with self._lock, open(path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    def record_event(self, event: TelemetryEvent, *, consent: bool | None = None) -> Ack:
        if not (self.consent if consent is None else consent):
            return Ack.SUPPRESSED
        self._append(self.events_path, scrub_event(event, self.scrub_config).to_json())
        return Ack.RECORDED

    def record_note(self, note: DiaryNote, *, consent: bool | None = None) -> Ack:
        if not (self.consent if consent is None else consent):
            return Ack.SUPPRESSED
        self._append(self.notes_path, scrub_note(note, self.scrub_config).to_json())
        return Ack.RECORDED


def record_event(sink: JsonlSink, event: TelemetryEvent, *, consent: bool | None = None) -> Ack:
    return sink.record_event(event, consent=consent)


def record_note(sink: JsonlSink, note: DiaryNote, *, consent: bool | None = None) -> Ack:
    return sink.record_note(note, consent=consent)


@dataclass(frozen=True)
class LoadedLogs:
    events: tuple[TelemetryEvent, ...]
    notes: tuple[DiaryNote, ...]
    skipped: int


def read_log_dir(directory: str | Path) -> LoadedLogs:
    """Read every *.jsonl file in a directory; lines that do not parse as
    an event or a note are counted, not fatal."""
    events: list[TelemetryEvent] = []
    notes: list[DiaryNote] = []
    skipped = 0
    for path in sorted(Path(directory).glob("*.jsonl")):
        for line in path.read_text("utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                if "kind" in data:
                    events.append(TelemetryEvent.from_json(data))
                elif "body" in data:
                    notes.append(DiaryNote.from_json(data))
                else:
                    skipped += 1
            except (json.JSONDecodeError, KeyError, ValueError, TypeError):
                skipped += 1
    return LoadedLogs(tuple(events), tuple(notes), skipped)


# -- aggregation ---------------------------------------------------------

@dataclass(frozen=True)
class MetricSummary:
    total: int
    mean: float
    std: float
    min: int
    max: int

    def to_json(self) -> dict:
        return {
            "total": self.total, "mean": self.mean, "std": self.std,
            "min": self.min, "max": self.max,
        }


METRIC_NAMES = (
    "log_entries",
    "diary_entries",
    "distinct_pages",
    "probe_triggers",
    "enhancements_set_up",
    "enhancement_triggers",
)


@dataclass(frozen=True)
class EngagementStats:
    participants: int
    log_entries: MetricSummary
    diary_entries: MetricSummary
    distinct_pages: MetricSummary
    probe_triggers: MetricSummary
    enhancements_set_up: MetricSummary
    enhancement_triggers: MetricSummary

    def to_json(self) -> dict:
        return {
            "participants": self.participants,
            **{name: getattr(self, name).to_json() for name in METRIC_NAMES},
        }


def _summarize(counts: Sequence[int]) -> MetricSummary:
    if not counts:
        return MetricSummary(total=0, mean=0.0, std=0.0, min=0, max=0)
    # Sample (n-1) standard deviation; a single participant has std 0.
    std = statistics.stdev(counts) if len(counts) > 1 else 0.0
    return MetricSummary(
        total=sum(counts),
        mean=sum(counts) / len(counts),
        std=std,
        min=min(counts),
        max=max(counts),
    )


def aggregate(
    events: Iterable[TelemetryEvent], notes: Iterable[DiaryNote]
) -> EngagementStats:
    """Per-participant counts summarized per metric across participants.

    'distinct pages' counts unique (site, page_token) pairs among a
    participant's page-visited events.
    """
    events = list(events)
    notes = list(notes)
    participants = sorted(
        {e.participant_id for e in events} | {n.participant_id for n in notes}
    )
    per: dict[str, dict[str, object]] = {
        p: {"log": 0, "diary": 0, "pages": set(), "probe": 0, "setup": 0, "trigger": 0}
        for p in participants
    }
    for event in events:
        row = per[event.participant_id]
        row["log"] += 1  # type: ignore[operator]
        if event.kind is EventKind.PAGE_VISITED:
            row["pages"].add((event.site, event.page_token))  # type: ignore[union-attr]
        elif event.kind is EventKind.PROBE_TRIGGERED:
            row["probe"] += 1  # type: ignore[operator]
        elif event.kind is EventKind.ENHANCEMENT_SAVED:
            row["setup"] += 1  # type: ignore[operator]
        elif event.kind is EventKind.ENHANCEMENT_TRIGGERED:
            row["trigger"] += 1  # type: ignore[operator]
    for note in notes:
        per[note.participant_id]["diary"] += 1  # type: ignore[operator]

    def column(key: str) -> list[int]:
        out = []
        for p in participants:
            value = per[p][key]
            out.append(len(value) if isinstance(value, set) else int(value))  # type: ignore[arg-type]
        return out

    return EngagementStats(
        participants=len(participants),
        log_entries=_summarize(column("log")),
        diary_entries=_summarize(column("diary")),
        distinct_pages=_summarize(column("pages")),
        probe_triggers=_summarize(column("probe")),
        enhancements_set_up=_summarize(column("setup")),
        enhancement_triggers=_summarize(column("trigger")),
    )


# -- daily engagement matrix ----------------------------------------------

@dataclass(frozen=True)
class DayCell:
    visited: bool = False
    modified: bool = False
    diarized: bool = False


@dataclass(frozen=True)
class DailyEngagementMatrix:
    start_day: date
    n_days: int
    participants: tuple[str, ...]
    rows: dict[str, tuple[DayCell, ...]] = field(compare=False)

    def cell(self, participant: str, day_index: int) -> DayCell:
        return self.rows[participant][day_index]

    def to_json(self) -> dict:
        return {
            "start_day": self.start_day.isoformat(),
            "n_days": self.n_days,
            "participants": list(self.participants),
            "rows": {
                p: [
                    {"visited": c.visited, "modified": c.modified, "diarized": c.diarized}
                    for c in cells
                ]
                for p, cells in self.rows.items()
            },
        }

    def to_text(self) -> str:
        """Compact grid: one row per participant, one vmd triple per day."""
        lines = [f"day 1..{self.n_days} from {self.start_day.isoformat()} (v=visited m=modified d=diarized)"]
        for participant in self.participants:
            cells = []
            for cell in self.rows[participant]:
                cells.append(
                    ("v" if cell.visited else "-")
                    + ("m" if cell.modified else "-")
                    + ("d" if cell.diarized else "-")
                )
            lines.append(f"{participant:>12}  {' '.join(cells)}")
        return "\n".join(lines)


_MODIFYING_KINDS = frozenset((EventKind.ENHANCEMENT_SAVED, EventKind.ENHANCEMENT_TRIGGERED))


def daily_matrix(
    events: Iterable[TelemetryEvent],
    notes: Iterable[DiaryNote],
    start_day: date,
    n_days: int,
) -> DailyEngagementMatrix:
    """Participant-by-day flags: visited (a page-visited event), modified
    (an enhancement saved or triggered), diarized (a note)."""
    if n_days < 1:
        raise ValueError("n_days must be at least 1")
    events = list(events)
    notes = list(notes)
    participants = tuple(sorted(
        {e.participant_id for e in events} | {n.participant_id for n in notes}
    ))
    flags: dict[str, list[list[bool]]] = {
        p: [[False, False, False] for _ in range(n_days)] for p in participants
    }

    def day_of(ts: datetime) -> int | None:
        offset = (ts.date() - start_day).days
        return offset if 0 <= offset < n_days else None

    for event in events:
        day = day_of(event.timestamp)
        if day is None:
            continue
        if event.kind is EventKind.PAGE_VISITED:
            flags[event.participant_id][day][0] = True
        if event.kind in _MODIFYING_KINDS:
            flags[event.participant_id][day][1] = True
    for note in notes:
        day = day_of(note.timestamp)
        if day is not None:
            flags[note.participant_id][day][2] = True

    rows = {
        p: tuple(DayCell(visited=f[0], modified=f[1], diarized=f[2]) for f in flags[p])
        for p in participants
    }
    return DailyEngagementMatrix(
        start_day=start_day, n_days=n_days, participants=participants, rows=rows
    )


# -- reflection figures ----------------------------------------------------

CostEstimator = Callable[[Sequence[TelemetryEvent]], float]


@dataclass(frozen=True)
class ReflectionFigures:
    """Numbers that feed reflection-widget data slots."""

    active_time: timedelta
    flagged_interaction_count: int
    attributed_extra_time: timedelta
    extra_cost: float | None = None

    def to_json(self) -> dict:
        return {
            "active_seconds": self.active_time.total_seconds(),
            "flagged_interactions": self.flagged_interaction_count,
            "attributed_extra_seconds": self.attributed_extra_time.total_seconds(),
            "extra_cost": self.extra_cost,
        }


def _merge_intervals(intervals: list[tuple[datetime, datetime]]) -> list[tuple[datetime, datetime]]:
    merged: list[tuple[datetime, datetime]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def _sessions(visits: list[datetime], idle_threshold: timedelta) -> list[tuple[datetime, datetime]]:
    sessions: list[tuple[datetime, datetime]] = []
    for ts in sorted(visits):
        if sessions and ts - sessions[-1][1] <= idle_threshold:
            sessions[-1] = (sessions[-1][0], ts)
        else:
            sessions.append((ts, ts))
    return sessions


def reflection_query(
    events: Iterable[TelemetryEvent],
    site: str,
    window: tuple[datetime, datetime] | None = None,
    *,
    idle_threshold: timedelta = timedelta(minutes=5),
    attribution_window: timedelta = timedelta(minutes=10),
    cost_estimator: CostEstimator | None = None,
) -> ReflectionFigures:
    """Site activity summary for reflection widgets.

    Active time stitches page-visited events into sessions: a gap at or
    under ``idle_threshold`` continues a session, and the session lasts
    from its first to its last event. Attributed extra time is the part
    of active time that falls within ``attribution_window`` after an
    enhancement-triggered (flagged) interaction.

    The monetary estimator is pluggable and ships disabled: without one,
    ``extra_cost`` is None.
    """
    selected = [e for e in events if e.site == site]
    if window is not None:
        start, end = window
        selected = [e for e in selected if start <= e.timestamp <= end]
    flagged = sorted(
        e.timestamp for e in selected if e.kind is EventKind.ENHANCEMENT_TRIGGERED
    )

    active = timedelta(0)
    attributed = timedelta(0)
    windows = _merge_intervals([(t, t + attribution_window) for t in flagged])
    by_participant: dict[str, list[datetime]] = {}
    for event in selected:
        if event.kind is EventKind.PAGE_VISITED:
            by_participant.setdefault(event.participant_id, []).append(event.timestamp)
    for visits in by_participant.values():
        for session_start, session_end in _sessions(visits, idle_threshold):
            active += session_end - session_start
            for window_start, window_end in windows:
                overlap_start = max(session_start, window_start)
                overlap_end = min(session_end, window_end)
                if overlap_end > overlap_start:
                    attributed += overlap_end - overlap_start

    extra_cost = cost_estimator(selected) if cost_estimator is not None else None
    return ReflectionFigures(
        active_time=active,
        flagged_interaction_count=len(flagged),
        attributed_extra_time=attributed,
        extra_cost=extra_cost,
    )
