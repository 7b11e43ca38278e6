"""Acceptance suite: one test per release criterion, each printing a
PASS line with its measured numbers. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import json
import random
import statistics
import subprocess
import sys
import time
import urllib.request
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import pytest

from darkpita.catalog import (
    DarkAttribute,
    Dimension,
    InterventionStrategy,
    load_seed_catalog,
)
from darkpita.detector import match_rule, scan
from darkpita.document import Element, parse_html, serialize, serialize_node, resolve
from darkpita.gateway import GatewayApp, GatewayConfig, GatewayServer
from darkpita.patch import apply_enhancement, revert
from darkpita.profiles import Profile, ProfileStore, ProfileWarning, Selection
from darkpita.telemetry import (
    DiaryNote,
    EventKind,
    JsonlSink,
    TelemetryEvent,
    aggregate,
    daily_matrix,
    scrub_findings,
)
from conftest import CONTROL_PAGES, FIXTURES, PLANTED_PAGES, load_fixture

A = DarkAttribute

# Table rows: attribute set and enhancement count per pattern, in order.
SEED_TABLE = [
    ("prominent-buy-now", {A.ASYMMETRIC, A.COVERT}, 3),
    ("disguised-ads-amazon", {A.COVERT, A.DECEPTIVE, A.INFORMATION_HIDING}, 4),
    ("fake-discounts", {A.INFORMATION_HIDING}, 4),
    ("limited-time-recommendation",
     {A.ASYMMETRIC, A.DISPARATE_TREATMENT, A.INFORMATION_HIDING}, 3),
    ("video-autoplay", {A.ASYMMETRIC, A.DISPARATE_TREATMENT, A.COVERT}, 3),
    ("hiding-dislike-count", {A.INFORMATION_HIDING}, 1),
    ("auto-recommendations", {A.ASYMMETRIC, A.DISPARATE_TREATMENT, A.COVERT}, 3),
    ("hiding-total-episode-time", {A.RESTRICTIVE, A.COVERT, A.INFORMATION_HIDING}, 1),
    ("automatic-preview", {A.RESTRICTIVE, A.COVERT}, 1),
    ("fake-trending-content", {A.DISPARATE_TREATMENT, A.COVERT}, 1),
    ("disguised-suggested-tweets", {A.INFORMATION_HIDING, A.COVERT}, 2),
    ("sneaking-short-videos-into-feed", {A.COVERT, A.ASYMMETRIC}, 3),
    ("disguised-sponsorship", {A.COVERT, A.INFORMATION_HIDING}, 2),
]

PLANTED_TRUTH = {
    "amazon/product.html": {"prominent-buy-now": 1},
    "amazon/search.html": {"disguised-ads-amazon": 2},
    "amazon/pricing.html": {"fake-discounts": 1},
    "amazon/home.html": {"limited-time-recommendation": 2},
    "youtube/home.html": {"video-autoplay": 2},
    "youtube/watch.html": {"hiding-dislike-count": 1, "auto-recommendations": 1},
    "netflix/home.html": {"automatic-preview": 1},
    "netflix/watch.html": {"hiding-total-episode-time": 1},
    "twitter/home.html": {"fake-trending-content": 1, "disguised-suggested-tweets": 3},
    "facebook/feed.html": {"sneaking-short-videos-into-feed": 1, "disguised-sponsorship": 2},
}


def test_criterion_seed_catalog_fidelity():
    started = time.perf_counter()
    catalog = load_seed_catalog()
    elapsed = time.perf_counter() - started
    assert len(catalog.patterns) == 13
    assert len(catalog.enhancements) == 31
    counts = [len(p.enhancement_ids) for p in catalog.patterns.values()]
    assert counts == [3, 4, 4, 3, 3, 1, 3, 1, 1, 1, 2, 3, 2]
    assert list(catalog.patterns) == [pid for pid, _, _ in SEED_TABLE]
    for pattern_id, attributes, count in SEED_TABLE:
        pattern = catalog.patterns[pattern_id]
        assert pattern.attributes == frozenset(attributes), pattern_id
        assert len(pattern.enhancement_ids) == count, pattern_id
    assert elapsed < 1.0
    print(f"\nACCEPTANCE PASS seed-catalog-fidelity "
          f"(13 patterns, 31 enhancements, all rows checked, load {elapsed * 1000:.0f} ms)")


def test_criterion_strategy_dimension_partition():
    by_dimension = {Dimension.DESIGN: set(), Dimension.BEHAVIOR: set(), Dimension.OUTCOME: set()}
    for strategy in InterventionStrategy:
        by_dimension[strategy.dimension].add(strategy.value)
    assert by_dimension[Dimension.DESIGN] == {"hiding", "fairness", "information-disclosure"}
    assert by_dimension[Dimension.BEHAVIOR] == {
        "counterfactual-thinking", "disabling", "action-guide", "friction",
    }
    assert by_dimension[Dimension.OUTCOME] == {"reflection"}
    print("\nACCEPTANCE PASS strategy-dimension-partition (3 design / 4 behavior / 1 outcome)")


def _brute_force(document, catalog, site):
    expected = set()
    for pattern in catalog.patterns_for_site(site):
        matched = []
        stack = list(reversed(document.root.children))
        while stack:
            node = stack.pop()
            if not isinstance(node, Element):
                continue
            stack.extend(reversed(node.children))
            from darkpita.document import locator_of

            if any(match_rule(rule, document, locator_of(document, node))
                   for rule in pattern.rules):
                matched.append(node)
        chosen = set(map(id, matched))
        for element in matched:
            ancestor = element.parent
            while ancestor is not None and id(ancestor) not in chosen:
                ancestor = ancestor.parent
            if ancestor is None:
                from darkpita.document import locator_of

                expected.add((pattern.id, locator_of(document, element).path))
    return expected


def test_criterion_detection_oracle_equivalence():
    catalog = load_seed_catalog()
    slowest = 0.0
    pages = 0
    for rel, truth in PLANTED_TRUTH.items():
        document = load_fixture(rel)
        site = rel.split("/")[0]
        started = time.perf_counter()
        detections = scan(document, catalog, site)
        slowest = max(slowest, time.perf_counter() - started)
        pages += 1
        counts: dict[str, int] = {}
        for detection in detections:
            counts[detection.pattern_id] = counts.get(detection.pattern_id, 0) + 1
        assert counts == truth, rel  # 100% recall, zero spurious patterns
        got = {(d.pattern_id, d.locator.path) for d in detections}
        assert got == _brute_force(document, catalog, site), rel
    for rel, site in CONTROL_PAGES.items():
        document = load_fixture(rel)
        started = time.perf_counter()
        detections = scan(document, catalog, site)
        slowest = max(slowest, time.perf_counter() - started)
        pages += 1
        assert detections == [], rel
        assert _brute_force(document, catalog, site) == set()
    assert slowest < 1.0
    print(f"\nACCEPTANCE PASS detection-oracle-equivalence "
          f"({pages} pages, slowest scan {slowest * 1000:.0f} ms)")


def test_criterion_reversibility_idempotence_locality():
    catalog = load_seed_catalog()
    started = time.perf_counter()
    exercised = set()
    cases = 0
    for site, rels in PLANTED_PAGES.items():
        for rel in rels:
            document = load_fixture(rel)
            base = serialize(document)
            for detection in scan(document, catalog, site):
                for enhancement in catalog.enhancements_for_pattern(detection.pattern_id):
                    exercised.add(enhancement.id)
                    cases += 1
                    patched, receipt = apply_enhancement(document, detection, enhancement)
                    # Reversibility
                    assert serialize(revert(patched, receipt)) == base, enhancement.id
                    # Idempotence
                    again, second = apply_enhancement(patched, detection, enhancement)
                    assert second.noop and serialize(again) == serialize(patched)
                    # Byte locality: outside the receipt-covered span the
                    # serializations are identical.
                    from darkpita.patch import _affected_span, _span_markup

                    original_fragment = serialize_node(resolve(document, detection.locator))
                    parent, start, end = _affected_span(patched, receipt)
                    patched_fragment = _span_markup(parent, start, end)
                    after = serialize(patched)
                    assert base.count(original_fragment) == 1, enhancement.id
                    assert after.count(patched_fragment) == 1, enhancement.id
                    i = base.index(original_fragment)
                    j = after.index(patched_fragment)
                    assert base[:i] == after[:j], enhancement.id
                    assert base[i + len(original_fragment):] == \
                        after[j + len(patched_fragment):], enhancement.id
    elapsed = time.perf_counter() - started
    assert exercised == set(catalog.enhancements), "every seed enhancement exercised"
    assert elapsed < 10.0
    print(f"\nACCEPTANCE PASS reversibility-idempotence-locality "
          f"({cases} cases over 31 enhancements in {elapsed:.2f} s)")


def test_criterion_persistence_round_trip(tmp_path):
    catalog = load_seed_catalog()
    store = ProfileStore(tmp_path / "profile.json")
    pairs = [
        (pattern.site, pattern.id, enhancement_id)
        for pattern in catalog.patterns.values()
        for enhancement_id in pattern.enhancement_ids
    ]
    rng = random.Random(20260809)
    expected: dict[tuple[str, str], str] = {}
    profile = store.load(catalog)
    steps = 1000
    for _ in range(steps):
        site, pattern_id, enhancement_id = rng.choice(pairs)
        if rng.random() < 0.3:
            profile = store.clear_selection(profile, site, pattern_id)
            expected.pop((site, pattern_id), None)
        else:
            profile = store.save_selection(profile, catalog, site, pattern_id, enhancement_id)
            expected[(site, pattern_id)] = enhancement_id

    # True process restart: a fresh interpreter loads the store.
    script = (
        "import json, sys\n"
        "from darkpita.catalog import load_seed_catalog\n"
        "from darkpita.profiles import ProfileStore\n"
        "profile = ProfileStore(sys.argv[1]).load(load_seed_catalog())\n"
        "print(json.dumps({f'{s.site}|{s.pattern_id}': s.enhancement_id"
        " for s in profile.selections}))\n"
    )
    output = subprocess.run(
        [sys.executable, "-c", script, str(store.path)],
        capture_output=True, text=True, check=True,
    ).stdout
    reloaded = json.loads(output)
    assert reloaded == {f"{site}|{pattern}": eid for (site, pattern), eid in expected.items()}

    # Selections invalid under the catalog are dropped with warnings.
    polluted = Profile(
        catalog_version="future",
        selections=tuple(
            [Selection("amazon", "prominent-buy-now", "fairness-buy-now", "t")] +
            [Selection("amazon", "unknown-pattern", "unknown-enhancement", "t")]
        ),
    )
    store.save(polluted)
    with pytest.warns(ProfileWarning):
        recovered = ProfileStore(store.path).load(catalog)
    assert len(recovered.selections) == 1
    print(f"\nACCEPTANCE PASS persistence-round-trip "
          f"({steps} randomized steps, {len(expected)} live selections after restart)")


def _synth_stream(rng, participants=15, n=1000):
    base = datetime(2026, 8, 1, 0, 0, tzinfo=timezone.utc)
    sites = ["amazon", "youtube", "netflix", "twitter", "facebook"]
    kinds = list(EventKind)
    events, notes = [], []
    for i in range(n):
        participant = f"p{rng.randrange(participants):02d}"
        stamp = base + timedelta(minutes=rng.randrange(14 * 24 * 60))
        site = rng.choice(sites)
        kind = rng.choice(kinds)
        if kind in (EventKind.ENHANCEMENT_SAVED, EventKind.ENHANCEMENT_TRIGGERED,
                    EventKind.ENHANCEMENT_CLEARED):
            events.append(TelemetryEvent(kind, stamp, site, participant,
                                         pattern_id="p", enhancement_id="e"))
        elif kind is EventKind.PAGE_VISITED:
            events.append(TelemetryEvent(kind, stamp, site, participant,
                                         page_token=f"page-{rng.randrange(60)}"))
        else:
            events.append(TelemetryEvent(kind, stamp, site, participant))
        if rng.random() < 0.1:
            notes.append(DiaryNote(stamp, participant,
                                   f"day note {i}, mail me at user{i}@mail.example"))
    return events, notes


def test_criterion_telemetry_oracle(tmp_path):
    rng = random.Random(424242)
    events, notes = _synth_stream(rng)
    assert len(events) == 1000

    stats = aggregate(events, notes)
    participants = sorted({e.participant_id for e in events} | {n.participant_id for n in notes})
    assert stats.participants == len(participants) == 15

    def brute(counts_for):
        per = [counts_for(p) for p in participants]
        std = statistics.stdev(per) if len(per) > 1 else 0.0
        return (sum(per), statistics.mean(per), std, min(per), max(per))

    checks = {
        "log_entries": lambda p: sum(e.participant_id == p for e in events),
        "diary_entries": lambda p: sum(n.participant_id == p for n in notes),
        "distinct_pages": lambda p: len({
            (e.site, e.page_token) for e in events
            if e.participant_id == p and e.kind is EventKind.PAGE_VISITED
        }),
        "probe_triggers": lambda p: sum(
            e.participant_id == p and e.kind is EventKind.PROBE_TRIGGERED for e in events
        ),
        "enhancements_set_up": lambda p: sum(
            e.participant_id == p and e.kind is EventKind.ENHANCEMENT_SAVED for e in events
        ),
        "enhancement_triggers": lambda p: sum(
            e.participant_id == p and e.kind is EventKind.ENHANCEMENT_TRIGGERED for e in events
        ),
    }
    for name, counter in checks.items():
        summary = getattr(stats, name)
        total, mean, std, low, high = brute(counter)
        assert summary.total == total, name
        assert summary.mean == pytest.approx(mean), name
        assert summary.std == pytest.approx(std), name
        assert (summary.min, summary.max) == (low, high), name

    start = date(2026, 8, 1)
    matrix = daily_matrix(events, notes, start, 14)
    for participant in participants:
        for day in range(14):
            cell = matrix.cell(participant, day)
            assert cell.visited == any(
                e.participant_id == participant and e.kind is EventKind.PAGE_VISITED
                and (e.timestamp.date() - start).days == day for e in events
            )
            assert cell.modified == any(
                e.participant_id == participant
                and e.kind in (EventKind.ENHANCEMENT_SAVED, EventKind.ENHANCEMENT_TRIGGERED)
                and (e.timestamp.date() - start).days == day for e in events
            )
            assert cell.diarized == any(
                n.participant_id == participant
                and (n.timestamp.date() - start).days == day for n in notes
            )

    # Scrub postcondition over every emitted byte, then the consent gate.
    sink = JsonlSink(tmp_path, consent=True)
    for e in events:
        sink.record_event(e)
    for n in notes:
        sink.record_note(n)
    emitted = sink.events_path.read_text() + sink.notes_path.read_text()
    assert scrub_findings(emitted) == []
    sizes = (sink.events_path.stat().st_size, sink.notes_path.stat().st_size)
    sink.consent = False
    sink.record_event(events[0])
    sink.record_note(notes[0])
    assert (sink.events_path.stat().st_size, sink.notes_path.stat().st_size) == sizes
    print("\nACCEPTANCE PASS telemetry-oracle "
          f"(1000 events / {len(notes)} notes / 15 participants; zero scrub hits; consent gate holds)")


def _post(port, message):
    request = urllib.request.Request(
        f"http://127.0.0.1:{port}/v1/message",
        data=json.dumps(message).encode(),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(request, timeout=5) as response:
        return json.loads(response.read())


def _check_envelope(response, request_id):
    assert response["request_id"] == request_id
    assert isinstance(response["ok"], bool)
    if response["ok"]:
        assert isinstance(response["payload"], dict)
    else:
        assert {"code", "message"} <= set(response["error"])
    return response


def test_criterion_protocol_conformance(tmp_path):
    catalog = load_seed_catalog()
    profile_path = tmp_path / "profile.json"
    log_dir = tmp_path / "logs"

    def new_server():
        config = GatewayConfig(catalog=catalog, profile_path=profile_path,
                               log_dir=log_dir, consent=True)
        server = GatewayServer(GatewayApp(config), port=0)
        server.start()
        return server

    html = (FIXTURES / "amazon/product.html").read_text("utf-8")
    stamp = datetime(2026, 8, 2, 10, 0, tzinfo=timezone.utc).isoformat()
    server = new_server()
    seq = 0

    def send(msg_type, payload):
        nonlocal seq
        seq += 1
        rid = f"acc-{seq}"
        return _check_envelope(
            _post(server.port, {"type": msg_type, "request_id": rid, "payload": payload}),
            rid,
        )

    try:
        assert send("ping", {})["payload"]["pong"] is True

        detected = send("detect", {"html": html, "site": "amazon"})
        detections = detected["payload"]["detections"]
        assert len(detections) == 1
        detection = {k: detections[0][k] for k in ("pattern_id", "locator", "site", "rule_index")}
        assert detections[0]["pattern"]["attributes"] == ["asymmetric", "covert"]

        applied = send("apply", {
            "html": html, "detection": detection, "enhancement_id": "fairness-buy-now",
        })
        assert "background-color: #FFD814" in applied["payload"]["splice"]["markup"]
        assert applied["payload"]["receipt"]["enhancement_id"] == "fairness-buy-now"

        reverted = send("revert", {
            "html": html.replace(
                'aria-labelledby="submit.buy-now-announce"',
                'aria-labelledby="submit.buy-now-announce" style="background-color: #FFD814"'
                ' data-pita-enhancement="fairness-buy-now"',
            ),
            "receipt": applied["payload"]["receipt"],
        })
        assert "data-pita" not in reverted["payload"]["splice"]["markup"]

        saved = send("save_selection", {
            "site": "amazon", "pattern_id": "prominent-buy-now",
            "enhancement_id": "fairness-buy-now",
        })
        assert saved["payload"]["profile"]["selections"]

        send("log_event", {"event": {
            "kind": "page-visited", "timestamp": stamp, "site": "amazon",
            "participant_id": "acc", "page_token": "t1",
        }})
        send("submit_note", {"note": {
            "timestamp": stamp, "participant_id": "acc",
            "body": "note with pii a@b.com",
        }})
        reflection = send("get_reflection", {"site": "amazon"})
        assert "active_seconds" in reflection["payload"]["figures"]

        cleared = send("clear_selection", {"site": "amazon", "pattern_id": "fake-discounts"})
        assert cleared["ok"]

        profile = send("get_profile", {})["payload"]["profile"]
        assert profile["selections"][0]["enhancement_id"] == "fairness-buy-now"
    finally:
        server.shutdown()

    # Service restart: stateless except for the stores.
    server = new_server()
    try:
        profile = send("get_profile", {})["payload"]["profile"]
        assert [s["enhancement_id"] for s in profile["selections"]] == ["fairness-buy-now"]

        # Reapplication on a fresh page load, driven by the saved profile.
        detected = send("detect", {"html": html, "site": "amazon"})
        detection = detected["payload"]["detections"][0]
        selection = {
            (s["site"], s["pattern_id"]): s["enhancement_id"]
            for s in profile["selections"]
        }
        enhancement_id = selection[("amazon", detection["pattern_id"])]
        applied = send("apply", {
            "html": html,
            "detection": {k: detection[k] for k in ("pattern_id", "locator", "site", "rule_index")},
            "enhancement_id": enhancement_id,
        })
        assert "background-color: #FFD814" in applied["payload"]["splice"]["markup"]
    finally:
        server.shutdown()
    print("\nACCEPTANCE PASS protocol-conformance "
          "(all 10 message types; selection survives service restart and reapplies)")
