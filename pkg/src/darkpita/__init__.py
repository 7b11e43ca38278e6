"""Dark Pita engine: rule-driven dark-pattern detection, reversible UI
enhancement patching, per-site selection profiles, and scrubbed telemetry
for HTML documents."""

from .catalog import (
    Catalog,
    DarkAttribute,
    DarkPatternSpec,
    DetectionRule,
    Dimension,
    EnhancementSpec,
    InterventionStrategy,
    RuleKind,
    WelfareCategory,
    load_catalog,
    load_catalog_path,
    load_seed_catalog,
    validate_catalog,
)
from .detector import Detection, Report, match_rule, scan, scan_report
from .document import (
    HtmlDocument,
    NodeLocator,
    locator_of,
    parse_html,
    query,
    resolve,
    serialize,
    structural_equal,
)
from .patch import (
    DiffSummary,
    PatchReceipt,
    apply_enhancement,
    apply_profile,
    preview_diff,
    revert,
)
from .profiles import Profile, ProfileStore, Selection
from .telemetry import (
    DiaryNote,
    EngagementStats,
    EventKind,
    JsonlSink,
    ScrubConfig,
    TelemetryEvent,
    aggregate,
    daily_matrix,
    reflection_query,
    scrub,
)

__version__ = "0.1.0"
