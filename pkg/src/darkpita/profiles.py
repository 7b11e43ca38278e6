"""Per-site enhancement selections, persisted in a single JSON file.

One selection per (site, pattern): choosing a new enhancement replaces
the old one. Writes validate against the active catalog and are atomic
(temp file + rename, fsynced) so a completed save survives a process
kill. Loading drops selections the catalog no longer explains, with a
ProfileWarning for each.
"""

from __future__ import annotations

import json
import os
import tempfile
import warnings as _warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .catalog import Catalog


class ProfileWarning(UserWarning):
    """A stored selection was dropped or repaired at load time."""


class SelectionValidationError(ValueError):
    """The (site, pattern, enhancement) triple is not a catalog pair."""


class CorruptProfileError(ValueError):
    """The store file exists but cannot be read; ``recovered`` holds an
    empty profile callers may continue with."""

    def __init__(self, message: str, recovered: "Profile"):
        super().__init__(message)
        self.recovered = recovered


@dataclass(frozen=True)
class Selection:
    site: str
    pattern_id: str
    enhancement_id: str
    updated_at: str

    def key(self) -> tuple[str, str]:
        return (self.site, self.pattern_id)

    def to_json(self) -> dict:
        return {
            "site": self.site,
            "pattern_id": self.pattern_id,
            "enhancement_id": self.enhancement_id,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Selection":
        return cls(
            site=data["site"],
            pattern_id=data["pattern_id"],
            enhancement_id=data["enhancement_id"],
            updated_at=data.get("updated_at", ""),
        )


@dataclass(frozen=True)
class Profile:
    """Immutable view of the saved selections, keyed by (site, pattern)."""

    catalog_version: str = ""
    selections: tuple[Selection, ...] = field(default=())

    def get(self, site: str, pattern_id: str) -> Selection | None:
        for selection in self.selections:
            if selection.key() == (site, pattern_id):
                return selection
        return None

    def for_site(self, site: str) -> list[Selection]:
        return [s for s in self.selections if s.site == site]

    def pairs_for_site(self, site: str) -> list[tuple[str, str]]:
        return [(s.pattern_id, s.enhancement_id) for s in self.for_site(site)]

    def with_selection(self, selection: Selection) -> "Profile":
        kept = tuple(s for s in self.selections if s.key() != selection.key())
        return replace(self, selections=kept + (selection,))

    def without_selection(self, site: str, pattern_id: str) -> "Profile":
        kept = tuple(s for s in self.selections if s.key() != (site, pattern_id))
        if len(kept) == len(self.selections):
            return self
        return replace(self, selections=kept)

    def to_json(self) -> dict:
        return {
            "catalog_version": self.catalog_version,
            "selections": [s.to_json() for s in self.selections],
        }


def validate_selection(selection: Selection, catalog: Catalog) -> None:
    enhancement = catalog.enhancements.get(selection.enhancement_id)
    if enhancement is None:
        raise SelectionValidationError(
            f"enhancement {selection.enhancement_id!r} is not in the catalog"
        )
    if enhancement.pattern_id != selection.pattern_id:
        raise SelectionValidationError(
            f"enhancement {selection.enhancement_id!r} belongs to "
            f"{enhancement.pattern_id!r}, not {selection.pattern_id!r}"
        )


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class ProfileStore:
    """Durable single-file store. Single writer; readers see the last
    completed write."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def load(self, catalog: Catalog) -> Profile:
        """Last durably saved profile; a fresh store is an empty profile.

        Selections that do not resolve in the catalog are dropped with a
        ProfileWarning. A present-but-unreadable file raises
        CorruptProfileError carrying an empty recovered profile.
        """
        if not self.path.exists():
            return Profile(catalog_version=catalog.version)
        try:
            data = json.loads(self.path.read_text("utf-8"))
            raw_selections = data["selections"]
            stored_version = data.get("catalog_version", "")
        except (json.JSONDecodeError, KeyError, UnicodeDecodeError, TypeError) as exc:
            raise CorruptProfileError(
                f"profile store {self.path} is unreadable: {exc}",
                recovered=Profile(catalog_version=catalog.version),
            ) from None
        selections: list[Selection] = []
        seen: set[tuple[str, str]] = set()
        for entry in raw_selections:
            try:
                selection = Selection.from_json(entry)
                validate_selection(selection, catalog)
            except (KeyError, TypeError, SelectionValidationError) as exc:
                _warnings.warn(f"dropping stored selection: {exc}", ProfileWarning)
                continue
            if selection.key() in seen:
                _warnings.warn(
                    f"dropping duplicate selection for {selection.key()}", ProfileWarning
                )
                continue
            seen.add(selection.key())
            selections.append(selection)
        if stored_version != catalog.version:
            _warnings.warn(
                f"profile was written under catalog {stored_version!r}, "
                f"revalidated against {catalog.version!r}",
                ProfileWarning,
            )
        return Profile(catalog_version=catalog.version, selections=tuple(selections))

    def save(self, profile: Profile) -> None:
        """Atomic replace-on-write; returns only after fsync."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        payload = json.dumps(profile.to_json(), indent=2, ensure_ascii=False)
        fd, tmp_name = tempfile.mkstemp(
            dir=self.path.parent, prefix=self.path.name, suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(payload)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp_name, self.path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise

    def save_selection(
        self,
        profile: Profile,
        catalog: Catalog,
        site: str,
        pattern_id: str,
        enhancement_id: str,
        *,
        now: str | None = None,
    ) -> Profile:
        """Validate, replace any prior mapping for (site, pattern), persist
        durably, and return the new profile."""
        selection = Selection(
            site=site,
            pattern_id=pattern_id,
            enhancement_id=enhancement_id,
            updated_at=now or _now_iso(),
        )
        validate_selection(selection, catalog)
        updated = profile.with_selection(selection)
        self.save(updated)
        return updated

    def clear_selection(self, profile: Profile, site: str, pattern_id: str) -> Profile:
        """Remove the mapping if present (no-op otherwise) and persist."""
        updated = profile.without_selection(site, pattern_id)
        if updated is not profile:
            self.save(updated)
        return updated


def profile_path_from_env(cli_value: str | None = None) -> Path:
    """Profile location: --profile flag, then PITA_PROFILE, then a default
    under the user's home."""
    if cli_value:
        return Path(cli_value)
    env = os.environ.get("PITA_PROFILE")
    if env:
        return Path(env)
    return Path.home() / ".dark-pita" / "profile.json"
