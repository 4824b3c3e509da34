"""Resampling of irregular snapshots onto a fixed intra-day grid.

Days run midnight to midnight in a configurable local zone; the default
10-minute step gives 144 slots. Every slot is either directly observed,
forward-filled (imputed) from the last observation, or missing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable
from zoneinfo import ZoneInfo

from .errors import EmptyProfileError, UnknownStationError
from .ingest import SnapshotArchive

DIRECT = "direct"
IMPUTED = "imputed"
MISSING = "missing"

PROFILE_COLUMNS = ("station_id", "date", "slot_index", "value", "flag")

_DAY_MS = 24 * 60 * 60 * 1000


@dataclass(frozen=True)
class TimeGrid:
    """Fixed intra-day sampling grid in a local timezone."""

    zone: str = "Europe/Dublin"
    step: timedelta = timedelta(minutes=10)

    def __post_init__(self):
        ZoneInfo(self.zone)  # fail fast on unknown zone names
        step_ms = self.step // timedelta(milliseconds=1)
        if step_ms <= 0 or self.step % timedelta(milliseconds=1) or _DAY_MS % step_ms:
            raise ValueError(f"step {self.step} must divide 24 hours exactly")

    @property
    def step_ms(self) -> int:
        return self.step // timedelta(milliseconds=1)

    @property
    def slots_per_day(self) -> int:
        return _DAY_MS // self.step_ms

    @property
    def tzinfo(self) -> ZoneInfo:
        return ZoneInfo(self.zone)


@dataclass(frozen=True)
class ImputationPolicy:
    """Forward-fill policy: gaps longer than max_gap slots become missing."""

    max_gap: int = 6

    def __post_init__(self):
        if self.max_gap < 0:
            raise ValueError("max_gap must be non-negative")


@dataclass(frozen=True)
class DayProfile:
    """Available-bike counts for one station over one local day's slots."""

    station_id: int
    date: date
    values: tuple[int, ...]
    flags: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) != len(self.flags):
            raise ValueError("values and flags must have the same length")
        for i, (v, f) in enumerate(zip(self.values, self.flags)):
            if f not in (DIRECT, IMPUTED, MISSING):
                raise ValueError(f"slot {i}: unknown flag {f!r}")
            if f == MISSING:
                if v != 0:
                    raise ValueError(f"slot {i}: missing slots must carry value 0")
            elif v < 0:
                raise ValueError(f"slot {i}: negative count {v}")

    @property
    def slots_per_day(self) -> int:
        return len(self.values)

    @property
    def completeness(self) -> float:
        """Fraction of directly observed slots; imputed slots do not count."""
        return self.flags.count(DIRECT) / len(self.flags)

    def non_missing(self) -> list[int]:
        """Values at observed or imputed slots, in slot order."""
        return [v for v, f in zip(self.values, self.flags) if f != MISSING]


def _slot_index(ms_since_midnight: int, grid: TimeGrid) -> int:
    # Nearest slot, ties toward the earlier one; the final half step of the
    # day folds into the last slot so a snapshot never escapes its date.
    q, r = divmod(ms_since_midnight, grid.step_ms)
    slot = q + (1 if 2 * r > grid.step_ms else 0)
    return min(slot, grid.slots_per_day - 1)


def build_day_profile(
    archive: SnapshotArchive,
    station_id: int,
    day: date,
    grid: TimeGrid,
    policy: ImputationPolicy = ImputationPolicy(),
) -> DayProfile:
    """Resample one station's snapshots for one local day.

    Snapshots land on the nearest slot of their local date (ties toward
    the earlier slot); when several land on one slot the latest wins.
    Unobserved slots are forward-filled from the last observed value for
    at most policy.max_gap slots and flagged imputed; anything further
    out, including slots before the first observation, is missing.
    """
    station_rows = [s for s in archive.rows if s.station_id == station_id]
    if not station_rows:
        raise UnknownStationError(f"station {station_id} not present in archive")

    tz = grid.tzinfo
    by_slot: dict[int, tuple] = {}  # slot -> (observed_at, value)
    for snap in station_rows:
        local = snap.observed_at.astimezone(tz)
        if local.date() != day:
            continue
        ms = ((local.hour * 60 + local.minute) * 60 + local.second) * 1000 + (
            local.microsecond // 1000
        )
        slot = _slot_index(ms, grid)
        held = by_slot.get(slot)
        if held is None or snap.observed_at >= held[0]:
            by_slot[slot] = (snap.observed_at, snap.available_bikes)
    if not by_slot:
        raise EmptyProfileError(f"no snapshots for station {station_id} on {day}")

    values = []
    flags = []
    last_direct: int | None = None  # slot index of the last direct observation
    for i in range(grid.slots_per_day):
        if i in by_slot:
            values.append(by_slot[i][1])
            flags.append(DIRECT)
            last_direct = i
        elif last_direct is not None and i - last_direct <= policy.max_gap:
            values.append(by_slot[last_direct][1])
            flags.append(IMPUTED)
        else:
            values.append(0)
            flags.append(MISSING)
    return DayProfile(station_id, day, tuple(values), tuple(flags))


def date_range(start: date, end: date) -> list[date]:
    """Inclusive list of dates from start to end (empty when start > end)."""
    days = (end - start).days
    return [start + timedelta(days=i) for i in range(days + 1)] if days >= 0 else []


def profiles_for_range(
    archive: SnapshotArchive,
    station_id: int,
    start: date,
    end: date,
    grid: TimeGrid,
    policy: ImputationPolicy = ImputationPolicy(),
    min_completeness: float = 0.8,
) -> tuple[list[DayProfile], list[tuple[date, float]]]:
    """Profiles for every date in [start, end] meeting the completeness bar.

    Returns (profiles ordered by date, exclusions) where each exclusion is
    (date, completeness); dates with no snapshots at all report 0.0.
    """
    profiles = []
    excluded = []
    for day in date_range(start, end):
        try:
            profile = build_day_profile(archive, station_id, day, grid, policy)
        except EmptyProfileError:
            excluded.append((day, 0.0))
            continue
        if profile.completeness >= min_completeness:
            profiles.append(profile)
        else:
            excluded.append((day, profile.completeness))
    return profiles, excluded


def write_profiles_csv(profiles: Iterable[DayProfile], path: str | Path) -> int:
    """Write profiles in long form (one row per slot); returns row count."""
    count = 0
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PROFILE_COLUMNS)
        for profile in profiles:
            for i, (v, flag) in enumerate(zip(profile.values, profile.flags)):
                writer.writerow(
                    [profile.station_id, profile.date.isoformat(), i, v, flag]
                )
                count += 1
    return count


def read_profiles_csv(path: str | Path) -> list[DayProfile]:
    """Read profiles written by write_profiles_csv, preserving file order."""
    groups: dict[tuple[int, date], list[tuple[int, int, str]]] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is not None and tuple(header) != PROFILE_COLUMNS:
            raise ValueError(f"unexpected profile CSV header: {header}")
        for row in reader:
            if not row:
                continue
            key = (int(row[0]), date.fromisoformat(row[1]))
            groups.setdefault(key, []).append((int(row[2]), int(row[3]), row[4]))
    profiles = []
    for (station_id, day), slots in groups.items():
        slots.sort()
        if [s[0] for s in slots] != list(range(len(slots))):
            raise ValueError(f"profile {station_id}/{day} has gaps in slot indices")
        profiles.append(
            DayProfile(
                station_id,
                day,
                tuple(s[1] for s in slots),
                tuple(s[2] for s in slots),
            )
        )
    return profiles
