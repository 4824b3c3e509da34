"""Snapshot acquisition: feed parsing, CSV archives, and the polling loop.

A snapshot is one observation of one station at one instant. Archives are
CSV files with eight columns (station number, station name, latitude,
longitude, total stands, available stands, available bikes, last update)
serialized in UTC at millisecond precision.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

from .errors import FeedAuthError, FeedParseError, FeedUnavailableError

log = logging.getLogger(__name__)

ARCHIVE_COLUMNS = (
    "station_number",
    "station_name",
    "latitude",
    "longitude",
    "total_stands",
    "available_stands",
    "available_bikes",
    "last_update",
)

# Feed field -> snapshot field, for the JCDecaux-style station list.
_FEED_FIELDS = {
    "number": "station_id",
    "name": "station_name",
    "bike_stands": "total_stands",
    "available_bike_stands": "available_stands",
    "available_bikes": "available_bikes",
    "last_update": "observed_at",
}


@dataclass(frozen=True)
class StationSnapshot:
    """One station observation at one instant."""

    station_id: int
    station_name: str
    latitude: float
    longitude: float
    total_stands: int
    available_stands: int
    available_bikes: int
    observed_at: datetime  # tz-aware UTC, millisecond precision

    @property
    def key(self) -> tuple[int, datetime]:
        return (self.station_id, self.observed_at)


@dataclass(frozen=True)
class Rejection:
    """One rejected record and the reason it was dropped."""

    where: str  # "record 3" for feed documents, "line 17" for CSV rows
    reason: str


def snapshot_problems(snap: StationSnapshot) -> list[str]:
    """Return invariant violations for a snapshot (empty list when valid).

    Docks may be out of service, so available_bikes + available_stands is
    allowed to fall short of total_stands; only an excess is rejected.
    """
    problems = []
    if snap.station_id < 1:
        problems.append(f"station_id must be positive, got {snap.station_id}")
    for field in ("total_stands", "available_stands", "available_bikes"):
        if getattr(snap, field) < 0:
            problems.append(f"{field} must be non-negative, got {getattr(snap, field)}")
    if snap.available_bikes + snap.available_stands > snap.total_stands:
        problems.append(
            f"available_bikes + available_stands = "
            f"{snap.available_bikes + snap.available_stands} exceeds "
            f"total_stands = {snap.total_stands}"
        )
    if not -90.0 <= snap.latitude <= 90.0:
        problems.append(f"latitude {snap.latitude} outside [-90, 90]")
    if not -180.0 <= snap.longitude <= 180.0:
        problems.append(f"longitude {snap.longitude} outside [-180, 180]")
    if snap.observed_at.tzinfo is None:
        problems.append("observed_at must be timezone-aware")
    elif snap.observed_at.microsecond % 1000 != 0:
        problems.append("observed_at must have millisecond precision")
    return problems


@dataclass(frozen=True)
class SnapshotArchive:
    """Snapshots sorted by (station_id, observed_at) with unique keys."""

    rows: tuple[StationSnapshot, ...]
    source: str = ""

    def __post_init__(self):
        keys = [s.key for s in self.rows]
        if keys != sorted(keys):
            raise ValueError("archive rows must be sorted by (station_id, observed_at)")
        if len(set(keys)) != len(keys):
            raise ValueError("archive rows must have unique (station_id, observed_at) keys")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def station_ids(self) -> tuple[int, ...]:
        return tuple(sorted({s.station_id for s in self.rows}))


def build_archive(
    snapshots: Iterable[StationSnapshot], source: str = ""
) -> tuple[SnapshotArchive, list[Rejection]]:
    """Sort and de-duplicate snapshots into an archive.

    The first occurrence of each (station_id, observed_at) key wins;
    later occurrences are reported as duplicates.
    """
    seen: dict[tuple[int, datetime], StationSnapshot] = {}
    duplicates = []
    for i, snap in enumerate(snapshots):
        if snap.key in seen:
            duplicates.append(Rejection(f"record {i}", f"duplicate key {snap.key}"))
        else:
            seen[snap.key] = snap
    rows = tuple(sorted(seen.values(), key=lambda s: s.key))
    return SnapshotArchive(rows, source), duplicates


def _utc_from_epoch_ms(ms: int) -> datetime:
    return datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc).replace(
        microsecond=(ms % 1000) * 1000
    )


def parse_feed_document(raw: str) -> tuple[list[StationSnapshot], list[Rejection]]:
    """Parse a JSON station-list document into snapshots.

    Accepts the JCDecaux open-data shape: an array of objects carrying
    number, name, position{lat,lng}, bike_stands, available_bike_stands,
    available_bikes and last_update (epoch milliseconds). Records that are
    malformed or violate snapshot invariants are rejected individually;
    the rest are kept.
    """
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FeedParseError(f"malformed feed document: {exc.msg}", offset=exc.pos) from exc
    if not isinstance(doc, list):
        raise FeedParseError(f"expected a JSON array of stations, got {type(doc).__name__}")

    snapshots: list[StationSnapshot] = []
    rejections: list[Rejection] = []
    for i, record in enumerate(doc):
        where = f"record {i}"
        if not isinstance(record, dict):
            rejections.append(Rejection(where, "station record is not a JSON object"))
            continue
        missing = [f for f in _FEED_FIELDS if f not in record]
        position = record.get("position")
        if not isinstance(position, dict):
            missing.append("position")
        else:
            missing.extend(f"position.{f}" for f in ("lat", "lng") if f not in position)
        if missing:
            rejections.append(Rejection(where, "missing field(s): " + ", ".join(sorted(missing))))
            continue
        try:
            snap = StationSnapshot(
                station_id=int(record["number"]),
                station_name=str(record["name"]),
                latitude=float(position["lat"]),
                longitude=float(position["lng"]),
                total_stands=int(record["bike_stands"]),
                available_stands=int(record["available_bike_stands"]),
                available_bikes=int(record["available_bikes"]),
                observed_at=_utc_from_epoch_ms(int(record["last_update"])),
            )
        except (TypeError, ValueError) as exc:
            rejections.append(Rejection(where, f"field conversion failed: {exc}"))
            continue
        problems = snapshot_problems(snap)
        if problems:
            rejections.append(Rejection(where, "; ".join(problems)))
        else:
            snapshots.append(snap)
    return snapshots, rejections


def _format_ts(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat(timespec="milliseconds").replace(
        "+00:00", "Z"
    )


def _parse_ts(text: str) -> datetime:
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return dt.astimezone(timezone.utc)


def _snapshot_to_row(snap: StationSnapshot) -> list[str]:
    return [
        str(snap.station_id),
        snap.station_name,
        repr(snap.latitude),
        repr(snap.longitude),
        str(snap.total_stands),
        str(snap.available_stands),
        str(snap.available_bikes),
        _format_ts(snap.observed_at),
    ]


def _snapshot_from_row(row: Sequence[str]) -> StationSnapshot:
    if len(row) != len(ARCHIVE_COLUMNS):
        raise ValueError(f"expected {len(ARCHIVE_COLUMNS)} fields, got {len(row)}")
    return StationSnapshot(
        station_id=int(row[0]),
        station_name=row[1],
        latitude=float(row[2]),
        longitude=float(row[3]),
        total_stands=int(row[4]),
        available_stands=int(row[5]),
        available_bikes=int(row[6]),
        observed_at=_parse_ts(row[7]),
    )


def write_archive(archive: SnapshotArchive, path: str | Path) -> int:
    """Write an archive as CSV (UTF-8, LF, header always present).

    Returns the number of data rows written. Re-reading the file yields an
    equal archive, field for field and timestamp to the millisecond.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ARCHIVE_COLUMNS)
        for snap in archive.rows:
            writer.writerow(_snapshot_to_row(snap))
    return len(archive.rows)


def _looks_like_header(row: Sequence[str]) -> bool:
    try:
        int(row[0])
        return False
    except (ValueError, IndexError):
        return True


def read_archive(path: str | Path) -> tuple[SnapshotArchive, list[Rejection]]:
    """Read a CSV archive, validating, sorting and de-duplicating rows.

    The header row is optional and auto-detected. Rows that cannot be
    parsed or violate snapshot invariants are rejected with their line
    number; duplicates keep the first copy and report the rest.
    """
    path = Path(path)
    accepted: list[StationSnapshot] = []
    rejections: list[Rejection] = []
    positions: list[int] = []  # line number per accepted snapshot
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if lineno == 1 and _looks_like_header(row):
                continue
            where = f"line {lineno}"
            try:
                snap = _snapshot_from_row(row)
            except ValueError as exc:
                rejections.append(Rejection(where, str(exc)))
                continue
            problems = snapshot_problems(snap)
            if problems:
                rejections.append(Rejection(where, "; ".join(problems)))
                continue
            accepted.append(snap)
            positions.append(lineno)

    seen: dict[tuple[int, datetime], StationSnapshot] = {}
    for snap, lineno in zip(accepted, positions):
        if snap.key in seen:
            rejections.append(Rejection(f"line {lineno}", f"duplicate key {snap.key}"))
        else:
            seen[snap.key] = snap
    rows = tuple(sorted(seen.values(), key=lambda s: s.key))
    return SnapshotArchive(rows, source=str(path)), rejections


def station_directory(archive: SnapshotArchive) -> dict[int, StationSnapshot]:
    """Latest snapshot per station, handy for names and coordinates."""
    directory: dict[int, StationSnapshot] = {}
    for snap in archive.rows:  # rows sorted, so later rows win
        directory[snap.station_id] = snap
    return directory


class ArchiveWriter:
    """Append-only CSV sink that de-duplicates on (station_id, observed_at).

    A single writer owns the file; appends from multiple poll cycles are
    fine, concurrent writers are not.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._keys: set[tuple[int, datetime]] = set()
        if self.path.exists() and self.path.stat().st_size > 0:
            existing, _ = read_archive(self.path)
            self._keys = {s.key for s in existing.rows}
            self._handle = self.path.open("a", encoding="utf-8", newline="")
        else:
            self._handle = self.path.open("w", encoding="utf-8", newline="")
            csv.writer(self._handle, lineterminator="\n").writerow(ARCHIVE_COLUMNS)
            self._handle.flush()
        self._csv = csv.writer(self._handle, lineterminator="\n")

    @property
    def row_count(self) -> int:
        return len(self._keys)

    def append(self, snapshots: Iterable[StationSnapshot]) -> tuple[int, int]:
        """Append new snapshots; returns (accepted, duplicates)."""
        accepted = duplicates = 0
        for snap in snapshots:
            if snap.key in self._keys:
                duplicates += 1
                continue
            self._csv.writerow(_snapshot_to_row(snap))
            self._keys.add(snap.key)
            accepted += 1
        self._handle.flush()
        return accepted, duplicates

    def close(self):
        self._handle.close()

    def __enter__(self) -> "ArchiveWriter":
        return self

    def __exit__(self, *exc):
        self.close()


def _default_fetch(endpoint: str, api_key: str, contract: str | None) -> str:
    params = {"apiKey": api_key}
    if contract:
        params["contract"] = contract
    resp = requests.get(endpoint, params=params, timeout=30)
    if resp.status_code in (401, 403):
        raise FeedAuthError(f"feed rejected the API key (HTTP {resp.status_code})")
    resp.raise_for_status()
    return resp.text


def poll_feed(
    endpoint: str,
    api_key: str,
    interval: timedelta,
    sink: ArchiveWriter,
    *,
    contract: str | None = None,
    cycles: int | None = None,
    max_consecutive_failures: int = 10,
    backoff_cap: float = 300.0,
    fetch: Callable[[str, str, str | None], str] | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> dict[str, int]:
    """Poll the feed forever (or for `cycles` polls), appending to `sink`.

    Each cycle fetches the station list, parses it, appends de-duplicated
    snapshots and logs accepted/duplicate/rejected counts. Transient
    failures are retried with capped exponential backoff; after
    `max_consecutive_failures` consecutive failures the poller gives up.
    Authentication failures are fatal immediately.
    """
    if interval < timedelta(minutes=1):
        raise ValueError(f"poll interval must be at least 1 minute, got {interval}")
    fetch = fetch or _default_fetch
    totals = {"accepted": 0, "duplicates": 0, "rejected": 0, "cycles": 0, "failures": 0}
    consecutive_failures = 0
    while cycles is None or totals["cycles"] < cycles:
        totals["cycles"] += 1
        try:
            raw = fetch(endpoint, api_key, contract)
            snapshots, rejections = parse_feed_document(raw)
        except FeedAuthError:
            raise
        except (FeedParseError, requests.RequestException, ConnectionError, OSError) as exc:
            consecutive_failures += 1
            totals["failures"] += 1
            log.warning("poll failed (%d consecutive): %s", consecutive_failures, exc)
            if consecutive_failures >= max_consecutive_failures:
                raise FeedUnavailableError(
                    f"feed failed {consecutive_failures} consecutive cycles: {exc}"
                ) from exc
            sleep(min(backoff_cap, 2.0**consecutive_failures))
            continue
        consecutive_failures = 0
        accepted, duplicates = sink.append(snapshots)
        totals["accepted"] += accepted
        totals["duplicates"] += duplicates
        totals["rejected"] += len(rejections)
        log.info(
            "poll cycle %d: accepted=%d duplicates=%d rejected=%d",
            totals["cycles"], accepted, duplicates, len(rejections),
        )
        if cycles is None or totals["cycles"] < cycles:
            sleep(interval.total_seconds())
    return totals
