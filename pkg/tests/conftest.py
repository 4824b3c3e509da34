from datetime import date, datetime, timedelta, timezone

import pytest

from velostat.grid import DIRECT, IMPUTED, MISSING, DayProfile, TimeGrid
from velostat.ingest import SnapshotArchive, StationSnapshot, build_archive

UTC = timezone.utc


def snap(
    station_id=1,
    name="Test Station",
    lat=53.349,
    lon=-6.260,
    total=20,
    stands=None,
    bikes=5,
    at=datetime(2016, 9, 13, 7, 50, tzinfo=UTC),
) -> StationSnapshot:
    if stands is None:
        stands = total - bikes
    return StationSnapshot(
        station_id=station_id,
        station_name=name,
        latitude=lat,
        longitude=lon,
        total_stands=total,
        available_stands=stands,
        available_bikes=bikes,
        observed_at=at,
    )


def archive_of(*snapshots, source="test") -> SnapshotArchive:
    archive, duplicates = build_archive(snapshots, source=source)
    assert not duplicates
    return archive


def profile_of(values, flags=None, station_id=1, day=date(2016, 9, 12)) -> DayProfile:
    if flags is None:
        flags = [DIRECT] * len(values)
    values = [0 if f == MISSING else v for v, f in zip(values, flags)]
    return DayProfile(station_id, day, tuple(values), tuple(flags))


def slot_time(day: date, slot: int, grid: TimeGrid) -> datetime:
    midnight = datetime.combine(day, datetime.min.time())
    return (midnight + slot * grid.step).replace(tzinfo=grid.tzinfo).astimezone(UTC)


def on_grid_archive(values_by_day, station_id=1, grid=None, capacity=40) -> SnapshotArchive:
    """Archive with one snapshot exactly on every slot of every given day."""
    grid = grid or TimeGrid()
    rows = []
    for day, values in values_by_day.items():
        assert len(values) == grid.slots_per_day
        for slot, v in enumerate(values):
            rows.append(
                snap(
                    station_id=station_id,
                    total=capacity,
                    stands=capacity - v,
                    bikes=v,
                    at=slot_time(day, slot, grid),
                )
            )
    return archive_of(*rows)


@pytest.fixture
def grid() -> TimeGrid:
    return TimeGrid()


@pytest.fixture
def coarse_grid() -> TimeGrid:
    # 2-hour steps: 12 slots per day, cheap for property tests
    return TimeGrid(step=timedelta(hours=2))


__all__ = [
    "DIRECT",
    "IMPUTED",
    "MISSING",
    "archive_of",
    "on_grid_archive",
    "profile_of",
    "slot_time",
    "snap",
]
