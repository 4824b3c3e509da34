"""Deterministic synthetic bike-share schemes with known ground truth.

Each station follows an archetype: a set of per-day-class template curves
(whole bikes per slot) plus seeded Gaussian noise, rounded and clamped to
capacity. Snapshots are emitted at exact slot times, so resampling a
generated archive reproduces the generated values slot for slot.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import date, datetime, time, timezone
from pathlib import Path

import numpy as np

from .config import parse_date_list, read_key_values
from .errors import ConfigError, ShapeMismatchError
from .grid import TimeGrid, date_range
from .ingest import SnapshotArchive, StationSnapshot, build_archive

COMMUTER_RAIL = "commuter_rail"
MIXED = "mixed_residential_business"


def template_from_anchors(
    anchors: list[tuple[str, float]], slots_per_day: int = 144
) -> tuple[float, ...]:
    """Piecewise-linear curve through (HH:MM, bikes) anchors, rounded to
    whole bikes at each slot. Times before the first or after the last
    anchor hold that anchor's value."""
    xs, ys = [], []
    for hhmm, value in anchors:
        h, _, m = hhmm.partition(":")
        minutes = int(h) * 60 + int(m)
        if xs and minutes <= xs[-1]:
            raise ValueError(f"anchor times must strictly increase, got {hhmm}")
        xs.append(minutes)
        ys.append(float(value))
    slot_minutes = np.arange(slots_per_day) * (24 * 60 / slots_per_day)
    return tuple(float(v) for v in np.rint(np.interp(slot_minutes, xs, ys)))


@dataclass(frozen=True)
class StationArchetype:
    """A named behaviour: template curves per day class plus noise.

    weekday_classes maps Monday..Sunday to template keys; holidays use
    holiday_class instead of their calendar entry.
    """

    name: str
    capacity: int
    template_by_day_type: dict[str, tuple[float, ...]]
    weekday_classes: tuple[str, str, str, str, str, str, str]
    holiday_class: str
    noise_amplitude: float = 0.0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be positive")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be non-negative")
        lengths = {len(t) for t in self.template_by_day_type.values()}
        if len(lengths) != 1:
            raise ValueError("all templates must share one length")
        for key, template in self.template_by_day_type.items():
            if any(not 0 <= v <= self.capacity for v in template):
                raise ValueError(f"template {key!r} leaves [0, capacity={self.capacity}]")
        for key in (*self.weekday_classes, self.holiday_class):
            if key not in self.template_by_day_type:
                raise ValueError(f"day class {key!r} has no template")

    @property
    def slots_per_day(self) -> int:
        return len(next(iter(self.template_by_day_type.values())))

    def day_class(self, day: date, holidays: frozenset[date] | set[date]) -> str:
        if day in holidays:
            return self.holiday_class
        return self.weekday_classes[day.weekday()]

    def distinct_templates(self) -> int:
        return len({tuple(t) for t in self.template_by_day_type.values()})


def builtin_archetypes(slots_per_day: int = 144) -> dict[str, StationArchetype]:
    """The two stock archetypes.

    commuter_rail: a terminus-side station. Weekdays start full, drain
    fast from 07:30, sit empty from 09:00 through the business day and
    refill from 17:30 back to full by evening; Saturday and Sunday share
    one flat curve. mixed_residential_business: busy all week with four
    distinct shapes. Monday-Wednesday and Thursday-Friday are identical
    until just after 17:00, then diverge: early-week evenings fill up
    while late-week evenings drain as people head out. Saturday peaks
    mid-morning then falls away; Sunday stays low until mid-morning,
    climbs to a late-morning bump and drifts gently upward to midnight.
    """
    commuter_weekday = template_from_anchors(
        [("00:00", 36), ("07:30", 36), ("09:00", 0), ("17:30", 0), ("19:30", 36), ("23:50", 36)],
        slots_per_day,
    )
    commuter_weekend = template_from_anchors([("00:00", 30), ("23:50", 30)], slots_per_day)
    commuter = StationArchetype(
        name=COMMUTER_RAIL,
        capacity=40,
        template_by_day_type={"weekday": commuter_weekday, "weekend": commuter_weekend},
        weekday_classes=("weekday",) * 5 + ("weekend", "weekend"),
        holiday_class="weekend",
        noise_amplitude=2.0,
    )

    weekday_head = [("00:00", 20), ("07:00", 20), ("09:30", 30), ("12:00", 25), ("17:10", 25)]
    early_week = template_from_anchors(
        weekday_head + [("19:00", 33), ("23:50", 33)], slots_per_day
    )
    late_week = template_from_anchors(
        weekday_head + [("19:00", 10), ("22:00", 5), ("23:50", 5)], slots_per_day
    )
    saturday = template_from_anchors(
        [("00:00", 18), ("09:30", 34), ("15:00", 16), ("23:50", 10)], slots_per_day
    )
    sunday = template_from_anchors(
        [("00:00", 8), ("09:30", 8), ("11:30", 20), ("13:00", 17), ("23:50", 26)], slots_per_day
    )
    mixed = StationArchetype(
        name=MIXED,
        capacity=40,
        template_by_day_type={
            "early-week": early_week,
            "late-week": late_week,
            "saturday": saturday,
            "sunday": sunday,
        },
        weekday_classes=("early-week",) * 3 + ("late-week",) * 2 + ("saturday", "sunday"),
        holiday_class="sunday",
        noise_amplitude=2.0,
    )
    return {COMMUTER_RAIL: commuter, MIXED: mixed}


@dataclass(frozen=True)
class ScenarioStation:
    station_id: int
    archetype: StationArchetype
    latitude: float
    longitude: float
    name: str = ""

    @property
    def display_name(self) -> str:
        return self.name or f"{self.archetype.name} {self.station_id}"


@dataclass(frozen=True)
class SyntheticScenario:
    stations: tuple[ScenarioStation, ...]
    start: date
    end: date
    holidays: frozenset[date] = frozenset()
    seed: int = 0

    def __post_init__(self):
        ids = [s.station_id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ValueError(f"station ids must be unique, got {ids}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.end < self.start:
            raise ValueError("scenario end precedes start")


def _day_values(
    station: ScenarioStation, day: date, holidays, seed: int
) -> np.ndarray:
    archetype = station.archetype
    template = np.asarray(
        archetype.template_by_day_type[archetype.day_class(day, holidays)], dtype=float
    )
    if archetype.noise_amplitude > 0:
        rng = np.random.default_rng([seed, station.station_id, day.toordinal()])
        template = template + rng.normal(0.0, archetype.noise_amplitude, template.shape)
    return np.clip(np.rint(template), 0, archetype.capacity).astype(int)


def generate_archive(scenario: SyntheticScenario, grid: TimeGrid) -> SnapshotArchive:
    """Emit snapshots at exact local slot times for every station-day.

    Noise is drawn per (seed, station, date), so output is independent of
    iteration order and stable across runs. On a DST spring-forward day
    the skipped wall-clock hour collapses onto duplicate instants, which
    are dropped.
    """
    slots = grid.slots_per_day
    for station in scenario.stations:
        if station.archetype.slots_per_day != slots:
            raise ShapeMismatchError(
                f"archetype {station.archetype.name!r} has "
                f"{station.archetype.slots_per_day} slots, grid expects {slots}"
            )
    tz = grid.tzinfo
    rows = []
    for station in scenario.stations:
        capacity = station.archetype.capacity
        for day in date_range(scenario.start, scenario.end):
            values = _day_values(station, day, scenario.holidays, scenario.seed)
            midnight = datetime.combine(day, time())
            for slot in range(slots):
                local = (midnight + slot * grid.step).replace(tzinfo=tz)
                bikes = int(values[slot])
                rows.append(
                    StationSnapshot(
                        station_id=station.station_id,
                        station_name=station.display_name,
                        latitude=station.latitude,
                        longitude=station.longitude,
                        total_stands=capacity,
                        available_stands=capacity - bikes,
                        available_bikes=bikes,
                        observed_at=local.astimezone(timezone.utc),
                    )
                )
    archive, _ = build_archive(rows, source=f"synthetic seed={scenario.seed}")
    return archive


def load_scenario(
    path: str | Path, archetypes: dict[str, StationArchetype] | None = None
) -> SyntheticScenario:
    """Read a scenario file.

    Keys: seed, start, end, holiday/holidays (dates, repeatable), noise
    (overrides every archetype's noise amplitude) and one station line per
    station: `station = <id> <archetype> <lat> <lon> [name...]`.
    """
    archetypes = archetypes if archetypes is not None else builtin_archetypes()
    seed = 0
    start = end = None
    noise: float | None = None
    holidays: set[date] = set()
    station_specs: list[tuple[int, str, float, float, str]] = []
    for key, value in read_key_values(path):
        try:
            if key == "seed":
                seed = int(value)
            elif key == "start":
                start = date.fromisoformat(value)
            elif key == "end":
                end = date.fromisoformat(value)
            elif key in ("holiday", "holidays"):
                holidays.update(parse_date_list(value))
            elif key == "noise":
                noise = float(value)
            elif key == "station":
                parts = value.split()
                if len(parts) < 4:
                    raise ValueError("station needs: id archetype lat lon [name]")
                station_specs.append(
                    (int(parts[0]), parts[1], float(parts[2]), float(parts[3]),
                     " ".join(parts[4:]))
                )
            else:
                raise ConfigError(f"{path}: unknown scenario key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {exc}") from exc
    if start is None or end is None:
        raise ConfigError(f"{path}: scenario needs both start and end dates")
    if not station_specs:
        raise ConfigError(f"{path}: scenario defines no stations")
    stations = []
    for station_id, arch_name, lat, lon, name in station_specs:
        if arch_name not in archetypes:
            raise ConfigError(
                f"{path}: unknown archetype {arch_name!r} "
                f"(available: {', '.join(sorted(archetypes))})"
            )
        archetype = archetypes[arch_name]
        if noise is not None:
            archetype = replace(archetype, noise_amplitude=noise)
        stations.append(ScenarioStation(station_id, archetype, lat, lon, name))
    return SyntheticScenario(
        stations=tuple(stations),
        start=start,
        end=end,
        holidays=frozenset(holidays),
        seed=seed,
    )
