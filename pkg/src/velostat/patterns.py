"""Interpretation of cluster models against the calendar.

Clusters get cross-tabulated by day of week, labeled with their dominant
day type (public holidays count as Sunday-like), and used to judge
whether fresh days still land in the cluster their day type predicts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from .cluster import ClusterModel, predict
from .errors import EmptyResultError, ShapeMismatchError
from .grid import DayProfile

WEEKDAY = "weekday"
SATURDAY = "saturday"
SUNDAY_LIKE = "sunday-like"
WEEKEND = "weekend"

WEEKDAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")

CROSSTAB_COLUMNS = ("cluster",) + tuple(n.lower() for n in WEEKDAY_NAMES)
REPORT_COLUMNS = (
    "station_id", "date", "assigned_cluster", "distance", "expected_clusters", "match",
)


def effective_day_type(day: date, holidays: Iterable[date] = ()) -> str:
    """weekday / saturday / sunday-like, with holidays mapped to sunday-like."""
    if day in set(holidays):
        return SUNDAY_LIKE
    wd = day.weekday()
    if wd == 5:
        return SATURDAY
    if wd == 6:
        return SUNDAY_LIKE
    return WEEKDAY


@dataclass(frozen=True)
class WeekdayCrossTab:
    """Cluster-by-weekday membership counts.

    counts[c][w] is the number of member days of cluster c falling on
    weekday w (Monday = 0). holiday_notes lists (date, cluster, weekday)
    for member days on the configured holiday list.
    """

    counts: tuple[tuple[int, ...], ...]
    holiday_notes: tuple[tuple[date, int, int], ...] = ()

    def __post_init__(self):
        for row in self.counts:
            if len(row) != 7:
                raise ValueError("each cross-tab row needs 7 weekday columns")
            if any(c < 0 for c in row):
                raise ValueError("cross-tab counts must be non-negative")

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


def crosstab(
    model: ClusterModel, dates: Sequence[date], holidays: Iterable[date] = ()
) -> WeekdayCrossTab:
    """Cross-tabulate model assignments by day of week.

    `dates` must align one-to-one with model.assignments.
    """
    if len(dates) != len(model.assignments):
        raise ShapeMismatchError(
            f"{len(dates)} dates for {len(model.assignments)} assignments"
        )
    holiday_set = set(holidays)
    counts = [[0] * 7 for _ in range(model.k)]
    notes = []
    for day, cluster in zip(dates, model.assignments):
        counts[cluster][day.weekday()] += 1
        if day in holiday_set:
            notes.append((day, cluster, day.weekday()))
    return WeekdayCrossTab(
        tuple(tuple(row) for row in counts),
        tuple(sorted(notes)),
    )


@dataclass(frozen=True)
class DayTypeMap:
    """Dominant day-type label per cluster, derived from a cross-tab.

    With collapse_weekend=True, Saturday and Sunday-like merge into a
    single weekend label (both in the cluster labels and when classifying
    new days against them).
    """

    labels: tuple[str, ...]
    collapse_weekend: bool = False

    def label_for_day(self, day: date, holidays: Iterable[date] = ()) -> str:
        label = effective_day_type(day, holidays)
        if self.collapse_weekend and label in (SATURDAY, SUNDAY_LIKE):
            return WEEKEND
        return label

    def expected_clusters(self, day: date, holidays: Iterable[date] = ()) -> tuple[int, ...]:
        """All clusters whose label matches the day's effective type."""
        want = self.label_for_day(day, holidays)
        return tuple(c for c, label in enumerate(self.labels) if label == want)


def derive_day_type_map(tab: WeekdayCrossTab, collapse_weekend: bool = False) -> DayTypeMap:
    """Label each cluster by the majority effective day type of its members.

    Member days listed in tab.holiday_notes count as Sunday-like instead
    of their calendar column. Ties resolve toward weekday, then Saturday.
    """
    if tab.total == 0:
        raise EmptyResultError("cannot derive day types from an empty cross-tab")
    moved = [[0] * 3 for _ in range(tab.k)]  # holiday days leaving weekday/sat/sun buckets
    for _, cluster, weekday in tab.holiday_notes:
        moved[cluster][0 if weekday < 5 else 1 if weekday == 5 else 2] += 1
    labels = []
    for c, row in enumerate(tab.counts):
        weekday_n = sum(row[:5]) - moved[c][0]
        saturday_n = row[5] - moved[c][1]
        sunday_n = row[6] - moved[c][2] + sum(moved[c])
        if collapse_weekend:
            tallies = [(WEEKDAY, weekday_n), (WEEKEND, saturday_n + sunday_n)]
        else:
            tallies = [(WEEKDAY, weekday_n), (SATURDAY, saturday_n), (SUNDAY_LIKE, sunday_n)]
        best_label, best_n = tallies[0]
        for label, n in tallies[1:]:
            if n > best_n:
                best_label, best_n = label, n
        labels.append(best_label)
    return DayTypeMap(tuple(labels), collapse_weekend)


@dataclass(frozen=True)
class ConsistencyRow:
    station_id: int
    date: date
    assigned: int
    distance: float
    expected: tuple[int, ...]
    match: bool


@dataclass(frozen=True)
class ConsistencyReport:
    rows: tuple[ConsistencyRow, ...]

    def __post_init__(self):
        if not self.rows:
            raise ValueError("a consistency report needs at least one row")

    @property
    def match_rate(self) -> float:
        return sum(r.match for r in self.rows) / len(self.rows)


def consistency_check(
    profiles: Sequence[DayProfile],
    model: ClusterModel,
    day_type_map: DayTypeMap,
    holidays: Iterable[date] = (),
) -> ConsistencyReport:
    """Assign new days to the model and compare against their day type.

    A day matches when its assigned cluster is any cluster sharing the
    day's effective day-type label.
    """
    if not profiles:
        raise EmptyResultError("no profiles to check")
    holiday_set = set(holidays)
    rows = []
    for profile in profiles:
        assigned, distance = predict(profile, model)
        expected = day_type_map.expected_clusters(profile.date, holiday_set)
        rows.append(
            ConsistencyRow(
                station_id=profile.station_id,
                date=profile.date,
                assigned=assigned,
                distance=distance,
                expected=expected,
                match=assigned in expected,
            )
        )
    return ConsistencyReport(tuple(rows))


def write_crosstab_csv(tab: WeekdayCrossTab, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CROSSTAB_COLUMNS)
        for c, row in enumerate(tab.counts):
            writer.writerow([c, *row])


def format_crosstab_text(tab: WeekdayCrossTab) -> str:
    """Aligned text table, one row per cluster; zero cells print blank."""
    name_width = max(len("Cluster"), len(f"Cluster {tab.k - 1}") if tab.k else 0)
    header = "Cluster".ljust(name_width) + "".join(f"{n:>5}" for n in WEEKDAY_NAMES)
    lines = [header]
    for c, row in enumerate(tab.counts):
        cells = "".join(f"{n if n else '':>5}" for n in row)
        lines.append(f"Cluster {c}".ljust(name_width) + cells)
    for day, cluster, weekday in tab.holiday_notes:
        lines.append(f"holiday: {day.isoformat()} ({WEEKDAY_NAMES[weekday]}) in cluster {cluster}")
    return "\n".join(lines) + "\n"


def write_report_csv(report: ConsistencyReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in report.rows:
            writer.writerow(
                [
                    r.station_id,
                    r.date.isoformat(),
                    r.assigned,
                    repr(r.distance),
                    ";".join(str(c) for c in r.expected),
                    "true" if r.match else "false",
                ]
            )


def format_report_text(report: ConsistencyReport) -> str:
    lines = []
    for r in report.rows:
        expected = ",".join(str(c) for c in r.expected) or "-"
        verdict = "ok" if r.match else "MISMATCH"
        lines.append(
            f"{r.date.isoformat()}  station {r.station_id}  "
            f"assigned {r.assigned} (expected {expected})  "
            f"distance {r.distance:.3f}  {verdict}"
        )
    lines.append(f"match rate: {report.match_rate:.4f} ({len(report.rows)} days)")
    return "\n".join(lines) + "\n"
