"""Daily check-in/check-out inference from availability deltas.

A positive slot-to-slot delta counts as check-ins (bikes dropped), a
negative one as check-outs (bikes taken). Deltas across a missing run are
taken between the values bracketing the run, which preserves the
conservation identity check_ins - check_outs = net availability change.

Caveats inherent to the data: rebalancing-truck moves are
indistinguishable from user trips, and opposing moves inside one slot
cancel, so both counts are lower bounds on true churn.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date
from itertools import pairwise
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyResultError, InsufficientDataError
from .grid import DayProfile

FLOW_COLUMNS = ("station_id", "date", "check_ins", "check_outs", "traffic_level")


@dataclass(frozen=True)
class FlowSummary:
    """Inferred daily flows for one station-day."""

    station_id: int
    date: date
    check_ins: int
    check_outs: int

    def __post_init__(self):
        if self.check_ins < 0 or self.check_outs < 0:
            raise ValueError("flow counts must be non-negative")

    @property
    def traffic_level(self) -> int:
        return self.check_ins + self.check_outs


def infer_flows(profile: DayProfile) -> FlowSummary:
    """Infer check-ins and check-outs from one day profile.

    Requires at least two non-missing slots.
    """
    values = profile.non_missing()
    if len(values) < 2:
        raise InsufficientDataError(
            f"station {profile.station_id} on {profile.date}: "
            f"{len(values)} non-missing slots, need at least 2"
        )
    check_ins = check_outs = 0
    for a, b in pairwise(values):
        delta = b - a
        if delta > 0:
            check_ins += delta
        else:
            check_outs -= delta
    return FlowSummary(profile.station_id, profile.date, check_ins, check_outs)


def daily_traffic_table(
    profiles: Iterable[DayProfile],
) -> tuple[list[FlowSummary], list[tuple[int, date, str]]]:
    """One FlowSummary per eligible profile, plus a skipped list.

    Skipped entries are (station_id, date, reason) for profiles with fewer
    than two non-missing slots.
    """
    table = []
    skipped = []
    for profile in profiles:
        try:
            table.append(infer_flows(profile))
        except InsufficientDataError as exc:
            skipped.append((profile.station_id, profile.date, str(exc)))
    return table, skipped


def rank_stations(table: Sequence[FlowSummary], day: date) -> list[FlowSummary]:
    """Stations for one date, busiest first; ties go to the lower id."""
    entries = [f for f in table if f.date == day]
    if not entries:
        raise EmptyResultError(f"no traffic entries for {day}")
    return sorted(entries, key=lambda f: (-f.traffic_level, f.station_id))


def write_flows_csv(table: Iterable[FlowSummary], path: str | Path) -> int:
    count = 0
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(FLOW_COLUMNS)
        for flow in table:
            writer.writerow(
                [flow.station_id, flow.date.isoformat(), flow.check_ins,
                 flow.check_outs, flow.traffic_level]
            )
            count += 1
    return count


def read_flows_csv(path: str | Path) -> list[FlowSummary]:
    flows = []
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is not None and tuple(header) != FLOW_COLUMNS:
            raise ValueError(f"unexpected flows CSV header: {header}")
        for row in reader:
            if not row:
                continue
            flow = FlowSummary(int(row[0]), date.fromisoformat(row[1]), int(row[2]), int(row[3]))
            if flow.traffic_level != int(row[4]):
                raise ValueError(
                    f"row {row}: traffic_level does not equal check_ins + check_outs"
                )
            flows.append(flow)
    return flows
