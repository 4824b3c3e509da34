#!/usr/bin/env python3
"""Inertia sweep over k for one station's day profiles.

Prints k, best inertia and the relative drop from the previous k; the
elbow (largest drop) hints at how many day patterns the station has.
Reads either a profiles CSV produced by `velostat resample` or, with
--scenario, generates profiles for the named station on the fly.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from velostat.cluster import KmeansConfig, inertia_sweep
from velostat.grid import TimeGrid, profiles_for_range, read_profiles_csv
from velostat.synth import generate_archive, load_scenario

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--profiles", help="profiles CSV from `velostat resample`")
    parser.add_argument("--scenario", help="scenario file to synthesize instead")
    parser.add_argument("--station", type=int, help="station id (scenario mode)")
    parser.add_argument("--k-max", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--restarts", type=int, default=10)
    args = parser.parse_args()

    if args.profiles:
        profiles = read_profiles_csv(args.profiles)
    elif args.scenario:
        scenario = load_scenario(args.scenario)
        station = args.station or scenario.stations[0].station_id
        grid = TimeGrid()
        archive = generate_archive(scenario, grid)
        profiles, _ = profiles_for_range(
            archive, station, scenario.start, scenario.end, grid
        )
    else:
        parser.error("need --profiles or --scenario")

    k_max = min(args.k_max, len(profiles))
    config = KmeansConfig(k=1, seed=args.seed, restarts=args.restarts)
    results = inertia_sweep(profiles, range(1, k_max + 1), config)

    print(f"{len(profiles)} profiles, k = 1..{k_max}")
    print(f"{'k':>3} {'inertia':>14} {'drop':>8}")
    previous = None
    for k, inertia in results:
        drop = "" if previous in (None, 0.0) else f"{(previous - inertia) / previous:7.1%}"
        print(f"{k:>3} {inertia:>14.2f} {drop:>8}")
        previous = inertia
    return 0


if __name__ == "__main__":
    sys.exit(main())
