"""Traffic map export: one GeoJSON FeatureCollection per date.

Circle radii scale with the square root of traffic so circle area tracks
traffic level; the busiest station gets R_MAX pixels, and an all-zero
day degenerates to R_MIN everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from html import escape
from typing import Mapping, Sequence

from .errors import UnknownStationError
from .flows import FlowSummary
from .ingest import StationSnapshot

R_MIN = 3.0
R_MAX = 30.0


def radius_px(traffic_level: int, max_traffic: int) -> float:
    if max_traffic <= 0:
        return R_MIN
    return R_MIN + (R_MAX - R_MIN) * math.sqrt(traffic_level / max_traffic)


@dataclass(frozen=True)
class MapFeature:
    station_id: int
    name: str
    latitude: float
    longitude: float
    traffic_level: int
    radius_px: float


def map_features(
    flows: Sequence[FlowSummary], directory: Mapping[int, StationSnapshot]
) -> list[MapFeature]:
    """Build one feature per flow row, ordered by station id.

    `directory` supplies coordinates and names (latest snapshot per
    station works); stations missing from it abort the export.
    """
    unknown = sorted({f.station_id for f in flows} - set(directory))
    if unknown:
        raise UnknownStationError(
            "no coordinates for station(s): " + ", ".join(str(s) for s in unknown)
        )
    max_traffic = max((f.traffic_level for f in flows), default=0)
    features = []
    for flow in sorted(flows, key=lambda f: f.station_id):
        info = directory[flow.station_id]
        features.append(
            MapFeature(
                station_id=flow.station_id,
                name=info.station_name,
                latitude=info.latitude,
                longitude=info.longitude,
                traffic_level=flow.traffic_level,
                radius_px=radius_px(flow.traffic_level, max_traffic),
            )
        )
    return features


def export_map(
    flows: Sequence[FlowSummary], directory: Mapping[int, StationSnapshot]
) -> dict:
    """GeoJSON FeatureCollection of station points for one date's flows."""
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [f.longitude, f.latitude],
                },
                "properties": {
                    "station_id": f.station_id,
                    "name": f.name,
                    "traffic_level": f.traffic_level,
                    "radius_px": f.radius_px,
                },
            }
            for f in map_features(flows, directory)
        ],
    }


def dump_geojson(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def render_static_html(doc: dict, title: str = "Station traffic") -> str:
    """Self-contained SVG page for eyeballing a traffic map; no tiles, no
    scripts, nothing fetched at view time."""
    features = doc.get("features", [])
    width, height, pad = 800, 600, 40.0
    if features:
        lons = [f["geometry"]["coordinates"][0] for f in features]
        lats = [f["geometry"]["coordinates"][1] for f in features]
        lon0, lon1 = min(lons), max(lons)
        lat0, lat1 = min(lats), max(lats)
        lon_span = (lon1 - lon0) or 1e-6
        lat_span = (lat1 - lat0) or 1e-6
    circles = []
    for f in features:
        lon, lat = f["geometry"]["coordinates"]
        x = pad + (lon - lon0) / lon_span * (width - 2 * pad)
        y = pad + (lat1 - lat) / lat_span * (height - 2 * pad)
        props = f["properties"]
        label = escape(f"{props['name']} (traffic {props['traffic_level']})")
        circles.append(
            f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{props["radius_px"]:.1f}" '
            f'fill="orange" fill-opacity="0.6" stroke="darkorange">'
            f"<title>{label}</title></circle>"
        )
    body = "\n".join(circles) if circles else "<!-- no stations -->"
    return f"""<!doctype html>
<html><head><meta charset="utf-8"><title>{escape(title)}</title></head>
<body>
<h1>{escape(title)}</h1>
<svg width="{width}" height="{height}" style="background:#f4f1ea;border:1px solid #ccc">
{body}
</svg>
</body></html>
"""
