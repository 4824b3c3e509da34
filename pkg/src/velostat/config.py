"""Plain key-value configuration files.

Format: one `key = value` pair per line, `#` starts a comment, blank
lines ignored. Keys may repeat where documented (holidays, stations).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path

from .errors import ConfigError

PIPELINE_KEYS = ("zone", "step_minutes", "max_gap", "min_completeness", "holiday", "holidays")


@dataclass(frozen=True)
class PipelineConfig:
    """Shared analysis settings: grid, imputation and holiday calendar."""

    zone: str = "Europe/Dublin"
    step_minutes: int = 10
    max_gap: int = 6
    min_completeness: float = 0.8
    holidays: frozenset[date] = frozenset()


def read_key_values(path: str | Path) -> list[tuple[str, str]]:
    """All (key, value) pairs from a config file, in file order."""
    pairs = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        pairs.append((key.strip(), value.strip()))
    return pairs


def parse_date_list(value: str) -> list[date]:
    try:
        return [date.fromisoformat(part.strip()) for part in value.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad date list {value!r}: {exc}") from exc


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    config = PipelineConfig()
    holidays: set[date] = set()
    for key, value in read_key_values(path):
        try:
            if key == "zone":
                config = replace(config, zone=value)
            elif key == "step_minutes":
                config = replace(config, step_minutes=int(value))
            elif key == "max_gap":
                config = replace(config, max_gap=int(value))
            elif key == "min_completeness":
                config = replace(config, min_completeness=float(value))
            elif key in ("holiday", "holidays"):
                holidays.update(parse_date_list(value))
            else:
                raise ConfigError(f"{path}: unknown configuration key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {exc}") from exc
    return replace(config, holidays=frozenset(holidays))
