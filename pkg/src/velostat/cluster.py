"""K-means over day-profile vectors: k-means++ seeding plus Lloyd's
iterations, written out in full so every step stays inspectable.

fit() accepts either DayProfile sequences (the usual case) or plain
(n, d) arrays of vectors, which keeps the engine reusable for small
numeric instances in tests and sweeps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InfeasibleError, InsufficientDataError, ShapeMismatchError
from .grid import MISSING, DayProfile

PROFILE_MEAN = "profile-mean"
DROP_SLOT = "drop-slot"

MODEL_HEADER = "velostat-kmeans-model v1"


class DegenerateModelWarning(UserWarning):
    """Raised when a fitted model contains duplicate centroids."""


@dataclass(frozen=True)
class KmeansConfig:
    k: int
    seed: int = 0
    restarts: int = 10
    max_iterations: int = 300
    tolerance: float = 1e-6  # max centroid displacement, in bike-count units
    missing_mode: str = PROFILE_MEAN
    normalize: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.missing_mode not in (PROFILE_MEAN, DROP_SLOT):
            raise ValueError(f"unknown missing_mode {self.missing_mode!r}")


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """Result of fit(): centroids, assignments and bookkeeping.

    centroids has shape (k, d) where d is the full vector length; in
    drop-slot mode the globally masked slots hold NaN and slot_mask marks
    the active ones. histories carries the per-iteration inertia of every
    restart (diagnostics only; not serialized).
    """

    k: int
    centroids: np.ndarray
    assignments: tuple[int, ...]
    inertia: float
    iterations: int
    seed: int
    restarts_used: int
    config: KmeansConfig
    slot_mask: np.ndarray | None = None
    histories: tuple[tuple[float, ...], ...] = ()

    @property
    def n_slots(self) -> int:
        return self.centroids.shape[1]

    def members(self, cluster: int) -> list[int]:
        return [i for i, c in enumerate(self.assignments) if c == cluster]


def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seed k centroids, each drawn with probability proportional to its
    squared distance from the nearest already-chosen centroid."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=float)
    centroids[0] = X[int(rng.integers(n))]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))  # all points coincide with chosen centroids
        centroids[j] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _repair_empty_clusters(
    labels: np.ndarray, point_d2: np.ndarray, k: int
) -> np.ndarray:
    """Give each empty cluster the point farthest from its own centroid.

    Donors are restricted to clusters that keep at least one member, so a
    repair never empties another cluster. Ties go to the lowest point
    index. With n >= k a donor always exists.
    """
    counts = np.bincount(labels, minlength=k)
    for c in range(k):
        if counts[c] > 0:
            continue
        donors = np.flatnonzero(counts[labels] >= 2)
        far = int(donors[np.argmax(point_d2[donors])])
        counts[labels[far]] -= 1
        labels[far] = c
        counts[c] = 1
        point_d2[far] = 0.0
    return labels


def _lloyd_once(
    X: np.ndarray, k: int, rng: np.random.Generator, max_iterations: int, tolerance: float
) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    centroids = _kmeanspp_init(X, k, rng)
    history: list[float] = []
    labels = np.zeros(len(X), dtype=int)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        d2 = _squared_distances(X, centroids)
        labels = d2.argmin(axis=1)  # ties resolve to the lowest cluster index
        point_d2 = d2[np.arange(len(X)), labels]
        history.append(float(point_d2.sum()))
        labels = _repair_empty_clusters(labels, point_d2, k)
        new_centroids = np.empty_like(centroids)
        for c in range(k):
            new_centroids[c] = X[labels == c].mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tolerance:
            break
    d2 = _squared_distances(X, centroids)
    inertia = float(d2[np.arange(len(X)), labels].sum())
    history.append(inertia)
    return centroids, labels, inertia, iterations, history


def _profile_matrix(
    profiles: Sequence[DayProfile], mode: str
) -> tuple[np.ndarray, np.ndarray | None]:
    lengths = {p.slots_per_day for p in profiles}
    if len(lengths) > 1:
        raise ShapeMismatchError(f"profiles disagree on slots per day: {sorted(lengths)}")
    X = np.array([p.values for p in profiles], dtype=float)
    missing = np.array([[f == MISSING for f in p.flags] for p in profiles], dtype=bool)
    if not missing.any():
        return X, None
    if mode == PROFILE_MEAN:
        for i in range(len(X)):
            if missing[i].any():
                observed = X[i, ~missing[i]]
                if observed.size == 0:
                    p = profiles[i]
                    raise InsufficientDataError(
                        f"station {p.station_id} on {p.date} has no non-missing slots"
                    )
                X[i, missing[i]] = observed.mean()
        return X, None
    active = ~missing.any(axis=0)
    if not active.any():
        raise InsufficientDataError("every slot is missing in at least one profile")
    return X, active


def _as_matrix(
    data, config: KmeansConfig, capacities
) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(data, np.ndarray):
        X, slot_mask = np.array(data, dtype=float), None
        if X.ndim != 2:
            raise ShapeMismatchError(f"expected a 2-D array of vectors, got shape {X.shape}")
        if config.normalize:
            if not isinstance(capacities, (int, float)):
                raise ValueError("normalize=True with raw vectors needs a scalar capacity")
            X /= float(capacities)
        return X, slot_mask
    data = list(data)
    if data and isinstance(data[0], DayProfile):
        X, slot_mask = _profile_matrix(data, config.missing_mode)
        if config.normalize:
            X = np.array(
                [row / _capacity_for(p.station_id, capacities) for row, p in zip(X, data)]
            )
        return X, slot_mask
    X = np.array(data, dtype=float)
    if X.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D array of vectors, got shape {X.shape}")
    return X, None


def _capacity_for(station_id: int, capacities) -> float:
    if isinstance(capacities, (int, float)):
        return float(capacities)
    if isinstance(capacities, Mapping) and station_id in capacities:
        return float(capacities[station_id])
    raise ValueError(f"normalize=True but no capacity given for station {station_id}")


def fit(data, config: KmeansConfig, capacities=None) -> ClusterModel:
    """Fit k-means: `restarts` independent Lloyd's runs, keep the best.

    `data` is a sequence of DayProfile or an (n, d) array of vectors.
    Each restart seeds k-means++ from (config.seed, restart index), so the
    whole fit is deterministic. The winner is the run with the lowest
    inertia; ties go to the lowest restart index.
    """
    X, slot_mask = _as_matrix(data, config, capacities)
    n = len(X)
    if n < config.k:
        raise InfeasibleError(f"need at least k={config.k} profiles, got {n}")
    X_active = X if slot_mask is None else X[:, slot_mask]

    best = None
    histories = []
    for r in range(config.restarts):
        rng = np.random.default_rng([config.seed, r])
        run = _lloyd_once(X_active, config.k, rng, config.max_iterations, config.tolerance)
        histories.append(tuple(run[4]))
        if best is None or run[2] < best[2]:
            best = run
    centroids, labels, inertia, iterations, _ = best

    if slot_mask is not None:
        full = np.full((config.k, X.shape[1]), np.nan)
        full[:, slot_mask] = centroids
        centroids = full
    model = ClusterModel(
        k=config.k,
        centroids=centroids,
        assignments=tuple(int(c) for c in labels),
        inertia=inertia,
        iterations=iterations,
        seed=config.seed,
        restarts_used=config.restarts,
        config=config,
        slot_mask=slot_mask,
        histories=tuple(histories),
    )
    for a in range(config.k):
        for b in range(a + 1, config.k):
            if np.array_equal(centroids[a], centroids[b], equal_nan=True):
                warnings.warn(
                    f"clusters {a} and {b} share a centroid (degenerate data for k={config.k})",
                    DegenerateModelWarning,
                    stacklevel=2,
                )
                return model
    return model


def _query_vector(item, model: ClusterModel, capacity) -> np.ndarray:
    if isinstance(item, DayProfile):
        v = np.array(item.values, dtype=float)
        miss = np.array([f == MISSING for f in item.flags], dtype=bool)
        if miss.any():
            observed = v[~miss]
            if observed.size == 0:
                raise InsufficientDataError(
                    f"station {item.station_id} on {item.date} has no non-missing slots"
                )
            v[miss] = observed.mean()
        if model.config.normalize:
            v = v / _capacity_for(item.station_id, capacity)
        return v
    v = np.asarray(item, dtype=float)
    if model.config.normalize:
        if not isinstance(capacity, (int, float)):
            raise ValueError("normalized model needs a scalar capacity for raw vectors")
        v = v / float(capacity)
    return v


def predict(item, model: ClusterModel, capacity=None) -> tuple[int, float]:
    """Assign a profile (or raw vector) to its nearest centroid.

    Returns (cluster index, Euclidean distance); ties break toward the
    lowest cluster index.
    """
    v = _query_vector(item, model, capacity)
    if v.shape != (model.n_slots,):
        raise ShapeMismatchError(
            f"profile length {v.shape} does not match centroid length {model.n_slots}"
        )
    if model.slot_mask is not None:
        d2 = ((model.centroids[:, model.slot_mask] - v[model.slot_mask]) ** 2).sum(axis=1)
    else:
        d2 = ((model.centroids - v) ** 2).sum(axis=1)
    cluster = int(d2.argmin())
    return cluster, float(np.sqrt(d2[cluster]))


def inertia_sweep(data, ks: Iterable[int], base_config: KmeansConfig, capacities=None) -> list[tuple[int, float]]:
    """Best inertia per k, refitting with the same seed discipline.

    Inertia is non-increasing in k up to restart stochasticity; that trend
    is expected, not guaranteed, so nothing here asserts it.
    """
    results = []
    for k in ks:
        model = fit(data, replace(base_config, k=k), capacities)
        results.append((k, model.inertia))
    return results


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_model(model: ClusterModel) -> str:
    """Serialize a model as versioned plain text; round-trips exactly."""
    cfg = model.config
    lines = [
        MODEL_HEADER,
        f"k: {model.k}",
        f"seed: {model.seed}",
        f"restarts: {cfg.restarts}",
        f"max_iterations: {cfg.max_iterations}",
        f"tolerance: {_fmt(cfg.tolerance)}",
        f"missing_mode: {cfg.missing_mode}",
        f"normalize: {'true' if cfg.normalize else 'false'}",
        f"inertia: {_fmt(model.inertia)}",
        f"iterations: {model.iterations}",
        f"restarts_used: {model.restarts_used}",
    ]
    if model.slot_mask is not None:
        lines.append("slot_mask: " + "".join("1" if b else "0" for b in model.slot_mask))
    lines.append("assignments: " + " ".join(str(c) for c in model.assignments))
    for row in model.centroids:
        lines.append("centroid: " + " ".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def load_model(text: str) -> ClusterModel:
    """Parse a model produced by dump_model."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != MODEL_HEADER:
        raise ValueError(f"not a velostat model document (expected {MODEL_HEADER!r})")
    fields: dict[str, str] = {}
    centroid_rows = []
    for ln in lines[1:]:
        key, _, value = ln.partition(":")
        key, value = key.strip(), value.strip()
        if key == "centroid":
            centroid_rows.append([float(x) for x in value.split()])
        else:
            fields[key] = value
    try:
        config = KmeansConfig(
            k=int(fields["k"]),
            seed=int(fields["seed"]),
            restarts=int(fields["restarts"]),
            max_iterations=int(fields["max_iterations"]),
            tolerance=float(fields["tolerance"]),
            missing_mode=fields["missing_mode"],
            normalize=fields["normalize"] == "true",
        )
        assignments = tuple(int(c) for c in fields["assignments"].split())
        inertia = float(fields["inertia"])
        iterations = int(fields["iterations"])
        restarts_used = int(fields["restarts_used"])
    except KeyError as exc:
        raise ValueError(f"model document missing field {exc}") from exc
    centroids = np.array(centroid_rows, dtype=float)
    if centroids.shape[0] != config.k:
        raise ValueError(f"expected {config.k} centroid lines, got {centroids.shape[0]}")
    if any(c >= config.k or c < 0 for c in assignments):
        raise ValueError("assignment indices out of range")
    slot_mask = None
    if "slot_mask" in fields:
        slot_mask = np.array([ch == "1" for ch in fields["slot_mask"]], dtype=bool)
        if slot_mask.shape[0] != centroids.shape[1]:
            raise ValueError("slot_mask length does not match centroid length")
    return ClusterModel(
        k=config.k,
        centroids=centroids,
        assignments=assignments,
        inertia=inertia,
        iterations=iterations,
        seed=config.seed,
        restarts_used=restarts_used,
        config=config,
        slot_mask=slot_mask,
    )


def save_model(model: ClusterModel, path: str | Path) -> None:
    Path(path).write_text(dump_model(model), encoding="utf-8")


def load_model_file(path: str | Path) -> ClusterModel:
    return load_model(Path(path).read_text(encoding="utf-8"))
