"""Active feature selection: cluster the feature dimensions with a batch SOM and
keep the cluster whose features give the best LOSO UAR.

Features are the points being clustered: column f of the z-scored ``m x n``
matrix is a point in m-dimensional instance space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import LabeledDataset, NormalizationStats
from .evaluation import EvalReport, evaluate_feature_subset, loso_folds
from .linsvm import SvmConfig

DEFAULT_N_GRID = tuple(range(5, 101, 5))


@dataclass(frozen=True)
class AfsConfig:
    """SOM and search settings.

    The neighborhood radius starts at half the map diagonal and decays
    linearly to 1 over the first ``decay_fraction`` of the iterations; the rest
    run at radius 1.
    """

    n_grid: tuple[int, ...] = DEFAULT_N_GRID
    som_iterations: int = 200
    decay_fraction: float = 0.75
    rng_seed: int = 0
    svm_config: SvmConfig = field(default_factory=SvmConfig)

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))
        if any(v < 1 for v in self.n_grid):
            raise ValueError("every cluster count N must be >= 1")
        if self.som_iterations < 1:
            raise ValueError("som_iterations must be >= 1")
        if not 0.0 < self.decay_fraction <= 1.0:
            raise ValueError("decay_fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        return d


def hex_grid(units: int) -> np.ndarray:
    """Coordinates of ``units`` cells on a near-square hexagonal lattice (row-major)."""
    rows = max(1, math.isqrt(units))
    cols = math.ceil(units / rows)
    r, c = np.divmod(np.arange(units), cols)
    return np.column_stack([c + 0.5 * (r % 2), r * (math.sqrt(3.0) / 2.0)]).astype(np.float64)


def radius_schedule(units: int, iterations: int, decay_fraction: float = 0.75) -> np.ndarray:
    pos = hex_grid(units)
    diag = float(np.max(np.linalg.norm(pos[:, None] - pos[None], axis=2))) if units > 1 else 0.0
    start = max(diag / 2.0, 1.0)
    decay = max(1, int(round(decay_fraction * iterations)))
    t = np.arange(iterations, dtype=np.float64)
    frac = np.minimum(t / max(decay - 1, 1), 1.0)
    return start + (1.0 - start) * frac


@dataclass(frozen=True)
class ClusterAssignment:
    n_clusters: int
    assignment: np.ndarray
    members: tuple[tuple[int, ...], ...]
    codebook: np.ndarray
    qe_trace: np.ndarray = field(repr=False)
    radius_trace: np.ndarray = field(repr=False)

    def nonempty(self) -> list[int]:
        return [u for u, mem in enumerate(self.members) if mem]


def _sq_dist(P: np.ndarray, W: np.ndarray) -> np.ndarray:
    d = (P * P).sum(axis=1)[:, None] + (W * W).sum(axis=1)[None, :] - 2.0 * (P @ W.T)
    return np.maximum(d, 0.0)


def train_som(points: np.ndarray, units: int, iterations: int = 200, seed: int = 0,
              decay_fraction: float = 0.75) -> ClusterAssignment:
    """Batch SOM over the rows of ``points``.

    Every iteration assigns each point to its best-matching unit, then moves
    each unit to the Gaussian-neighborhood-weighted mean of all points. The
    codebook starts from distinct points drawn with ``seed``.
    ``qe_trace[t]`` is the mean BMU distance seen at iteration ``t``; the last
    entry is measured on the final codebook.
    """
    P = np.asarray(points, dtype=np.float64)
    n = P.shape[0]
    if units < 1 or n < 1:
        raise ValueError("need at least one unit and one point")
    if units > n:
        warnings.warn(f"{units} SOM units for {n} features; clipped to {n}", stacklevel=2)
        units = n
    rng = np.random.default_rng(seed)
    W = P[np.sort(rng.choice(n, size=units, replace=False))].copy()
    pos = hex_grid(units)
    grid_sq = ((pos[:, None] - pos[None]) ** 2).sum(axis=2)
    radii = radius_schedule(units, iterations, decay_fraction)
    qe = []
    for r in radii:
        d = _sq_dist(P, W)
        bmu = np.argmin(d, axis=1)
        qe.append(float(np.sqrt(d[np.arange(n), bmu]).mean()))
        H = np.exp(-grid_sq / (2.0 * r * r))
        hits = np.zeros((units, n))
        hits[bmu, np.arange(n)] = 1.0
        weights = H @ hits  # units x points
        W = (weights @ P) / weights.sum(axis=1)[:, None]
    d = _sq_dist(P, W)
    bmu = np.argmin(d, axis=1)
    qe.append(float(np.sqrt(d[np.arange(n), bmu]).mean()))
    members = tuple(tuple(int(i) for i in np.flatnonzero(bmu == u)) for u in range(units))
    return ClusterAssignment(n_clusters=units, assignment=bmu, members=members, codebook=W,
                             qe_trace=np.array(qe), radius_trace=radii)


def feature_points(data: LabeledDataset) -> np.ndarray:
    """Features as points: rows of the transposed z-scored matrix."""
    return NormalizationStats.fit(data.features).transform(data.features).T.copy()


def som_cluster_features(data: LabeledDataset, n_clusters: int,
                         config: AfsConfig | None = None) -> ClusterAssignment:
    config = config or AfsConfig()
    if n_clusters < 1:
        raise ValueError("N must be >= 1")
    return train_som(feature_points(data), n_clusters, config.som_iterations,
                     seed=_som_seed(config.rng_seed, n_clusters),
                     decay_fraction=config.decay_fraction)


def _som_seed(seed: int, n_clusters: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(n_clusters)])


@dataclass(frozen=True)
class AfsEntry:
    n_clusters: int
    cluster: int
    members: tuple[int, ...]
    uar: float

    @property
    def member_count(self) -> int:
        return len(self.members)

    def sort_key(self):
        # best first: high UAR, then fewer features, lower N, lower cluster id
        return (-self.uar, self.member_count, self.n_clusters, self.cluster)


@dataclass(frozen=True)
class AfsResult:
    chosen_n: int
    chosen_cluster: int
    selected: tuple[int, ...]
    chosen_uar: float
    table: tuple[AfsEntry, ...]
    report: EvalReport
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "chosen_n": self.chosen_n,
            "chosen_cluster": self.chosen_cluster,
            "selected": list(self.selected),
            "chosen_uar": self.chosen_uar,
            "table": [
                {"n_clusters": e.n_clusters, "cluster": e.cluster,
                 "member_count": e.member_count, "uar": e.uar, "members": list(e.members)}
                for e in self.table
            ],
            "warnings": list(self.warnings),
        }

    def best_per_n(self) -> list[AfsEntry]:
        """Best cluster for every N, as plotted against N."""
        out: dict[int, AfsEntry] = {}
        for e in sorted(self.table, key=AfsEntry.sort_key):
            out.setdefault(e.n_clusters, e)
        return [out[k] for k in sorted(out)]


def afs_select(data: LabeledDataset, config: AfsConfig | None = None,
               n_grid: Sequence[int] | None = None) -> AfsResult:
    """Cluster the features for every N in the grid and keep the best cluster.

    Identical member sets met at different N are evaluated once.
    """
    config = config or AfsConfig()
    grid = tuple(n_grid) if n_grid is not None else config.n_grid
    if not grid:
        raise ValueError("empty n_grid")
    plan = loso_folds(data)
    points = feature_points(data)
    cache: dict[tuple[int, ...], EvalReport] = {}
    entries = []
    notes = []
    for N in grid:
        units = N
        if N > data.n:
            notes.append(f"N={N} exceeds n={data.n}; clipped")
            units = data.n
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            clusters = train_som(points, units, config.som_iterations,
                                 seed=_som_seed(config.rng_seed, N),
                                 decay_fraction=config.decay_fraction)
        for u in clusters.nonempty():
            key = clusters.members[u]
            if key not in cache:
                cache[key] = evaluate_feature_subset(data, key, config.svm_config, plan)
            entries.append(AfsEntry(n_clusters=N, cluster=u, members=key, uar=cache[key].uar))
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    best = min(entries, key=AfsEntry.sort_key)
    return AfsResult(chosen_n=best.n_clusters, chosen_cluster=best.cluster,
                     selected=best.members, chosen_uar=best.uar, table=tuple(entries),
                     report=cache[best.members], warnings=tuple(notes))


def afs_table_rows(result: AfsResult) -> list[Mapping]:
    """(N, cluster id, member count, UAR) rows for map/curve diagnostics."""
    return [{"n_clusters": e.n_clusters, "cluster": e.cluster,
             "member_count": e.member_count, "uar": e.uar} for e in result.table]
