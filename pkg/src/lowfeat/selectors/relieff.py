"""ReliefF feature weighting (k nearest hits / misses per class).

Distances are Manhattan over range-normalized features, so every per-feature
difference lies in [0, 1] and so does every weight update. Neighbor ties are
broken by ascending instance index and an instance is never its own neighbor.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..dataset import LabeledDataset
from .ranking import FeatureRanking, scores_to_ranking


@dataclass(frozen=True)
class ReliefFConfig:
    """``sample_count`` is ``"all"`` (every instance, in order) or a sample size.

    With ``exclude_duplicates`` set, instances at distance 0 from the sampled
    instance are ignored as neighbors, as if they were the instance itself.
    """

    k_neighbors: int = 10
    sample_count: int | str = "all"
    rng_seed: int = 0
    exclude_duplicates: bool = False

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.sample_count != "all" and (not isinstance(self.sample_count, int)
                                           or self.sample_count < 1):
            raise ValueError(f"sample_count must be 'all' or a positive int, got {self.sample_count!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _nearest(candidates: np.ndarray, dist: np.ndarray, k: int) -> np.ndarray:
    # candidates are ascending, so a stable sort breaks distance ties by index
    return candidates[np.argsort(dist[candidates], kind="stable")[:k]]


def relieff_weights(X: np.ndarray, codes: np.ndarray, config: ReliefFConfig | None = None) -> np.ndarray:
    config = config or ReliefFConfig()
    X = np.asarray(X, dtype=np.float64)
    m, n = X.shape
    codes = np.asarray(codes)
    span = X.max(axis=0) - X.min(axis=0)
    flat = span == 0
    span = np.where(flat, 1.0, span)

    classes, counts = np.unique(codes, return_counts=True)
    prior = dict(zip(classes.tolist(), (counts / m).tolist()))
    members = {c: np.flatnonzero(codes == c) for c in classes.tolist()}

    if config.sample_count == "all":
        sample = np.arange(m)
    else:
        size = config.sample_count
        if size > m:
            warnings.warn(f"sample_count {size} > {m} instances; using all", stacklevel=3)
            size = m
        sample = np.random.default_rng(config.rng_seed).choice(m, size=size, replace=False)

    def hit_pool(r):
        own = members[codes[r]]
        pool = own[own != r]
        if config.exclude_duplicates:
            pool = pool[np.any(X[pool][:, ~flat] != X[r, ~flat], axis=1)]
        return pool

    usable = [r for r in sample if hit_pool(r).size > 0]
    if len(usable) < len(sample):
        skipped = sorted(set(sample.tolist()) - set(usable))
        warnings.warn(f"instances {skipped} have no nearest hit; skipped", stacklevel=3)
    used = len(usable)

    k = config.k_neighbors
    clipped = set()
    W = np.zeros(n)
    for r in usable:
        diff = np.abs(X - X[r]) / span
        diff[:, flat] = 0.0
        dist = diff.sum(axis=1)
        own = codes[r]
        pool = hit_pool(r)
        if pool.size < k:
            clipped.add(int(own))
        hits = _nearest(pool, dist, k)
        for d in diff[hits]:
            W -= d / (used * len(hits))
        for c in classes.tolist():
            if c == own:
                continue
            pool = members[c]
            if config.exclude_duplicates:
                pool = pool[dist[pool] > 0]
            if pool.size == 0:
                continue
            if pool.size < k:
                clipped.add(int(c))
            nb = _nearest(pool, dist, k)
            acc = np.zeros(n)
            for d in diff[nb]:
                acc += d / (used * len(nb))
            W += prior[c] / (1.0 - prior[own]) * acc
    if clipped:
        warnings.warn(f"k={k} clipped for classes {sorted(clipped)} with too few instances",
                      stacklevel=3)
    return W


def relieff_scores(data: LabeledDataset, config: ReliefFConfig | None = None) -> FeatureRanking:
    config = config or ReliefFConfig()
    W = relieff_weights(data.features, data.label_codes, config)
    return scores_to_ranking(W, method="relieff", config=config.to_dict(),
                             feature_names=data.feature_names)
