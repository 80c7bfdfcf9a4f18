"""Infinite latent feature selection.

Each feature is described by a bag of tokens that say how well it separates
the classes. A two-topic PLSA model fitted on the feature x token counts gives
every feature a probability of belonging to the "relevant" topic; those
probabilities weight a fully connected feature graph, and a feature's score is
the total weight of all paths (of any length) leaving it::

    A[i, j] = p_rel[i] * p_rel[j]   (i != j),   A[i, i] = 0
    S = sum_{l >= 1} (alpha A)^l = (I - alpha A)^{-1} - I
    score_i = sum_j S[i, j]

with ``alpha = alpha_fraction / spectral_radius(A)`` so the series converges.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..dataset import DEGENERATE_STD, LabeledDataset
from .ranking import FeatureRanking, scores_to_ranking


@dataclass(frozen=True)
class IlfsConfig:
    token_bins: int = 6
    latent_topics: int = 2
    em_iterations: int = 1000
    em_tolerance: float = 1e-10
    alpha_fraction: float = 0.9

    def __post_init__(self):
        if self.token_bins < 2:
            raise ValueError("token_bins must be >= 2")
        if self.latent_topics != 2:
            raise ValueError("only the relevant/irrelevant two-topic model is supported")
        if not 0.0 < self.alpha_fraction < 1.0:
            raise ValueError("alpha_fraction must lie in (0, 1)")
        if self.em_iterations < 1 or not self.em_tolerance > 0:
            raise ValueError("em_iterations and em_tolerance must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def feature_tokens(X: np.ndarray, codes: np.ndarray, n_classes: int, bins: int):
    """Token count table describing each feature's class separation.

    For every class c two statistics are computed per feature, both relative to
    the feature's overall std: the distance of the class mean from the overall
    mean, and the within-class std. Each is quantile-binned across features into
    ``bins`` levels, oriented so that a higher level means more discriminative
    (large separation, small dispersion). A token is (statistic, class, level).

    Returns ``(counts, levels, degenerate)``: an ``n x vocab`` count table, the
    level of every token scaled to [0, 1], and a mask of constant features.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    sigma = X.std(axis=0)
    degenerate = sigma < DEGENERATE_STD
    safe = np.where(degenerate, 1.0, sigma)
    mu = X.mean(axis=0)
    present = [c for c in range(n_classes) if np.any(codes == c)]
    stats = []
    for c in present:
        Xc = X[codes == c]
        sep = np.where(degenerate, 0.0, np.abs(Xc.mean(axis=0) - mu) / safe)
        disp = np.where(degenerate, 1.0, Xc.std(axis=0) / safe)
        stats.append((sep, False))
        stats.append((disp, True))
    counts = np.zeros((n, len(stats) * bins))
    levels = np.tile(np.arange(bins) / (bins - 1), len(stats))
    for s, (values, reverse) in enumerate(stats):
        edges = np.quantile(values, np.arange(1, bins) / bins)
        level = np.searchsorted(edges, values, side="right")
        if reverse:
            level = bins - 1 - level
        counts[np.arange(n), s * bins + level] += 1.0
    return counts, levels, degenerate


def plsa_relevance(counts: np.ndarray, levels: np.ndarray, iterations: int = 1000,
                   tolerance: float = 1e-10):
    """Fit a two-topic PLSA model by EM; return P(relevant | feature).

    The initialisation is deterministic and identical for every document: both
    topics start uniform over documents, the "relevant" topic's word
    distribution leans toward high-level tokens and the other toward low-level
    ones. Returns ``(p_rel, iterations_run, converged, log_likelihood)``.
    """
    n, V = counts.shape
    p_w_z = np.stack([levels + 0.5, 1.5 - levels], axis=1)  # V x 2
    p_w_z /= p_w_z.sum(axis=0)
    p_z_d = np.full((n, 2), 0.5)
    prev = -np.inf
    ll = -np.inf
    converged = False
    it = 0
    for it in range(1, iterations + 1):
        # E-step: responsibility of each topic for every (feature, token) cell
        joint = p_z_d[:, None, :] * p_w_z[None, :, :]  # n x V x 2
        norm = joint.sum(axis=2)
        resp = joint / np.where(norm > 0, norm, 1.0)[:, :, None]
        weighted = counts[:, :, None] * resp
        # M-step
        p_w_z = weighted.sum(axis=0)
        p_w_z /= np.where(p_w_z.sum(axis=0) > 0, p_w_z.sum(axis=0), 1.0)
        dz = weighted.sum(axis=1)
        p_z_d = dz / np.where(dz.sum(axis=1) > 0, dz.sum(axis=1), 1.0)[:, None]
        mix = p_z_d @ p_w_z.T
        ll = float(np.sum(counts * np.log(np.where(counts > 0, mix, 1.0))))
        if abs(ll - prev) <= tolerance * (1.0 + abs(ll)):
            converged = True
            break
        prev = ll
    # keep the label on the topic that favours discriminative tokens
    rel = 0 if levels @ p_w_z[:, 0] >= levels @ p_w_z[:, 1] else 1
    return p_z_d[:, rel].copy(), it, converged, ll


@dataclass(frozen=True)
class IlfsGraph:
    adjacency: np.ndarray
    alpha: float
    relevance: np.ndarray

    def scores(self) -> np.ndarray:
        return self.relevance.sum(axis=1)


def spectral_radius(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=np.float64)
    if np.allclose(A, A.T):
        return float(np.max(np.abs(np.linalg.eigvalsh(A)))) if A.size else 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0


def path_relevance(A: np.ndarray, alpha: float) -> np.ndarray:
    """Closed form of ``sum_{l>=1} (alpha A)^l``; requires ``alpha * rho(A) < 1``."""
    A = np.asarray(A, dtype=np.float64)
    if alpha * spectral_radius(A) >= 1.0:
        raise ValueError("alpha * spectral_radius(A) must be < 1 for the path series to converge")
    eye = np.eye(A.shape[0])
    return np.linalg.solve(eye - alpha * A, eye) - eye


def build_graph(p_rel: np.ndarray, alpha_fraction: float = 0.9) -> IlfsGraph:
    p = np.asarray(p_rel, dtype=np.float64)
    A = np.outer(p, p)
    np.fill_diagonal(A, 0.0)
    rho = spectral_radius(A)
    if rho == 0.0:
        return IlfsGraph(adjacency=A, alpha=0.0, relevance=np.zeros_like(A))
    alpha = alpha_fraction / rho
    return IlfsGraph(adjacency=A, alpha=alpha, relevance=path_relevance(A, alpha))


def ilfs_scores(data: LabeledDataset, config: IlfsConfig | None = None) -> FeatureRanking:
    config = config or IlfsConfig()
    if data.n < 2:
        raise ValueError("ILFS needs at least 2 features")
    codes = data.label_codes
    if len(np.unique(codes)) < 2:
        raise ValueError("ILFS needs at least 2 classes with instances")
    counts, levels, degenerate = feature_tokens(data.features, codes, len(data.class_set),
                                                config.token_bins)
    p_rel, its, converged, ll = plsa_relevance(counts, levels, config.em_iterations,
                                               config.em_tolerance)
    if not converged:
        warnings.warn(f"ILFS topic model did not converge in {its} EM iterations", stacklevel=2)
    # a constant feature carries nothing, whatever its tokens say
    p_rel[degenerate] = 0.0
    graph = build_graph(p_rel, config.alpha_fraction)
    return scores_to_ranking(
        graph.scores(), method="ilfs", config=config.to_dict(),
        feature_names=data.feature_names,
        diagnostics={"em_iterations": its, "em_converged": converged,
                     "log_likelihood": ll, "alpha": graph.alpha},
    )
