"""Classical Fisher score.

For feature f with overall mean mu_f and per-class mean/variance mu_cf, var_cf::

    score_f = sum_c n_c (mu_cf - mu_f)^2 / sum_c n_c var_cf

Variances are population variances. A denominator below 1e-12 gives score 0.
"""

from __future__ import annotations

import numpy as np

from ..dataset import LabeledDataset
from .ranking import FeatureRanking, scores_to_ranking

MIN_DENOMINATOR = 1e-12


def fisher_score_values(X: np.ndarray, codes: np.ndarray, n_classes: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    num = np.zeros(X.shape[1])
    den = np.zeros(X.shape[1])
    for c in range(n_classes):
        Xc = X[codes == c]
        if len(Xc) == 0:
            continue
        num += len(Xc) * (Xc.mean(axis=0) - mu) ** 2
        den += len(Xc) * Xc.var(axis=0)
    ok = den >= MIN_DENOMINATOR
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


def fisher_scores(data: LabeledDataset) -> FeatureRanking:
    codes = data.label_codes
    if len(np.unique(codes)) < 2:
        raise ValueError("Fisher score needs at least 2 classes with instances")
    scores = fisher_score_values(data.features, codes, len(data.class_set))
    return scores_to_ranking(scores, method="fisher", feature_names=data.feature_names)
