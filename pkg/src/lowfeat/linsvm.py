"""Linear soft-margin SVM trained with SMO, and a one-vs-one multiclass wrapper.

The binary solver works on the dual

    max_a  sum(a) - 1/2 sum_ij a_i a_j y_i y_j <x_i, x_j>
    s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0

picking the maximal violating pair at every step (first index wins ties) and
stopping once the pair's violation drops below ``kkt_tolerance``.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numba import njit

MODEL_FORMAT_VERSION = 1
TIE_BREAK_RULE = "votes>abs_margin_sum>class_order"

# Floor for the curvature of a pair update (kernel matrix may be singular).
_TAU = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    """Solver settings.

    ``box_constraint`` is the upper bound C on every dual variable. ``rng_seed``
    is echoed into records only: the working-set scan is deterministic.
    """

    box_constraint: float = 0.75
    kkt_tolerance: float = 1e-3
    max_iterations: int = 1_000_000
    rng_seed: int = 0

    def __post_init__(self):
        if not self.box_constraint > 0:
            raise ValueError(f"box_constraint must be > 0, got {self.box_constraint}")
        if not self.kkt_tolerance > 0:
            raise ValueError(f"kkt_tolerance must be > 0, got {self.kkt_tolerance}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "SvmConfig":
        return cls(**dict(d))


@njit(cache=True)
def _smo(K, y, C, tol, max_iter):
    m = y.shape[0]
    alpha = np.zeros(m)
    # gradient of 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij
    G = -np.ones(m)
    it = 0
    gap = np.inf
    while True:
        i = -1
        j = -1
        gmax = -np.inf
        gmin = np.inf
        for t in range(m):
            v = -y[t] * G[t]
            up = (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0)
            low = (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C)
            if up and v > gmax:
                gmax = v
                i = t
            if low and v < gmin:
                gmin = v
                j = t
        if i < 0 or j < 0:
            gap = 0.0
            break
        gap = gmax - gmin
        if gap < tol or it >= max_iter:
            break
        it += 1

        old_ai = alpha[i]
        old_aj = alpha[j]
        Kij = K[i, j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] - 2.0 * Kij
            if quad <= 0.0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0.0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * Kij
            if quad <= 0.0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = s

        dai = (alpha[i] - old_ai) * y[i]
        daj = (alpha[j] - old_aj) * y[j]
        for t in range(m):
            G[t] += y[t] * (K[t, i] * dai + K[t, j] * daj)

    # bias: mean over free vectors, else midpoint of the feasible interval
    nfree = 0
    sfree = 0.0
    for t in range(m):
        if 0.0 < alpha[t] < C:
            nfree += 1
            sfree += -y[t] * G[t]
    if nfree > 0:
        b = sfree / nfree
    else:
        b = 0.5 * (gmax + gmin) if np.isfinite(gmax) and np.isfinite(gmin) else 0.0
    return alpha, b, it, gap


@dataclass(frozen=True)
class BinarySvmModel:
    """Linear decision function ``w . x + b`` plus training diagnostics."""

    w: np.ndarray
    b: float
    iterations: int = 0
    kkt_gap: float = 0.0
    duality_gap: float = 0.0
    converged: bool = True
    alpha: np.ndarray | None = field(default=None, repr=False, compare=False)

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        # elementwise product + row reduction keeps each row's result independent of batch size
        return (X * self.w).sum(axis=-1) + self.b


def dual_objective(alpha: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ (X @ X.T) @ ay)


def train_binary_smo(X, y, config: SvmConfig | None = None) -> BinarySvmModel:
    """Train a binary linear SVM on labels in {-1, +1}.

    A model whose iteration budget ran out is still returned, with
    ``converged=False``.
    """
    config = config or SvmConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains NaN or Inf")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be -1 or +1")
    if np.all(y > 0) or np.all(y < 0):
        raise ValueError("both classes must be present")

    K = X @ X.T
    C = float(config.box_constraint)
    alpha, b, it, gap = _smo(K, y, C, float(config.kkt_tolerance), int(config.max_iterations))
    w = (alpha * y) @ X
    margins = y * (X @ w + b)
    primal = 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())
    dual = float(alpha.sum() - 0.5 * (w @ w))
    return BinarySvmModel(
        w=w,
        b=float(b),
        iterations=int(it),
        kkt_gap=float(gap),
        duality_gap=primal - dual,
        converged=bool(gap < config.kkt_tolerance),
        alpha=alpha,
    )


def kkt_residuals(model: BinarySvmModel, X, y, C: float) -> np.ndarray:
    """Per-instance violation of the soft-margin KKT conditions (0 when satisfied)."""
    alpha = model.alpha
    yf = np.asarray(y) * (np.asarray(X) @ model.w + model.b)
    res = np.zeros_like(yf)
    at0 = alpha <= 0.0
    atC = alpha >= C
    free = ~at0 & ~atC
    res[at0] = np.maximum(0.0, 1.0 - yf[at0])
    res[atC] = np.maximum(0.0, yf[atC] - 1.0)
    res[free] = np.abs(yf[free] - 1.0)
    return res


@dataclass(frozen=True)
class MulticlassSvmModel:
    """One-vs-one ensemble. ``pairs[k] = (class_a, class_b, model)``; a positive
    decision value votes for ``class_a``."""

    class_set: tuple[str, ...]
    pairs: tuple[tuple[str, str, BinarySvmModel], ...]
    n_features: int
    config: SvmConfig = SvmConfig()
    tie_break: str = TIE_BREAK_RULE

    def __post_init__(self):
        k = len(self.class_set)
        if len(self.pairs) != k * (k - 1) // 2:
            raise ValueError(f"{k} classes need {k * (k - 1) // 2} pairwise models, got {len(self.pairs)}")
        for _, _, mdl in self.pairs:
            if mdl.w.shape != (self.n_features,):
                raise ValueError("pairwise weight vector has wrong length")

    def decision_values(self, X) -> np.ndarray:
        """Margins, shape ``(rows, pairs)``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return np.column_stack([mdl.decision(X) for _, _, mdl in self.pairs])

    def predict_from_margins(self, margins: np.ndarray) -> list[str]:
        pos = {c: i for i, c in enumerate(self.class_set)}
        a_idx = np.array([pos[a] for a, _, _ in self.pairs])
        b_idx = np.array([pos[b] for _, b, _ in self.pairs])
        out = []
        for row in np.atleast_2d(margins):
            votes = np.zeros(len(self.class_set), dtype=np.int64)
            strength = np.zeros(len(self.class_set))
            winners = np.where(row > 0, a_idx, b_idx)
            for win, val in zip(winners, row):
                votes[win] += 1
                strength[win] += abs(val)
            best = min(range(len(self.class_set)), key=lambda c: (-votes[c], -strength[c], c))
            out.append(self.class_set[best])
        return out

    def predict(self, X) -> list[str]:
        return self.predict_from_margins(self.decision_values(X))

    def predict_one(self, x) -> str:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("predict_one expects a single feature vector")
        return self.predict(x[None, :])[0]

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "class_set": list(self.class_set),
            "n_features": self.n_features,
            "tie_break": self.tie_break,
            "config": self.config.to_dict(),
            "pairs": [
                {"class_a": a, "class_b": b, "w": mdl.w.tolist(), "b": mdl.b}
                for a, b, mdl in self.pairs
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "MulticlassSvmModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format_version')!r}")
        pairs = tuple(
            (p["class_a"], p["class_b"],
             BinarySvmModel(w=np.array(p["w"], dtype=np.float64), b=float(p["b"])))
            for p in d["pairs"]
        )
        return cls(
            class_set=tuple(d["class_set"]),
            pairs=pairs,
            n_features=int(d["n_features"]),
            config=SvmConfig.from_dict(d["config"]),
            tie_break=d.get("tie_break", TIE_BREAK_RULE),
        )


def fit_one_vs_one(X, labels: Sequence[str], class_set: Sequence[str],
                   config: SvmConfig | None = None) -> MulticlassSvmModel:
    """Array-level one-vs-one training.

    Only classes that actually occur in ``labels`` take part, in ``class_set``
    order.
    """
    config = config or SvmConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("need a non-empty 2-D feature matrix")
    labels = np.asarray(labels)
    present = [c for c in class_set if np.any(labels == c)]
    if len(present) < 2:
        raise ValueError(f"need at least 2 classes, found {len(present)}")
    pairs = []
    for a, b in itertools.combinations(present, 2):
        rows = (labels == a) | (labels == b)
        y = np.where(labels[rows] == a, 1.0, -1.0)
        pairs.append((a, b, train_binary_smo(X[rows], y, config)))
    return MulticlassSvmModel(class_set=tuple(present), pairs=tuple(pairs),
                              n_features=X.shape[1], config=config)


def train_one_vs_one(data, feature_subset: Sequence[int], config: SvmConfig | None = None) -> MulticlassSvmModel:
    """Train pairwise models on ``data`` restricted to ``feature_subset`` columns."""
    subset = [int(i) for i in feature_subset]
    if not subset:
        raise ValueError("empty feature subset")
    if len(set(subset)) != len(subset):
        raise ValueError("feature subset has duplicate indices")
    if min(subset) < 0 or max(subset) >= data.n:
        raise ValueError(f"feature index out of range 0..{data.n - 1}")
    return fit_one_vs_one(data.features[:, subset], data.labels, data.class_set, config)
