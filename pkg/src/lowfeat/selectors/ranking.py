from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class FeatureRanking:
    """Per-feature scores and the induced order (best first).

    Ties in score are broken by ascending feature index.
    """

    scores: np.ndarray
    order: tuple[int, ...]
    method: str = "custom"
    config: Mapping[str, Any] = field(default_factory=dict)
    feature_names: tuple[str, ...] = ()
    diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def top(self, k: int) -> list[int]:
        return list(self.order[:k])

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "config": dict(self.config),
            "scores": self.scores.tolist(),
            "order": list(self.order),
            "feature_names": list(self.feature_names),
            "diagnostics": dict(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureRanking":
        rk = scores_to_ranking(d["scores"], method=d.get("method", "custom"),
                               config=d.get("config", {}),
                               feature_names=d.get("feature_names", ()),
                               diagnostics=d.get("diagnostics", {}))
        if list(rk.order) != list(d["order"]):
            raise ValueError("stored order is inconsistent with stored scores")
        return rk

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path


def scores_to_ranking(scores: Sequence[float], method: str = "custom",
                      config: Mapping | None = None, feature_names: Sequence[str] = (),
                      diagnostics: Mapping | None = None) -> FeatureRanking:
    """Sort features by descending score, ties by ascending index."""
    s = np.array(scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise ValueError("no scores to rank")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if feature_names and len(feature_names) != s.size:
        raise ValueError("feature_names length differs from scores")
    s.flags.writeable = False
    # lexsort: last key is primary
    order = np.lexsort((np.arange(s.size), -s))
    return FeatureRanking(scores=s, order=tuple(int(i) for i in order), method=method,
                          config=dict(config or {}), feature_names=tuple(feature_names),
                          diagnostics=dict(diagnostics or {}))
