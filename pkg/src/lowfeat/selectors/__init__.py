"""Ranking feature selectors: Fisher score, ReliefF and ILFS."""

from .fisher import fisher_scores
from .ilfs import IlfsConfig, IlfsGraph, build_graph, ilfs_scores, path_relevance
from .ranking import FeatureRanking, scores_to_ranking
from .relieff import ReliefFConfig, relieff_scores

RANKERS = ("fisher", "relieff", "ilfs")

__all__ = [
    "FeatureRanking", "IlfsConfig", "IlfsGraph", "RANKERS", "ReliefFConfig", "build_graph",
    "fisher_scores", "ilfs_scores", "path_relevance", "relieff_scores", "scores_to_ranking",
]
