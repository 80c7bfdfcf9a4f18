"""Feature selection and linear-SVM evaluation for low-resource speech emotion recognition."""

from .afs import AfsConfig, AfsResult, afs_select, som_cluster_features
from .dataset import (DatasetManifest, LabeledDataset, NormalizationStats, combine_datasets,
                      fit_apply_zscore, load_dataset, wav_peak_normalize)
from .evaluation import (EvalReport, confusion_and_uar, evaluate_feature_subset, loso_folds,
                         sweep_topk)
from .linsvm import MulticlassSvmModel, SvmConfig, train_binary_smo, train_one_vs_one
from .selectors import (FeatureRanking, IlfsConfig, ReliefFConfig, fisher_scores, ilfs_scores,
                        relieff_scores, scores_to_ranking)

__version__ = "0.1.0"
