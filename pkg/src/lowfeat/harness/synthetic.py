"""Planted-signal datasets with known informative features."""

from __future__ import annotations

import numpy as np

from ..dataset import LabeledDataset

EMOTIONS = ("neutral", "anger", "disgust", "fear", "happiness", "sadness", "surprise", "boredom")

# Spacing of class means on informative features, in units of the noise std.
CLASS_SEPARATION = 4.0


def generate_planted_dataset(m: int, n: int, n_informative: int, n_classes: int,
                             seed: int, n_subjects: int = 10) -> LabeledDataset:
    """Gaussian data where ``n_informative`` columns carry the class signal.

    Informative columns put the class means ``CLASS_SEPARATION`` noise-stds
    apart (class order permuted per column); the remaining columns are pure
    noise. Every column then gets a random positive scale and offset, like
    functionals measured in unrelated units. Labels cycle through the classes
    and subjects are assigned round-robin over class blocks, so every speaker
    sees every class. The informative column indices are stored in
    ``meta["informative"]``.
    """
    if n < 1 or m < 1:
        raise ValueError("m and n must be positive")
    if not 0 <= n_informative <= n:
        raise ValueError(f"n_informative must be in 0..{n}")
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if n_subjects < 4:
        raise ValueError("need at least 4 subjects for a meaningful LOSO")
    if m < n_classes * n_subjects:
        raise ValueError(f"m={m} too small for {n_classes} classes x {n_subjects} subjects")
    rng = np.random.default_rng(seed)
    names = EMOTIONS if n_classes <= len(EMOTIONS) else tuple(f"class{c}" for c in range(n_classes))
    classes = names[:n_classes]
    codes = np.arange(m) % n_classes
    subjects = (np.arange(m) // n_classes) % n_subjects

    informative = np.sort(rng.choice(n, size=n_informative, replace=False))
    X = rng.standard_normal((m, n))
    for f in informative:
        X[:, f] += CLASS_SEPARATION * rng.permutation(n_classes)[codes]
    X = X * rng.uniform(0.1, 10.0, size=n) + rng.uniform(-5.0, 5.0, size=n)

    inf_set = set(informative.tolist())
    feature_names = tuple(f"{'inf' if f in inf_set else 'noise'}_{f:03d}" for f in range(n))
    return LabeledDataset(
        name=f"planted_s{seed}",
        features=X,
        subject_ids=tuple(f"spk{s:02d}" for s in subjects),
        labels=tuple(classes[c] for c in codes),
        feature_names=feature_names,
        class_set=classes,
        meta={"informative": informative.tolist(), "seed": seed, "generator": "planted"},
    )
