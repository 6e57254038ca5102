"""
Agreement metrics between hypnograms and between hypnodensities.

Discrete metrics are computed from a 5x5 confusion matrix (rows =
reference, columns = prediction), so recording-level and pooled
dataset-level numbers share one code path: pool by adding matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import N_STAGES, STAGE_NAMES, Hypnodensity, Hypnogram, Stage
from .errors import AlignmentError, DegenerateKappa, InvalidStage, NoScoredEpochs, ZeroVector

__all__ = [
    "ConfusionMatrix",
    "confusion",
    "pooled",
    "accuracy",
    "class_f1",
    "class_f1_table",
    "macro_f1",
    "cohens_kappa",
    "cosine_similarity",
    "acs",
    "summary",
]


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (N_STAGES, N_STAGES) or (c < 0).any():
            raise ValueError("confusion matrix must be a 5x5 array of non-negative counts")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    __hash__ = None


def confusion(reference: Hypnogram, prediction: Hypnogram) -> ConfusionMatrix:
    """Count (reference, prediction) pairs over epochs scored in both."""
    if len(reference) != len(prediction):
        raise AlignmentError(f"reference has {len(reference)} epochs, prediction {len(prediction)}")
    both = reference.scored & prediction.scored
    if not both.any():
        raise NoScoredEpochs("no epoch is scored in both hypnograms")
    counts = np.zeros((N_STAGES, N_STAGES), dtype=np.int64)
    np.add.at(counts, (reference.stages[both], prediction.stages[both]), 1)
    return ConfusionMatrix(counts)


def pooled(matrices: Iterable[ConfusionMatrix]) -> ConfusionMatrix:
    total = ConfusionMatrix(np.zeros((N_STAGES, N_STAGES), dtype=np.int64))
    for cm in matrices:
        total = total + cm
    return total


def _nonempty(cm: ConfusionMatrix):
    if cm.total == 0:
        raise NoScoredEpochs("confusion matrix is empty")


def accuracy(cm: ConfusionMatrix) -> float:
    _nonempty(cm)
    return float(np.trace(cm.counts) / cm.total)


def class_f1(cm: ConfusionMatrix, stage) -> float | None:
    """F1 of one stage, or ``None`` when the stage is absent from both raters."""
    stage = int(stage)
    if stage == Stage.MASK or not 0 <= stage < N_STAGES:
        raise InvalidStage(f"no F1 for stage {stage}")
    tp = int(cm.counts[stage, stage])
    fp = int(cm.counts[:, stage].sum()) - tp
    fn = int(cm.counts[stage, :].sum()) - tp
    if tp + fp + fn == 0:
        return None
    return 2 * tp / (2 * tp + fp + fn)


def class_f1_table(cm: ConfusionMatrix) -> dict[str, float | None]:
    return {name: class_f1(cm, code) for code, name in enumerate(STAGE_NAMES)}


def macro_f1(cm: ConfusionMatrix, absent: str = "exclude") -> float:
    """Unweighted mean of the class-wise F1 scores.

    Parameters
    ----------
    absent : {"exclude", "zero"}
        How to treat stages that appear in neither hypnogram: left out of
        the mean (default) or counted as F1 = 0.
    """
    if absent not in ("exclude", "zero"):
        raise ValueError(f"absent must be 'exclude' or 'zero', got {absent!r}")
    scores = [class_f1(cm, c) for c in range(N_STAGES)]
    present = [s for s in scores if s is not None]
    if not present:
        raise NoScoredEpochs("every stage is absent")
    if absent == "zero":
        return float(sum(present) / N_STAGES)
    return float(sum(present) / len(present))


def cohens_kappa(cm: ConfusionMatrix) -> float:
    _nonempty(cm)
    n = cm.total
    rows = cm.counts.sum(axis=1)
    cols = cm.counts.sum(axis=0)
    chance = int(rows @ cols)
    # exact integer test: chance agreement of 1 means both raters used one identical stage
    if chance == n * n:
        raise DegenerateKappa("chance agreement is 1; kappa is undefined")
    p_o = np.trace(cm.counts) / n
    p_e = chance / (n * n)
    return float((p_o - p_e) / (1 - p_e))


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


def acs(model: Hypnodensity, soft_cons: Hypnodensity, epochs=None) -> float:
    """Average cosine similarity between two hypnodensities.

    ``epochs`` restricts the average to an index set (e.g. the epochs left
    after masking); all epochs are used by default.
    """
    if len(model) != len(soft_cons):
        raise AlignmentError(f"hypnodensities have {len(model)} and {len(soft_cons)} epochs")
    a, b = model.probs, soft_cons.probs
    if epochs is not None:
        epochs = np.asarray(epochs)
        if epochs.dtype == bool:
            epochs = np.flatnonzero(epochs)
        a, b = a[epochs], b[epochs]
    if a.shape[0] == 0:
        raise NoScoredEpochs("no epochs to average over")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if (na == 0).any() or (nb == 0).any():
        raise ZeroVector("hypnodensity contains an all-zero row")
    return float(np.mean(np.einsum("ij,ij->i", a, b) / (na * nb)))


def summary(cm: ConfusionMatrix, absent: str = "exclude") -> dict:
    """Accuracy, macro-F1, kappa (``None`` if degenerate) and class-wise F1."""
    try:
        kappa = cohens_kappa(cm)
    except DegenerateKappa:
        kappa = None
    return {
        "n_epochs": cm.total,
        "accuracy": accuracy(cm),
        "mf1": macro_f1(cm, absent),
        "kappa": kappa,
        "class_f1": class_f1_table(cm),
    }
