"""
Ensemble variability as a predictor of human scoring disagreement.

Per-epoch features are the Shannon entropy of the soft-vote output and
summary statistics of the pairwise cosine distances between ensemble
members. A ridge-penalised logistic regression maps them to the
probability that the human scorers disagree, evaluated with
leave-one-recording-out ROC-AUC.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .core import N_STAGES, Hypnodensity, Hypnogram, Stage
from .ensemble import soft_vote
from .errors import (
    DegenerateCovariance,
    DegenerateLabels,
    NoEvaluableFolds,
    ShapeError,
    TooFewMembers,
    ZeroVector,
)

__all__ = [
    "MAX_ENTROPY",
    "FEATURE_SETS",
    "shannon_entropy",
    "pairwise_cosine_distances",
    "EpochFeatures",
    "epoch_features",
    "first_principal_component",
    "LogisticModel",
    "fit_logistic",
    "logistic_objective",
    "roc_auc",
    "RecordingFeatures",
    "LoroResult",
    "loro_auc",
    "consensus_disagreement_labels",
    "transition_proximity",
]

MAX_ENTROPY = float(np.log(N_STAGES))

FEATURE_SETS = {
    "entropy": ("entropy",),
    "distance": ("d_mean", "d_std", "d_max"),
    "both": ("entropy", "d_mean", "d_std", "d_max"),
}


def shannon_entropy(p) -> np.ndarray | float:
    """Entropy in nats of one distribution (or of each row of a matrix); 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    terms = np.zeros_like(p)
    pos = p > 0
    terms[pos] = p[pos] * np.log(p[pos])
    h = -terms.sum(axis=-1)
    # rounding can leave a one-hot row at -0.0 or a hair below zero
    h = np.clip(h, 0.0, MAX_ENTROPY if p.shape[-1] == N_STAGES else np.inf)
    return float(h) if h.ndim == 0 else h


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if (norms == 0).any():
        raise ZeroVector("cosine distance of a zero vector is undefined")
    return x / norms


def pairwise_cosine_distances(members) -> np.ndarray:
    """``1 - cos(m, n)`` for every member pair m < n, in lexicographic pair order.

    ``members`` is M x 5 for a single epoch or M x T x 5 for whole
    recordings; the result is then of shape (M(M-1)/2,) or (M(M-1)/2, T).
    """
    x = np.asarray(members, dtype=float)
    if x.shape[0] < 2:
        raise TooFewMembers(f"need at least 2 members, got {x.shape[0]}")
    u = _unit_rows(x)
    m_idx, n_idx = np.triu_indices(x.shape[0], k=1)
    sims = np.sum(u[m_idx] * u[n_idx], axis=-1)
    return np.clip(1.0 - sims, 0.0, 1.0)


@dataclass(frozen=True)
class EpochFeatures:
    """Per-epoch variability features of one recording (arrays of length T)."""

    entropy: np.ndarray
    d_mean: np.ndarray
    d_std: np.ndarray
    d_max: np.ndarray

    def distance_matrix(self) -> np.ndarray:
        return np.column_stack([self.d_mean, self.d_std, self.d_max])


def epoch_features(members: Sequence[Hypnodensity]) -> EpochFeatures:
    """Entropy of the soft vote and summary statistics of member distances."""
    if len(members) < 2:
        raise TooFewMembers(f"need at least 2 ensemble members, got {len(members)}")
    ensemble = soft_vote(members)
    d = pairwise_cosine_distances(np.stack([m.probs for m in members]))
    return EpochFeatures(
        entropy=shannon_entropy(ensemble.probs),
        d_mean=d.mean(axis=0),
        d_std=d.std(axis=0),
        d_max=d.max(axis=0),
    )


def first_principal_component(features, return_loadings: bool = False):
    """Scores of the rows on the leading principal axis.

    Rows are centred, projected on the eigenvector of the covariance matrix
    with the largest eigenvalue, and the axis sign is chosen so that its
    first non-zero loading (``d_mean`` for the usual feature layout) is
    positive.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ShapeError(f"need an N x F matrix with N >= 2, got shape {x.shape}")
    centred = x - x.mean(axis=0)
    if not np.any(centred):
        raise DegenerateCovariance("all rows are identical")
    cov = centred.T @ centred / (x.shape[0] - 1)
    _, vecs = np.linalg.eigh(cov)
    axis = vecs[:, -1]
    lead = axis[np.flatnonzero(np.abs(axis) > 1e-12)[0]]
    if lead < 0:
        axis = -axis
    scores = centred @ axis
    return (scores, axis) if return_loadings else scores


@dataclass(frozen=True)
class LogisticModel:
    """Logistic regression fitted on standardised features.

    ``kept`` flags the input columns that were used; constant columns are
    dropped at fit time because they cannot be standardised.
    """

    weights: np.ndarray
    intercept: float
    mean: np.ndarray
    scale: np.ndarray
    kept: np.ndarray
    n_iter: int = 0
    grad_norm: float = 0.0

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.kept.size)
        Z = (X[:, self.kept] - self.mean) / self.scale
        return Z @ self.weights + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))


def logistic_objective(Z, y, weights, intercept, lam) -> float:
    """Mean negative log-likelihood plus ``lam / 2 * ||weights||^2`` (intercept unpenalised)."""
    z = np.asarray(Z, dtype=float) @ np.asarray(weights, dtype=float) + intercept
    nll = np.mean(np.logaddexp(0.0, z) - np.asarray(y, dtype=float) * z)
    return float(nll + 0.5 * lam * np.dot(weights, weights))


def fit_logistic(
    features,
    labels,
    lam: float = 1e-4,
    tol: float = 1e-8,
    max_iter: int = 500,
    allow_empty: bool = False,
) -> LogisticModel:
    """Fit an L2-penalised logistic regression by damped Newton iterations.

    Parameters
    ----------
    features : array_like, shape (N, F)
    labels : array_like of {0, 1}, shape (N,)
    lam : float
        Ridge strength on the standardised weights.
    tol : float
        Stop once the gradient norm falls below this value.
    max_iter : int
        Newton iteration cap.
    allow_empty : bool
        Permit F = 0, i.e. an intercept-only model.

    Raises
    ------
    DegenerateLabels
        If ``labels`` contain a single class.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise ShapeError(f"{X.shape[0]} feature rows but {y.size} labels")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    if y.min() == y.max():
        raise DegenerateLabels("labels contain a single class")
    if X.shape[1] == 0 and not allow_empty:
        raise ShapeError("no features given (pass allow_empty=True for an intercept-only fit)")

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    kept = scale > 0
    Z = (X[:, kept] - mean[kept]) / scale[kept]
    n, f = Z.shape
    A = np.column_stack([Z, np.ones(n)])
    penalty = np.full(f + 1, lam)
    penalty[-1] = 0.0

    def objective(theta):
        return logistic_objective(Z, y, theta[:-1], theta[-1], lam)

    theta = np.zeros(f + 1)
    theta[-1] = np.log(y.mean() / (1 - y.mean()))
    value = objective(theta)
    grad_norm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(A @ theta)
        grad = A.T @ (p - y) / n + penalty * theta
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            break
        hess = (A * (p * (1 - p))[:, None]).T @ A / n + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        # backtracking keeps every iterate a descent step
        t = 1.0
        while t > 1e-10:
            candidate = theta - t * step
            cand_value = objective(candidate)
            if cand_value <= value - 1e-4 * t * float(grad @ step):
                break
            t *= 0.5
        if t <= 1e-10:
            break
        theta, value = candidate, cand_value
    else:
        p = expit(A @ theta)
        grad_norm = float(np.linalg.norm(A.T @ (p - y) / n + penalty * theta))

    return LogisticModel(
        weights=theta[:-1],
        intercept=float(theta[-1]),
        mean=mean[kept],
        scale=scale[kept],
        kept=kept,
        n_iter=it,
        grad_norm=grad_norm,
    )


def roc_auc(scores, labels) -> float:
    """ROC-AUC via the Mann-Whitney rank statistic; tied pairs count 1/2."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("ROC-AUC needs both positive and negative samples")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    ranks = np.empty(s.size)
    # assign midranks to runs of equal scores
    bounds = np.flatnonzero(np.diff(sorted_s)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [s.size]])
    mid = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(mid, ends - starts)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class RecordingFeatures:
    recording_id: str
    features: EpochFeatures
    labels: np.ndarray

    def matrix(self, feature_set: str = "both") -> np.ndarray:
        try:
            cols = FEATURE_SETS[feature_set]
        except KeyError:
            raise ValueError(f"unknown feature set {feature_set!r}") from None
        return np.column_stack([getattr(self.features, c) for c in cols])


@dataclass(frozen=True)
class LoroResult:
    mean_auc: float
    per_recording: dict
    skipped: dict = field(default_factory=dict)


def _as_fold(rec, feature_set):
    if isinstance(rec, RecordingFeatures):
        return rec.matrix(feature_set), np.asarray(rec.labels), rec.recording_id
    X, y, rid = rec
    return np.asarray(X, dtype=float).reshape(len(y), -1), np.asarray(y), rid


def loro_auc(recordings, feature_set: str = "both", lam: float = 1e-4) -> LoroResult:
    """Leave-one-recording-out ROC-AUC of the disagreement classifier.

    Parameters
    ----------
    recordings : sequence
        :class:`RecordingFeatures`, or ``(features, labels, recording_id)``
        tuples whose feature matrix is used as is.
    feature_set : {"entropy", "distance", "both"}
        Columns used when the items are :class:`RecordingFeatures`.

    Returns
    -------
    LoroResult
        Unweighted mean over evaluable folds, the per-recording AUCs and the
        folds that were skipped with the reason.
    """
    folds = [_as_fold(r, feature_set) for r in recordings]
    if len(folds) < 2:
        raise NoEvaluableFolds("leave-one-recording-out needs at least 2 recordings")
    per_recording, skipped = {}, {}
    for k, (X_test, y_test, rid) in enumerate(folds):
        if np.unique(y_test).size < 2:
            skipped[rid] = "held-out recording has a single class"
            continue
        X_train = np.concatenate([f[0] for j, f in enumerate(folds) if j != k])
        y_train = np.concatenate([f[1] for j, f in enumerate(folds) if j != k])
        try:
            model = fit_logistic(X_train, y_train, lam=lam)
        except DegenerateLabels:
            skipped[rid] = "training recordings have a single class"
            continue
        per_recording[rid] = roc_auc(model.decision_function(X_test), y_test)
    if not per_recording:
        raise NoEvaluableFolds("every fold was skipped")
    return LoroResult(float(np.mean(list(per_recording.values()))), per_recording, skipped)


def consensus_disagreement_labels(scorers: Sequence[Hypnogram]) -> np.ndarray:
    """1 where the scorers that labelled an epoch did not all agree, else 0."""
    if len(scorers) < 2:
        raise TooFewMembers("need at least 2 scorers")
    onehot = np.stack([h.one_hot() for h in scorers]).sum(axis=0)
    return (np.count_nonzero(onehot, axis=1) > 1).astype(np.int8)


def transition_proximity(consensus: Hypnogram, window_s: float = 60.0) -> np.ndarray:
    """Flag epochs lying within ``window_s`` seconds of a stage change.

    A change sits on the boundary between two consecutive scored epochs.
    An epoch is flagged when the gap between its time interval and some
    change is shorter than ``window_s``; epochs touching a change are
    always flagged.
    """
    stages = consensus.stages
    dur = consensus.epoch_duration_s
    adjacent = (stages[:-1] != Stage.MASK) & (stages[1:] != Stage.MASK)
    boundaries = (np.flatnonzero(adjacent & (stages[:-1] != stages[1:])) + 1) * dur
    if boundaries.size == 0:
        return np.zeros(stages.size, dtype=np.int8)
    start = np.arange(stages.size)[:, None] * dur
    gap = np.maximum(0.0, np.maximum(start - boundaries, boundaries - (start + dur)))
    near = (gap < window_s) | (gap == 0)
    return near.any(axis=1).astype(np.int8)
