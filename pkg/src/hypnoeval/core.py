"""
Data model for sleep stages, hypnograms and hypnodensities.

Stage codes follow the order W=0, N1=1, N2=2, N3=3, REM=4. Every matrix
column and every file format uses that order. ``MASK`` marks epochs that
were left unscored or carry a non-sleep annotation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np

from .errors import AlignmentError, InvalidStage, NoScoredEpochs, NormalizationError, ShapeError

__all__ = [
    "Stage",
    "N_STAGES",
    "STAGE_NAMES",
    "ROW_SUM_TOL",
    "Hypnogram",
    "Hypnodensity",
    "RecordingBundle",
    "one_hot",
    "argmax_stage",
    "mask_alignment",
]


class Stage(IntEnum):
    W = 0
    N1 = 1
    N2 = 2
    N3 = 3
    REM = 4
    MASK = -1

    @classmethod
    def from_token(cls, token: str) -> "Stage":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise InvalidStage(f"unknown stage token {token!r}") from None


N_STAGES = 5
STAGE_NAMES = ("W", "N1", "N2", "N3", "REM")
ROW_SUM_TOL = 1e-6
# rows already this close to 1 are left untouched so that renormalisation is idempotent
_RENORM_EPS = 1e-12
_CODES = np.arange(N_STAGES)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _check_duration(epoch_duration_s: float) -> float:
    epoch_duration_s = float(epoch_duration_s)
    if not np.isfinite(epoch_duration_s) or epoch_duration_s <= 0:
        raise ValueError(f"epoch_duration_s must be positive, got {epoch_duration_s}")
    return epoch_duration_s


@dataclass(frozen=True, eq=False)
class Hypnogram:
    """Per-epoch stage labels of one recording, for one scorer or model.

    Parameters
    ----------
    stages : array_like of int or Stage
        Stage codes (0..4) or ``Stage.MASK`` (-1). Length must be at least 1.
    epoch_duration_s : float
        Epoch length in seconds, 30 by default.
    """

    stages: np.ndarray
    epoch_duration_s: float = 30.0

    def __post_init__(self):
        arr = np.array(self.stages, dtype=np.int8).reshape(-1)
        if arr.size == 0:
            raise ShapeError("hypnogram must contain at least one epoch")
        bad = (arr < -1) | (arr >= N_STAGES)
        if bad.any():
            raise InvalidStage(f"invalid stage code {int(arr[bad][0])}")
        object.__setattr__(self, "stages", _frozen(arr))
        object.__setattr__(self, "epoch_duration_s", _check_duration(self.epoch_duration_s))

    @classmethod
    def from_labels(cls, labels: Sequence[str], epoch_duration_s: float = 30.0) -> "Hypnogram":
        return cls([Stage.from_token(x) for x in labels], epoch_duration_s)

    def __len__(self) -> int:
        return self.stages.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypnogram):
            return NotImplemented
        return (
            self.epoch_duration_s == other.epoch_duration_s
            and np.array_equal(self.stages, other.stages)
        )

    __hash__ = None

    @property
    def scored(self) -> np.ndarray:
        """Boolean mask of epochs that are not ``MASK``."""
        return self.stages >= 0

    def labels(self) -> list[str]:
        return [Stage(int(s)).name for s in self.stages]

    def one_hot(self) -> np.ndarray:
        """T x 5 one-hot matrix; masked epochs get an all-zero row."""
        return (self.stages[:, None] == _CODES).astype(float)


@dataclass(frozen=True, eq=False)
class Hypnodensity:
    """T x 5 row-stochastic matrix of per-epoch stage probabilities.

    Rows whose sum is within ``ROW_SUM_TOL`` of 1 are renormalised; anything
    further off, or any entry outside [0, 1], is rejected.
    """

    probs: np.ndarray
    epoch_duration_s: float = 30.0

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim == 1 and p.size == N_STAGES:
            p = p.reshape(1, N_STAGES)
        if p.ndim != 2 or p.shape[1] != N_STAGES or p.shape[0] == 0:
            raise ShapeError(f"hypnodensity must be T x {N_STAGES}, got shape {p.shape}")
        if not np.isfinite(p).all():
            raise NormalizationError("non-finite probability")
        if (p < 0).any() or (p > 1 + ROW_SUM_TOL).any():
            row = int(np.flatnonzero(((p < 0) | (p > 1 + ROW_SUM_TOL)).any(axis=1))[0])
            raise NormalizationError(f"entry outside [0, 1] in row {row}")
        sums = p.sum(axis=1)
        off = np.abs(sums - 1.0)
        if (off > ROW_SUM_TOL).any():
            row = int(np.flatnonzero(off > ROW_SUM_TOL)[0])
            raise NormalizationError(f"row {row} sums to {sums[row]!r}")
        fix = off > _RENORM_EPS
        if fix.any():
            p[fix] /= sums[fix, None]
        object.__setattr__(self, "probs", _frozen(p))
        object.__setattr__(self, "epoch_duration_s", _check_duration(self.epoch_duration_s))

    def __len__(self) -> int:
        return self.probs.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypnodensity):
            return NotImplemented
        return (
            self.epoch_duration_s == other.epoch_duration_s
            and np.array_equal(self.probs, other.probs)
        )

    __hash__ = None

    def argmax(self) -> Hypnogram:
        # np.argmax returns the first maximum, i.e. the lowest stage code on ties
        return Hypnogram(np.argmax(self.probs, axis=1), self.epoch_duration_s)


@dataclass(frozen=True)
class RecordingBundle:
    """Aligned scorer hypnograms and model hypnodensities of one recording."""

    recording_id: str
    epoch_duration_s: float = 30.0
    scorer_hypnograms: Mapping[str, Hypnogram] = field(default_factory=dict)
    model_hypnodensities: Mapping[str, Hypnodensity] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "scorer_hypnograms", dict(self.scorer_hypnograms))
        object.__setattr__(self, "model_hypnodensities", dict(self.model_hypnodensities))
        members = [("scorer", k, v) for k, v in self.scorer_hypnograms.items()]
        members += [("model", k, v) for k, v in self.model_hypnodensities.items()]
        first = None
        for kind, name, member in members:
            if member.epoch_duration_s != self.epoch_duration_s:
                raise AlignmentError(
                    f"{kind} {name!r} has epoch duration {member.epoch_duration_s}s, "
                    f"bundle {self.recording_id!r} uses {self.epoch_duration_s}s"
                )
            if first is None:
                first = (kind, name, len(member))
            elif len(member) != first[2]:
                raise AlignmentError(
                    f"{kind} {name!r} has {len(member)} epochs but "
                    f"{first[0]} {first[1]!r} has {first[2]}"
                )

    @property
    def n_epochs(self) -> int:
        for member in (*self.scorer_hypnograms.values(), *self.model_hypnodensities.values()):
            return len(member)
        return 0


def one_hot(stage) -> np.ndarray:
    stage = int(stage)
    if stage == Stage.MASK or not 0 <= stage < N_STAGES:
        raise InvalidStage(f"cannot one-hot encode stage {stage}")
    out = np.zeros(N_STAGES)
    out[stage] = 1.0
    return out


def argmax_stage(p) -> Stage:
    """Most probable stage; ties go to the lowest stage code."""
    p = np.asarray(p, dtype=float)
    if p.shape != (N_STAGES,):
        raise ShapeError(f"expected a vector of {N_STAGES} probabilities, got shape {p.shape}")
    return Stage(int(np.argmax(p)))


def mask_alignment(bundle: RecordingBundle) -> np.ndarray:
    """Indices of epochs that no scorer marked as ``MASK``."""
    keep = np.ones(bundle.n_epochs, dtype=bool)
    for hyp in bundle.scorer_hypnograms.values():
        keep &= hyp.scored
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        raise NoScoredEpochs(f"recording {bundle.recording_id!r} has no epoch scored by every scorer")
    return idx
