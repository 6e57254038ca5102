"""Clinical sleep markers derived from a hypnogram, and their bias."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import Hypnogram, Stage
from .errors import NoScoredEpochs, NoSleep

__all__ = ["MarkerReport", "MARKER_FIELDS", "derive_markers", "marker_bias"]

MARKER_FIELDS = (
    "tst_min",
    "waso_min",
    "n1_min",
    "n2_min",
    "n3_min",
    "rem_min",
    "reml_min",
    "awh_per_hour",
    "trh_per_hour",
)


@dataclass(frozen=True)
class MarkerReport:
    tst_min: float
    waso_min: float
    n1_min: float
    n2_min: float
    n3_min: float
    rem_min: float
    reml_min: float | None
    awh_per_hour: float
    trh_per_hour: float
    n_awakenings: int = 0
    n_transitions: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def derive_markers(h: Hypnogram, rate_denominator: str = "tst") -> MarkerReport:
    """Compute sleep markers of one hypnogram.

    Sleep onset and offset are the first and last non-wake scored epochs.
    WASO counts wake epochs strictly between them. An awakening is a
    sleep-to-wake change and a transition is any stage change; both are
    counted only between consecutive epochs that are scored, so ``MASK``
    epochs break adjacency.

    Parameters
    ----------
    h : Hypnogram
    rate_denominator : {"tst", "tib"}
        Hours used for the per-hour rates: total sleep time (default) or
        total scored time in bed.

    Raises
    ------
    NoSleep
        If the hypnogram holds no sleep epoch.
    """
    if rate_denominator not in ("tst", "tib"):
        raise ValueError(f"rate_denominator must be 'tst' or 'tib', got {rate_denominator!r}")
    stages = h.stages
    scored = h.scored
    if not scored.any():
        raise NoScoredEpochs("hypnogram has no scored epoch")
    sleep = scored & (stages != Stage.W)
    if not sleep.any():
        raise NoSleep("hypnogram contains no sleep epoch")
    epoch_min = h.epoch_duration_s / 60.0
    minutes = {s: float(np.count_nonzero(stages == s)) * epoch_min for s in Stage if s >= 0}
    tst = float(np.count_nonzero(sleep)) * epoch_min

    sleep_idx = np.flatnonzero(sleep)
    onset, offset = sleep_idx[0], sleep_idx[-1]
    waso = float(np.count_nonzero(stages[onset + 1:offset] == Stage.W)) * epoch_min
    rem_idx = np.flatnonzero(stages == Stage.REM)
    reml = float(rem_idx[0] - onset) * epoch_min if rem_idx.size else None

    adjacent = scored[:-1] & scored[1:]
    before, after = stages[:-1], stages[1:]
    n_trans = int(np.count_nonzero(adjacent & (before != after)))
    n_awake = int(np.count_nonzero(adjacent & (before != Stage.W) & (after == Stage.W)))

    hours = tst / 60.0
    if rate_denominator == "tib":
        hours = float(np.count_nonzero(scored)) * epoch_min / 60.0
    return MarkerReport(
        tst_min=tst,
        waso_min=waso,
        n1_min=minutes[Stage.N1],
        n2_min=minutes[Stage.N2],
        n3_min=minutes[Stage.N3],
        rem_min=minutes[Stage.REM],
        reml_min=reml,
        awh_per_hour=n_awake / hours,
        trh_per_hour=n_trans / hours,
        n_awakenings=n_awake,
        n_transitions=n_trans,
    )


def marker_bias(pred: MarkerReport, ref: MarkerReport) -> dict[str, float | None]:
    """Prediction minus reference for every marker; a missing REML gives ``None``."""
    out = {}
    for name in MARKER_FIELDS:
        p, r = getattr(pred, name), getattr(ref, name)
        out[name] = None if p is None or r is None else p - r
    return out
