"""Soft-voting ensembles and per-channel majority voting."""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .core import N_STAGES, Hypnodensity, Hypnogram
from .errors import AlignmentError, ConfigError, EmptyEnsemble

__all__ = ["soft_vote", "channel_majority_vote", "select_members"]


def _stack(members: Sequence[Hypnodensity]) -> np.ndarray:
    if len(members) == 0:
        raise EmptyEnsemble("at least one member is required")
    lengths = {len(m) for m in members}
    if len(lengths) != 1:
        raise AlignmentError(f"members have different epoch counts: {sorted(lengths)}")
    durations = {m.epoch_duration_s for m in members}
    if len(durations) != 1:
        raise AlignmentError(f"members have different epoch durations: {sorted(durations)}")
    return np.stack([m.probs for m in members])


def soft_vote(members: Sequence[Hypnodensity]) -> Hypnodensity:
    """Element-wise mean of the member hypnodensities.

    Parameters
    ----------
    members : sequence of Hypnodensity
        M >= 1 predictions of the same recording.

    Returns
    -------
    Hypnodensity
        Per-epoch average distribution; rows still sum to one.
    """
    stacked = _stack(members)
    return Hypnodensity(stacked.mean(axis=0), members[0].epoch_duration_s)


def channel_majority_vote(channel_predictions: Sequence[Hypnodensity]) -> Hypnogram:
    """Fuse per-channel predictions into one hypnogram by label voting.

    Each channel votes for its argmax stage. Ties between the most voted
    stages are broken by the larger probability mass summed over channels,
    then by the lowest stage code.
    """
    stacked = _stack(channel_predictions)
    n_channels, n_epochs, _ = stacked.shape
    labels = stacked.argmax(axis=2)
    votes = np.zeros((n_epochs, N_STAGES), dtype=int)
    for c in range(n_channels):
        votes[np.arange(n_epochs), labels[c]] += 1
    mass = stacked.sum(axis=0)
    tied = votes == votes.max(axis=1, keepdims=True)
    # stages outside the vote tie can never win
    score = np.where(tied, mass, -np.inf)
    return Hypnogram(score.argmax(axis=1), channel_predictions[0].epoch_duration_s)


def select_members(models: Mapping[str, Hypnodensity], names: Sequence[str] | None = None) -> list[Hypnodensity]:
    """Pick ensemble members by name; ``None`` selects every model in order."""
    if names is None:
        return list(models.values())
    if len(set(names)) != len(names):
        raise ConfigError("ensemble member names must be distinct")
    unknown = [n for n in names if n not in models]
    if unknown:
        raise ConfigError(f"unknown ensemble members: {', '.join(unknown)}")
    return [models[n] for n in names]
