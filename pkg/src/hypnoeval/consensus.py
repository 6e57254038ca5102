"""
Multi-scorer consensus: per-scorer probabilistic consensus, soft-agreement,
the discrete consensus hypnogram and the soft-consensus distribution.

Scorer inputs are discrete hypnograms. A ``MASK`` label removes that
scorer's vote at that epoch only; epochs where no participating scorer
voted come out as ``MASK`` in the consensus hypnogram.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import N_STAGES, Hypnodensity, Hypnogram, Stage
from .errors import (
    AlignmentError,
    ConfigError,
    EmptyConsensusSet,
    NoScoredEpochs,
    UndefinedConsensus,
)

__all__ = [
    "ConsensusResult",
    "probabilistic_consensus",
    "soft_agreement",
    "soft_agreements",
    "consensus_hypnogram",
    "soft_consensus",
    "soft_consensus_density",
    "inter_model_soft_agreement",
    "dataset_reliability",
    "top_k_scorers",
    "build_consensus",
]


def _stages(scorers: Sequence[Hypnogram]) -> np.ndarray:
    if len(scorers) == 0:
        raise EmptyConsensusSet("no scorers given")
    lengths = {len(h) for h in scorers}
    if len(lengths) != 1:
        raise AlignmentError(f"scorers have different epoch counts: {sorted(lengths)}")
    return np.stack([h.stages for h in scorers])


def _one_hots(scorers: Sequence[Hypnogram]) -> np.ndarray:
    """S x T x 5 one-hot votes; masked epochs are all-zero rows."""
    return (_stages(scorers)[..., None] == np.arange(N_STAGES)).astype(float)


def _require_pair(scorers):
    if len(scorers) < 2:
        raise ConfigError(f"at least 2 scorers are required, got {len(scorers)}")


def probabilistic_consensus(scorers: Sequence[Hypnogram], excluded: int, t: int) -> np.ndarray:
    """Vote counts of every scorer except ``excluded`` at epoch ``t``, scaled so the top stage is 1."""
    _require_pair(scorers)
    if not 0 <= excluded < len(scorers):
        raise IndexError(f"scorer index {excluded} out of range")
    counts = np.zeros(N_STAGES)
    for i, hyp in enumerate(scorers):
        if i != excluded and hyp.stages[t] >= 0:
            counts[hyp.stages[t]] += 1
    if counts.max() == 0:
        raise UndefinedConsensus(f"no scorer other than {excluded} labelled epoch {t}")
    return counts / counts.max()


def soft_agreements(scorers: Sequence[Hypnogram]) -> np.ndarray:
    """Soft-agreement of every scorer against the others.

    The average runs over epochs where the scorer itself and at least one
    other scorer provided a label.
    """
    _require_pair(scorers)
    stages = _stages(scorers)
    onehot = (stages[..., None] == np.arange(N_STAGES)).astype(float)
    others = onehot.sum(axis=0) - onehot
    top = others.max(axis=2)
    valid = (stages >= 0) & (top > 0)
    n_valid = valid.sum(axis=1)
    if (n_valid == 0).any():
        s = int(np.flatnonzero(n_valid == 0)[0])
        raise NoScoredEpochs(f"scorer {s} shares no scored epoch with the others")
    picked = np.take_along_axis(others, np.maximum(stages, 0)[..., None], axis=2)[..., 0]
    credit = np.divide(picked, top, out=np.zeros_like(picked), where=valid)
    return credit.sum(axis=1) / n_valid


def soft_agreement(scorers: Sequence[Hypnogram], s: int) -> float:
    return float(soft_agreements(scorers)[s])


# reliabilities closer than this count as equal, so float noise cannot reorder ties
_RANK_DECIMALS = 12


def _ranking(reliability, names):
    """Scorer indices sorted by reliability (descending), then name."""
    return sorted(range(len(reliability)),
                  key=lambda i: (-round(float(reliability[i]), _RANK_DECIMALS), names[i]))


def consensus_hypnogram(
    scorers: Sequence[Hypnogram],
    *,
    exclude: int | None = None,
    participants: Sequence[int] | None = None,
    reliability: Sequence[float] | None = None,
    names: Sequence[str] | None = None,
) -> Hypnogram:
    """Per-epoch majority vote over a set of scorers.

    Parameters
    ----------
    scorers : sequence of Hypnogram
        All scorers of one recording.
    exclude : int, optional
        Leave this scorer out (used when the scorer itself is evaluated).
    participants : sequence of int, optional
        Explicit voting set, e.g. the most reliable scorers of a dataset.
        Mutually exclusive with ``exclude``.
    reliability : sequence of float, optional
        Per-scorer reliability used to break ties. Defaults to each scorer's
        soft-agreement over the whole recording.
    names : sequence of str, optional
        Scorer names; reliability ties fall back to lexicographic name order.

    Returns
    -------
    Hypnogram
        Majority label per epoch. A tie goes to the most reliable
        participant that voted for one of the tied stages. Epochs without a
        single participating vote are ``MASK``.
    """
    if exclude is not None and participants is not None:
        raise ConfigError("pass either exclude or participants, not both")
    n = len(scorers)
    if participants is None:
        participants = [i for i in range(n) if i != exclude]
    participants = list(dict.fromkeys(participants))
    if len(participants) < 2:
        raise ConfigError(f"consensus needs at least 2 participating scorers, got {len(participants)}")
    if reliability is None:
        reliability = soft_agreements(scorers)
    if names is None:
        names = [f"{i:09d}" for i in range(n)]
    onehot = _one_hots([scorers[i] for i in participants])
    counts = onehot.sum(axis=0)
    top = counts.max(axis=1)
    out = counts.argmax(axis=1).astype(np.int8)
    out[top == 0] = Stage.MASK
    tied = (counts == top[:, None]) & (top[:, None] > 0)
    order = [participants[k] for k in _ranking([reliability[i] for i in participants],
                                               [names[i] for i in participants])]
    for t in np.flatnonzero(tied.sum(axis=1) > 1):
        for i in order:
            stage = scorers[i].stages[t]
            if stage >= 0 and tied[t, stage]:
                out[t] = stage
                break
    return Hypnogram(out, scorers[0].epoch_duration_s)


def soft_consensus(scorers: Sequence[Hypnogram], t: int) -> np.ndarray:
    """Empirical stage distribution of the scorers' labels at epoch ``t``."""
    if len(scorers) == 0:
        raise EmptyConsensusSet("consensus set is empty")
    counts = np.zeros(N_STAGES)
    for hyp in scorers:
        if hyp.stages[t] >= 0:
            counts[hyp.stages[t]] += 1
    if counts.sum() == 0:
        raise EmptyConsensusSet(f"no scorer in the consensus set labelled epoch {t}")
    return counts / counts.sum()


def soft_consensus_density(scorers: Sequence[Hypnogram]) -> Hypnodensity:
    """Soft-consensus for every epoch.

    Rows of epochs nobody labelled are uniform; they coincide with the
    ``MASK`` epochs of :func:`consensus_hypnogram` and should be excluded
    downstream.
    """
    if len(scorers) == 0:
        raise EmptyConsensusSet("consensus set is empty")
    counts = _one_hots(scorers).sum(axis=0)
    n = counts.sum(axis=1, keepdims=True)
    probs = np.divide(counts, n, out=np.full_like(counts, 1.0 / N_STAGES), where=n > 0)
    return Hypnodensity(probs, scorers[0].epoch_duration_s)


def inter_model_soft_agreement(models: Mapping[str, Hypnogram]) -> dict[str, float]:
    """Soft-agreement among models, each model treated as one scorer."""
    names = list(models)
    values = soft_agreements([models[n] for n in names])
    return {n: float(v) for n, v in zip(names, values)}


def dataset_reliability(per_recording: Iterable[Mapping[str, float]]) -> dict[str, float]:
    """Mean soft-agreement of each scorer over the recordings it appears in."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for table in per_recording:
        for name, value in table.items():
            sums[name] = sums.get(name, 0.0) + float(value)
            counts[name] = counts.get(name, 0) + 1
    return {name: sums[name] / counts[name] for name in sums}


def top_k_scorers(reliability: Mapping[str, float], k: int = 4) -> list[str]:
    """Names of the ``k`` most reliable scorers (name order breaks ties)."""
    if k < 1:
        raise ConfigError("k must be at least 1")
    ranked = sorted(reliability, key=lambda n: (-round(float(reliability[n]), _RANK_DECIMALS), n))
    return ranked[:k]


@dataclass(frozen=True)
class ConsensusResult:
    consensus_hypnogram: Hypnogram
    soft_consensus: Hypnodensity
    per_scorer_soft_agreement: dict
    reliability_ranking: list
    participants: list


def build_consensus(
    scorers: Mapping[str, Hypnogram],
    *,
    participants: Sequence[str] | None = None,
    exclude: str | None = None,
) -> ConsensusResult:
    """Consensus hypnogram and soft-consensus for one recording of named scorers.

    Participants default to every scorer (minus ``exclude``). Names in
    ``participants`` that the recording lacks are ignored.
    """
    names = list(scorers)
    hyps = [scorers[n] for n in names]
    if exclude is not None and exclude not in scorers:
        raise ConfigError(f"unknown scorer {exclude!r}")
    reliability = soft_agreements(hyps)
    if participants is None:
        chosen = [n for n in names if n != exclude]
    else:
        chosen = [n for n in participants if n in scorers and n != exclude]
    idx = [names.index(n) for n in chosen]
    hyp = consensus_hypnogram(hyps, participants=idx, reliability=reliability, names=names)
    table = {n: float(v) for n, v in zip(names, reliability)}
    return ConsensusResult(
        consensus_hypnogram=hyp,
        soft_consensus=soft_consensus_density([scorers[n] for n in chosen]),
        per_scorer_soft_agreement=table,
        reliability_ranking=[names[i] for i in _ranking(reliability, names)],
        participants=chosen,
    )
