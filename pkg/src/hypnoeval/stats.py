"""
Paired comparisons: one-sided Wilcoxon signed-rank test, Holm adjustment,
effect size and the consistency (absolute deviation from median) measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .errors import TooFewPairs

__all__ = [
    "EXACT_MAX_N",
    "MIN_PAIRS",
    "TestResult",
    "wilcoxon_one_sided",
    "holm_adjust",
    "consistency_deviation",
    "compare_to_baseline",
]

EXACT_MAX_N = 12
MIN_PAIRS = 5


@dataclass(frozen=True)
class TestResult:
    statistic: float
    z: float
    p_raw: float
    p_adjusted: float
    effect_r: float
    n_effective: int
    method: str

    __test__ = False  # not a pytest class


def _exact_sf(doubled_ranks: np.ndarray, observed: int) -> float:
    """P(W+ >= observed) over all 2^n equally likely sign assignments."""
    n = doubled_ranks.size
    patterns = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    w = patterns @ doubled_ranks
    return float(np.count_nonzero(w >= observed) / w.size)


def wilcoxon_one_sided(
    paired_a: Sequence[float],
    paired_b: Sequence[float],
    alternative: str = "greater",
    method: str = "auto",
) -> TestResult:
    """One-sided paired Wilcoxon signed-rank test.

    Parameters
    ----------
    paired_a, paired_b : sequence of float
        Paired observations (e.g. per-recording MF1 of two models).
    alternative : {"greater", "less"}
        ``"greater"`` tests whether ``a`` tends to exceed ``b``.
    method : {"auto", "exact", "approx"}
        ``auto`` enumerates the exact null distribution when at most 12
        non-zero differences remain and uses the normal approximation
        (tie-corrected variance, continuity correction) otherwise.

    Returns
    -------
    TestResult
        ``statistic`` is the sum of positive-difference ranks of ``a - b``;
        ``effect_r`` is z / sqrt(n_effective).
    """
    a = np.asarray(paired_a, dtype=float)
    b = np.asarray(paired_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    if alternative not in ("greater", "less"):
        raise ValueError(f"alternative must be 'greater' or 'less', got {alternative!r}")
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    d = a - b if alternative == "greater" else b - a
    d = d[d != 0]
    n = d.size
    if n < MIN_PAIRS:
        raise TooFewPairs(f"{n} non-zero differences, at least {MIN_PAIRS} required")

    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48.0
    z = (w_plus - mean - 0.5) / math.sqrt(var) if var > 0 else 0.0

    if method == "exact" or (method == "auto" and n <= EXACT_MAX_N):
        # midranks are multiples of 1/2, so doubling keeps everything integral
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = _exact_sf(doubled, int(round(2 * w_plus)))
        used = "exact"
    else:
        p = float(norm.sf(z))
        used = "approx"
    p = min(max(p, np.finfo(float).tiny), 1.0)
    return TestResult(
        statistic=w_plus,
        z=float(z),
        p_raw=p,
        p_adjusted=p,
        effect_r=float(z / math.sqrt(n)),
        n_effective=int(n),
        method=used,
    )


def holm_adjust(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, returned in input order."""
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return []
    if ((p <= 0) | (p > 1)).any():
        raise ValueError("p-values must lie in (0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = np.minimum(1.0, (m - np.arange(m)) * p[order])
    adjusted = np.empty(m)
    adjusted[order] = np.maximum.accumulate(scaled)
    return adjusted.tolist()


def consistency_deviation(kappas: Sequence[float]) -> list[float]:
    """Absolute deviation of each kappa from the median kappa."""
    k = np.asarray(kappas, dtype=float)
    if k.size == 0:
        raise ValueError("need at least one value")
    return np.abs(k - np.median(k)).tolist()


def compare_to_baseline(
    columns: Mapping[str, Sequence[float]],
    baseline: str,
    alternative: str = "greater",
) -> dict[str, TestResult | str]:
    """Test every column against ``baseline`` and Holm-adjust across columns.

    Comparisons that cannot be run (too few non-zero differences) map to
    the error message instead of a result and do not count towards the
    adjustment.
    """
    results: dict[str, TestResult | str] = {}
    for name, values in columns.items():
        if name == baseline:
            continue
        try:
            results[name] = wilcoxon_one_sided(values, columns[baseline], alternative)
        except TooFewPairs as exc:
            results[name] = str(exc)
    tested = [n for n, r in results.items() if isinstance(r, TestResult)]
    adjusted = holm_adjust([results[n].p_raw for n in tested])
    for name, p_adj in zip(tested, adjusted):
        results[name] = replace(results[name], p_adjusted=p_adj)
    return results
