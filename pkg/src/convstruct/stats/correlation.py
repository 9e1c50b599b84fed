"""Spearman rank correlation and signed explained rank-variance."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import stdtr

from .bootstrap import StatsError


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties assigned the average of their rank range."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Spearman's rho with a two-sided p from the t approximation (n-2 df).

    Ranks are tie-averaged and correlated with Pearson's formula. Constant
    inputs have no defined rank correlation and raise.
    """
    if len(x) != len(y):
        raise StatsError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise StatsError(f"need at least 3 points, got {n}")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float((dx * dx).sum())
    syy = float((dy * dy).sum())
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("correlation is undefined for a constant input vector")
    # identical or reversed ranks are exactly +/-1; the float path may not be
    if np.array_equal(rx, ry):
        return 1.0, 0.0
    if np.array_equal(rx, (n + 1) - ry):
        return -1.0, 0.0
    rho = float((dx * dy).sum() / np.sqrt(sxx * syy))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return rho, p


def signed_rank_variance(rho: float) -> float:
    """sign(rho) * rho^2 * 100: rank variance explained, keeping direction."""
    if not -1.0 <= rho <= 1.0:
        raise StatsError(f"rho must lie in [-1, 1], got {rho}")
    return float(np.sign(rho) * rho * rho * 100.0)
