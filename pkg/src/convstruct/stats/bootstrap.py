"""Seeded percentile bootstrap over arbitrary resampling units."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np


class StatsError(ValueError):
    """Invalid input to a statistical routine."""


@dataclass(frozen=True)
class BootstrapConfig:
    resamples: int = 10_000
    level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.resamples < 1:
            raise StatsError(f"resamples must be >= 1, got {self.resamples}")
        if not 0.0 < self.level < 1.0:
            raise StatsError(f"level must be in (0, 1), got {self.level}")


class BootstrapInterval(NamedTuple):
    point: float
    lo: float
    hi: float


def bootstrap_ci(
    units: Sequence,
    statistic: Callable[[Sequence], float],
    config: BootstrapConfig | None = None,
) -> BootstrapInterval:
    """Percentile interval for `statistic` over units resampled with replacement.

    The point estimate is the statistic on the full data. The resample index
    matrix is drawn up front from a generator seeded with config.seed, so the
    interval is a deterministic function of (units, statistic, config) and two
    calls with the same seed see identical resamples. Numeric unit arrays take
    a vectorized indexing path; anything else is resampled as plain lists.
    """
    config = config or BootstrapConfig()
    n = len(units)
    if n == 0:
        raise StatsError("bootstrap needs at least one resampling unit")
    point = float(statistic(units))
    rng = np.random.default_rng(config.seed)
    idx = rng.integers(0, n, size=(config.resamples, n))

    arr = None
    if isinstance(units, np.ndarray) and units.ndim == 1 and units.dtype != object:
        arr = units
    else:
        try:
            candidate = np.asarray(units)
            if candidate.ndim == 1 and candidate.dtype.kind in "bifu":
                arr = candidate
        except (ValueError, TypeError):
            arr = None

    if arr is not None:
        samples = arr[idx]
        values = np.array([float(statistic(samples[b])) for b in range(config.resamples)])
    else:
        values = np.array([
            float(statistic([units[j] for j in idx[b]])) for b in range(config.resamples)
        ])

    alpha = (1.0 - config.level) / 2.0
    lo, hi = np.quantile(values, [alpha, 1.0 - alpha])
    return BootstrapInterval(point, float(lo), float(hi))
