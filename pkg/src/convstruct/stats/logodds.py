"""Weighted log-odds with an informative Dirichlet prior, stratified by show.

Per term t and show s, the group-difference statistic contrasts group a
against group b with prior counts alpha_t = C* x p_t proportional to the
term's background frequency:

    delta_ts = log[(y_tsa + a_t) / (n_sa + a_0 - y_tsa - a_t)]
             - log[(y_tsb + a_t) / (n_sb + a_0 - y_tsb - a_t)]
    sigma2_ts ~= 1/(y_tsa + a_t) + 1/(y_tsb + a_t)
    zeta_ts = delta_ts / sqrt(sigma2_ts)

The prior strength C* is set by Empirical Bayes calibration: permute group
labels within each show and pick the grid value whose null z-scores have
standard deviation closest to 1. Per-show z-scores aggregate across the k
shows with equal-weight Stouffer combination, Z_t = sum(zeta_ts) / sqrt(k).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bootstrap import StatsError

GROUP_A = "a"
GROUP_B = "b"

_APOSTROPHES = str.maketrans({"’": "'", "ʼ": "'"})
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics, keeping internal apostrophes."""
    return _TOKEN_RE.findall(text.lower().translate(_APOSTROPHES))


@dataclass(frozen=True)
class Document:
    """One resampling/permutation unit: a bag of tokens with show and group."""

    show_id: str
    group: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.group not in (GROUP_A, GROUP_B):
            raise StatsError(f"group must be '{GROUP_A}' or '{GROUP_B}', got {self.group!r}")


@dataclass(frozen=True)
class TermCounts:
    """Term counts per (show, group) plus pooled background frequencies.

    Rows are shows, columns the kept vocabulary. When built from documents the
    per-document term matrix is retained so group labels can be permuted for
    prior calibration.
    """

    terms: tuple[str, ...]
    shows: tuple[str, ...]
    y_a: np.ndarray  # (S, T) counts in group a
    y_b: np.ndarray  # (S, T) counts in group b
    p: np.ndarray    # (T,) background frequencies, sums to 1
    doc_matrix: np.ndarray | None = None   # (D, T) per-document counts
    doc_show: np.ndarray | None = None     # (D,) show row index
    doc_in_a: np.ndarray | None = None     # (D,) True where the document is group a

    @property
    def n_a(self) -> np.ndarray:
        return self.y_a.sum(axis=1)

    @property
    def n_b(self) -> np.ndarray:
        return self.y_b.sum(axis=1)

    @classmethod
    def from_documents(cls, docs: Sequence[Document], min_count: int = 5) -> "TermCounts":
        """Build counts from documents, dropping terms rarer than min_count pooled."""
        if not docs:
            raise StatsError("no documents")
        pooled: Counter = Counter()
        for d in docs:
            pooled.update(d.tokens)
        terms = tuple(sorted(t for t, c in pooled.items() if c >= min_count))
        if not terms:
            raise StatsError(f"no term reaches the minimum pooled count of {min_count}")
        term_idx = {t: i for i, t in enumerate(terms)}
        shows = tuple(sorted({d.show_id for d in docs}))
        show_idx = {s: i for i, s in enumerate(shows)}

        matrix = np.zeros((len(docs), len(terms)), dtype=np.float64)
        doc_show = np.zeros(len(docs), dtype=np.int64)
        doc_in_a = np.zeros(len(docs), dtype=bool)
        for row, d in enumerate(docs):
            doc_show[row] = show_idx[d.show_id]
            doc_in_a[row] = d.group == GROUP_A
            for token, count in Counter(d.tokens).items():
                col = term_idx.get(token)
                if col is not None:
                    matrix[row, col] = count

        y_a = np.zeros((len(shows), len(terms)))
        y_b = np.zeros((len(shows), len(terms)))
        for s in range(len(shows)):
            rows = doc_show == s
            y_a[s] = matrix[rows & doc_in_a].sum(axis=0)
            y_b[s] = matrix[rows & ~doc_in_a].sum(axis=0)
        total = y_a.sum() + y_b.sum()
        p = (y_a.sum(axis=0) + y_b.sum(axis=0)) / total
        return cls(terms, shows, y_a, y_b, p, matrix, doc_show, doc_in_a)

    @classmethod
    def from_count_tables(
        cls,
        terms: Sequence[str],
        shows: Sequence[str],
        y_a: np.ndarray,
        y_b: np.ndarray,
        p: np.ndarray | None = None,
    ) -> "TermCounts":
        """Build from explicit count tables; background defaults to pooled frequency."""
        y_a = np.asarray(y_a, dtype=np.float64)
        y_b = np.asarray(y_b, dtype=np.float64)
        if y_a.shape != (len(shows), len(terms)) or y_b.shape != y_a.shape:
            raise StatsError("count tables must be (n_shows, n_terms)")
        if (y_a < 0).any() or (y_b < 0).any():
            raise StatsError("counts must be non-negative")
        if p is None:
            total = y_a.sum() + y_b.sum()
            if total == 0:
                raise StatsError("all counts are zero")
            p = (y_a.sum(axis=0) + y_b.sum(axis=0)) / total
        else:
            p = np.asarray(p, dtype=np.float64)
            if p.shape != (len(terms),) or (p <= 0).any():
                raise StatsError("background frequencies must be positive per term")
            if abs(float(p.sum()) - 1.0) > 1e-9:
                raise StatsError("background frequencies must sum to 1")
        return cls(tuple(terms), tuple(shows), y_a, y_b, p)

    def swapped(self) -> "TermCounts":
        """Groups a and b exchanged; negates every delta and zeta exactly."""
        return TermCounts(
            self.terms, self.shows, self.y_b.copy(), self.y_a.copy(), self.p,
            self.doc_matrix, self.doc_show,
            None if self.doc_in_a is None else ~self.doc_in_a,
        )


def _zeta_core(
    y_a: np.ndarray, y_b: np.ndarray, p: np.ndarray, c_star: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """delta, sigma2, zeta arrays; cells with bad denominators come back NaN."""
    alpha = c_star * p
    alpha0 = c_star  # sum of alpha since p sums to 1
    n_a = y_a.sum(axis=1, keepdims=True)
    n_b = y_b.sum(axis=1, keepdims=True)
    den_a = n_a + alpha0 - y_a - alpha
    den_b = n_b + alpha0 - y_b - alpha
    valid = (den_a > 0) & (den_b > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = (np.log(y_a + alpha) - np.log(den_a)) - (
            np.log(y_b + alpha) - np.log(den_b)
        )
        sigma2 = 1.0 / (y_a + alpha) + 1.0 / (y_b + alpha)
        zeta = delta / np.sqrt(sigma2)
    delta = np.where(valid, delta, np.nan)
    zeta = np.where(valid, zeta, np.nan)
    return delta, sigma2, zeta


def weighted_logodds(
    counts: TermCounts, c_star: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-show, per-term (delta, sigma2, zeta) arrays of shape (S, T)."""
    if c_star <= 0:
        raise StatsError(f"prior strength must be positive, got {c_star}")
    delta, sigma2, zeta = _zeta_core(counts.y_a, counts.y_b, counts.p, c_star)
    if np.isnan(delta).any():
        s, t = np.argwhere(np.isnan(delta))[0]
        raise StatsError(
            f"non-positive log-odds denominator for term {counts.terms[t]!r} "
            f"in show {counts.shows[s]!r}"
        )
    return delta, sigma2, zeta


def stouffer(zetas: Sequence[float]) -> float:
    """Equal-weight Stouffer combination: sum(z) / sqrt(k)."""
    values = np.asarray(zetas, dtype=np.float64)
    if values.size < 1:
        raise StatsError("Stouffer combination needs at least one z-score")
    if not np.isfinite(values).all():
        raise StatsError("Stouffer combination requires finite z-scores")
    return float(values.sum() / np.sqrt(values.size))


def calibrate_prior(
    counts: TermCounts,
    grid: Sequence[float],
    permutations: int,
    seed: int = 0,
) -> float:
    """Pick the grid value whose permutation-null z-scores have sd closest to 1.

    Document group labels are permuted within each show; the same permutation
    set is reused for every candidate so the comparison is paired and the
    result deterministic in (counts, grid, permutations, seed). Ties resolve
    to the smaller prior strength.
    """
    if not len(grid):
        raise StatsError("calibration grid is empty")
    if any(c <= 0 for c in grid):
        raise StatsError("grid values must be positive")
    if permutations < 1:
        raise StatsError(f"permutations must be >= 1, got {permutations}")
    if counts.doc_matrix is None or counts.doc_show is None or counts.doc_in_a is None:
        raise StatsError(
            "calibration permutes document labels: build TermCounts.from_documents"
        )
    show_rows = [np.flatnonzero(counts.doc_show == s) for s in range(len(counts.shows))]
    if not any(len(rows) >= 2 for rows in show_rows):
        raise StatsError(
            "degenerate corpus: no show has two or more documents to permute"
        )

    rngs = [np.random.default_rng(child)
            for child in np.random.SeedSequence(seed).spawn(permutations)]
    permuted_tables = []
    for rng in rngs:
        y_a = np.zeros_like(counts.y_a)
        y_b = np.zeros_like(counts.y_b)
        for s, rows in enumerate(show_rows):
            labels = rng.permutation(counts.doc_in_a[rows])
            y_a[s] = counts.doc_matrix[rows][labels].sum(axis=0)
            y_b[s] = counts.doc_matrix[rows][~labels].sum(axis=0)
        permuted_tables.append((y_a, y_b))

    best_c = None
    best_gap = None
    for candidate in sorted(float(c) for c in grid):
        null_zetas = []
        for y_a, y_b in permuted_tables:
            _, _, zeta = _zeta_core(y_a, y_b, counts.p, candidate)
            null_zetas.append(zeta[np.isfinite(zeta)])
        pooled = np.concatenate(null_zetas)
        if pooled.size < 2:
            continue
        gap = abs(float(pooled.std(ddof=1)) - 1.0)
        if best_gap is None or gap < best_gap:
            best_c, best_gap = candidate, gap
    if best_c is None:
        raise StatsError("calibration produced no usable null z-scores")
    return best_c


@dataclass(frozen=True)
class LogOddsResult:
    """Calibrated log-odds analysis: per-show tables and aggregated z-scores."""

    c_star: float
    terms: tuple[str, ...]
    shows: tuple[str, ...]
    delta: np.ndarray   # (S, T)
    sigma2: np.ndarray  # (S, T)
    zeta: np.ndarray    # (S, T)
    z: np.ndarray       # (T,) Stouffer-aggregated over shows

    def ranked_terms(self) -> list[tuple[str, float]]:
        """Terms with aggregated z, most group-a-associated first."""
        order = np.argsort(-self.z, kind="stable")
        return [(self.terms[i], float(self.z[i])) for i in order]


def weighted_logodds_analysis(
    counts: TermCounts,
    c_star: float | None = None,
    grid: Sequence[float] | None = None,
    permutations: int = 20,
    seed: int = 0,
) -> LogOddsResult:
    """Full pipeline: calibrate C* (unless given), score terms, aggregate shows.

    The default grid is logarithmic from 1 to 10^4.
    """
    if c_star is None:
        if grid is None:
            grid = np.logspace(0, 4, 9)
        c_star = calibrate_prior(counts, grid, permutations, seed)
    delta, sigma2, zeta = weighted_logodds(counts, c_star)
    k = len(counts.shows)
    z = zeta.sum(axis=0) / np.sqrt(k)
    return LogOddsResult(
        c_star=float(c_star),
        terms=counts.terms,
        shows=counts.shows,
        delta=delta,
        sigma2=sigma2,
        zeta=zeta,
        z=z,
    )
