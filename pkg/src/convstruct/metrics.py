"""The seven-score evaluation suite for conversational roles and threads.

Role scores (speaker accuracy, addressee and side-participant set F1) compare
per-line labels; thread scores (link F1, 1-NVI, one-to-one overlap, exact
match F1) compare reply-to links and the partitions they induce. All scores
live on a 0..100 scale and evaluating any input against itself is exactly 100.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import StructureRecord
from .threads import LinkSet, ThreadPartition, derive_threads, link_set
from .stats.bootstrap import BootstrapConfig, bootstrap_ci


class MetricInputError(ValueError):
    """Gold and prediction do not cover the same lines or clips."""


METRIC_FIELDS = (
    "speaker_acc",
    "addressee_f1",
    "side_participant_f1",
    "link_f1",
    "nvi_score",
    "one_to_one",
    "exact_match_f1",
)


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def _speaker_key(record: StructureRecord):
    return (record.speaker.kind, record.speaker.canonical_name)


def _check_alignment(gold: Sequence[StructureRecord],
                     pred: Sequence[StructureRecord]) -> list[int]:
    gold_lines = sorted(r.line_idx for r in gold)
    pred_lines = sorted(r.line_idx for r in pred)
    if gold_lines != pred_lines:
        raise MetricInputError(
            f"gold and prediction cover different lines "
            f"(gold {gold_lines[:8]}..., pred {pred_lines[:8]}...)"
        )
    if len(set(gold_lines)) != len(gold_lines):
        raise MetricInputError("duplicate line_idx in records")
    return gold_lines


def speaker_accuracy(gold: Sequence[StructureRecord],
                     pred: Sequence[StructureRecord]) -> float:
    """Fraction of lines whose predicted speaker matches gold (kind + name)."""
    lines = _check_alignment(gold, pred)
    if not lines:
        raise MetricInputError("cannot score an empty record list")
    g = {r.line_idx: _speaker_key(r) for r in gold}
    p = {r.line_idx: _speaker_key(r) for r in pred}
    matches = sum(1 for i in lines if g[i] == p[i])
    return matches / len(lines)


def set_f1(gold_set: frozenset, pred_set: frozenset) -> float:
    """Per-line set F1. Both sets empty is a correct prediction and scores 1."""
    if not gold_set and not pred_set:
        return 1.0
    if not gold_set or not pred_set:
        return 0.0
    tp = len(gold_set & pred_set)
    if tp == 0:
        return 0.0
    precision = tp / len(pred_set)
    recall = tp / len(gold_set)
    return 2 * precision * recall / (precision + recall)


def role_set_f1(gold_sets: Sequence[frozenset],
                pred_sets: Sequence[frozenset]) -> float:
    """Macro average over lines of per-line set F1."""
    if len(gold_sets) != len(pred_sets):
        raise MetricInputError(
            f"mismatched coverage: {len(gold_sets)} gold vs {len(pred_sets)} predicted sets"
        )
    if not gold_sets:
        raise MetricInputError("cannot score an empty set list")
    return sum(set_f1(g, p) for g, p in zip(gold_sets, pred_sets)) / len(gold_sets)


def link_f1(gold: LinkSet, pred: LinkSet) -> PRF:
    """Precision/recall/F1 over exact (child, parent) reply pairs."""
    if not gold and not pred:
        return PRF(1.0, 1.0, 1.0)
    tp = len(gold & pred)
    precision = tp / len(pred) if pred else 0.0
    recall = tp / len(gold) if gold else 0.0
    if precision + recall == 0:
        return PRF(precision, recall, 0.0)
    return PRF(precision, recall, 2 * precision * recall / (precision + recall))


def _check_same_elements(gold: ThreadPartition, pred: ThreadPartition) -> int:
    if gold.elements != pred.elements:
        raise MetricInputError("partitions cover different element sets")
    n = gold.n
    if n == 0:
        raise MetricInputError("cannot compare empty partitions")
    return n


def _contingency(gold: ThreadPartition, pred: ThreadPartition) -> np.ndarray:
    matrix = np.zeros((len(gold.clusters), len(pred.clusters)), dtype=np.int64)
    for i, g in enumerate(gold.clusters):
        for j, p in enumerate(pred.clusters):
            matrix[i, j] = len(g & p)
    return matrix


def nvi_score(gold: ThreadPartition, pred: ThreadPartition) -> float:
    """100 x (1 - VI / log2 n), clamped to [0, 100].

    VI is the variation of information H(C) + H(C') - 2 I(C, C') in bits.
    Identical partitions score exactly 100 (VI is zero by definition, so the
    floating-point path is skipped); n = 1 is defined as 100.
    """
    n = _check_same_elements(gold, pred)
    if set(gold.clusters) == set(pred.clusters):
        return 100.0
    if n == 1:
        return 100.0

    def entropy(partition: ThreadPartition) -> float:
        return -sum((len(c) / n) * math.log2(len(c) / n) for c in partition.clusters)

    mutual = 0.0
    for g in gold.clusters:
        for p in pred.clusters:
            m = len(g & p)
            if m:
                mutual += (m / n) * math.log2((m * n) / (len(g) * len(p)))
    vi = entropy(gold) + entropy(pred) - 2 * mutual
    score = 100.0 * (1.0 - vi / math.log2(n))
    return min(100.0, max(0.0, score))


def one_to_one(gold: ThreadPartition, pred: ThreadPartition) -> float:
    """Best injective gold-to-predicted cluster pairing, as percent of n.

    Solved exactly as a maximum-weight rectangular assignment over the
    contingency matrix; unmatched clusters contribute zero overlap.
    """
    n = _check_same_elements(gold, pred)
    matrix = _contingency(gold, pred)
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    total = int(matrix[rows, cols].sum())
    return 100.0 * (total / n)


def exact_match(gold: ThreadPartition, pred: ThreadPartition) -> PRF:
    """Precision/recall/F1 over clusters recovered identically."""
    _check_same_elements(gold, pred)
    matches = len(set(gold.clusters) & set(pred.clusters))
    precision = matches / len(pred.clusters)
    recall = matches / len(gold.clusters)
    if precision + recall == 0:
        return PRF(precision, recall, 0.0)
    return PRF(precision, recall, 2 * precision * recall / (precision + recall))


@dataclass
class EvalConfig:
    """Evaluation switches: aggregation granularity, line filtering, CIs."""

    aggregate: str = "micro"  # "micro": roles pooled over lines; "macro": per clip
    filter_nondialogic: bool = False  # drop lines flagged extra-diegetic/monologue
    bootstrap: BootstrapConfig | None = None

    def __post_init__(self):
        if self.aggregate not in ("micro", "macro"):
            raise ValueError(f"aggregate must be 'micro' or 'macro', got {self.aggregate!r}")


@dataclass(frozen=True)
class ClipScore:
    """Per-clip sufficient statistics; aggregation and bootstrap work on these."""

    clip_id: str
    n_lines: int
    speaker_matches: int
    addressee_f1_sum: float
    side_f1_sum: float
    link_f1: float
    nvi: float
    one_to_one: float
    exact_match_f1: float


@dataclass
class MetricReport:
    """The seven scores (percent) plus counts and optional bootstrap CIs."""

    speaker_acc: float
    addressee_f1: float
    side_participant_f1: float
    link_f1: float
    nvi_score: float
    one_to_one: float
    exact_match_f1: float
    n_utterances: int
    n_clips: int
    ci: dict[str, tuple[float, float]] = field(default_factory=dict)

    def scores(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_FIELDS}

    def as_dict(self) -> dict:
        """Fixed key order, 2-decimal display values, full precision under raw."""
        out: dict = {name: round(getattr(self, name), 2) for name in METRIC_FIELDS}
        out["n_utterances"] = self.n_utterances
        out["n_clips"] = self.n_clips
        if self.ci:
            out["ci"] = {
                name: [round(lo, 2), round(hi, 2)] for name, (lo, hi) in self.ci.items()
            }
        out["raw"] = {name: getattr(self, name) for name in METRIC_FIELDS}
        if self.ci:
            out["raw"]["ci"] = {name: list(bounds) for name, bounds in self.ci.items()}
        return out


def _restrict_partition(partition: ThreadPartition, kept: set[int]) -> ThreadPartition:
    clusters = [c & kept for c in partition.clusters]
    return ThreadPartition.from_clusters([c for c in clusters if c])


def score_clip(clip_id: str, gold: Sequence[StructureRecord],
               pred: Sequence[StructureRecord],
               filter_nondialogic: bool = False) -> ClipScore | None:
    """Compute one clip's sufficient statistics, or None if filtering left nothing.

    Filtering drops lines flagged non-dialogic in gold from role scoring and
    restricts link sets and partitions to the surviving lines.
    """
    _check_alignment(gold, pred)
    gold_by_line = {r.line_idx: r for r in gold}
    pred_by_line = {r.line_idx: r for r in pred}
    if filter_nondialogic:
        kept = {i for i, r in gold_by_line.items() if not r.is_nondialogic}
    else:
        kept = set(gold_by_line)
    if not kept:
        return None
    lines = sorted(kept)

    matches = sum(
        1 for i in lines
        if _speaker_key(gold_by_line[i]) == _speaker_key(pred_by_line[i])
    )
    addr_sum = sum(
        set_f1(gold_by_line[i].addressees, pred_by_line[i].addressees) for i in lines
    )
    side_sum = sum(
        set_f1(gold_by_line[i].side_participants, pred_by_line[i].side_participants)
        for i in lines
    )

    gold_links = frozenset((c, p) for c, p in link_set(gold) if c in kept and p in kept)
    pred_links = frozenset((c, p) for c, p in link_set(pred) if c in kept and p in kept)
    gold_part = _restrict_partition(derive_threads(gold), kept)
    pred_part = _restrict_partition(derive_threads(pred), kept)

    return ClipScore(
        clip_id=clip_id,
        n_lines=len(lines),
        speaker_matches=matches,
        addressee_f1_sum=addr_sum,
        side_f1_sum=side_sum,
        link_f1=link_f1(gold_links, pred_links).f1,
        nvi=nvi_score(gold_part, pred_part),
        one_to_one=one_to_one(gold_part, pred_part),
        exact_match_f1=exact_match(gold_part, pred_part).f1,
    )


def _aggregate(stats: Sequence[ClipScore], aggregate: str) -> dict[str, float]:
    if not stats:
        raise MetricInputError("no scorable clips after filtering")
    n_clips = len(stats)
    if aggregate == "micro":
        total = sum(s.n_lines for s in stats)
        speaker = sum(s.speaker_matches for s in stats) / total
        addressee = sum(s.addressee_f1_sum for s in stats) / total
        side = sum(s.side_f1_sum for s in stats) / total
    else:
        speaker = sum(s.speaker_matches / s.n_lines for s in stats) / n_clips
        addressee = sum(s.addressee_f1_sum / s.n_lines for s in stats) / n_clips
        side = sum(s.side_f1_sum / s.n_lines for s in stats) / n_clips
    return {
        "speaker_acc": 100.0 * speaker,
        "addressee_f1": 100.0 * addressee,
        "side_participant_f1": 100.0 * side,
        # partitions are per-clip objects: thread scores always average per clip
        "link_f1": 100.0 * sum(s.link_f1 for s in stats) / n_clips,
        "nvi_score": sum(s.nvi for s in stats) / n_clips,
        "one_to_one": sum(s.one_to_one for s in stats) / n_clips,
        "exact_match_f1": 100.0 * sum(s.exact_match_f1 for s in stats) / n_clips,
    }


def evaluate_corpus(
    gold_clips: Mapping[str, Sequence[StructureRecord]],
    pred_clips: Mapping[str, Sequence[StructureRecord]],
    config: EvalConfig | None = None,
) -> MetricReport:
    """Score a prediction corpus against gold, clip set must match exactly.

    Role metrics pool over utterances ("micro", the default) or average per
    clip ("macro"); thread metrics are per-clip averages in both modes.
    Bootstrap CIs, when configured, resample clips.
    """
    config = config or EvalConfig()
    if set(gold_clips) != set(pred_clips):
        only_gold = sorted(set(gold_clips) - set(pred_clips))
        only_pred = sorted(set(pred_clips) - set(gold_clips))
        raise MetricInputError(
            f"clip sets differ (gold only {only_gold[:5]}, pred only {only_pred[:5]})"
        )
    if not gold_clips:
        raise MetricInputError("no clips to evaluate")

    stats = []
    for clip_id in sorted(gold_clips):
        score = score_clip(clip_id, gold_clips[clip_id], pred_clips[clip_id],
                           filter_nondialogic=config.filter_nondialogic)
        if score is not None:
            stats.append(score)
    values = _aggregate(stats, config.aggregate)

    ci: dict[str, tuple[float, float]] = {}
    if config.bootstrap is not None and stats:
        for name in METRIC_FIELDS:
            interval = bootstrap_ci(
                stats,
                lambda resampled, _name=name: _aggregate(resampled, config.aggregate)[_name],
                config.bootstrap,
            )
            ci[name] = (interval.lo, interval.hi)

    return MetricReport(
        **values,
        n_utterances=sum(s.n_lines for s in stats),
        n_clips=len(stats),
        ci=ci,
    )
