"""Inter-annotator agreement: average of all pairwise metric comparisons.

Several scores are asymmetric in (gold, pred), so each annotator pair is
evaluated in both directions and the two results averaged; the overall report
is the unweighted mean over pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import StructureRecord
from .metrics import METRIC_FIELDS, EvalConfig, MetricReport, evaluate_corpus


class AgreementError(ValueError):
    """No usable annotator pairs."""


@dataclass(frozen=True)
class AnnotatorBatch:
    """One annotator's records, keyed by clip (each clip at most once)."""

    annotator_id: str
    records_by_clip: Mapping[str, Sequence[StructureRecord]]


@dataclass
class AgreementReport:
    overall: MetricReport
    per_pair: dict[tuple[str, str], MetricReport]
    skipped_pairs: list[tuple[str, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            # several metrics are asymmetric; pair scores average both
            # gold/pred orientations, so callers can see the convention
            "symmetrization": "mean of both gold/pred directions",
            "overall": self.overall.as_dict(),
            "per_pair": {
                f"{a}|{b}": report.as_dict()
                for (a, b), report in sorted(self.per_pair.items())
            },
            "skipped_pairs": [list(pair) for pair in sorted(self.skipped_pairs)],
        }


def _mean_report(reports: Sequence[MetricReport], n_utterances: int,
                 n_clips: int) -> MetricReport:
    values = {
        name: sum(getattr(r, name) for r in reports) / len(reports)
        for name in METRIC_FIELDS
    }
    return MetricReport(**values, n_utterances=n_utterances, n_clips=n_clips)


def pairwise_agreement(
    batches: Sequence[AnnotatorBatch], config: EvalConfig | None = None
) -> AgreementReport:
    """Agreement over every unordered annotator pair, on their shared clips.

    Pairs with no shared clips are skipped with a warning; if no pair shares
    any clip the computation fails. Scores are direction-symmetrized by
    evaluating each pair both ways and averaging.
    """
    if len(batches) < 2:
        raise AgreementError(f"need at least 2 annotators, got {len(batches)}")
    ids = [b.annotator_id for b in batches]
    if len(set(ids)) != len(ids):
        raise AgreementError(f"duplicate annotator ids: {sorted(ids)}")
    config = config or EvalConfig()

    per_pair: dict[tuple[str, str], MetricReport] = {}
    skipped: list[tuple[str, str]] = []
    ordered = sorted(batches, key=lambda b: b.annotator_id)
    for i, first in enumerate(ordered):
        for second in ordered[i + 1:]:
            pair = (first.annotator_id, second.annotator_id)
            shared = sorted(set(first.records_by_clip) & set(second.records_by_clip))
            if not shared:
                warnings.warn(f"annotators {pair[0]!r} and {pair[1]!r} share no clips")
                skipped.append(pair)
                continue
            left = {c: first.records_by_clip[c] for c in shared}
            right = {c: second.records_by_clip[c] for c in shared}
            forward = evaluate_corpus(left, right, config)
            backward = evaluate_corpus(right, left, config)
            per_pair[pair] = _mean_report(
                [forward, backward],
                n_utterances=forward.n_utterances,
                n_clips=forward.n_clips,
            )
    if not per_pair:
        raise AgreementError("no annotator pair shares any clip")

    clip_sets = [set(b.records_by_clip) for b in batches]
    all_clips = set().union(*clip_sets)
    overall = _mean_report(
        list(per_pair.values()),
        n_utterances=sum(r.n_utterances for r in per_pair.values()),
        n_clips=len(all_clips),
    )
    return AgreementReport(overall=overall, per_pair=per_pair, skipped_pairs=skipped)
