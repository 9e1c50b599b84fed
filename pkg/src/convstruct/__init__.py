"""convstruct: multi-party conversation structure toolkit.

Parses per-utterance role and reply-to annotations, derives conversational
threads, scores predicted structure against gold, runs the heuristic
baseline, and performs the statistical analyses (bootstrap CIs, rank
correlations, calibrated Dirichlet log-odds, multinomial regression, and
gendered thread dynamics).
"""

__version__ = "0.1.0"

from .corpus import (
    Clip,
    CorpusError,
    Diagnostic,
    ParseError,
    Participant,
    StructureRecord,
    Utterance,
    ValidationError,
    normalize_name,
    parse_annotation_json,
    parse_transcript_tsv,
    serialize_annotation_json,
    validate_clip,
)
from .threads import LinkSet, ThreadPartition, derive_threads, link_set, thread_events
from .metrics import (
    EvalConfig,
    MetricInputError,
    MetricReport,
    evaluate_corpus,
    exact_match,
    link_f1,
    nvi_score,
    one_to_one,
    role_set_f1,
    speaker_accuracy,
)
from .agreement import AgreementError, AnnotatorBatch, pairwise_agreement
from .baseline import (
    FaceTrack,
    WordToken,
    face_word_counts,
    run_baseline,
    run_reply_only_baseline,
)

__all__ = [
    "__version__",
    "Clip",
    "CorpusError",
    "Diagnostic",
    "ParseError",
    "Participant",
    "StructureRecord",
    "Utterance",
    "ValidationError",
    "normalize_name",
    "parse_annotation_json",
    "parse_transcript_tsv",
    "serialize_annotation_json",
    "validate_clip",
    "LinkSet",
    "ThreadPartition",
    "derive_threads",
    "link_set",
    "thread_events",
    "EvalConfig",
    "MetricInputError",
    "MetricReport",
    "evaluate_corpus",
    "exact_match",
    "link_f1",
    "nvi_score",
    "one_to_one",
    "role_set_f1",
    "speaker_accuracy",
    "AgreementError",
    "AnnotatorBatch",
    "pairwise_agreement",
    "FaceTrack",
    "WordToken",
    "face_word_counts",
    "run_baseline",
    "run_reply_only_baseline",
]
