"""Data model, parsing, and validation for clips, transcripts, cast lists, and
structure annotations.

A clip is an ordered list of utterances plus an optional per-line structure
annotation (speaker, addressees, side-participants, reply-to). Everything here
is immutable after construction and safe to share across workers. Parsing is
strict by default; `scan_annotation_json` is the lenient variant that returns
diagnostics instead of raising, which is what the `validate` command uses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping


class CorpusError(ValueError):
    """Base error for malformed corpus inputs."""


class ParseError(CorpusError):
    """A byte stream could not be parsed at all (bad row, bad type)."""


class ValidationError(CorpusError):
    """Parsed content violates structural invariants.

    Carries the full list of diagnostics so callers see every violation,
    not just the first.
    """

    def __init__(self, diagnostics: list["Diagnostic"]):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(d.describe() for d in self.diagnostics)
        super().__init__(f"{len(self.diagnostics)} violation(s): {lines}")


# Participant kinds
REGULAR = "regular"
UNKNOWN = "unknown"
CROWD = "crowd"
NONE = "none"
OFF_SCREEN = "off_screen"

_RESERVED_TOKENS = {"unknown": UNKNOWN, "crowd": CROWD, "none": NONE}
_OS_SUFFIX = "_os"

GENDERS = ("female", "male", "unspecified")


@dataclass(frozen=True)
class Participant:
    """A conversational participant, identified by kind plus canonical name.

    Gender is carried as metadata (from an external table) and never takes
    part in identity comparisons.
    """

    canonical_name: str
    kind: str = REGULAR
    gender: str | None = field(default=None, compare=False)

    @property
    def token(self) -> str:
        """Serialized form: the string that round-trips through annotation JSON."""
        if self.kind == OFF_SCREEN:
            return f"{self.canonical_name}_OS"
        return self.canonical_name

    @property
    def is_special(self) -> bool:
        return self.kind != REGULAR

    def with_gender(self, gender: str | None) -> "Participant":
        return Participant(self.canonical_name, self.kind, gender)


def normalize_name(raw: str) -> Participant:
    """Map a raw name string to a Participant reference.

    Lowercases, collapses internal whitespace, and trims. The reserved tokens
    "unknown", "crowd", and "none" map to their special kinds; a trailing
    `_OS` marker (any case) maps to an off-screen participant with the base
    name retained.
    """
    if raw is None:
        raise CorpusError("participant name is missing")
    name = " ".join(raw.split()).lower()
    if not name:
        raise CorpusError(f"participant name is empty after trimming: {raw!r}")
    if name in _RESERVED_TOKENS:
        return Participant(name, _RESERVED_TOKENS[name])
    if name.endswith(_OS_SUFFIX):
        base = " ".join(name[: -len(_OS_SUFFIX)].split())
        if not base:
            raise CorpusError(f"off-screen marker with empty base name: {raw!r}")
        return Participant(base, OFF_SCREEN)
    return Participant(name, REGULAR)


@dataclass(frozen=True)
class Utterance:
    """One transcribed line, with clip-relative index and timestamps in seconds."""

    clip_id: str
    line_idx: int
    start_s: float
    end_s: float
    text: str
    speaker_hint: str | None = None

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class StructureRecord:
    """Gold or predicted structure for one line.

    The speaker is excluded from both role sets by construction; a self
    reply_to (reply_to == line_idx) marks the start of a new thread.
    """

    line_idx: int
    speaker: Participant
    addressees: frozenset[Participant]
    side_participants: frozenset[Participant]
    reply_to: int
    extra_diegetic: bool = False
    monologue: bool = False

    @property
    def is_thread_start(self) -> bool:
        return self.reply_to == self.line_idx

    @property
    def is_nondialogic(self) -> bool:
        return self.extra_diegetic or self.monologue


@dataclass(frozen=True)
class Clip:
    """A clip: cast, ordered utterances, and optional gold structure records."""

    clip_id: str
    show_id: str = ""
    cast: tuple[Participant, ...] = ()
    utterances: tuple[Utterance, ...] = ()
    gold: tuple[StructureRecord, ...] | None = None


# Diagnostic codes emitted by validation
FORWARD_LINK = "FORWARD_LINK"
BAD_REPLY_TO = "BAD_REPLY_TO"
ROLE_OVERLAP = "ROLE_OVERLAP"
SPEAKER_IN_ROLES = "SPEAKER_IN_ROLES"
DUPLICATE_LINE = "DUPLICATE_LINE"
NONCONTIGUOUS_LINES = "NONCONTIGUOUS_LINES"
GOLD_COVERAGE = "GOLD_COVERAGE"
UNRESOLVED_NAME = "UNRESOLVED_NAME"
TIME_ORDER = "TIME_ORDER"
OVERLAP = "OVERLAP"
MISSING_KEY = "MISSING_KEY"
BAD_TYPE = "BAD_TYPE"
BAD_NAME = "BAD_NAME"
UNKNOWN_KEY = "UNKNOWN_KEY"

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    """A machine-readable validation finding."""

    code: str
    severity: str
    message: str
    clip_id: str = ""
    line_idx: int | None = None

    def describe(self) -> str:
        where = f" line {self.line_idx}" if self.line_idx is not None else ""
        clip = f" [{self.clip_id}]" if self.clip_id else ""
        return f"{self.code}{clip}{where}: {self.message}"

    def as_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "line_idx": self.line_idx,
            "code": self.code,
            "severity": self.severity,
            "message": self.message,
        }


TRANSCRIPT_HEADER = ("start", "end", "speaker", "text")


def _parse_seconds(cell: str, row: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"row {row}: non-numeric {col} timestamp {cell!r}") from None
    # millisecond precision, stored exactly; keeps golden files bit-stable
    return round(value, 3)


def parse_transcript_tsv(data: bytes, clip_id: str = "") -> list[Utterance]:
    """Parse a transcript TSV (header `start end speaker text`, tab-separated).

    Returns utterances in file order with line_idx assigned 1..n. The speaker
    column is kept verbatim as a provisional hint; gold speakers come from
    annotations, not from here.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"transcript is not valid UTF-8: {exc}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("transcript is empty (missing header row)")
    header = tuple(lines[0].rstrip("\r").split("\t"))
    if header != TRANSCRIPT_HEADER:
        raise ParseError(
            f"bad transcript header {header!r}, expected {TRANSCRIPT_HEADER!r}"
        )
    utterances = []
    for row, line in enumerate(lines[1:], start=1):
        line = line.rstrip("\r")
        if not line:
            continue
        cells = line.split("\t")
        if len(cells) != 4:
            raise ParseError(f"row {row}: expected 4 columns, found {len(cells)}")
        start_s = _parse_seconds(cells[0], row, "start")
        end_s = _parse_seconds(cells[1], row, "end")
        if start_s > end_s:
            raise ParseError(f"row {row}: start {start_s} is after end {end_s}")
        utterances.append(
            Utterance(
                clip_id=clip_id,
                line_idx=len(utterances) + 1,
                start_s=start_s,
                end_s=end_s,
                text=cells[3],
                speaker_hint=cells[2] or None,
            )
        )
    return utterances


def format_transcript_tsv(utterances: Iterable[Utterance]) -> bytes:
    """Serialize utterances back to transcript TSV (3-decimal seconds, LF)."""
    out = ["\t".join(TRANSCRIPT_HEADER)]
    for u in utterances:
        out.append(
            f"{u.start_s:.3f}\t{u.end_s:.3f}\t{u.speaker_hint or ''}\t{u.text}"
        )
    return ("\n".join(out) + "\n").encode("utf-8")


_ANNOTATION_KEYS = {
    "line_idx",
    "speaker",
    "addressee",
    "side_participant",
    "reply_to",
    "extra_diegetic",
    "monologue",
}


def scan_annotation_json(
    data: bytes, strict: bool = False, clip_id: str = ""
) -> tuple[list[StructureRecord], list[Diagnostic]]:
    """Lenient annotation parse: returns (records, diagnostics).

    Records are constructed even when they violate invariants (forward link,
    role overlap, ...) so that validation can report every problem; records
    whose fields cannot be read at all are dropped with a diagnostic.
    """
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"annotation JSON is unreadable: {exc}") from None
    if not isinstance(payload, list):
        raise ParseError("annotation JSON must be an array of objects")

    diags: list[Diagnostic] = []
    records: list[StructureRecord] = []
    seen: dict[int, int] = {}

    def bad(code, message, line_idx=None, severity=ERROR):
        diags.append(Diagnostic(code, severity, message, clip_id, line_idx))

    for pos, obj in enumerate(payload):
        if not isinstance(obj, dict):
            bad(BAD_TYPE, f"entry {pos} is not an object")
            continue
        missing = [k for k in ("line_idx", "speaker", "addressee",
                               "side_participant", "reply_to") if k not in obj]
        if missing:
            bad(MISSING_KEY, f"entry {pos} is missing keys {missing}")
            continue
        unknown = sorted(set(obj) - _ANNOTATION_KEYS)
        if unknown:
            if strict:
                bad(UNKNOWN_KEY, f"entry {pos} has unknown keys {unknown}")
                continue
        line_idx = obj["line_idx"]
        reply_to = obj["reply_to"]
        if not isinstance(line_idx, int) or isinstance(line_idx, bool) or line_idx < 1:
            bad(BAD_TYPE, f"entry {pos}: line_idx must be a positive integer")
            continue
        if not isinstance(reply_to, int) or isinstance(reply_to, bool):
            bad(BAD_TYPE, f"reply_to must be an integer", line_idx)
            continue
        try:
            speaker = normalize_name(obj["speaker"])
            addressees = frozenset(normalize_name(n) for n in obj["addressee"])
            side = frozenset(normalize_name(n) for n in obj["side_participant"])
        except (CorpusError, TypeError) as exc:
            bad(BAD_NAME, str(exc), line_idx)
            continue
        extra = bool(obj.get("extra_diegetic", False))
        mono = bool(obj.get("monologue", False))

        if line_idx in seen:
            bad(DUPLICATE_LINE, f"line_idx {line_idx} repeats entry {seen[line_idx]}",
                line_idx)
        else:
            seen[line_idx] = pos
        if reply_to > line_idx:
            bad(FORWARD_LINK, f"reply_to {reply_to} is after line {line_idx}", line_idx)
        elif reply_to < 1:
            bad(BAD_REPLY_TO, f"reply_to {reply_to} is below 1", line_idx)
        overlap = addressees & side
        if overlap:
            names = sorted(p.token for p in overlap)
            bad(ROLE_OVERLAP, f"addressee and side_participant share {names}", line_idx)
        if speaker in addressees or speaker in side:
            bad(SPEAKER_IN_ROLES, f"speaker {speaker.token!r} appears in a role set",
                line_idx)

        records.append(
            StructureRecord(
                line_idx=line_idx,
                speaker=speaker,
                addressees=addressees,
                side_participants=side,
                reply_to=reply_to,
                extra_diegetic=extra,
                monologue=mono,
            )
        )
    return records, diags


def parse_annotation_json(
    data: bytes, strict: bool = False, clip_id: str = ""
) -> list[StructureRecord]:
    """Strict annotation parse: raises ValidationError listing every violation."""
    records, diags = scan_annotation_json(data, strict=strict, clip_id=clip_id)
    errors = [d for d in diags if d.severity == ERROR]
    if errors:
        raise ValidationError(errors)
    return records


def serialize_annotation_json(records: Iterable[StructureRecord]) -> bytes:
    """Serialize records to annotation JSON; inverse of parse_annotation_json.

    Role sets are emitted sorted by token so output is deterministic; optional
    flags are emitted only when set, matching the parse-time defaults.
    """
    out = []
    for r in records:
        obj: dict = {
            "line_idx": r.line_idx,
            "speaker": r.speaker.token,
            "addressee": sorted(p.token for p in r.addressees),
            "side_participant": sorted(p.token for p in r.side_participants),
            "reply_to": r.reply_to,
        }
        if r.extra_diegetic:
            obj["extra_diegetic"] = True
        if r.monologue:
            obj["monologue"] = True
        out.append(obj)
    return (json.dumps(out, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def parse_cast_json(data: bytes) -> tuple[str, str, list[Participant]]:
    """Parse a cast list JSON: {"clip_id", "show_id", "cast": [names]}."""
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"cast JSON is unreadable: {exc}") from None
    if not isinstance(payload, dict) or "cast" not in payload:
        raise ParseError("cast JSON must be an object with a 'cast' array")
    cast = [normalize_name(n) for n in payload["cast"]]
    return str(payload.get("clip_id", "")), str(payload.get("show_id", "")), cast


def parse_gender_map_tsv(data: bytes) -> dict[tuple[str, str], str]:
    """Parse the participant metadata TSV (`canonical_name gender show_id`).

    Keys are (show_id, canonical_name); an empty show_id acts as a corpus-wide
    fallback entry.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"gender map is not valid UTF-8: {exc}") from None
    lines = [ln.rstrip("\r") for ln in text.split("\n") if ln.strip()]
    if not lines:
        raise ParseError("gender map is empty")
    header = tuple(lines[0].split("\t"))
    if header != ("canonical_name", "gender", "show_id"):
        raise ParseError(f"bad gender map header {header!r}")
    table: dict[tuple[str, str], str] = {}
    for row, line in enumerate(lines[1:], start=1):
        cells = line.split("\t")
        if len(cells) != 3:
            raise ParseError(f"gender map row {row}: expected 3 columns")
        name = normalize_name(cells[0]).canonical_name
        gender = cells[1].strip().lower()
        if gender not in GENDERS:
            raise ParseError(
                f"gender map row {row}: gender must be one of {GENDERS}, got {cells[1]!r}"
            )
        table[(cells[2].strip(), name)] = gender
    return table


def lookup_gender(
    gender_map: Mapping[tuple[str, str], str], show_id: str, participant: Participant
) -> str | None:
    """Resolve a participant's gender, preferring show-scoped entries.

    Returns None for special participants, unlisted names, and entries marked
    unspecified.
    """
    if participant.kind != REGULAR:
        return None
    gender = gender_map.get((show_id, participant.canonical_name))
    if gender is None:
        gender = gender_map.get(("", participant.canonical_name))
    if gender in ("female", "male"):
        return gender
    return None


def validate_clip(clip: Clip) -> list[Diagnostic]:
    """Check every type invariant; returns [] iff the clip is fully valid.

    Timestamp overlap between consecutive utterances is a warning, not an
    error: real ASR output overlaps and the metrics only consume durations.
    """
    diags: list[Diagnostic] = []

    def add(code, message, line_idx=None, severity=ERROR):
        diags.append(Diagnostic(code, severity, message, clip.clip_id, line_idx))

    seen_lines = [u.line_idx for u in clip.utterances]
    if seen_lines != list(range(1, len(seen_lines) + 1)):
        add(NONCONTIGUOUS_LINES,
            f"utterance line_idx must run 1..{len(seen_lines)}, got {seen_lines[:8]}...")
    for u in clip.utterances:
        if u.start_s > u.end_s:
            add(TIME_ORDER, f"start {u.start_s} is after end {u.end_s}", u.line_idx)
    ordered = sorted(clip.utterances, key=lambda u: u.line_idx)
    for prev, nxt in zip(ordered, ordered[1:]):
        if prev.end_s > nxt.start_s:
            add(OVERLAP,
                f"lines {prev.line_idx}-{nxt.line_idx} overlap "
                f"({prev.end_s} > {nxt.start_s})",
                prev.line_idx, severity=WARNING)

    if clip.gold is None:
        return diags

    cast_names = {p.canonical_name for p in clip.cast}

    def resolves(p: Participant) -> bool:
        return p.is_special or p.canonical_name in cast_names

    gold_lines: dict[int, int] = {}
    for r in clip.gold:
        if r.line_idx in gold_lines:
            add(DUPLICATE_LINE, f"line_idx {r.line_idx} annotated twice", r.line_idx)
        gold_lines[r.line_idx] = gold_lines.get(r.line_idx, 0) + 1
        if r.reply_to > r.line_idx:
            add(FORWARD_LINK, f"reply_to {r.reply_to} is after line {r.line_idx}",
                r.line_idx)
        elif r.reply_to < 1:
            add(BAD_REPLY_TO, f"reply_to {r.reply_to} is below 1", r.line_idx)
        overlap = r.addressees & r.side_participants
        if overlap:
            names = sorted(p.token for p in overlap)
            add(ROLE_OVERLAP, f"addressee and side_participant share {names}",
                r.line_idx)
        if r.speaker in r.addressees or r.speaker in r.side_participants:
            add(SPEAKER_IN_ROLES, f"speaker {r.speaker.token!r} appears in a role set",
                r.line_idx)
        if clip.cast:
            for p in (r.speaker, *r.addressees, *r.side_participants):
                if not resolves(p):
                    add(UNRESOLVED_NAME,
                        f"{p.token!r} is not in the cast list or a reserved token",
                        r.line_idx)
    if clip.utterances:
        expected = {u.line_idx for u in clip.utterances}
        annotated = set(gold_lines)
        if expected != annotated:
            missing = sorted(expected - annotated)
            extra = sorted(annotated - expected)
            add(GOLD_COVERAGE,
                f"gold does not cover utterances exactly "
                f"(missing {missing[:8]}, extra {extra[:8]})")
    return diags


# --- corpus directory layout -------------------------------------------------
#
# A corpus path is either a single annotation JSON (one clip, id = file stem)
# or a directory holding, per clip id:
#   <clip_id>.annotation.json   (or <clip_id>.json)
#   <clip_id>.transcript.tsv    (or <clip_id>.tsv)
#   <clip_id>.cast.json
# Face tracks and word tokens for the baseline follow the same convention
# (<clip_id>.faces.json, <clip_id>.words.tsv).

_ANNOTATION_SUFFIXES = (".annotation.json", ".json")
_TRANSCRIPT_SUFFIXES = (".transcript.tsv", ".tsv")


def _strip_suffix(name: str, suffixes: tuple[str, ...]) -> str | None:
    for suffix in suffixes:
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return None


def _index_dir(root: Path, suffixes: tuple[str, ...], skip: tuple[str, ...] = ()
               ) -> dict[str, Path]:
    index: dict[str, Path] = {}
    for path in sorted(root.iterdir()):
        if not path.is_file():
            continue
        if any(path.name.endswith(s) for s in skip):
            continue
        stem = _strip_suffix(path.name, suffixes)
        if stem is not None and stem not in index:
            index[stem] = path
    return index


@dataclass(frozen=True)
class ClipFiles:
    """The on-disk files that together describe one clip."""

    clip_id: str
    annotation: Path | None = None
    transcript: Path | None = None
    cast: Path | None = None


def iter_clip_files(path: str | Path) -> list[ClipFiles]:
    """Pair a corpus path's files by clip id.

    A file path is treated as a single-clip annotation; a directory is indexed
    by the layout documented above.
    """
    root = Path(path)
    if root.is_file():
        clip_id = _strip_suffix(root.name, _ANNOTATION_SUFFIXES) or root.stem
        return [ClipFiles(clip_id=clip_id, annotation=root)]
    if not root.is_dir():
        raise FileNotFoundError(f"no such corpus path: {root}")
    annotations = _index_dir(root, _ANNOTATION_SUFFIXES,
                             skip=(".cast.json", ".faces.json"))
    transcripts = _index_dir(root, _TRANSCRIPT_SUFFIXES, skip=(".words.tsv",))
    casts = _index_dir(root, (".cast.json",))
    return [
        ClipFiles(
            clip_id=clip_id,
            annotation=annotations.get(clip_id),
            transcript=transcripts.get(clip_id),
            cast=casts.get(clip_id),
        )
        for clip_id in sorted(set(annotations) | set(transcripts))
    ]


def load_structures(path: str | Path, strict: bool = False
                    ) -> dict[str, list[StructureRecord]]:
    """Load annotation records keyed by clip_id from a file or directory."""
    return {
        files.clip_id: parse_annotation_json(
            files.annotation.read_bytes(), strict=strict, clip_id=files.clip_id)
        for files in iter_clip_files(path)
        if files.annotation is not None
    }


def load_corpus(path: str | Path, strict: bool = False) -> dict[str, Clip]:
    """Load full clips (annotations plus any transcripts/casts present)."""
    clips: dict[str, Clip] = {}
    for files in iter_clip_files(path):
        gold = None
        if files.annotation is not None:
            gold = tuple(parse_annotation_json(
                files.annotation.read_bytes(), strict=strict,
                clip_id=files.clip_id))
        utterances: tuple[Utterance, ...] = ()
        if files.transcript is not None:
            utterances = tuple(parse_transcript_tsv(
                files.transcript.read_bytes(), clip_id=files.clip_id))
        show_id, cast = "", ()
        if files.cast is not None:
            _, show_id, cast_list = parse_cast_json(files.cast.read_bytes())
            cast = tuple(cast_list)
        clips[files.clip_id] = Clip(clip_id=files.clip_id, show_id=show_id,
                                    cast=cast, utterances=utterances, gold=gold)
    return clips
