"""Heuristic baseline: face-frequency role assignment and previous-line linking.

The full baseline counts, for every line, how often each face is on screen at
the word level. The most frequent face within the line is the speaker; the
most frequent non-speaker face over the two-line window [i-1, i] is the
addressee; every other face seen in the window is a side-participant; and
each line replies to the previous one. The reply-only variant applies just
the linking rule and needs no face data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import (
    UNKNOWN,
    Clip,
    CorpusError,
    ParseError,
    Participant,
    StructureRecord,
    normalize_name,
)

UNKNOWN_SPEAKER = Participant("unknown", UNKNOWN)


@dataclass(frozen=True)
class FaceTrack:
    """On-screen intervals for one participant's face within a clip."""

    clip_id: str
    participant: Participant
    spans: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for start, end in self.spans:
            if not start < end:
                raise CorpusError(
                    f"degenerate face span [{start}, {end}] for "
                    f"{self.participant.token!r}"
                )
        if list(self.spans) != sorted(self.spans):
            raise CorpusError(f"face spans for {self.participant.token!r} are unsorted")

    @property
    def first_appearance(self) -> float:
        return self.spans[0][0] if self.spans else float("inf")


@dataclass(frozen=True)
class WordToken:
    """One word with timestamps, belonging to a transcript line."""

    line_idx: int
    word: str
    start_s: float
    end_s: float


def parse_face_tracks_json(data: bytes) -> list[FaceTrack]:
    """Parse `{"clip_id": ..., "faces": [{"name": ..., "spans": [[s, e], ...]}]}`."""
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"face track JSON is unreadable: {exc}") from None
    if not isinstance(payload, dict) or "faces" not in payload:
        raise ParseError("face track JSON must be an object with a 'faces' array")
    clip_id = str(payload.get("clip_id", ""))
    tracks = []
    for face in payload["faces"]:
        spans = tuple(sorted((float(s), float(e)) for s, e in face["spans"]))
        tracks.append(FaceTrack(
            clip_id=clip_id,
            participant=normalize_name(face["name"]),
            spans=spans,
        ))
    return tracks


def parse_word_tokens_tsv(data: bytes) -> list[WordToken]:
    """Parse word tokens TSV: `line_idx word start end`."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"word token TSV is not valid UTF-8: {exc}") from None
    lines = [ln.rstrip("\r") for ln in text.split("\n") if ln.strip()]
    if not lines:
        raise ParseError("word token TSV is empty")
    if tuple(lines[0].split("\t")) != ("line_idx", "word", "start", "end"):
        raise ParseError(f"bad word token header {lines[0]!r}")
    tokens = []
    for row, line in enumerate(lines[1:], start=1):
        cells = line.split("\t")
        if len(cells) != 4:
            raise ParseError(f"word token row {row}: expected 4 columns")
        try:
            tokens.append(WordToken(int(cells[0]), cells[1],
                                    float(cells[2]), float(cells[3])))
        except ValueError:
            raise ParseError(f"word token row {row}: bad numeric field") from None
    tokens.sort(key=lambda t: (t.line_idx, t.start_s, t.end_s))
    return tokens


def _overlaps(span: tuple[float, float], start: float, end: float) -> bool:
    return max(span[0], start) < min(span[1], end)


def face_word_counts(
    tracks: Sequence[FaceTrack], words: Sequence[WordToken]
) -> dict[tuple[int, Participant], int]:
    """Count each face once per word whose interval intersects any of its spans."""
    counts: dict[tuple[int, Participant], int] = {}
    for word in words:
        for track in tracks:
            if any(_overlaps(span, word.start_s, word.end_s) for span in track.spans):
                key = (word.line_idx, track.participant)
                counts[key] = counts.get(key, 0) + 1
    return counts


def _rank_key(tracks_by_face: Mapping[Participant, FaceTrack]):
    """Ties break by earliest first appearance in the clip, then by name."""

    def key(item: tuple[Participant, int]):
        face, count = item
        track = tracks_by_face.get(face)
        first = track.first_appearance if track else float("inf")
        return (-count, first, face.token)

    return key


def run_baseline(
    clip: Clip, tracks: Sequence[FaceTrack], words: Sequence[WordToken]
) -> list[StructureRecord]:
    """Face-frequency roles plus previous-line links for every utterance.

    A line with no visible faces gets the reserved "unknown" speaker; a window
    with no non-speaker face gets no addressee. The context window for the
    clip-initial line is just the line itself.
    """
    if not clip.utterances:
        raise CorpusError(f"clip {clip.clip_id!r} has no utterances")
    counts = face_word_counts(tracks, words)
    tracks_by_face = {t.participant: t for t in tracks}
    rank = _rank_key(tracks_by_face)

    def line_counts(line_idx: int) -> dict[Participant, int]:
        return {
            face: count
            for (idx, face), count in counts.items()
            if idx == line_idx and count > 0
        }

    records = []
    ordered = sorted(clip.utterances, key=lambda u: u.line_idx)
    for pos, utterance in enumerate(ordered):
        i = utterance.line_idx
        within = line_counts(i)
        if within:
            speaker = min(within.items(), key=rank)[0]
        else:
            speaker = UNKNOWN_SPEAKER

        window: dict[Participant, int] = dict(within)
        if pos > 0:
            for face, count in line_counts(ordered[pos - 1].line_idx).items():
                window[face] = window.get(face, 0) + count
        candidates = {f: c for f, c in window.items() if f != speaker}
        if candidates:
            addressee = min(candidates.items(), key=rank)[0]
            addressees = frozenset([addressee])
            side = frozenset(f for f in candidates if f != addressee)
        else:
            addressees = frozenset()
            side = frozenset()

        records.append(StructureRecord(
            line_idx=i,
            speaker=speaker,
            addressees=addressees,
            side_participants=side,
            reply_to=i if pos == 0 else ordered[pos - 1].line_idx,
        ))
    return records


def run_reply_only_baseline(clip: Clip) -> list[StructureRecord]:
    """Previous-line links only; roles come back unknown/empty.

    Produces a single chain, so the whole clip forms one thread.
    """
    records = []
    ordered = sorted(clip.utterances, key=lambda u: u.line_idx)
    for pos, utterance in enumerate(ordered):
        records.append(StructureRecord(
            line_idx=utterance.line_idx,
            speaker=UNKNOWN_SPEAKER,
            addressees=frozenset(),
            side_participants=frozenset(),
            reply_to=utterance.line_idx if pos == 0 else ordered[pos - 1].line_idx,
        ))
    return records
