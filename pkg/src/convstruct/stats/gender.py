"""Gendered thread dynamics and role distributions.

Measures who starts threads mid-clip and who holds them by receiving replies,
as raw female shares and as per-clip deltas normalized by each clip's female
share of speaking time. Delta significance comes from a seeded sign-flip
permutation test; all reported means carry bootstrap CIs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..corpus import Clip, lookup_gender
from ..threads import thread_events
from .bootstrap import BootstrapConfig, StatsError, bootstrap_ci

ROLES = ("speaker", "addressee", "side-participant")


@dataclass(frozen=True)
class ShareStats:
    """A corpus-wide female share with its bootstrap interval."""

    share: float
    ci: tuple[float, float]
    n_events: int


@dataclass(frozen=True)
class DeltaStats:
    """Per-clip normalized differences: mean, CI, and permutation p-value."""

    mean: float
    ci: tuple[float, float]
    p_value: float
    n_clips: int
    per_clip: dict[str, float]


@dataclass(frozen=True)
class ThreadShareReport:
    start: ShareStats
    hold: ShareStats
    delta_start: DeltaStats
    delta_hold: DeltaStats


@dataclass(frozen=True)
class _ClipEvents:
    clip_id: str
    start_female: int
    start_total: int
    hold_female: int
    hold_total: int
    female_time_share: float | None


def _sign_flip_p(deltas: np.ndarray, permutations: int, seed: int) -> float:
    """Two-sided p for mean(delta) = 0 under random sign flips of clip deltas."""
    observed = abs(float(deltas.mean()))
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=(permutations, deltas.size)) * 2 - 1
    permuted = np.abs((signs * deltas[None, :]).mean(axis=1))
    return (1 + int((permuted >= observed).sum())) / (permutations + 1)


def gender_thread_shares(
    clips: Iterable[Clip],
    gender_map: Mapping[tuple[str, str], str],
    include_nondialogic: bool = False,
    config: BootstrapConfig | None = None,
    permutations: int = 10_000,
) -> ThreadShareReport:
    """Female share of thread starts and holds, raw and speaking-time normalized.

    Events with unknown speaker gender are dropped. Each clip's delta is the
    female share of that clip's events minus the female share of its speaking
    time; clips without any gendered event are skipped for the respective
    delta, and clips without gendered speaking time are skipped entirely.
    """
    if not gender_map:
        raise StatsError("gender map is empty")
    config = config or BootstrapConfig()

    per_clip: list[_ClipEvents] = []
    for clip in clips:
        if clip.gold is None:
            continue
        events = thread_events(clip.gold, include_nondialogic=include_nondialogic)

        def gender_of(participant):
            return lookup_gender(gender_map, clip.show_id, participant)

        start_genders = [g for _, p in events.starters if (g := gender_of(p))]
        hold_genders = [g for _, p in events.holders if (g := gender_of(p))]

        female_time = 0.0
        total_time = 0.0
        speakers = {r.line_idx: r.speaker for r in clip.gold}
        for u in clip.utterances:
            speaker = speakers.get(u.line_idx)
            if speaker is None:
                continue
            g = gender_of(speaker)
            if g is None:
                continue
            total_time += u.duration_s
            if g == "female":
                female_time += u.duration_s
        time_share = female_time / total_time if total_time > 0 else None

        per_clip.append(_ClipEvents(
            clip_id=clip.clip_id,
            start_female=sum(1 for g in start_genders if g == "female"),
            start_total=len(start_genders),
            hold_female=sum(1 for g in hold_genders if g == "female"),
            hold_total=len(hold_genders),
            female_time_share=time_share,
        ))

    def raw_share(kind: str) -> ShareStats:
        units = [c for c in per_clip if getattr(c, f"{kind}_total") > 0]
        if not units:
            raise StatsError(f"no gendered {kind} events in the corpus")

        def pooled(cs) -> float:
            return sum(getattr(c, f"{kind}_female") for c in cs) / sum(
                getattr(c, f"{kind}_total") for c in cs
            )

        interval = bootstrap_ci(units, pooled, config)
        return ShareStats(
            share=interval.point,
            ci=(interval.lo, interval.hi),
            n_events=sum(getattr(c, f"{kind}_total") for c in units),
        )

    def delta_stats(kind: str) -> DeltaStats:
        usable = [
            c for c in per_clip
            if getattr(c, f"{kind}_total") > 0 and c.female_time_share is not None
        ]
        if not usable:
            raise StatsError(f"no clips usable for the {kind} delta")
        deltas = {
            c.clip_id: getattr(c, f"{kind}_female") / getattr(c, f"{kind}_total")
            - c.female_time_share
            for c in usable
        }
        values = np.array([deltas[c.clip_id] for c in usable])
        interval = bootstrap_ci(values, lambda v: float(np.mean(v)), config)
        p = _sign_flip_p(values, permutations, config.seed)
        return DeltaStats(
            mean=interval.point,
            ci=(interval.lo, interval.hi),
            p_value=p,
            n_clips=len(usable),
            per_clip=deltas,
        )

    return ThreadShareReport(
        start=raw_share("start"),
        hold=raw_share("hold"),
        delta_start=delta_stats("start"),
        delta_hold=delta_stats("hold"),
    )


@dataclass(frozen=True)
class RoleDistributions:
    """Empirical P(gender | role) and P(role | gender) tables."""

    p_gender_given_role: dict[str, dict[str, float]]
    p_role_given_gender: dict[str, dict[str, float]]
    counts: dict[str, dict[str, int]]  # role -> gender -> count


def role_distributions(
    observations: Iterable[tuple[str, str]]
) -> RoleDistributions:
    """Conditional frequency tables over (role, gender) observations.

    Rows whose conditioning cell is empty are omitted with a warning rather
    than raising, so partial corpora still report the populated cells.
    """
    counts: dict[str, dict[str, int]] = {}
    for role, gender in observations:
        counts.setdefault(role, {}).setdefault(gender, 0)
        counts[role][gender] += 1
    if not counts:
        raise StatsError("no observations")

    roles = sorted(counts)
    genders = sorted({g for row in counts.values() for g in row})

    p_gender_given_role: dict[str, dict[str, float]] = {}
    for role in roles:
        total = sum(counts[role].values())
        if total == 0:
            warnings.warn(f"role {role!r} has no observations; row omitted")
            continue
        p_gender_given_role[role] = {
            g: counts[role].get(g, 0) / total for g in genders
        }

    p_role_given_gender: dict[str, dict[str, float]] = {}
    for g in genders:
        total = sum(counts[role].get(g, 0) for role in roles)
        if total == 0:
            warnings.warn(f"gender {g!r} has no observations; row omitted")
            continue
        p_role_given_gender[g] = {
            role: counts[role].get(g, 0) / total for role in roles
        }
    return RoleDistributions(p_gender_given_role, p_role_given_gender, counts)
