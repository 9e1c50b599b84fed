import random

import pytest

from convstruct.corpus import Clip, Utterance
from convstruct.stats.bootstrap import BootstrapConfig, StatsError
from convstruct.stats.gender import gender_thread_shares, role_distributions

from conftest import record

CONFIG = BootstrapConfig(resamples=200, seed=0)


def make_clip(clip_id, records, durations, show_id="show"):
    utterances = []
    t = 0.0
    for r, dur in zip(sorted(records, key=lambda r: r.line_idx), durations):
        utterances.append(Utterance(clip_id, r.line_idx, round(t, 3),
                                    round(t + dur, 3), "text"))
        t += dur
    return Clip(clip_id=clip_id, show_id=show_id, cast=(),
                utterances=tuple(utterances), gold=tuple(records))


GENDERS = {
    ("show", "ada"): "female",
    ("show", "bea"): "female",
    ("show", "max"): "male",
    ("show", "tom"): "male",
}


class TestGenderThreadShares:
    def test_single_female_speaker_delta_zero(self):
        # the only speaker is female: 100% of starts and 100% of speaking
        # time, so the normalized difference vanishes exactly
        records = [record(1, "ada"), record(2, "ada", reply_to=2),
                   record(3, "bea", reply_to=2)]
        clip = make_clip("c", records, [1.0, 1.0, 1.0])
        report = gender_thread_shares([clip], GENDERS, config=CONFIG,
                                      permutations=200)
        assert report.delta_start.per_clip["c"] == 0.0

    def test_equal_time_all_female_starts(self):
        # ada and max each speak 2s; both mid-clip starts are ada's
        records = [record(1, "max"), record(2, "ada", reply_to=2),
                   record(3, "max", reply_to=2), record(4, "ada", reply_to=4)]
        clip = make_clip("c", records, [1.0, 1.0, 1.0, 1.0])
        report = gender_thread_shares([clip], GENDERS, config=CONFIG,
                                      permutations=200)
        assert report.delta_start.per_clip["c"] == pytest.approx(0.5)

    def test_all_male_corpus_has_zero_female_share(self):
        records = [record(1, "max"), record(2, "tom", reply_to=2),
                   record(3, "max", reply_to=2)]
        clip = make_clip("c", records, [1.0, 1.0, 1.0])
        report = gender_thread_shares([clip], GENDERS, config=CONFIG,
                                      permutations=200)
        assert report.start.share == 0.0
        assert report.hold.share == 0.0

    def test_raw_shares_pool_events_corpus_wide(self):
        first = make_clip("c1", [record(1, "max"), record(2, "ada", reply_to=2),
                                 record(3, "bea", reply_to=2)], [1, 1, 1])
        second = make_clip("c2", [record(1, "max"), record(2, "tom", reply_to=2)],
                           [1, 1])
        report = gender_thread_shares([first, second], GENDERS, config=CONFIG,
                                      permutations=200)
        # mid-clip starters: ada (c1), tom (c2) -> female share 1/2
        assert report.start.share == pytest.approx(0.5)
        assert report.start.n_events == 2

    def test_deltas_bounded(self):
        rng = random.Random(5)
        names = ["ada", "bea", "max", "tom"]
        clips = []
        for k in range(20):
            n = rng.randint(2, 12)
            records = []
            for i in range(1, n + 1):
                reply = i if i == 1 or rng.random() < 0.4 else rng.randint(1, i - 1)
                records.append(record(i, rng.choice(names), reply_to=reply))
            clips.append(make_clip(f"c{k}", records,
                                   [rng.uniform(0.3, 3.0) for _ in range(n)]))
        report = gender_thread_shares(clips, GENDERS, config=CONFIG,
                                      permutations=100)
        for delta in report.delta_start.per_clip.values():
            assert -1.0 <= delta <= 1.0
        for delta in report.delta_hold.per_clip.values():
            assert -1.0 <= delta <= 1.0

    def test_sign_flip_p_detects_consistent_shift(self):
        clips = []
        # every clip: equal speaking time, all starts female -> delta +0.5
        for k in range(12):
            records = [record(1, "max"), record(2, "ada", reply_to=2),
                       record(3, "max", reply_to=2), record(4, "ada", reply_to=4)]
            clips.append(make_clip(f"c{k}", records, [1.0, 1.0, 1.0, 1.0]))
        report = gender_thread_shares(clips, GENDERS, config=CONFIG,
                                      permutations=2000)
        assert report.delta_start.mean == pytest.approx(0.5)
        assert report.delta_start.p_value < 0.01

    def test_empty_gender_map_raises(self):
        clip = make_clip("c", [record(1, "ada")], [1.0])
        with pytest.raises(StatsError):
            gender_thread_shares([clip], {}, config=CONFIG)

    def test_unknown_gender_events_are_dropped(self):
        records = [record(1, "stranger"), record(2, "ada", reply_to=2),
                   record(3, "stranger", reply_to=2)]
        clip = make_clip("c", records, [1.0, 1.0, 1.0])
        report = gender_thread_shares([clip], GENDERS, config=CONFIG,
                                      permutations=100)
        assert report.start.n_events == 1
        assert report.start.share == 1.0

    def test_deterministic_under_seed(self):
        records = [record(1, "max"), record(2, "ada", reply_to=2),
                   record(3, "tom", reply_to=2)]
        clip = make_clip("c", records, [1.0, 2.0, 1.5])
        first = gender_thread_shares([clip], GENDERS, config=CONFIG,
                                     permutations=500)
        second = gender_thread_shares([clip], GENDERS, config=CONFIG,
                                      permutations=500)
        assert first == second


class TestRoleDistributions:
    def test_uniform_data_gives_uniform_conditionals(self):
        observations = [
            (role, gender)
            for role in ("speaker", "addressee", "side-participant")
            for gender in ("female", "male")
            for _ in range(10)
        ]
        dists = role_distributions(observations)
        for row in dists.p_gender_given_role.values():
            assert row["female"] == pytest.approx(0.5)
        for row in dists.p_role_given_gender.values():
            for value in row.values():
                assert value == pytest.approx(1 / 3)

    def test_hand_counted_table(self):
        observations = (
            [("speaker", "male")] * 4 + [("speaker", "female")] * 2
            + [("addressee", "male")] * 1 + [("addressee", "female")] * 3
            + [("side-participant", "male")] * 1 + [("side-participant", "female")] * 1
        )
        dists = role_distributions(observations)
        assert dists.p_gender_given_role["speaker"]["male"] == pytest.approx(4 / 6)
        assert dists.p_gender_given_role["addressee"]["female"] == pytest.approx(3 / 4)
        assert dists.p_role_given_gender["male"]["speaker"] == pytest.approx(4 / 6)
        assert dists.p_role_given_gender["female"]["addressee"] == pytest.approx(3 / 6)

    def test_rows_sum_to_one(self):
        rng = random.Random(3)
        observations = [
            (rng.choice(["speaker", "addressee", "side-participant"]),
             rng.choice(["female", "male"]))
            for _ in range(500)
        ]
        dists = role_distributions(observations)
        for row in dists.p_role_given_gender.values():
            assert sum(row.values()) == pytest.approx(1.0, abs=1e-12)
        for row in dists.p_gender_given_role.values():
            assert sum(row.values()) == pytest.approx(1.0, abs=1e-12)

    def test_empty_observations_raise(self):
        with pytest.raises(StatsError):
            role_distributions([])
