import itertools
import math
import random

import pytest

from convstruct.corpus import normalize_name
from convstruct.metrics import (
    EvalConfig,
    MetricInputError,
    MetricReport,
    evaluate_corpus,
    exact_match,
    link_f1,
    nvi_score,
    one_to_one,
    role_set_f1,
    set_f1,
    speaker_accuracy,
)
from convstruct.stats.bootstrap import BootstrapConfig
from convstruct.threads import ThreadPartition, link_set

from conftest import NAMES, random_partition, random_records, record


# --- independent oracles ------------------------------------------------------


def enumeration_one_to_one(gold: ThreadPartition, pred: ThreadPartition) -> float:
    """Max total overlap over all injective cluster mappings, by brute force."""
    matrix = [[len(g & p) for p in pred.clusters] for g in gold.clusters]
    n_gold, n_pred = len(gold.clusters), len(pred.clusters)
    best = 0
    if n_gold <= n_pred:
        for perm in itertools.permutations(range(n_pred), n_gold):
            best = max(best, sum(matrix[i][perm[i]] for i in range(n_gold)))
    else:
        for perm in itertools.permutations(range(n_gold), n_pred):
            best = max(best, sum(matrix[perm[j]][j] for j in range(n_pred)))
    return 100.0 * (best / gold.n)


def direct_vi_score(gold: ThreadPartition, pred: ThreadPartition) -> float:
    """1-NVI recomputed from scratch: joint distribution built element-wise."""
    elements = sorted(gold.elements)
    n = len(elements)
    if n == 1:
        return 100.0
    gold_of = {x: i for i, c in enumerate(gold.clusters) for x in c}
    pred_of = {x: j for j, c in enumerate(pred.clusters) for x in c}
    joint: dict[tuple[int, int], int] = {}
    for x in elements:
        key = (gold_of[x], pred_of[x])
        joint[key] = joint.get(key, 0) + 1
    gold_sizes: dict[int, int] = {}
    pred_sizes: dict[int, int] = {}
    for (i, j), m in joint.items():
        gold_sizes[i] = gold_sizes.get(i, 0) + m
        pred_sizes[j] = pred_sizes.get(j, 0) + m
    h_gold = -sum((s / n) * math.log(s / n, 2) for s in gold_sizes.values())
    h_pred = -sum((s / n) * math.log(s / n, 2) for s in pred_sizes.values())
    mutual = sum(
        (m / n) * math.log((m / n) / ((gold_sizes[i] / n) * (pred_sizes[j] / n)), 2)
        for (i, j), m in joint.items()
    )
    vi = h_gold + h_pred - 2 * mutual
    return min(100.0, max(0.0, 100.0 * (1.0 - vi / math.log(n, 2))))


def brute_force_exact_match(gold: ThreadPartition, pred: ThreadPartition):
    matches = sum(
        1 for g in gold.clusters if any(g == p for p in pred.clusters)
    )
    precision = matches / len(pred.clusters)
    recall = matches / len(gold.clusters)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


# --- role metrics --------------------------------------------------------------


class TestSpeakerAccuracy:
    def test_identity(self):
        records = [record(i, "a") for i in range(1, 5)]
        assert speaker_accuracy(records, records) == 1.0

    def test_three_of_four(self):
        gold = [record(1, "a"), record(2, "b"), record(3, "a"), record(4, "b")]
        pred = [record(1, "a"), record(2, "b"), record(3, "b"), record(4, "b")]
        assert speaker_accuracy(gold, pred) == 0.75

    def test_matches_after_normalization(self):
        gold = [record(1, "sheldon cooper")]
        pred = [record(1, "Sheldon  Cooper ")]
        assert speaker_accuracy(gold, pred) == 1.0

    def test_special_tokens_compare_by_kind(self):
        gold = [record(1, "unknown")]
        assert speaker_accuracy(gold, [record(1, "unknown")]) == 1.0
        assert speaker_accuracy(gold, [record(1, "crowd")]) == 0.0

    def test_off_screen_differs_from_regular(self):
        gold = [record(1, "barney_OS")]
        assert speaker_accuracy(gold, [record(1, "barney")]) == 0.0

    def test_coverage_mismatch_raises(self):
        with pytest.raises(MetricInputError):
            speaker_accuracy([record(1, "a")], [record(2, "a")])


class TestRoleSetF1:
    def _sets(self, *names):
        return frozenset(normalize_name(n) for n in names)

    def test_identity(self):
        assert role_set_f1([self._sets("penny")], [self._sets("penny")]) == 1.0

    def test_partial_overlap(self):
        gold = [self._sets("sheldon cooper", "amy farrah fowler")]
        pred = [self._sets("amy farrah fowler")]
        assert role_set_f1(gold, pred) == pytest.approx(2 / 3, abs=1e-15)

    def test_both_empty_scores_one(self):
        assert set_f1(frozenset(), frozenset()) == 1.0

    def test_one_empty_scores_zero(self):
        assert set_f1(self._sets("a"), frozenset()) == 0.0
        assert set_f1(frozenset(), self._sets("a")) == 0.0

    def test_element_order_invariant(self):
        a = self._sets("a", "b", "c")
        b = frozenset(sorted(a, key=lambda p: p.token, reverse=True))
        assert set_f1(a, b) == 1.0

    def test_length_mismatch_raises(self):
        with pytest.raises(MetricInputError):
            role_set_f1([frozenset()], [])


class TestLinkF1:
    def test_identity(self):
        links = frozenset({(12, 11), (14, 13)})
        assert link_f1(links, links).f1 == 1.0

    def test_half_overlap(self):
        gold = frozenset({(2, 1), (3, 2)})
        pred = frozenset({(2, 1), (3, 1)})
        score = link_f1(gold, pred)
        assert score == (0.5, 0.5, 0.5)

    def test_empty_prediction(self):
        assert link_f1(frozenset({(2, 1)}), frozenset()).f1 == 0.0

    def test_both_empty(self):
        assert link_f1(frozenset(), frozenset()).f1 == 1.0

    def test_f1_symmetric(self):
        rng = random.Random(3)
        for _ in range(50):
            gold = frozenset((i, rng.randint(1, i - 1))
                             for i in rng.sample(range(2, 15), 6))
            pred = frozenset((i, rng.randint(1, i - 1))
                             for i in rng.sample(range(2, 15), 6))
            assert link_f1(gold, pred).f1 == pytest.approx(link_f1(pred, gold).f1)


# --- thread metrics ------------------------------------------------------------


def partition(*clusters):
    return ThreadPartition.from_clusters(clusters)


class TestNvi:
    def test_identical_is_exactly_100(self):
        part = partition({1, 2}, {3, 4})
        assert nvi_score(part, part) == 100.0

    def test_two_vs_one_cluster(self):
        assert nvi_score(partition({1, 2}, {3, 4}), partition({1, 2, 3, 4})) == 50.0

    def test_singletons_vs_one_cluster(self):
        gold = partition({1}, {2}, {3}, {4})
        assert nvi_score(gold, partition({1, 2, 3, 4})) == 0.0

    def test_single_element_defined_as_100(self):
        assert nvi_score(partition({1}), partition({1})) == 100.0

    def test_element_mismatch_raises(self):
        with pytest.raises(MetricInputError):
            nvi_score(partition({1, 2}), partition({1, 3}))

    def test_matches_direct_recomputation(self):
        rng = random.Random(17)
        for _ in range(300):
            elements = list(range(1, rng.randint(2, 20)))
            if not elements:
                continue
            gold = random_partition(rng, elements)
            pred = random_partition(rng, elements)
            assert nvi_score(gold, pred) == pytest.approx(
                direct_vi_score(gold, pred), abs=1e-9)

    def test_symmetric(self):
        rng = random.Random(19)
        for _ in range(100):
            elements = list(range(1, 12))
            gold = random_partition(rng, elements)
            pred = random_partition(rng, elements)
            assert nvi_score(gold, pred) == pytest.approx(
                nvi_score(pred, gold), abs=1e-12)


class TestOneToOne:
    def test_identity(self):
        part = partition({1, 2}, {3, 4})
        assert one_to_one(part, part) == 100.0

    def test_best_pairing_three_of_four(self):
        assert one_to_one(partition({1, 2}, {3, 4}),
                          partition({1, 2, 3}, {4})) == 75.0

    def test_single_cluster_vs_singletons(self):
        assert one_to_one(partition({1, 2, 3, 4}),
                          partition({1}, {2}, {3}, {4})) == 25.0

    def test_equals_enumeration(self):
        rng = random.Random(23)
        for _ in range(200):
            n = rng.randint(1, 12)
            elements = list(range(1, n + 1))
            gold = random_partition(rng, elements, max_clusters=6)
            pred = random_partition(rng, elements, max_clusters=6)
            assert one_to_one(gold, pred) == enumeration_one_to_one(gold, pred)

    def test_symmetric(self):
        rng = random.Random(29)
        for _ in range(100):
            elements = list(range(1, 10))
            gold = random_partition(rng, elements)
            pred = random_partition(rng, elements)
            assert one_to_one(gold, pred) == one_to_one(pred, gold)


class TestExactMatch:
    def test_identity(self):
        part = partition({1, 2}, {3, 4})
        assert exact_match(part, part).f1 == 1.0

    def test_partial_recovery(self):
        score = exact_match(partition({1, 2}, {3, 4}),
                            partition({1, 2}, {3}, {4}))
        assert score.precision == pytest.approx(1 / 3)
        assert score.recall == pytest.approx(1 / 2)
        assert score.f1 == pytest.approx(0.4)

    def test_disjoint_shapes(self):
        assert exact_match(partition({1, 2, 3}), partition({1}, {2, 3})).f1 == 0.0

    def test_matches_brute_force(self):
        rng = random.Random(31)
        for _ in range(300):
            elements = list(range(1, rng.randint(2, 16)))
            gold = random_partition(rng, elements)
            pred = random_partition(rng, elements)
            assert exact_match(gold, pred) == brute_force_exact_match(gold, pred)

    def test_f1_symmetric(self):
        rng = random.Random(37)
        for _ in range(100):
            elements = list(range(1, 10))
            gold = random_partition(rng, elements)
            pred = random_partition(rng, elements)
            assert exact_match(gold, pred).f1 == exact_match(pred, gold).f1


# --- corpus evaluation ----------------------------------------------------------


def two_thread_clip():
    return [record(1, "a", ["b"]), record(2, "b", ["a"], reply_to=1),
            record(3, "a", ["b"]), record(4, "b", ["a"], reply_to=3)]


def chain_pred(gold):
    lines = sorted(r.line_idx for r in gold)
    return [record(i, "unknown", reply_to=(lines[0] if i == lines[0] else i - 1))
            for i in lines]


class TestEvaluateCorpus:
    def test_identity_is_all_100(self):
        rng = random.Random(41)
        gold = {f"c{k}": random_records(rng, rng.randint(2, 12), NAMES[:4])
                for k in range(5)}
        report = evaluate_corpus(gold, gold)
        for value in report.scores().values():
            assert value == 100.0

    def test_identity_bootstrap_ci_degenerate_at_100(self):
        rng = random.Random(43)
        gold = {f"c{k}": random_records(rng, 6, NAMES[:3]) for k in range(4)}
        config = EvalConfig(bootstrap=BootstrapConfig(resamples=200, seed=1))
        report = evaluate_corpus(gold, gold, config)
        for lo, hi in report.ci.values():
            assert lo == 100.0 and hi == 100.0

    def test_thread_metrics_average_per_clip(self):
        gold = {"c1": two_thread_clip(), "c2": two_thread_clip()}
        pred = {"c1": two_thread_clip(), "c2": chain_pred(two_thread_clip())}
        # c1 one-to-one = 100; c2 (gold {{1,2},{3,4}} vs chain {{1,2,3,4}}) = 50
        report = evaluate_corpus(gold, pred)
        assert report.one_to_one == 75.0

    def test_chain_prediction_link_f1_matches_pair_counting(self):
        rng = random.Random(47)
        gold_records = random_records(rng, 15, NAMES[:4])
        pred_records = chain_pred(gold_records)
        gold_links = link_set(gold_records)
        pred_links = link_set(pred_records)
        # oracle: direct pair counting
        tp = len([pair for pair in gold_links if pair in pred_links])
        precision = tp / len(pred_links)
        recall = tp / len(gold_links)
        expected = (0.0 if tp == 0
                    else 2 * precision * recall / (precision + recall))
        report = evaluate_corpus({"c": gold_records}, {"c": pred_records})
        assert report.link_f1 == pytest.approx(100.0 * expected, abs=1e-12)

    def test_micro_vs_macro_role_aggregation(self):
        # clip sizes 2 and 8, speaker all-wrong in the small clip only
        gold = {"small": [record(1, "a"), record(2, "a", reply_to=1)],
                "large": [record(i, "b", reply_to=max(1, i - 1))
                          for i in range(1, 9)]}
        pred = {"small": [record(1, "x"), record(2, "x", reply_to=1)],
                "large": gold["large"]}
        micro = evaluate_corpus(gold, pred, EvalConfig(aggregate="micro"))
        macro = evaluate_corpus(gold, pred, EvalConfig(aggregate="macro"))
        assert micro.speaker_acc == pytest.approx(100.0 * 8 / 10)
        assert macro.speaker_acc == pytest.approx(100.0 * (0.0 + 1.0) / 2)

    def test_filter_nondialogic_drops_flagged_lines(self):
        gold = {"c": [record(1, "a"), record(2, "b", reply_to=1),
                      record(3, "narrator", reply_to=3, extra_diegetic=True)]}
        pred = {"c": [record(1, "a"), record(2, "b", reply_to=1),
                      record(3, "someone else", reply_to=3)]}
        plain = evaluate_corpus(gold, pred)
        filtered = evaluate_corpus(gold, pred, EvalConfig(filter_nondialogic=True))
        assert plain.speaker_acc == pytest.approx(100.0 * 2 / 3)
        assert filtered.speaker_acc == 100.0
        assert filtered.n_utterances == 2

    def test_clip_set_mismatch_raises(self):
        gold = {"c1": [record(1, "a")]}
        pred = {"c2": [record(1, "a")]}
        with pytest.raises(MetricInputError):
            evaluate_corpus(gold, pred)

    def test_rewiring_degrades_link_f1_monotonically(self):
        # expected link F1 never increases with the number of rewired links
        def rewire(records, k, rng):
            out = list(records)
            children = [idx for idx, r in enumerate(out) if not r.is_thread_start]
            for idx in rng.sample(children, min(k, len(children))):
                r = out[idx]
                choices = [j for j in range(1, r.line_idx + 1) if j != r.reply_to]
                out[idx] = record(r.line_idx, r.speaker.canonical_name,
                                  reply_to=rng.choice(choices))
            return out

        base_rng = random.Random(53)
        gold = random_records(base_rng, 20, NAMES[:4], self_link_p=0.2)
        means = []
        for k in (0, 3, 6, 12):
            totals = 0.0
            for seed in range(150):
                rng = random.Random(1000 + seed)
                pred = rewire(gold, k, rng)
                totals += evaluate_corpus({"c": gold}, {"c": pred}).link_f1
            means.append(totals / 150)
        assert means[0] == 100.0
        assert all(a > b for a, b in zip(means, means[1:]))


class TestMetricReport:
    def test_serialization_key_order_and_rounding(self):
        report = MetricReport(
            speaker_acc=34.66666, addressee_f1=19.4949, side_participant_f1=36.98,
            link_f1=92.675, nvi_score=83.34, one_to_one=76.2, exact_match_f1=31.93,
            n_utterances=100, n_clips=10,
        )
        payload = report.as_dict()
        assert list(payload) == [
            "speaker_acc", "addressee_f1", "side_participant_f1", "link_f1",
            "nvi_score", "one_to_one", "exact_match_f1",
            "n_utterances", "n_clips", "raw",
        ]
        assert payload["speaker_acc"] == 34.67
        assert payload["raw"]["speaker_acc"] == 34.66666
