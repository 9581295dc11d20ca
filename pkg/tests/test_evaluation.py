"""Metric oracles: matching, DupRatio, F1@M, F1@5, corpus aggregation."""

import json

import pytest

from exhird.errors import DataError
from exhird.evaluation import (
    PredictionSet,
    corpus_report,
    dedup_stemmed,
    dup_ratio,
    f1_at_5,
    f1_at_m,
    gold_partition,
    load_predictions,
    match,
)
from exhird.text import RawSample


def P(*phrases):
    return [p.split() for p in phrases]


class TestMatch:
    def test_stemmed_equality(self):
        assert match(["neural", "networks"], ["neural", "network"])

    def test_length_mismatch(self):
        assert not match(["graph"], ["graphs", "kernels"])

    def test_identical(self):
        assert match(["graph", "kernels"], ["graph", "kernels"])

    def test_different_words(self):
        assert not match(["graph"], ["kernel"])


class TestDupRatio:
    def test_worked_example(self):
        # [A, A, B, B, A, C] -> 3 duplicates out of 6
        assert dup_ratio(P("a", "a", "b", "b", "a", "c")) == 0.5

    def test_all_distinct(self):
        assert dup_ratio(P("a", "b", "c")) == 0.0

    def test_pair(self):
        assert dup_ratio(P("a", "a")) == 0.5

    def test_empty(self):
        assert dup_ratio([]) == 0.0

    def test_stemming_aware(self):
        assert dup_ratio(P("neural networks", "neural network")) == 0.5

    def test_invariant_under_stem_preserving_rewording(self):
        a = dup_ratio(P("grid", "grids", "grid"))
        b = dup_ratio(P("grid", "grid", "grid"))
        assert a == b


class TestF1AtM:
    def test_perfect(self):
        gold = P("a b", "c", "d")
        assert f1_at_m(gold, gold) == 1.0

    def test_two_of_three_against_four(self):
        preds = P("a", "b", "x")
        gold = P("a", "b", "c", "d")
        assert f1_at_m(preds, gold) == pytest.approx(4 / 7, abs=1e-12)

    def test_zero_matches(self):
        assert f1_at_m(P("x", "y"), P("a")) == 0.0

    def test_empty_predictions(self):
        assert f1_at_m([], P("a")) == 0.0


class TestF1At5:
    def test_three_preds_two_correct_gold_four(self):
        preds = P("a", "b", "x")
        gold = P("a", "b", "c", "d")
        # precision 2/5, recall 1/2
        assert f1_at_5(preds, gold) == pytest.approx(4 / 9, abs=1e-12)

    def test_equals_f1_at_m_with_exactly_five(self):
        preds = P("a", "b", "c", "d", "e")
        gold = P("a", "c", "x")
        assert f1_at_5(preds, gold) == pytest.approx(f1_at_m(preds, gold),
                                                     abs=1e-12)

    def test_zero_predictions(self):
        assert f1_at_5([], P("a")) == 0.0

    def test_truncates_to_first_five(self):
        preds = P("x1", "x2", "x3", "x4", "x5", "a")
        gold = P("a")
        # the only correct phrase is beyond the cutoff
        assert f1_at_5(preds, gold) == 0.0

    def test_padding_never_matches(self):
        gold = P("fake", "kp")
        assert f1_at_5(P("fake"), gold) == pytest.approx(
            2 * (1 / 5) * (1 / 2) / (1 / 5 + 1 / 2), abs=1e-12
        )


class TestConstructedBattery:
    # precision = m/|preds| (or m/5), recall = m/|gold|
    CASES = [
        (["a"], ["a"], 1.0, 2 * 0.2 * 1 / 1.2),
        (["a", "b"], ["a"], 2 / 3, 2 * 0.2 * 1.0 / 1.2),
        (["a", "b", "c"], ["a", "b", "c"], 1.0, 2 * 0.6 * 1.0 / 1.6),
        (["a", "b", "c", "d"], ["a", "b"], 2 * 0.5 * 1.0 / 1.5,
         2 * 0.4 * 1.0 / 1.4),
        (["x"], ["a"], 0.0, 0.0),
        ([], ["a", "b"], 0.0, 0.0),
        (["a", "x", "y", "z", "w", "v"], ["a"],
         2 * (1 / 6) * 1.0 / (1 / 6 + 1.0), 2 * 0.2 * 1.0 / 1.2),
        (["a", "b", "c", "d", "e"], ["a", "b", "c", "d", "e"], 1.0, 1.0),
        (["a", "b"], ["a", "b", "c", "d", "e", "f"],
         2 * 1.0 * (2 / 6) / (1.0 + 2 / 6), 2 * 0.4 * (2 / 6) / (0.4 + 2 / 6)),
        (["a", "b", "c"], ["b"], 2 * (1 / 3) * 1.0 / (1 / 3 + 1.0),
         2 * 0.2 * 1.0 / 1.2),
    ]

    @pytest.mark.parametrize("preds,gold,want_m,want_5", CASES)
    def test_hand_computed(self, preds, gold, want_m, want_5):
        p = [x.split() for x in preds]
        g = [x.split() for x in gold]
        assert f1_at_m(p, g) == pytest.approx(want_m, abs=1e-9)
        assert f1_at_5(p, g) == pytest.approx(want_5, abs=1e-9)


class TestGoldPartition:
    def test_split_by_stemmed_presence(self):
        sample = RawSample(
            "grid computing",
            "a study of grid computing systems",
            ("grid computing", "cloud platforms"),
        )
        present, absent = gold_partition(sample)
        assert present == [["grid", "computing"]]
        assert absent == [["cloud", "platforms"]]

    def test_dedup_after_stemming(self):
        sample = RawSample(
            "networks", "neural networks", ("neural network", "neural networks"),
        )
        present, absent = gold_partition(sample)
        assert len(present) == 1 and absent == []


class TestCorpusReport:
    def make_pred(self, present=(), absent=(), raw=None):
        present = list(present)
        absent = list(absent)
        raw = list(raw) if raw is not None else present + absent
        return PredictionSet.from_record(
            {"present": present, "absent": absent, "raw_sequence": raw}
        )

    def test_macro_average_over_two_docs(self):
        gold = [
            RawSample("alpha beta", "x", ("alpha beta",)),
            RawSample("gamma", "y", ("gamma",)),
        ]
        preds = [
            self.make_pred(present=["alpha beta"]),
            self.make_pred(present=["wrong"]),
        ]
        report = corpus_report(preds, gold)
        assert report.present_f1_at_m == pytest.approx(0.5)

    def test_single_doc_reproduces_per_doc_metrics(self):
        gold = [RawSample("alpha beta", "x", ("alpha beta", "hidden gem"))]
        preds = [self.make_pred(present=["alpha beta"], absent=["hidden gem"])]
        report = corpus_report(preds, gold)
        assert report.present_f1_at_m == 1.0
        assert report.absent_f1_at_m == 1.0
        assert report.per_document[0]["present_f1_at_m"] == 1.0

    def test_unique_counts_exclude_duplicates(self):
        gold = [RawSample("alpha", "x", ("alpha",))]
        preds = [
            self.make_pred(
                present=["alpha", "alpha", "beta"],
                raw=["alpha", "alpha", "beta"],
            )
        ]
        report = corpus_report(preds, gold)
        assert report.avg_present_unique == 2.0
        assert report.per_document[0]["dup_ratio"] == pytest.approx(1 / 3)

    def test_empty_gold_split_excluded_from_macro(self):
        gold = [
            RawSample("alpha", "x", ("alpha",)),        # no absent gold
            RawSample("beta", "y", ("beta", "ghost")),  # has absent gold
        ]
        preds = [
            self.make_pred(present=["alpha"]),
            self.make_pred(present=["beta"], absent=["ghost"]),
        ]
        report = corpus_report(preds, gold)
        assert report.absent_docs_counted == 1
        assert report.absent_f1_at_m == 1.0

    def test_misaligned_counts_raise(self):
        with pytest.raises(DataError):
            corpus_report([], [RawSample("a", "b", ("a",))])

    def test_order_stability(self):
        gold = [
            RawSample("alpha beta", "x", ("alpha beta",)),
            RawSample("gamma", "y", ("gamma", "ghost")),
        ]
        preds = [
            self.make_pred(present=["alpha beta"]),
            self.make_pred(present=["gamma"], absent=["other"]),
        ]
        a = corpus_report(preds, gold)
        b = corpus_report(list(reversed(preds)), list(reversed(gold)))
        assert a.present_f1_at_m == pytest.approx(b.present_f1_at_m)
        assert a.dup_ratio == pytest.approx(b.dup_ratio)

    def test_report_serializes(self):
        gold = [RawSample("alpha", "x", ("alpha",))]
        preds = [self.make_pred(present=["alpha"])]
        report = corpus_report(preds, gold)
        payload = json.dumps(report.to_dict(), sort_keys=True)
        assert "dup_ratio" in payload
        table = report.format_table("x")
        assert "F1@M(P)" in table


class TestPredictionIO:
    def test_load_predictions(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text(
            json.dumps({"present": ["a b"], "absent": [],
                        "raw_sequence": ["a b", "a b"]}) + "\n"
        )
        (pred,) = load_predictions(path)
        assert pred.present_raw == [["a", "b"]]
        assert len(pred.raw_ordered) == 2
        assert pred.unique_stemmed == [["a", "b"]]

    def test_dedup_keeps_first_occurrence(self):
        phrases = P("neural nets", "neural net", "other")
        assert dedup_stemmed(phrases) == P("neural nets", "other")
