import numpy as np
import pytest

from oracles import report_by_counting
from ppmlab.errors import ValidityError
from ppmlab.metrics import (
    accuracy_score,
    classification_report,
    confusion_matrix,
    render_report,
    report_from_json,
    report_to_json,
    resolve_objective,
)


class TestConfusion:
    def test_counts(self):
        m = confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], labels=[0, 1])
        assert m.tolist() == [[1, 1], [0, 2]]

    def test_support_is_row_sum(self):
        report = classification_report([0, 0, 1], [0, 1, 1], labels=[0, 1])
        assert report.support == [2, 1]

    def test_empty_rejected(self):
        with pytest.raises(ValidityError):
            confusion_matrix([], [], labels=[0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidityError):
            confusion_matrix([0, 1], [0], labels=[0, 1])


class TestReport:
    def test_perfect_predictions(self):
        y = [0, 1, 2, 1, 0]
        report = classification_report(y, y)
        assert report.accuracy == 1.0
        assert report.macro_f1 == 1.0
        assert report.weighted_f1 == 1.0
        assert all(p == 1.0 for p in report.precision)

    def test_hand_worked_binary_example(self):
        # confusion [[8,2],[1,9]]
        y_true = [0] * 10 + [1] * 10
        y_pred = [0] * 8 + [1] * 2 + [0] * 1 + [1] * 9
        report = classification_report(y_true, y_pred, labels=[0, 1])
        assert report.precision[0] == pytest.approx(8 / 9)
        assert report.recall[0] == pytest.approx(0.8)
        assert report.f1[0] == pytest.approx(0.8421, abs=1e-4)
        assert report.precision[1] == pytest.approx(9 / 11)
        assert report.recall[1] == pytest.approx(0.9)
        assert report.f1[1] == pytest.approx(0.8571, abs=1e-4)
        assert report.accuracy == pytest.approx(0.85)
        assert report.macro_f1 == pytest.approx(0.8496, abs=1e-4)
        assert report.weighted_f1 == pytest.approx(0.8496, abs=1e-4)

    def test_equal_support_weighted_equals_macro(self):
        rng = np.random.default_rng(0)
        y_true = [0] * 20 + [1] * 20
        y_pred = rng.integers(0, 2, size=40).tolist()
        report = classification_report(y_true, y_pred, labels=[0, 1])
        assert report.weighted_f1 == pytest.approx(report.macro_f1, abs=1e-12)

    def test_matches_counting_oracle_randomized(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            k = int(rng.integers(2, 7))
            n = int(rng.integers(2, 200))
            y_true = rng.integers(0, k, size=n).tolist()
            y_pred = rng.integers(0, k, size=n).tolist()
            labels = list(range(k))
            report = classification_report(y_true, y_pred, labels=labels)
            per_class, acc, macro, weighted = report_by_counting(y_true, y_pred, labels)
            for i, label in enumerate(labels):
                p, r, f, s = per_class[label]
                assert report.precision[i] == p
                assert report.recall[i] == r
                assert report.f1[i] == f
                assert report.support[i] == s
            assert report.accuracy == acc
            assert report.macro_f1 == pytest.approx(macro, abs=1e-15)
            assert report.weighted_f1 == pytest.approx(weighted, abs=1e-15)

    def test_aggregates_bounded_by_class_f1(self):
        rng = np.random.default_rng(4)
        y_true = rng.integers(0, 3, size=100).tolist()
        y_pred = rng.integers(0, 3, size=100).tolist()
        report = classification_report(y_true, y_pred, labels=[0, 1, 2])
        assert min(report.f1) <= report.weighted_f1 <= max(report.f1)
        assert min(report.f1) <= report.macro_f1 <= max(report.f1)

    def test_accuracy_is_support_weighted_recall(self):
        rng = np.random.default_rng(5)
        y_true = rng.integers(0, 4, size=120).tolist()
        y_pred = rng.integers(0, 4, size=120).tolist()
        report = classification_report(y_true, y_pred, labels=[0, 1, 2, 3])
        weighted_recall = np.dot(report.support, report.recall) / sum(report.support)
        assert report.accuracy == pytest.approx(weighted_recall, abs=1e-15)

    def test_zero_division_flagged(self):
        report = classification_report([0, 0], [1, 1], labels=[0, 1])
        assert report.precision[0] == 0.0
        assert report.zero_division_flags[0]


class TestRendering:
    def test_text_layout(self):
        report = classification_report([0, 1], [0, 1], labels=[0, 1])
        text = render_report(report)
        lines = text.strip().splitlines()
        assert lines[0].split() == ["Class", "Precision", "Recall", "F1", "S"]
        assert lines[-3].startswith("Acc")
        assert lines[-2].startswith("MF1")
        assert lines[-1].startswith("WF1")

    def test_single_class_degenerate(self):
        report = classification_report(["a", "a"], ["a", "a"], labels=["a"])
        text = render_report(report)
        assert len(text.strip().splitlines()) == 1 + 1 + 3  # header, class row, aggregates

    def test_json_round_trip(self):
        report = classification_report([0, 1, 1], [0, 0, 1], labels=[0, 1])
        clone = report_from_json(report_to_json(report))
        assert clone.to_dict() == report.to_dict()


class TestObjectives:
    def test_accuracy(self):
        fn = resolve_objective("accuracy")
        assert fn(np.array([0, 1, 1]), np.array([0, 1, 0])) == pytest.approx(2 / 3)

    def test_weighted_f1(self):
        fn = resolve_objective("weighted_f1")
        assert fn(np.array([0, 1]), np.array([0, 1])) == 1.0

    def test_unknown(self):
        with pytest.raises(ValidityError):
            resolve_objective("auc")

    def test_accuracy_empty_rejected(self):
        with pytest.raises(ValidityError):
            accuracy_score([], [])


class TestCsvExport:
    def test_confusion_to_csv(self):
        from ppmlab.metrics import confusion_to_csv

        m = confusion_matrix([0, 0, 1], [0, 1, 1], labels=[0, 1])
        text = confusion_to_csv(m, [0, 1])
        lines = text.strip().splitlines()
        assert lines[0] == "true\\pred,0,1"
        assert lines[1] == "0,1,1"
        assert lines[2] == "1,0,1"
