import json

import numpy as np
import pytest

from mbfa.data import SyntheticSpec, ViewSpec, generate_synthetic
from mbfa.evaluation import (
    EvaluationReport,
    aggregate_repeats,
    benchmark,
    evaluate,
    report_to_dict,
    save_confusion_csv,
)
from mbfa.pipeline import FusionWeights


class TestEvaluate:
    def test_all_correct(self):
        report = evaluate([3, 4, 3, 4], [3, 4, 3, 4], [3, 4])
        assert report.mean_per_class_top1 == 1.0
        np.testing.assert_array_equal(report.confusion, [[2, 0], [0, 2]])

    def test_per_class_not_overall(self):
        """2/2 on one class and 0/3 on the other averages to 0.5, not 0.4."""
        predicted = [0, 0, 0, 0, 0]
        truth = [0, 0, 1, 1, 1]
        report = evaluate(predicted, truth, [0, 1])
        np.testing.assert_array_equal(report.per_class_accuracy, [1.0, 0.0])
        assert report.mean_per_class_top1 == 0.5

    def test_counting_oracle(self):
        rng = np.random.default_rng(0)
        classes = [5, 7, 9, 11]
        truth = rng.choice(classes, size=60)
        predicted = rng.choice(classes, size=60)
        # every class needs at least one true instance
        truth[:4] = classes
        report = evaluate(predicted.tolist(), truth.tolist(), classes)
        for i, c_true in enumerate(classes):
            for j, c_pred in enumerate(classes):
                count = int(np.sum((truth == c_true) & (predicted == c_pred)))
                assert report.confusion[i, j] == count
            expected = report.confusion[i, i] / report.confusion[i].sum()
            assert report.per_class_accuracy[i] == pytest.approx(expected)
        assert report.confusion.sum() == 60

    def test_accepts_prediction_objects(self):
        class Fake:
            def __init__(self, cid):
                self.class_id = cid

        report = evaluate([Fake(1), Fake(2)], [1, 2], [1, 2])
        assert report.mean_per_class_top1 == 1.0

    def test_label_outside_class_set(self):
        with pytest.raises(ValueError, match="outside"):
            evaluate([0, 1], [0, 9], [0, 1])

    def test_class_without_instances(self):
        with pytest.raises(ValueError, match="without test instances"):
            evaluate([0, 0], [0, 0], [0, 1])

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        classes = [0, 1, 2]
        truth = rng.choice(classes, size=30)
        truth[:3] = classes
        predicted = rng.choice(classes, size=30)
        base = evaluate(predicted.tolist(), truth.tolist(), classes)
        relabel = {0: 2, 1: 0, 2: 1}
        permuted = evaluate(
            [relabel[p] for p in predicted],
            [relabel[t] for t in truth],
            classes,
        )
        assert permuted.mean_per_class_top1 == pytest.approx(base.mean_per_class_top1)


class TestAggregateRepeats:
    def test_single_value(self):
        assert aggregate_repeats([0.8]) == (0.8, 0.0)

    def test_two_values(self):
        mean, std = aggregate_repeats([0.7, 0.9])
        assert mean == pytest.approx(0.8)
        assert std == pytest.approx(0.1414213562373095, rel=1e-12)

    def test_ten_values_match_formula(self):
        rng = np.random.default_rng(2)
        values = rng.uniform(0.4, 0.9, size=10).tolist()
        mean, std = aggregate_repeats(values)
        n = len(values)
        manual_mean = sum(values) / n
        manual_std = (sum((v - manual_mean) ** 2 for v in values) / (n - 1)) ** 0.5
        assert mean == pytest.approx(manual_mean, rel=1e-12)
        assert std == pytest.approx(manual_std, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            aggregate_repeats([])


class TestBenchmark:
    def test_fields_positive_and_finite(self):
        spec = SyntheticSpec(
            latent_dim=4, class_count=8, instances_per_class=6,
            views=(ViewSpec(10, 0.1), ViewSpec(6), ViewSpec(5)),
            seed=0, latent_sigma=0.1, unseen_count=2,
        )
        ds = generate_synthetic(spec)
        timing = benchmark(ds, None, 3, weights=FusionWeights.uniform(2), repeats=2)
        assert 0.0 < timing.fit_seconds < np.inf
        assert 0.0 < timing.infer_ms_per_image < np.inf


class TestReportOutput:
    def make_report(self):
        return evaluate([0, 0, 1, 1, 1], [0, 0, 0, 1, 1], [0, 1])

    def test_json_dict(self):
        doc = report_to_dict(self.make_report(), class_names=["ant", "bee"])
        assert doc["class_names"] == ["ant", "bee"]
        assert doc["mean_per_class_top1"] == pytest.approx(5.0 / 6.0)
        assert json.dumps(doc)  # serializable

    def test_confusion_csv(self, tmp_path):
        path = tmp_path / "confusion.csv"
        save_confusion_csv(path, self.make_report(), ["ant", "bee"])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "true\\predicted,ant,bee"
        assert lines[1] == "ant,2,1"
        assert lines[2] == "bee,0,2"

    def test_optional_fields_omitted(self):
        doc = report_to_dict(self.make_report())
        assert "std_over_repeats" not in doc
        assert "timing" not in doc

    def test_std_field_round_trip(self):
        base = self.make_report()
        with_std = EvaluationReport(
            class_ids=base.class_ids,
            confusion=base.confusion,
            per_class_accuracy=base.per_class_accuracy,
            mean_per_class_top1=base.mean_per_class_top1,
            std_over_repeats=0.01,
        )
        assert report_to_dict(with_std)["std_over_repeats"] == 0.01
