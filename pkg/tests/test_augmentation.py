import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support

from ecgsynth.augmentation import (
    ClassificationReport,
    ClassifierConfig,
    ConfusionMatrix,
    ExperimentSpec,
    build_scenarios,
    evaluate_classifier,
    run_experiment,
    train_classifier,
)
from ecgsynth.dataset import BeatSet, concat
from ecgsynth.errors import BadConfig, EmptyTestSet, InsufficientData, SingleClassTrainSet
from ecgsynth.nn import softmax_ce_loss


def _report(counts, classes=("L", "N")):
    return ClassificationReport.from_confusion(ConfusionMatrix(classes, np.array(counts)))


# -- metrics ---------------------------------------------------------------------------


def test_fully_biased_classifier():
    r = _report([[1608, 0], [1480, 128]])
    assert r.recall[1] == pytest.approx(0.0796, abs=5e-5)
    assert r.precision[1] == 1.0
    assert r.recall[0] == 1.0
    assert r.support == [1608, 1608]


def test_near_balanced_classifier():
    r = _report([[1552, 57], [88, 1519]])
    assert r.accuracy == pytest.approx(0.955, abs=5e-4)
    assert r.accuracy == 3071 / 3216


def test_zero_division_is_flagged():
    r = _report([[5, 0], [3, 0]])
    assert r.precision[1] == 0.0 and r.f1[1] == 0.0
    assert "precision[N]" in r.zero_division and "f1[N]" in r.zero_division
    with pytest.raises(EmptyTestSet):
        _report([[0, 0], [0, 0]])
    with pytest.raises(ValueError):
        ConfusionMatrix(("L", "N"), np.array([[1, -1], [0, 0]]))


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 4), st.integers(1, 200), st.integers(0, 10_000))
def test_metrics_match_sklearn(k, n, seed):
    rng = np.random.default_rng(seed)
    y_true = rng.integers(0, k, n)
    y_pred = np.where(rng.uniform(size=n) < 0.6, y_true, rng.integers(0, k, n))
    classes = tuple("ABCD"[:k])
    r = ClassificationReport.from_confusion(ConfusionMatrix.from_predictions(classes, y_true, y_pred))
    labels = list(range(k))
    assert np.array_equal(r.confusion.counts, confusion_matrix(y_true, y_pred, labels=labels))
    assert r.accuracy == pytest.approx(accuracy_score(y_true, y_pred), abs=1e-12)
    p, rc, f, s = precision_recall_fscore_support(y_true, y_pred, labels=labels, zero_division=0)
    assert np.allclose(r.precision, p, atol=1e-12)
    assert np.allclose(r.recall, rc, atol=1e-12)
    assert np.allclose(r.f1, f, atol=1e-12)
    assert r.support == s.tolist()
    for avg, mine in (("macro", r.macro), ("weighted", r.weighted)):
        p, rc, f, _ = precision_recall_fscore_support(y_true, y_pred, labels=labels, average=avg, zero_division=0)
        assert (mine["precision"], mine["recall"], mine["f1"]) == pytest.approx((p, rc, f), abs=1e-12)
    # invariants
    assert sum(r.support) == n
    assert all(0.0 <= v <= 1.0 for v in r.precision + r.recall + r.f1)
    assert r.macro_f1 == pytest.approx(sum(r.f1) / k, abs=1e-15)


def test_report_text_and_dict():
    r = _report([[9, 1], [2, 8]])
    text = r.to_text("title")
    assert text.startswith("title\n") and "macro avg" in text and "weighted avg" in text
    d = json.loads(json.dumps(r.to_dict()))
    assert d["confusion"] == [[9, 1], [2, 8]] and d["accuracy"] == 0.85


# -- classifier ------------------------------------------------------------------------


def _toy(n_per_class, seed, gap=1.0, length=16):
    rng = np.random.default_rng(seed)
    a = rng.normal(-gap, 0.3, (n_per_class, length))
    b = rng.normal(gap, 0.3, (n_per_class, length))
    return concat([BeatSet.from_beats(a, "L"), BeatSet.from_beats(b, "N")])


def test_classifier_separates_toy_data():
    data = _toy(100, 0)
    model = train_classifier(data, ClassifierConfig(epochs=20, lr=0.01, seed=1))
    assert evaluate_classifier(model, data).accuracy >= 0.99
    assert model.classes == ("L", "N")
    assert set(model.predict(data.beats[:3]).tolist()) <= {"L", "N"}


def test_untrained_classifier_is_uninformative():
    data = _toy(50, 1)
    model = train_classifier(data, ClassifierConfig(epochs=0))
    y = np.array([0] * 50 + [1] * 50)
    loss, _ = softmax_ce_loss(model.logits(data.beats), y)
    assert loss == pytest.approx(math.log(2), abs=0.05)


def test_classifier_determinism_and_errors():
    data = _toy(40, 2)
    cfg = ClassifierConfig(epochs=3, lr=0.01, seed=5)
    a, b = train_classifier(data, cfg), train_classifier(data, cfg)
    assert all(np.array_equal(p, q) for p, q in zip(a.parameters(), b.parameters()))
    with pytest.raises(SingleClassTrainSet):
        train_classifier(BeatSet.from_beats(np.zeros((4, 16)), "L"), cfg)
    with pytest.raises(EmptyTestSet):
        evaluate_classifier(a, BeatSet.empty(16))
    with pytest.raises(BadConfig):
        ClassifierConfig(lr=0.0)


# -- scenarios -------------------------------------------------------------------------

SPEC = ExperimentSpec(balanced_count=30, minority_count_imbalanced=5, test_per_class=20, seed=3)


def _real():
    return _toy(60, 7)


def test_scenario_sizes_and_disjointness():
    gen = BeatSet.from_beats(np.random.default_rng(0).normal(1.0, 0.3, (40, 16)), "G", source="generated")
    sc = build_scenarios(_real(), SPEC, gen)
    counts = {n: s.class_counts() for n, s in sc.train.items()}
    assert counts == {
        "balanced": {"L": 30, "N": 30},
        "imbalanced": {"L": 30, "N": 5},
        "augmented": {"L": 30, "N": 30},
    }
    assert sc.train["augmented"].source == "augmented" and sc.generated_count == 25
    assert sc.test.class_counts() == {"L": 20, "N": 20}
    for c in ("L", "N"):
        test = set(sc.test_indices[c].tolist())
        for name in ("balanced", "imbalanced"):
            assert test.isdisjoint(sc.real_indices[name][c].tolist())
        # the imbalanced minority is a subset of the balanced one
        assert set(sc.real_indices["imbalanced"][c].tolist()) <= set(sc.real_indices["balanced"][c].tolist())


def test_scenario_errors():
    with pytest.raises(InsufficientData):
        build_scenarios(_toy(40, 0), SPEC)
    with pytest.raises(InsufficientData):
        build_scenarios(_real(), ExperimentSpec(balanced_count=5, minority_count_imbalanced=5, test_per_class=5))
    with pytest.raises(InsufficientData):
        build_scenarios(_real(), SPEC, BeatSet.from_beats(np.zeros((3, 16)), "G"))
    with pytest.raises(BadConfig):
        ExperimentSpec(majority_class="N", minority_class="N")
    assert "augmented" not in build_scenarios(_real(), SPEC).train


def test_experiment_parallel_equals_sequential():
    spec = ExperimentSpec(
        balanced_count=30, minority_count_imbalanced=5, test_per_class=20, seed=3,
        classifier=ClassifierConfig(epochs=3, lr=0.01),
    )  # fmt: skip
    gen = BeatSet.from_beats(np.random.default_rng(0).normal(1.0, 0.3, (40, 16)), "G")
    seq = run_experiment(_real(), spec, gen)
    par = run_experiment(_real(), spec, gen, parallel=True)
    assert seq.to_json() == par.to_json()
    s = seq.summary
    assert set(s["macro_f1"]) == {"balanced", "imbalanced", "augmented"}
    assert s["delta_augmented_minus_imbalanced"] == s["macro_f1"]["augmented"] - s["macro_f1"]["imbalanced"]
    text = seq.to_text()
    assert "(i) balanced real" in text and "(iii) imbalanced + generated" in text
