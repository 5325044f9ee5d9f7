"""Three-scenario classification experiment for judging generated beats.

A binary classifier is trained on

(i)   a balanced set of real majority and minority beats,
(ii)  the same majority beats with only a few real minority beats,
(iii) set (ii) topped up with generated minority beats until balanced,

and every model is scored on one shared, real-only test set that is held
out before any training set is drawn.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import BeatSet, concat, filter_class
from .errors import BadConfig, EmptyTestSet, InsufficientData, SingleClassTrainSet
from .nn import Adam, LayerSpec, Sequential, softmax_ce_loss
from .rng import Rng

SCENARIOS = ("balanced", "imbalanced", "augmented")

# random streams of the experiment seed
STREAM_SPLIT, STREAM_CLASSIFIER, STREAM_AUGMENT = 10, 11, 12


@dataclass(frozen=True)
class ClassifierConfig:
    hidden: int = 32
    epochs: int = 5
    lr: float = 0.0002
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1 or self.batch_size < 1 or self.epochs < 0 or not self.lr > 0:
            raise BadConfig(f"invalid classifier config {self}")


@dataclass(frozen=True)
class ExperimentSpec:
    """Class roles and sizes of the three scenarios.

    ``balanced_count`` beats per class form scenario (i); scenario (ii) keeps
    the majority beats and ``minority_count_imbalanced`` minority beats.
    ``test_per_class`` real beats of each class are held out first.
    """

    majority_class: str = "L"
    minority_class: str = "N"
    balanced_count: int = 600
    minority_count_imbalanced: int = 50
    test_per_class: int = 200
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    seed: int = 0

    def __post_init__(self):
        if self.majority_class == self.minority_class:
            raise BadConfig("majority and minority classes must differ")
        if min(self.balanced_count, self.minority_count_imbalanced, self.test_per_class) < 1:
            raise BadConfig("scenario sizes must be positive")

    @property
    def classes(self) -> tuple[str, str]:
        return (self.majority_class, self.minority_class)

    def to_dict(self) -> dict:
        return asdict(self)


# -- metrics ---------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if c.shape != (k, k) or (c < 0).any():
            raise ValueError(f"confusion counts must be a non-negative {k}x{k} matrix")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_predictions(cls, classes, y_true, y_pred) -> "ConfusionMatrix":
        k = len(classes)
        c = np.zeros((k, k), dtype=np.int64)
        np.add.at(c, (np.asarray(y_true), np.asarray(y_pred)), 1)
        return cls(tuple(classes), c)

    @property
    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _ratio(num: float, den: float) -> tuple[float, bool]:
    # zero denominators report 0 and raise the flag
    return (num / den, False) if den > 0 else (0.0, True)


@dataclass
class ClassificationReport:
    confusion: ConfusionMatrix
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    accuracy: float
    macro: dict
    weighted: dict
    zero_division: list[str]

    @property
    def classes(self) -> tuple[str, ...]:
        return self.confusion.classes

    @property
    def macro_f1(self) -> float:
        return self.macro["f1"]

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix) -> "ClassificationReport":
        c = cm.counts
        if cm.total == 0:
            raise EmptyTestSet("no test predictions to score")
        precision, recall, f1, flags = [], [], [], []
        for k, name in enumerate(cm.classes):
            tp = int(c[k, k])
            p, fp = _ratio(tp, int(c[:, k].sum()))
            r, fr = _ratio(tp, int(c[k, :].sum()))
            f, ff = _ratio(2.0 * p * r, p + r)
            flags += [f"{m}[{name}]" for m, bad in (("precision", fp), ("recall", fr), ("f1", ff)) if bad]
            precision.append(p)
            recall.append(r)
            f1.append(f)
        support = [int(s) for s in cm.supports]
        total = cm.total
        accuracy = int(np.trace(c)) / total
        macro = {m: sum(v) / len(v) for m, v in (("precision", precision), ("recall", recall), ("f1", f1))}
        weighted = {
            m: sum(s * x for s, x in zip(support, v)) / total
            for m, v in (("precision", precision), ("recall", recall), ("f1", f1))
        }
        return cls(cm, precision, recall, f1, support, accuracy, macro, weighted, flags)

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "accuracy": self.accuracy,
            "macro_avg": self.macro,
            "weighted_avg": self.weighted,
            "confusion": self.confusion.counts.tolist(),
            "zero_division": self.zero_division,
        }

    def to_text(self, title: str | None = None) -> str:
        lines = [title] if title else []
        lines.append(f"{'':>14}{'precision':>11}{'recall':>9}{'f1-score':>10}{'support':>9}")
        for k, name in enumerate(self.classes):
            lines.append(
                f"{name:>14}{self.precision[k]:>11.2f}{self.recall[k]:>9.2f}{self.f1[k]:>10.2f}{self.support[k]:>9d}"
            )
        total = sum(self.support)
        lines.append("")
        lines.append(f"{'accuracy':>14}{'':>11}{'':>9}{self.accuracy:>10.2f}{total:>9d}")
        for name, avg in (("macro avg", self.macro), ("weighted avg", self.weighted)):
            lines.append(f"{name:>14}{avg['precision']:>11.2f}{avg['recall']:>9.2f}{avg['f1']:>10.2f}{total:>9d}")
        lines.append("")
        width = max(8, *(len(c) for c in self.classes)) + 2
        lines.append("confusion (rows true, cols predicted)")
        lines.append(" " * width + "".join(f"{c:>{width}}" for c in self.classes))
        for k, name in enumerate(self.classes):
            lines.append(f"{name:>{width}}" + "".join(f"{v:>{width}d}" for v in self.confusion.counts[k]))
        if self.zero_division:
            lines.append("zero denominators reported as 0: " + ", ".join(self.zero_division))
        return "\n".join(lines) + "\n"


# -- classifier ------------------------------------------------------------------


@dataclass
class Classifier:
    """Fully connected ``length -> hidden -> n_classes`` network with ReLU."""

    net: Sequential
    classes: tuple[str, ...]
    config: ClassifierConfig

    def logits(self, beats) -> np.ndarray:
        return self.net.forward(np.asarray(beats, dtype=np.float64), training=False)

    def predict_index(self, beats) -> np.ndarray:
        return np.argmax(self.logits(beats), axis=1)

    def predict(self, beats) -> np.ndarray:
        return np.asarray(self.classes, dtype=object)[self.predict_index(beats)]

    def parameters(self) -> list[np.ndarray]:
        return [p.value for p in self.net.params]


def classifier_specs(length: int, hidden: int, n_classes: int) -> list[LayerSpec]:
    return [
        LayerSpec("fc", {"in_features": length, "out_features": hidden}),
        LayerSpec("relu"),
        LayerSpec("fc", {"in_features": hidden, "out_features": n_classes}),
    ]


def _label_indices(labels, classes) -> np.ndarray:
    lookup = {c: i for i, c in enumerate(classes)}
    unknown = set(labels.tolist()) - set(lookup)
    if unknown:
        raise BadConfig(f"labels {sorted(unknown)} are not among the classes {list(classes)}")
    return np.array([lookup[v] for v in labels.tolist()], dtype=np.int64)


def train_classifier(train: BeatSet, config: ClassifierConfig = ClassifierConfig(), classes=None) -> Classifier:
    """Minibatch Adam on softmax cross-entropy; deterministic per ``config.seed``."""
    present = sorted(set(train.labels.tolist()))
    if len(present) < 2:
        raise SingleClassTrainSet(f"training set holds only the classes {present}")
    classes = tuple(classes) if classes is not None else tuple(present)
    y = _label_indices(train.labels, classes)
    x = np.asarray(train.beats, dtype=np.float64)

    rng = Rng(config.seed, STREAM_CLASSIFIER)
    net = Sequential.from_specs(classifier_specs(train.length, config.hidden, len(classes)), rng)
    opt = Adam(net.params, lr=config.lr, beta1=0.9, beta2=0.999)
    n = x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            opt.zero_grad()
            _, g = softmax_ce_loss(net.forward(x[idx]), y[idx])
            net.backward(g)
            opt.step()
    return Classifier(net, classes, config)


def evaluate_classifier(model: Classifier, test: BeatSet) -> ClassificationReport:
    if test.count == 0:
        raise EmptyTestSet("test set is empty")
    y_true = _label_indices(test.labels, model.classes)
    cm = ConfusionMatrix.from_predictions(model.classes, y_true, model.predict_index(test.beats))
    return ClassificationReport.from_confusion(cm)


# -- scenarios -------------------------------------------------------------------


@dataclass
class Scenarios:
    """Training sets of the three scenarios and the shared test set.

    ``real_indices[name][label]`` lists the positions (within that class's
    beats as given to :func:`build_scenarios`) of the real training beats;
    ``test_indices[label]`` does the same for the test set.
    """

    train: dict[str, BeatSet]
    test: BeatSet
    real_indices: dict[str, dict[str, np.ndarray]]
    test_indices: dict[str, np.ndarray]
    generated_count: int


def _per_class(real, classes) -> dict[str, BeatSet]:
    if isinstance(real, BeatSet):
        return {c: filter_class(real, c) for c in classes}
    return {c: real[c] for c in classes}


def build_scenarios(real, spec: ExperimentSpec, generated: BeatSet | None = None) -> Scenarios:
    """Hold out the test set, then draw the three training sets from the rest.

    ``real`` is a labeled :class:`BeatSet` or a mapping class -> BeatSet.
    ``generated`` supplies the minority beats for scenario (iii); exactly
    ``balanced_count - minority_count_imbalanced`` of them are used, picked
    by the experiment seed. Without it, scenario (iii) is omitted.
    """
    maj, mino = spec.classes
    if spec.minority_count_imbalanced >= spec.balanced_count:
        raise InsufficientData(
            f"minority count {spec.minority_count_imbalanced} must be below the balanced count {spec.balanced_count}"
        )
    sets = _per_class(real, spec.classes)
    need = spec.test_per_class + spec.balanced_count
    for c, s in sets.items():
        if s.count < need:
            raise InsufficientData(f"class {c} has {s.count} beats, {need} needed")

    rng = Rng(spec.seed, STREAM_SPLIT)
    test_idx, pool_idx = {}, {}
    for c in spec.classes:
        order = rng.permutation(sets[c].count)
        test_idx[c] = np.sort(order[: spec.test_per_class])
        pool_idx[c] = order[spec.test_per_class :]

    take = {
        "balanced": {maj: pool_idx[maj][: spec.balanced_count], mino: pool_idx[mino][: spec.balanced_count]},
        "imbalanced": {
            maj: pool_idx[maj][: spec.balanced_count],
            mino: pool_idx[mino][: spec.minority_count_imbalanced],
        },
    }
    test = concat([sets[c].take(test_idx[c]) for c in spec.classes], source="real")
    train = {name: concat([sets[c].take(idx[c]) for c in spec.classes], source="real") for name, idx in take.items()}

    n_gen = 0
    if generated is not None:
        n_gen = spec.balanced_count - spec.minority_count_imbalanced
        if generated.count < n_gen:
            raise InsufficientData(f"{n_gen} generated beats needed, {generated.count} given")
        pick = Rng(spec.seed, STREAM_AUGMENT).choice(generated.count, n_gen)
        extra = BeatSet.from_beats(generated.beats[np.sort(pick)], mino, source="generated")
        train["augmented"] = concat([train["imbalanced"], extra], source="augmented")
        take["augmented"] = take["imbalanced"]
    return Scenarios(train, test, take, test_idx, n_gen)


# -- experiment ------------------------------------------------------------------


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    reports: dict[str, ClassificationReport]
    train_counts: dict[str, dict[str, int]]
    test_counts: dict[str, int]
    generated_count: int

    @property
    def summary(self) -> dict:
        f1 = {name: r.macro_f1 for name, r in self.reports.items()}
        out = {"macro_f1": f1, "accuracy": {name: r.accuracy for name, r in self.reports.items()}}
        if "augmented" in f1:
            out["delta_augmented_minus_imbalanced"] = f1["augmented"] - f1["imbalanced"]
            out["delta_balanced_minus_augmented"] = f1["balanced"] - f1["augmented"]
        out["delta_balanced_minus_imbalanced"] = f1["balanced"] - f1["imbalanced"]
        return out

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "train_counts": self.train_counts,
            "test_counts": self.test_counts,
            "generated_count": self.generated_count,
            "reports": {name: r.to_dict() for name, r in self.reports.items()},
            "summary": self.summary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        titles = {
            "balanced": "(i) balanced real",
            "imbalanced": "(ii) imbalanced real",
            "augmented": "(iii) imbalanced + generated",
        }
        parts = []
        for name, rep in self.reports.items():
            counts = ", ".join(f"{c}: {n}" for c, n in self.train_counts[name].items())
            parts.append(rep.to_text(f"== {titles[name]}  train [{counts}]"))
        s = self.summary
        rows = ["== summary", f"{'scenario':<14}{'macro F1':>10}{'accuracy':>10}"]
        for name in self.reports:
            rows.append(f"{name:<14}{s['macro_f1'][name]:>10.4f}{s['accuracy'][name]:>10.4f}")
        for key in sorted(k for k in s if k.startswith("delta")):
            rows.append(f"{key}: {s[key]:+.4f}")
        parts.append("\n".join(rows) + "\n")
        return "\n".join(parts)


def _fit_and_score(args):
    train, test, config, classes = args
    return evaluate_classifier(train_classifier(train, config, classes), test)


def run_experiment(real, spec: ExperimentSpec, generated: BeatSet | None = None, parallel: bool = False):
    """Train and score one classifier per scenario against the shared test set.

    With ``parallel=True`` the scenarios run in separate processes; results
    are identical to the sequential run since every scenario seeds its own
    classifier stream.
    """
    sc = build_scenarios(real, spec, generated)
    names = [n for n in SCENARIOS if n in sc.train]
    jobs = [(sc.train[n], sc.test, spec.classifier, spec.classes) for n in names]
    if parallel:
        with ProcessPoolExecutor(max_workers=len(jobs)) as ex:
            reports = list(ex.map(_fit_and_score, jobs))
    else:
        reports = [_fit_and_score(j) for j in jobs]
    return ExperimentResult(
        spec,
        dict(zip(names, reports)),
        {n: {c: sc.train[n].class_counts().get(c, 0) for c in spec.classes} for n in names},
        {c: sc.test.class_counts().get(c, 0) for c in spec.classes},
        sc.generated_count,
    )
