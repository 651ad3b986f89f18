"""One-vs-rest linear SVM trained by stochastic subgradient descent.

For every class ``c`` the trainer minimises

    F_c(w) = lam * |w|^2 + sum_i a_i * max(0, 1 - y_ic * (w . x_i))

where ``x_i`` is the feature vector with a constant 1 appended (so the bias is
the last weight and is regularised like the others), ``y_ic`` is +1 for
examples of class ``c`` and -1 otherwise, and the example weights ``a_i`` sum
to 1.  Step ``t`` (counting from 1 over all epochs) uses the learning rate
``1 / (2 * lam * t)``; one epoch visits every example once in a seeded order.

At the end of each epoch the running average of all iterates so far is scored
with the full objective.  The returned model is the epoch-end average with the
lowest total objective, so the recorded history never increases.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from courtrel.corpus import LABEL_ORDER, RelationLabel, as_relation
from courtrel.errors import (ManifestMismatchError, ModelCorruptError, ModelFormatError,
                             ModelVersionError, TrainingError)
from courtrel.evaluation import ConfusionMatrix, MetricsReport, precision_recall_f1
from courtrel.features import FEATURE_NAMES, FeatureVector

FORMAT_VERSION = 1
MODEL_KIND = "courtrel-linear-svm"
WEIGHTINGS = ("uniform", "inverse-frequency")
LEARNING_RATE = "1/(2*lam*t)"


@dataclass(frozen=True)
class TrainingConfig:
    lam: float = 1e-3
    epochs: int = 60
    seed: int = 0
    class_weighting: str = "inverse-frequency"

    def __post_init__(self):
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam > 0):
            raise TrainingError(f"lam must be a positive finite number, got {self.lam!r}")
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise TrainingError(f"epochs must be a positive integer, got {self.epochs!r}")
        if self.class_weighting not in WEIGHTINGS:
            raise TrainingError(f"class_weighting must be one of {', '.join(WEIGHTINGS)}")

    def as_dict(self) -> dict:
        return {"lam": float(self.lam).hex(), "epochs": self.epochs, "seed": self.seed,
                "class_weighting": self.class_weighting, "learning_rate": LEARNING_RATE}

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainingConfig":
        return cls(float.fromhex(data["lam"]), int(data["epochs"]), int(data["seed"]), data["class_weighting"])


@dataclass(frozen=True)
class SvmModel:
    classes: tuple[RelationLabel, ...]
    weights: tuple[tuple[float, ...], ...]
    biases: tuple[float, ...]
    feature_manifest: tuple[str, ...] = FEATURE_NAMES
    hyperparams: TrainingConfig = field(default_factory=TrainingConfig)
    format_version: int = FORMAT_VERSION
    data_fingerprint: str = ""
    objective_history: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(as_relation(c) for c in self.classes))
        object.__setattr__(self, "weights", tuple(tuple(float(v) for v in row) for row in self.weights))
        object.__setattr__(self, "biases", tuple(float(b) for b in self.biases))
        object.__setattr__(self, "feature_manifest", tuple(self.feature_manifest))
        object.__setattr__(self, "objective_history", tuple(float(v) for v in self.objective_history))
        if len(set(self.classes)) != len(self.classes) or not self.classes:
            raise ModelFormatError("model classes must be distinct and non-empty")
        if len(self.weights) != len(self.classes) or len(self.biases) != len(self.classes):
            raise ModelFormatError("one weight vector and one bias per class required")
        if any(len(w) != len(self.feature_manifest) for w in self.weights):
            raise ModelFormatError("weight vector length differs from the feature manifest")


# ---------------------------------------------------------------------------
# Inputs


def vector_values(fv, manifest: Sequence[str] = FEATURE_NAMES) -> tuple[float, ...]:
    """Feature values ordered by ``manifest``.

    Accepts a :class:`FeatureVector`, a name-to-value mapping or a plain
    sequence already in manifest order.
    """
    if isinstance(fv, FeatureVector):
        if tuple(manifest) != FEATURE_NAMES:
            raise ManifestMismatchError("feature vector manifest differs from the model manifest")
        return fv.values()
    if isinstance(fv, Mapping):
        if set(fv) != set(manifest):
            extra = sorted(set(fv) - set(manifest))
            missing = sorted(set(manifest) - set(fv))
            raise ManifestMismatchError(f"feature names differ from manifest (extra {extra}, missing {missing})")
        return tuple(float(fv[name]) for name in manifest)
    values = tuple(float(v) for v in fv)
    if len(values) != len(manifest):
        raise ManifestMismatchError(f"expected {len(manifest)} features, got {len(values)}")
    return values


def example_weights(labels: Sequence[RelationLabel], scheme: str) -> list[float]:
    """Per-example weights summing to 1.

    ``uniform`` gives every example 1/n.  ``inverse-frequency`` gives an example
    of class c the weight 1/(K * n_c), so each of the K classes carries 1/K in total.
    """
    n = len(labels)
    if scheme == "uniform":
        return [1.0 / n] * n
    counts: dict[RelationLabel, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    k = len(counts)
    return [1.0 / (k * counts[lab]) for lab in labels]


def _canonical(dataset, manifest) -> list[tuple[tuple[float, ...], RelationLabel]]:
    rows = [(vector_values(fv, manifest), as_relation(lab)) for fv, lab in dataset]
    rank = {lab: i for i, lab in enumerate(LABEL_ORDER)}
    rows.sort(key=lambda r: (rank[r[1]], r[0]))
    return rows


def dataset_fingerprint(rows: Sequence[tuple[tuple[float, ...], RelationLabel]]) -> str:
    h = hashlib.sha256()
    for values, lab in rows:
        h.update((lab.value + "\t" + ",".join(v.hex() for v in values) + "\n").encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Training


def _objective(w: np.ndarray, x: np.ndarray, y: np.ndarray, a: np.ndarray, lam: float) -> float:
    margins = y * (x @ w.T)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(lam * np.sum(w * w) + np.sum(a[:, None] * hinge))


@dataclass(frozen=True)
class TrainingTrace:
    """Per-epoch objective of the running average and of the kept model."""

    averaged: tuple[float, ...]
    kept: tuple[float, ...]
    best_epoch: int


def train_with_trace(dataset: Iterable, config: TrainingConfig = TrainingConfig(),
                     manifest: Sequence[str] = FEATURE_NAMES) -> tuple[SvmModel, TrainingTrace]:
    rows = _canonical(list(dataset), tuple(manifest))
    if not rows:
        raise TrainingError("training set is empty")
    classes = tuple(lab for lab in LABEL_ORDER if any(r[1] == lab for r in rows))
    if len(classes) < 2:
        raise TrainingError(f"training needs at least 2 distinct labels, found {[c.value for c in classes]}")

    n, d, k = len(rows), len(manifest), len(classes)
    x = np.ones((n, d + 1))
    x[:, :d] = np.array([r[0] for r in rows], dtype=float)
    class_pos = {c: i for i, c in enumerate(classes)}
    y = -np.ones((n, k))
    for i, (_, lab) in enumerate(rows):
        y[i, class_pos[lab]] = 1.0
    a = np.array(example_weights([r[1] for r in rows], config.class_weighting))

    order = list(range(n))
    rng = random.Random(config.seed)
    lam = float(config.lam)
    w = np.zeros((k, d + 1))
    avg = np.zeros_like(w)
    best, best_obj, best_epoch = avg.copy(), math.inf, 0
    averaged_hist, kept_hist = [], []
    t = 0
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        for i in order:
            t += 1
            eta = 1.0 / (2.0 * lam * t)
            xi, yi = x[i], y[i]
            active = (yi * (w @ xi)) < 1.0
            w *= 1.0 - 2.0 * eta * lam
            if active.any():
                # n * a_i makes the single-example step an unbiased estimate of the weighted sum.
                w += (eta * n * a[i]) * np.outer(active * yi, xi)
            avg += (w - avg) / t
        obj = _objective(avg, x, y, a, lam)
        averaged_hist.append(obj)
        if obj < best_obj:
            best, best_obj, best_epoch = avg.copy(), obj, epoch
        kept_hist.append(best_obj)

    model = SvmModel(
        classes=classes,
        weights=tuple(tuple(row[:d]) for row in best),
        biases=tuple(best[:, d]),
        feature_manifest=tuple(manifest),
        hyperparams=config,
        data_fingerprint=dataset_fingerprint(rows),
        objective_history=tuple(kept_hist),
    )
    return model, TrainingTrace(tuple(averaged_hist), tuple(kept_hist), best_epoch)


def train(dataset: Iterable, config: TrainingConfig = TrainingConfig(),
          manifest: Sequence[str] = FEATURE_NAMES) -> SvmModel:
    """Train on ``(feature_vector, label)`` pairs.  Labels may be CST relations."""
    return train_with_trace(dataset, config, manifest)[0]


# ---------------------------------------------------------------------------
# Prediction


def scores(model: SvmModel, fv) -> dict[RelationLabel, float]:
    values = vector_values(fv, model.feature_manifest)
    return {c: math.fsum(wj * xj for wj, xj in zip(w, values)) + b
            for c, w, b in zip(model.classes, model.weights, model.biases)}


def predict(model: SvmModel, fv) -> tuple[RelationLabel, dict[RelationLabel, float]]:
    """Highest-scoring class; exact ties go to the class earliest in LABEL_ORDER."""
    per_class = scores(model, fv)
    rank = {lab: i for i, lab in enumerate(LABEL_ORDER)}
    best = min(per_class, key=lambda c: (-per_class[c], rank[c]))
    return best, per_class


def accuracy(model: SvmModel, dataset: Iterable) -> float:
    data = list(dataset)
    if not data:
        raise TrainingError("cannot score an empty dataset")
    return sum(predict(model, fv)[0] == as_relation(lab) for fv, lab in data) / len(data)


# ---------------------------------------------------------------------------
# Cross-validation


@dataclass(frozen=True)
class FoldResult:
    fold: int
    test_size: int
    accuracy: float
    confusion: ConfusionMatrix
    metrics: MetricsReport


@dataclass(frozen=True)
class CrossValidation:
    k: int
    assignments: tuple[int, ...]  # fold of each example, in canonical dataset order
    folds: tuple[FoldResult, ...]
    confusion: ConfusionMatrix  # pooled over folds
    metrics: MetricsReport

    @property
    def mean_accuracy(self) -> float:
        return sum(f.accuracy for f in self.folds) / self.k

    @property
    def std_accuracy(self) -> float:
        mean = self.mean_accuracy
        return math.sqrt(sum((f.accuracy - mean) ** 2 for f in self.folds) / self.k)

    def macro_f1(self) -> float:
        defined = [m.f1 or 0.0 for m in self.metrics.classes if m.actual]
        return sum(defined) / len(defined) if defined else 0.0


def stratified_folds(labels: Sequence[RelationLabel], k: int, seed: int) -> list[int]:
    """Fold index per example: each class is shuffled with ``seed`` and dealt round-robin."""
    if k < 2:
        raise TrainingError("cross-validation needs k >= 2")
    by_class: dict[RelationLabel, list[int]] = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    small = [(lab.value, len(idx)) for lab, idx in by_class.items() if len(idx) < k]
    if small:
        raise TrainingError(f"class {small[0][0]!r} has {small[0][1]} examples, fewer than k={k}")
    rng = random.Random(seed)
    folds = [0] * len(labels)
    offset = 0
    for lab in LABEL_ORDER:
        idx = by_class.get(lab)
        if not idx:
            continue
        idx = list(idx)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            folds[i] = (offset + j) % k
        offset += len(idx)
    return folds


def cross_validate(dataset: Iterable, k: int = 5, config: TrainingConfig = TrainingConfig(),
                   manifest: Sequence[str] = FEATURE_NAMES) -> CrossValidation:
    rows = _canonical(list(dataset), tuple(manifest))
    labels = [r[1] for r in rows]
    assignments = stratified_folds(labels, k, config.seed)
    present = tuple(lab for lab in LABEL_ORDER if lab in set(labels))
    folds, pooled = [], []
    for fold in range(k):
        train_rows = [r for r, f in zip(rows, assignments) if f != fold]
        test_rows = [r for r, f in zip(rows, assignments) if f == fold]
        model = train(train_rows, config, manifest)
        cells = [(lab, predict(model, values)[0]) for values, lab in test_rows]
        pooled.extend(cells)
        cm = ConfusionMatrix.from_pairs(cells, present)
        folds.append(FoldResult(fold, len(test_rows), cm.accuracy() or 0.0, cm, precision_recall_f1(cm)))
    cm = ConfusionMatrix.from_pairs(pooled, present)
    return CrossValidation(k, tuple(assignments), tuple(folds), cm, precision_recall_f1(cm))


def select_lambda(dataset: Iterable, candidates: Sequence[float], k: int = 5,
                  config: TrainingConfig = TrainingConfig()) -> tuple[float, dict[float, float]]:
    """Candidate with the best pooled macro-F1; ties keep the earlier candidate."""
    data = list(dataset)
    if not candidates:
        raise TrainingError("no lambda candidates given")
    results = {}
    for lam in candidates:
        cfg = TrainingConfig(lam, config.epochs, config.seed, config.class_weighting)
        results[lam] = cross_validate(data, k, cfg).macro_f1()
    best = max(candidates, key=lambda lam: (results[lam], -candidates.index(lam)))
    return best, results


# ---------------------------------------------------------------------------
# Serialization


def _payload(model: SvmModel) -> dict:
    return {
        "classes": [c.value for c in model.classes],
        "feature_manifest": list(model.feature_manifest),
        "weights": [[v.hex() for v in row] for row in model.weights],
        "biases": [b.hex() for b in model.biases],
        "hyperparams": model.hyperparams.as_dict(),
        "data_fingerprint": model.data_fingerprint,
        "objective_history": [v.hex() for v in model.objective_history],
    }


def _checksum(payload: Mapping) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def dumps_model(model: SvmModel) -> str:
    payload = _payload(model)
    doc = {"kind": MODEL_KIND, "format_version": model.format_version,
           "checksum": _checksum(payload), "payload": payload}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def loads_model(text: str, source: str | None = None) -> SvmModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelCorruptError(f"model file is not valid JSON ({exc.msg})", source=source) from None
    if not isinstance(doc, dict) or doc.get("kind") != MODEL_KIND:
        raise ModelCorruptError("not a courtrel model file", source=source)
    version = doc.get("format_version")
    if not isinstance(version, int):
        raise ModelCorruptError("missing format_version", source=source)
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model format_version {version} is not supported (expected {FORMAT_VERSION})",
                                source=source)
    payload = doc.get("payload")
    if not isinstance(payload, dict) or _checksum(payload) != doc.get("checksum"):
        raise ModelCorruptError("checksum mismatch", source=source)
    try:
        return SvmModel(
            classes=tuple(as_relation(c) for c in payload["classes"]),
            weights=tuple(tuple(float.fromhex(v) for v in row) for row in payload["weights"]),
            biases=tuple(float.fromhex(b) for b in payload["biases"]),
            feature_manifest=tuple(payload["feature_manifest"]),
            hyperparams=TrainingConfig.from_dict(payload["hyperparams"]),
            format_version=version,
            data_fingerprint=payload["data_fingerprint"],
            objective_history=tuple(float.fromhex(v) for v in payload["objective_history"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelCorruptError(f"malformed model payload: {exc}", source=source) from None


def save_model(model: SvmModel, sink: str | os.PathLike | io.TextIOBase) -> None:
    text = dumps_model(model)
    if isinstance(sink, (str, os.PathLike)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)


def load_model(source: str | os.PathLike | io.TextIOBase) -> SvmModel:
    if isinstance(source, (str, os.PathLike)):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ModelFormatError(f"cannot read model: {exc}", source=str(source)) from None
        except UnicodeDecodeError:
            raise ModelCorruptError("model file is not UTF-8 text", source=str(source)) from None
        return loads_model(text, str(source))
    return loads_model(source.read())


# ---------------------------------------------------------------------------
# Feature tables: header of feature names plus ``label``, one example per row.


def format_feature_table(dataset: Iterable, manifest: Sequence[str] = FEATURE_NAMES) -> str:
    lines = ["\t".join([*manifest, "label"])]
    for fv, lab in dataset:
        lines.append("\t".join([*(repr(v) for v in vector_values(fv, manifest)), lab.value]))
    return "\n".join(lines) + "\n"


def read_feature_table(stream, source: str | None = None) -> list[tuple[dict[str, float], RelationLabel]]:
    from courtrel.errors import CorpusFormatError

    rows, header = [], None
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if header is None:
            if fields[-1] != "label" or len(set(fields)) != len(fields):
                raise CorpusFormatError("header must list distinct feature names then 'label'",
                                        line=lineno, source=source)
            header = fields[:-1]
            continue
        if len(fields) != len(header) + 1:
            raise CorpusFormatError(f"expected {len(header) + 1} fields, got {len(fields)}", line=lineno, source=source)
        try:
            values = {name: float(v) for name, v in zip(header, fields)}
        except ValueError as exc:
            raise CorpusFormatError(str(exc), line=lineno, source=source) from None
        try:
            label = as_relation(fields[-1])
        except ValueError as exc:
            raise CorpusFormatError(str(exc), line=lineno, column=len(header) + 1, source=source) from None
        rows.append((values, label))
    return rows
