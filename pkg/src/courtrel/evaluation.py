"""Confusion matrices, per-class precision/recall/F1 and judge agreement measures.

Undefined quantities (a ratio with a zero denominator) are ``None`` in Python
and the literal ``undefined`` in written reports.  They are never coerced to 0.

Records passed to the functions here may be :class:`~courtrel.pipeline.PairRecord`
values or any object with ``pair_id``, ``predicted`` and ``judge_annotations``
attributes.  Plain ``(pair_id, predicted, judge_labels)`` tuples are accepted too.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from courtrel.corpus import LABEL_ORDER, JudgeAnnotation, RelationLabel, as_relation
from courtrel.errors import AnnotationError, UserInputError

POLICIES = ("both-agree", "at-least-one")
UNDEFINED = "undefined"

# Published human-study agreement values.  The underlying annotations are not
# available, so these are shipped for comparison only and never asserted.
REFERENCE_CORR_HH = 0.805
REFERENCE_CORR_HS = 0.813


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = actual label, columns = predicted label."""

    labels: tuple[RelationLabel, ...]
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "counts", tuple(tuple(int(c) for c in row) for row in self.counts))
        k = len(self.labels)
        if len(set(self.labels)) != k:
            raise ValueError("confusion labels must be distinct")
        if len(self.counts) != k or any(len(row) != k for row in self.counts):
            raise ValueError(f"confusion counts must be {k}x{k}")
        if any(c < 0 for row in self.counts for c in row):
            raise ValueError("confusion counts must be non-negative")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[RelationLabel, RelationLabel]],
                   labels: Sequence[RelationLabel] | None = None) -> "ConfusionMatrix":
        pairs = list(pairs)
        if labels is None:
            seen = {lab for pair in pairs for lab in pair}
            labels = [lab for lab in LABEL_ORDER if lab in seen]
        pos = {lab: i for i, lab in enumerate(labels)}
        grid = [[0] * len(labels) for _ in labels]
        for actual, predicted in pairs:
            try:
                grid[pos[actual]][pos[predicted]] += 1
            except KeyError as exc:
                raise ValueError(f"label {exc.args[0]} not among confusion labels") from None
        return cls(tuple(labels), tuple(map(tuple, grid)))

    def index(self, label: RelationLabel) -> int:
        return self.labels.index(label)

    def cell(self, actual: RelationLabel, predicted: RelationLabel) -> int:
        return self.counts[self.index(actual)][self.index(predicted)]

    @property
    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.counts)

    @property
    def col_sums(self) -> tuple[int, ...]:
        return tuple(sum(col) for col in zip(*self.counts)) if self.counts else ()

    @property
    def total(self) -> int:
        return sum(self.row_sums)

    @property
    def diagonal(self) -> tuple[int, ...]:
        return tuple(self.counts[i][i] for i in range(len(self.labels)))

    def accuracy(self) -> float | None:
        return sum(self.diagonal) / self.total if self.total else None

    def row_percentages(self) -> tuple[tuple[float, ...] | None, ...]:
        """Each row as percentages of its actual count; ``None`` for empty rows."""
        return tuple(tuple(100.0 * c / s for c in row) if s else None
                     for row, s in zip(self.counts, self.row_sums))


@dataclass(frozen=True)
class ClassMetrics:
    label: RelationLabel
    precision: float | None
    recall: float | None
    f1: float | None
    actual: int
    predicted: int
    correct: int


@dataclass(frozen=True)
class MetricsReport:
    classes: tuple[ClassMetrics, ...]
    accuracy: float | None

    def __getitem__(self, label: RelationLabel) -> ClassMetrics:
        for row in self.classes:
            if row.label == label:
                return row
        raise KeyError(label)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def precision_recall_f1(matrix: ConfusionMatrix) -> MetricsReport:
    rows = []
    for i, label in enumerate(matrix.labels):
        diag, actual, predicted = matrix.diagonal[i], matrix.row_sums[i], matrix.col_sums[i]
        p = _ratio(diag, predicted)
        r = _ratio(diag, actual)
        f = None if p is None or r is None or p + r == 0 else 2 * p * r / (p + r)
        rows.append(ClassMetrics(label, p, r, f, actual, predicted, diag))
    return MetricsReport(tuple(rows), matrix.accuracy())


# ---------------------------------------------------------------------------
# Judged records


@dataclass(frozen=True)
class Judged:
    pair_id: str
    predicted: RelationLabel | None
    labels: tuple[RelationLabel, ...]


def _judged(records: Iterable) -> list[Judged]:
    out = []
    for rec in records:
        if isinstance(rec, Judged):
            out.append(rec)
        elif isinstance(rec, tuple):
            pid, predicted, labels = rec
            out.append(Judged(pid, predicted, tuple(as_relation(l) for l in labels)))
        else:
            labels = tuple(a.label for a in sorted(rec.judge_annotations, key=lambda a: a.judge_id))
            out.append(Judged(rec.pair_id, rec.predicted, labels))
    return out


def group_annotations(annotations: Iterable[JudgeAnnotation]) -> list[Judged]:
    """Judge labels per pair, pairs in first-seen order, labels in judge-id order."""
    by_pair: dict[str, dict[str, RelationLabel]] = defaultdict(dict)
    for a in annotations:
        if a.judge_id in by_pair[a.pair_id]:
            raise AnnotationError(f"pair {a.pair_id!r} annotated twice by judge {a.judge_id!r}")
        by_pair[a.pair_id][a.judge_id] = as_relation(a.label)
    return [Judged(pid, None, tuple(v for _, v in sorted(judges.items()))) for pid, judges in by_pair.items()]


def _as_judged(items) -> list[Judged]:
    if isinstance(items, Mapping):
        return [Judged(pid, None, tuple(as_relation(l) for l in labels)) for pid, labels in items.items()]
    items = list(items)
    if items and all(isinstance(i, JudgeAnnotation) for i in items):
        return group_annotations(items)
    return _judged(items)


def _require_two(judged: Sequence[Judged]) -> None:
    for j in judged:
        if len(j.labels) != 2:
            raise AnnotationError(f"pair {j.pair_id!r} has {len(j.labels)} judge annotations, expected 2")


def build_confusion(records: Iterable, policy: str = "both-agree",
                    labels: Sequence[RelationLabel] | None = None) -> ConfusionMatrix:
    """Score predictions against judge labels.

    ``both-agree`` keeps only pairs whose judges all gave the same label.
    ``at-least-one`` counts a prediction as correct if any judge gave it; a
    wrong prediction adds one entry for every distinct judge label.
    """
    if policy not in POLICIES:
        raise UserInputError(f"unknown policy {policy!r}; expected one of {', '.join(POLICIES)}")
    cells = []
    for j in _judged(records):
        if j.predicted is None:
            raise AnnotationError(f"pair {j.pair_id!r} has no prediction")
        if policy == "both-agree":
            if len(j.labels) < 2:
                raise AnnotationError(f"pair {j.pair_id!r} has fewer than 2 judge annotations")
            if len(set(j.labels)) == 1:
                cells.append((j.labels[0], j.predicted))
        elif not j.labels:
            raise AnnotationError(f"pair {j.pair_id!r} has no judge annotations")
        elif j.predicted in j.labels:
            cells.append((j.predicted, j.predicted))
        else:
            cells.extend((g, j.predicted) for g in dict.fromkeys(j.labels))
    return ConfusionMatrix.from_pairs(cells, labels)


def overall_corr_hh(annotations) -> float | None:
    """Fraction of pairs on which the two judges agree (``None`` for no pairs)."""
    judged = _as_judged(annotations)
    _require_two(judged)
    if not judged:
        return None
    return sum(1 for j in judged if j.labels[0] == j.labels[1]) / len(judged)


def overall_corr_hs(records) -> float | None:
    """Mean of 1, 0.5 or 0 per pair as both, one or neither judge matches the system."""
    judged = _judged(records)
    _require_two(judged)
    if not judged:
        return None
    return sum(sum(l == j.predicted for l in j.labels) / 2 for j in judged) / len(judged)


def per_class_corr_hh(annotations, label: RelationLabel) -> float | None:
    """n(both judges chose label) / n(at least one judge chose label)."""
    judged = _as_judged(annotations)
    union = [j for j in judged if label in j.labels]
    if not union:
        return None
    return sum(1 for j in union if all(l == label for l in j.labels)) / len(union)


def jaccard(a: Iterable, b: Iterable) -> float | None:
    a, b = set(a), set(b)
    union = a | b
    return len(a & b) / len(union) if union else None


def per_class_corr_hs(records, label: RelationLabel) -> float | None:
    """Jaccard overlap of system-predicted and judge-chosen pair sets for ``label``."""
    judged = _judged(records)
    system = {j.pair_id for j in judged if j.predicted == label}
    humans = {j.pair_id for j in judged if label in j.labels}
    return jaccard(system, humans)


# ---------------------------------------------------------------------------
# Reports


def _fmt(value: float | None, digits: int = 3) -> str:
    return UNDEFINED if value is None else f"{value:.{digits}f}"


def format_metrics_tsv(report: MetricsReport) -> str:
    lines = ["label\tprecision\trecall\tf1\tactual\tpredicted\tcorrect"]
    for r in report.classes:
        lines.append(f"{r.label.value}\t{_fmt(r.precision, 6)}\t{_fmt(r.recall, 6)}\t{_fmt(r.f1, 6)}"
                     f"\t{r.actual}\t{r.predicted}\t{r.correct}")
    return "\n".join(lines) + "\n"


def format_confusion_tsv(matrix: ConfusionMatrix) -> str:
    lines = ["actual\\predicted\t" + "\t".join(l.value for l in matrix.labels) + "\ttotal"]
    for label, row, total in zip(matrix.labels, matrix.counts, matrix.row_sums):
        lines.append("\t".join([label.value, *map(str, row), str(total)]))
    lines.append("\t".join(["total", *map(str, matrix.col_sums), str(matrix.total)]))
    return "\n".join(lines) + "\n"


def format_report_text(matrix: ConfusionMatrix, report: MetricsReport, policy: str,
                       corr_hh: float | None = None, corr_hs: float | None = None) -> str:
    width = max([len(l.value) for l in matrix.labels] + [6])
    out = [f"policy: {policy}", f"scored pairs: {matrix.total}", ""]
    out.append(f"{'':{width}}  {'P':>9}  {'R':>9}  {'F1':>9}  {'n':>5}")
    for r in report.classes:
        out.append(f"{r.label.value:{width}}  {_fmt(r.precision):>9}  {_fmt(r.recall):>9}  {_fmt(r.f1):>9}  {r.actual:>5}")
    out.append(f"accuracy: {_fmt(report.accuracy)}")
    if corr_hh is not None or corr_hs is not None:
        out.append(f"overall human-human correlation: {_fmt(corr_hh)} (reference {REFERENCE_CORR_HH})")
        out.append(f"overall human-system correlation: {_fmt(corr_hs)} (reference {REFERENCE_CORR_HS})")
    return "\n".join(out) + "\n"


def per_class_correlation_tsv(records, labels: Sequence[RelationLabel] = LABEL_ORDER) -> str:
    judged = _judged(records)
    lines = ["label\thuman_human\thuman_system"]
    for label in labels:
        lines.append(f"{label.value}\t{_fmt(per_class_corr_hh(judged, label), 6)}"
                     f"\t{_fmt(per_class_corr_hs(judged, label), 6)}")
    return "\n".join(lines) + "\n"
