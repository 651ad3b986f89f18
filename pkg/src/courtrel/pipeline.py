"""Transcript to classified pair records, the record store and annotation sampling."""

from __future__ import annotations

import fcntl
import json
import os
import random
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from courtrel.annotate import AnnotationResources, annotate_sentence, default_resources
from courtrel.citation_rules import DEFAULT_RULES, CitationRuleSet, detect_citation
from courtrel.corpus import (JudgeAnnotation, RelationLabel, SentencePair, load_transcript,
                             parse_relation_label, sentence_from_dict, sentence_to_dict)
from courtrel.errors import AnnotationError, SamplingError, StoreError, UserInputError
from courtrel.features import (FeatureVector, SimilarityLexicon, TransitionResources, default_lexicon,
                               default_transitions, extract_features)
from courtrel.svm import SvmModel, predict

STORE_SCHEMA = "courtrel-records"
STORE_VERSION = 1
SVM = "svm"


@dataclass(frozen=True)
class PairRecord:
    pair_id: str
    transcript_id: str
    pair: SentencePair
    predicted: RelationLabel
    provenance: str  # "svm" or "rule:<id>"
    scores: dict[RelationLabel, float] | None = None
    feature_vector: FeatureVector | None = None
    judge_annotations: tuple[JudgeAnnotation, ...] = ()

    __hash__ = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "judge_annotations", tuple(self.judge_annotations))
        gated = self.provenance.startswith("rule:")
        if not gated and self.provenance != SVM:
            raise ValueError(f"provenance must be 'svm' or 'rule:<id>', got {self.provenance!r}")
        if gated and (self.predicted is not RelationLabel.CITATION or self.scores is not None):
            raise ValueError("a rule-gated record is a Citation without SVM scores")

    @property
    def rule_gated(self) -> bool:
        return self.provenance.startswith("rule:")

    def to_dict(self) -> dict:
        fv = self.feature_vector
        return {
            "pair_id": self.pair_id,
            "transcript_id": self.transcript_id,
            "target": sentence_to_dict(self.pair.target),
            "source": sentence_to_dict(self.pair.source),
            "predicted": self.predicted.value,
            "provenance": self.provenance,
            "scores": None if self.scores is None else {k.value: v for k, v in self.scores.items()},
            "features": None if fv is None else {**fv.as_dict(), "shallow_grammar": fv.shallow_grammar},
        }

    @classmethod
    def from_dict(cls, data: dict, annotations: Sequence[JudgeAnnotation] = ()) -> "PairRecord":
        fv = data.get("features")
        if fv is not None:
            fv = FeatureVector(**fv)
        scores = data.get("scores")
        if scores is not None:
            scores = {parse_relation_label(k): float(v) for k, v in scores.items()}
        pair = SentencePair(data["pair_id"], sentence_from_dict(data["target"]), sentence_from_dict(data["source"]))
        return cls(data["pair_id"], data["transcript_id"], pair, parse_relation_label(data["predicted"]),
                   data["provenance"], scores, fv, tuple(annotations))


# ---------------------------------------------------------------------------
# Classification


@dataclass(frozen=True)
class Classifier:
    """Everything needed to classify a pair, bundled so it can be shipped to worker processes."""

    model: SvmModel
    rules: CitationRuleSet = DEFAULT_RULES
    resources: AnnotationResources = field(default_factory=default_resources)
    lexicon: SimilarityLexicon = field(default_factory=default_lexicon)
    transitions: TransitionResources = field(default_factory=default_transitions)

    def __call__(self, pair: SentencePair, transcript_id: str = "") -> PairRecord:
        try:
            cited, rule_id = detect_citation(pair.source.raw, self.rules)
            if cited:
                return PairRecord(pair.id, transcript_id, pair, RelationLabel.CITATION, f"rule:{rule_id}")
            fv = extract_features(pair, self.resources, self.lexicon, self.transitions)
            label, scores = predict(self.model, fv)
        except UserInputError as exc:
            raise type(exc)(f"pair {pair.id}: {exc.message}", line=exc.line, column=exc.column,
                            source=exc.source) from exc
        return PairRecord(pair.id, transcript_id, pair, label, SVM, scores, fv)


def classify_pair(pair: SentencePair, model: SvmModel, rules: CitationRuleSet | None = None,
                  resources: AnnotationResources | None = None, lexicon: SimilarityLexicon | None = None,
                  transitions: TransitionResources | None = None, transcript_id: str = "") -> PairRecord:
    """Citation gate first; only pairs the rules do not claim reach the SVM."""
    return Classifier(model, rules or DEFAULT_RULES, resources or default_resources(),
                      lexicon or default_lexicon(), transitions or default_transitions())(pair, transcript_id)


def transcript_pairs(sentences: Sequence, transcript_id: str, window: int = 1) -> list[SentencePair]:
    """Pairs (earlier, later) for every sentence and each of the next ``window`` sentences."""
    if window < 1:
        raise UserInputError(f"window must be at least 1, got {window}")
    pairs = []
    for i in range(len(sentences)):
        for j in range(i + 1, min(i + window, len(sentences) - 1) + 1):
            pairs.append(SentencePair(f"{transcript_id}:{len(pairs)}", sentences[i], sentences[j]))
    return pairs


def _classify_chunk(args):
    classifier, pairs, transcript_id = args
    return [classifier(p, transcript_id) for p in pairs]


def run_transcript(text: str, model: SvmModel, rules: CitationRuleSet | None = None,
                   resources: AnnotationResources | None = None, lexicon: SimilarityLexicon | None = None,
                   transitions: TransitionResources | None = None, transcript_id: str = "transcript",
                   window: int = 1, jobs: int = 1) -> list[PairRecord]:
    classifier = Classifier(model, rules or DEFAULT_RULES, resources or default_resources(),
                            lexicon or default_lexicon(), transitions or default_transitions())
    raw = load_transcript(text, classifier.resources.abbreviations)
    sentences = [annotate_sentence(s, classifier.resources) for s in raw]
    pairs = transcript_pairs(sentences, transcript_id, window)
    if jobs <= 1 or len(pairs) < 2:
        return [classifier(p, transcript_id) for p in pairs]
    size = -(-len(pairs) // jobs)
    chunks = [(classifier, pairs[i:i + size], transcript_id) for i in range(0, len(pairs), size)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return [rec for chunk in pool.map(_classify_chunk, chunks) for rec in chunk]


# ---------------------------------------------------------------------------
# Record store
#
# Line 1 is a schema header.  Every later line is either a record or an
# annotation event; annotations never rewrite records.  ``<store>.idx`` maps
# pair ids to line numbers and is rebuilt whenever it is missing or stale.


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


class RecordStore:
    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self.index_path = self.path.with_name(self.path.name + ".idx")
        self._lock = threading.Lock()

    # -- reading

    def _lines(self):
        if not self.path.exists():
            return
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.endswith("\n"):
                    raise StoreError("truncated final line", line=lineno, source=str(self.path))
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StoreError(f"corrupt line ({exc.msg})", line=lineno, column=exc.colno,
                                     source=str(self.path)) from None
                if lineno == 1:
                    if entry != {"schema": STORE_SCHEMA, "version": STORE_VERSION}:
                        raise StoreError("not a record store or unsupported schema version", line=1,
                                         source=str(self.path))
                    continue
                if not isinstance(entry, dict) or entry.get("type") not in ("record", "annotation"):
                    raise StoreError("corrupt line (unknown entry type)", line=lineno, source=str(self.path))
                yield lineno, entry

    def _scan(self):
        records, annotations = {}, {}
        for lineno, entry in self._lines():
            if entry["type"] == "record":
                pid = entry.get("pair_id")
                if pid in records:
                    raise StoreError(f"duplicate pair_id {pid!r}", line=lineno, source=str(self.path))
                records[pid] = (lineno, entry)
                annotations[pid] = []
            else:
                try:
                    ann = JudgeAnnotation(entry["pair_id"], entry["judge_id"], parse_relation_label(entry["label"]))
                except (KeyError, ValueError):
                    raise StoreError("corrupt annotation line", line=lineno, source=str(self.path)) from None
                if ann.pair_id not in annotations:
                    raise StoreError(f"annotation for unknown pair {ann.pair_id!r}", line=lineno,
                                     source=str(self.path))
                annotations[ann.pair_id].append(ann)
        return records, annotations

    def pair_ids(self) -> list[str]:
        if not self.path.exists():
            return []
        index = self._read_index()
        return list(index) if index is not None else list(self._scan()[0])

    def _read_index(self) -> dict[str, int] | None:
        try:
            if self.index_path.stat().st_mtime_ns < self.path.stat().st_mtime_ns:
                return None
            out = {}
            for line in self.index_path.read_text(encoding="utf-8").splitlines():
                pid, lineno = line.rsplit("\t", 1)
                out[pid] = int(lineno)
            return out
        except (OSError, ValueError):
            return None

    def load(self, transcript_id: str | None = None, predicted: RelationLabel | None = None,
             provenance: str | None = None) -> list[PairRecord]:
        """Records in append order with their annotations.

        ``provenance`` may be ``svm``, ``rule`` (any rule) or ``rule:<id>``.
        """
        records, annotations = self._scan()
        out = []
        for pid, (lineno, entry) in records.items():
            try:
                rec = PairRecord.from_dict(entry, annotations[pid])
            except (KeyError, TypeError, ValueError) as exc:
                raise StoreError(f"corrupt record ({exc})", line=lineno, source=str(self.path)) from None
            if transcript_id is not None and rec.transcript_id != transcript_id:
                continue
            if predicted is not None and rec.predicted != predicted:
                continue
            if provenance is not None and not (rec.provenance == provenance or
                                               (provenance == "rule" and rec.rule_gated)):
                continue
            out.append(rec)
        return out

    # -- writing

    def _append_lines(self, entries: list[dict], ids: list[str] | None = None) -> None:
        with self._lock, self.path.open("a+", encoding="utf-8") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                fh.seek(0, os.SEEK_END)
                if fh.tell() == 0:
                    fh.write(_dumps({"schema": STORE_SCHEMA, "version": STORE_VERSION}) + "\n")
                    fh.flush()
                existing = self._read_index()
                if existing is None:
                    existing = {pid: ln for pid, (ln, _) in self._scan()[0].items()}
                fh.seek(0)
                start = sum(1 for _ in fh) + 1
                fh.seek(0, os.SEEK_END)
                for entry in entries:
                    fh.write(_dumps(entry) + "\n")
                fh.flush()
                for offset, pid in enumerate(ids or []):
                    if pid is not None:
                        existing[pid] = start + offset
                self.index_path.write_text("".join(f"{p}\t{n}\n" for p, n in existing.items()), encoding="utf-8")
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def append(self, records: Iterable[PairRecord]) -> None:
        records = list(records)
        known = set(self.pair_ids())
        for rec in records:
            if rec.pair_id in known:
                raise StoreError(f"duplicate pair_id {rec.pair_id!r}", source=str(self.path))
            known.add(rec.pair_id)
        entries, ids, extra = [], [], []
        for rec in records:
            entries.append({"type": "record", **rec.to_dict()})
            ids.append(rec.pair_id)
            extra.extend(rec.judge_annotations)
        self._append_lines(entries, ids)
        if extra:
            self.attach_annotations(extra)

    def attach_annotations(self, annotations: Iterable[JudgeAnnotation]) -> list[PairRecord]:
        """Append judge annotations; returns the updated records they touch."""
        annotations = list(annotations)
        records, existing = self._scan()
        seen = {(a.pair_id, a.judge_id) for anns in existing.values() for a in anns}
        for a in annotations:
            if a.pair_id not in records:
                raise AnnotationError(f"annotation for unknown pair {a.pair_id!r}")
            if (a.pair_id, a.judge_id) in seen:
                raise AnnotationError(f"duplicate annotation for pair {a.pair_id!r} by judge {a.judge_id!r}")
            seen.add((a.pair_id, a.judge_id))
        self._append_lines([{"type": "annotation", "pair_id": a.pair_id, "judge_id": a.judge_id,
                             "label": a.label.value} for a in annotations], [None] * len(annotations))
        touched = {a.pair_id for a in annotations}
        return [r for r in self.load() if r.pair_id in touched]


def persist_records(records: Iterable[PairRecord], store: RecordStore | str | os.PathLike) -> RecordStore:
    store = store if isinstance(store, RecordStore) else RecordStore(store)
    store.append(records)
    return store


def load_records(store: RecordStore | str | os.PathLike, **filters) -> list[PairRecord]:
    store = store if isinstance(store, RecordStore) else RecordStore(store)
    return store.load(**filters)


def attach_annotations(store: RecordStore | str | os.PathLike,
                       annotations: Iterable[JudgeAnnotation]) -> list[PairRecord]:
    store = store if isinstance(store, RecordStore) else RecordStore(store)
    return store.attach_annotations(annotations)


# ---------------------------------------------------------------------------
# Sampling for human annotation


def sample_for_annotation(store: RecordStore | Sequence[PairRecord], n: int = 200, seed: int = 0,
                          cluster_size: int = 5) -> list[list[PairRecord]]:
    """Shuffle all records with ``seed``, keep the first ``n`` and cut them into clusters."""
    records = store.load() if isinstance(store, RecordStore) else list(store)
    if cluster_size < 1 or n < 1:
        raise SamplingError("n and cluster_size must be positive")
    if n % cluster_size:
        raise SamplingError(f"cluster size {cluster_size} does not divide n={n}")
    if len(records) < n:
        raise SamplingError(f"store holds {len(records)} records, fewer than n={n}")
    records.sort(key=lambda r: r.pair_id)
    random.Random(seed).shuffle(records)
    chosen = records[:n]
    return [chosen[i:i + cluster_size] for i in range(0, n, cluster_size)]


def _cell(text: str) -> str:
    return " ".join(text.split())


def format_annotation_export(clusters: Sequence[Sequence[PairRecord]]) -> str:
    """Sheet for judges: one row per pair with an empty label column."""
    lines = ["cluster\tpair_id\ttarget_text\tsource_text\tlabel"]
    for c, cluster in enumerate(clusters, start=1):
        for rec in cluster:
            lines.append(f"{c}\t{rec.pair_id}\t{_cell(rec.pair.target.raw)}\t{_cell(rec.pair.source.raw)}\t")
    return "\n".join(lines) + "\n"


def with_annotations(record: PairRecord, annotations: Iterable[JudgeAnnotation]) -> PairRecord:
    return replace(record, judge_annotations=tuple(record.judge_annotations) + tuple(annotations))
