"""Data model, file formats and ingestion for transcripts, annotated sentences,
labelled pair datasets and judge annotations.

Annotated corpus format (UTF-8), one token per line::

    #text = Petitioner Jae Lee moved .
    #coref = {"1": [["Petitioner", "petitioner", "NNP", "NONE"], ...]}
    0<TAB>Petitioner<TAB>petitioner<TAB>NNP<TAB>NONE<TAB>_<TAB>_<TAB>1
    ...

Fields are ``index surface lemma pos ner head deprel coref_chain``; indices are
0-based, a head of ``ROOT`` marks the root, ``_`` marks a missing optional
field, and sentences are separated by blank lines.  The optional ``#coref``
line maps chain ids to the representative mention of the chain as
``[surface, lemma, pos, ner]`` rows.

Pair datasets are tab-separated with the header ``id target_text source_text
label``; judge annotation files are tab-separated ``pair_id judge_id label``.
"""

from __future__ import annotations

import enum
import functools
import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence, TextIO

from courtrel import _resources
from courtrel.errors import AnnotationError, CorpusFormatError

ROOT = -1
"""Head value of the root token."""

NER_TYPES = ("PERSON", "ORGANIZATION", "LOCATION", "MONEY", "PERCENT", "DATE", "TIME")
NONE = "NONE"

# Penn Treebank tags (plus the bracket/quote conventions CoreNLP emits).
PTB_TAGS = frozenset("""
CC CD DT EX FW IN JJ JJR JJS LS MD NN NNS NNP NNPS PDT POS PRP PRP$ RB RBR RBS
RP SYM TO UH VB VBD VBG VBN VBP VBZ WDT WP WP$ WRB
. , : `` '' -LRB- -RRB- # $ HYPH NFP ADD AFX GW XX
""".split())

NOUN_TAGS = frozenset({"NN", "NNS", "NNP", "NNPS", "PRP", "PRP$"})
PROPER_NOUN_TAGS = frozenset({"NNP", "NNPS"})
VERB_TAGS = frozenset({"VB", "VBD", "VBG", "VBN", "VBP", "VBZ"})
ADJ_TAGS = frozenset({"JJ", "JJR", "JJS"})
PRONOUN_TAGS = frozenset({"PRP", "PRP$"})


class RelationLabel(enum.Enum):
    """The five relation types assigned to a sentence pair."""

    ELABORATION = "Elaboration"
    REDUNDANCY = "Redundancy"
    CITATION = "Citation"
    SHIFT_IN_VIEW = "Shift in View"
    NO_RELATION = "No Relation"

    def __str__(self) -> str:
        return self.value


# Fixed order used for class lists, tie-breaking and report rows.
LABEL_ORDER = (
    RelationLabel.ELABORATION,
    RelationLabel.NO_RELATION,
    RelationLabel.CITATION,
    RelationLabel.SHIFT_IN_VIEW,
    RelationLabel.REDUNDANCY,
)


class CstRelation(enum.Enum):
    IDENTITY = "Identity"
    EQUIVALENT = "Equivalent"
    SUBSUMPTION = "Subsumption"
    CONTRADICTION = "Contradiction"
    HISTORICAL_BACKGROUND = "Historical Background"
    MODALITY = "Modality"
    ATTRIBUTION = "Attribution"
    SUMMARY = "Summary"
    FOLLOW_UP = "Follow-up"
    INDIRECT_SPEECH = "Indirect Speech"
    ELABORATION = "Elaboration"
    FULFILLMENT = "Fulfillment"
    DESCRIPTION = "Description"
    OVERLAP = "Overlap"
    PARAPHRASE = "Paraphrase"
    CITATION = "Citation"
    CHANGE_OF_PERSPECTIVE = "Change of Perspective"
    READER_PROFILE = "Reader Profile"

    def __str__(self) -> str:
        return self.value


_CST_TO_RELATION = {
    CstRelation.IDENTITY: RelationLabel.REDUNDANCY,
    CstRelation.CITATION: RelationLabel.CITATION,
    CstRelation.CHANGE_OF_PERSPECTIVE: RelationLabel.SHIFT_IN_VIEW,
    CstRelation.CONTRADICTION: RelationLabel.SHIFT_IN_VIEW,
    # Equivalent is read as the dataset's name for Paraphrase; Summary condenses
    # the same topic.  Neither appears in the published mapping table.
    CstRelation.EQUIVALENT: RelationLabel.ELABORATION,
    CstRelation.SUMMARY: RelationLabel.ELABORATION,
}
for _cst in (CstRelation.PARAPHRASE, CstRelation.MODALITY, CstRelation.SUBSUMPTION,
             CstRelation.ELABORATION, CstRelation.INDIRECT_SPEECH, CstRelation.FOLLOW_UP,
             CstRelation.OVERLAP, CstRelation.FULFILLMENT, CstRelation.DESCRIPTION,
             CstRelation.HISTORICAL_BACKGROUND, CstRelation.READER_PROFILE,
             CstRelation.ATTRIBUTION):
    _CST_TO_RELATION[_cst] = RelationLabel.ELABORATION


def map_cst_to_relation(cst: CstRelation) -> RelationLabel:
    return _CST_TO_RELATION[cst]


def _norm_label(name: str) -> str:
    name = re.sub(r"\(.*?\)", "", name)
    return re.sub(r"[^a-z]", "", name.lower())


_CST_BY_NAME = {_norm_label(c.value): c for c in CstRelation}
_CST_BY_NAME.update({_norm_label(c.name): c for c in CstRelation})
_CST_BY_NAME["partialequivalence"] = CstRelation.OVERLAP
_REL_BY_NAME = {_norm_label(r.value): r for r in RelationLabel}
_REL_BY_NAME.update({_norm_label(r.name): r for r in RelationLabel})


def parse_relation_label(name: str) -> RelationLabel:
    try:
        return _REL_BY_NAME[_norm_label(name)]
    except KeyError:
        raise ValueError(f"unknown relation label {name!r}") from None


def parse_label(name: str) -> CstRelation | RelationLabel:
    """Resolve a label name against both enums, case-insensitively.

    Names present in both (Elaboration, Citation) resolve to the CST relation;
    they map onto the relation of the same name anyway.
    """
    key = _norm_label(name)
    if key in _CST_BY_NAME:
        return _CST_BY_NAME[key]
    if key in _REL_BY_NAME:
        return _REL_BY_NAME[key]
    raise ValueError(f"unknown label {name!r}")


def as_relation(label: CstRelation | RelationLabel | str) -> RelationLabel:
    if isinstance(label, str):
        label = parse_label(label)
    if isinstance(label, CstRelation):
        return map_cst_to_relation(label)
    return label


# ---------------------------------------------------------------------------
# Sentences and pairs


@dataclass(frozen=True)
class Token:
    index: int
    surface: str
    lemma: str
    pos: str
    ner: str = NONE
    head: int | None = None
    deprel: str | None = None
    coref_chain: str | None = None

    @property
    def key(self) -> str:
        """Normalised word used in bags and overlaps."""
        return (self.lemma or self.surface).lower()

    @property
    def is_word(self) -> bool:
        return any(ch.isalnum() for ch in self.surface)


@dataclass(frozen=True, eq=True)
class AnnotatedSentence:
    raw: str
    tokens: tuple[Token, ...]
    coref_chains: Mapping[str, tuple[Token, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "coref_chains",
                           {k: tuple(v) for k, v in self.coref_chains.items()})
        problem = sentence_problem(self)
        if problem:
            raise CorpusFormatError(problem)

    __hash__ = None  # type: ignore[assignment]

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)


def sentence_problem(sentence: AnnotatedSentence) -> str | None:
    """Describe the first violated invariant, or return None."""
    n = len(sentence.tokens)
    for i, tok in enumerate(sentence.tokens):
        if tok.index != i:
            return f"token indices must be contiguous from 0 (found {tok.index} at position {i})"
        if tok.head is not None and tok.head != ROOT and not 0 <= tok.head < n:
            return f"token {i} has dangling head {tok.head}"
        if tok.ner != NONE and tok.ner not in NER_TYPES:
            return f"token {i} has unknown NER tag {tok.ner!r}"
        if tok.coref_chain is not None and tok.coref_chain not in sentence.coref_chains:
            return f"token {i} refers to coref chain {tok.coref_chain!r} with no representative mention"
    if _squash(sentence.raw) != _squash("".join(t.surface for t in sentence.tokens)):
        return "tokens do not reconstruct the raw text"
    return None


def _squash(text: str) -> str:
    return re.sub(r"\s+", "", text)


_NO_SPACE_BEFORE = {".", ",", ";", ":", "?", "!", ")", "]", "'s", "n't", "%", "''", "'", "”", "’"}
_NO_SPACE_AFTER = {"(", "[", "$", "``", "“", "‘"}


def detokenize(surfaces: Sequence[str]) -> str:
    """Join token surfaces into readable text (the exact spacing is not preserved)."""
    out: list[str] = []
    for i, s in enumerate(surfaces):
        if i and s not in _NO_SPACE_BEFORE and surfaces[i - 1] not in _NO_SPACE_AFTER:
            out.append(" ")
        out.append(s)
    return "".join(out)


@dataclass(frozen=True)
class SentencePair:
    """An ordered pair: the source sentence is compared with the target sentence."""

    id: str
    target: AnnotatedSentence
    source: AnnotatedSentence

    __hash__ = None  # type: ignore[assignment]

    def with_sentences(self, target: AnnotatedSentence, source: AnnotatedSentence) -> "SentencePair":
        return replace(self, target=target, source=source)


@dataclass(frozen=True)
class JudgeAnnotation:
    pair_id: str
    judge_id: str
    label: RelationLabel


# ---------------------------------------------------------------------------
# Annotated corpus format

_FIELDS = ("index", "surface", "lemma", "pos", "ner", "head", "deprel", "coref_chain")


def _column(line: str, field_no: int) -> int:
    """1-based character column where tab-separated field ``field_no`` starts."""
    col = 1
    for part in line.split("\t")[:field_no]:
        col += len(part) + 1
    return col


def _decode_mention(rows, lineno: int) -> tuple[Token, ...]:
    toks = []
    for i, row in enumerate(rows):
        if not (isinstance(row, list) and len(row) == 4 and all(isinstance(x, str) for x in row)):
            raise CorpusFormatError("coref mention rows must be [surface, lemma, pos, ner]", line=lineno)
        surface, lemma, pos, ner = row
        if ner != NONE and ner not in NER_TYPES:
            raise CorpusFormatError(f"unknown NER tag {ner!r} in coref mention", line=lineno)
        toks.append(Token(i, surface, lemma, pos, ner))
    if not toks:
        raise CorpusFormatError("empty representative mention", line=lineno)
    return tuple(toks)


def parse_annotated_corpus(stream: TextIO | Iterable[str], source: str | None = None) -> list[AnnotatedSentence]:
    """Read the tab-separated token format into sentences.

    Raises :class:`CorpusFormatError` carrying the line (and, where it applies,
    the column) of the first problem.
    """
    sentences: list[AnnotatedSentence] = []
    rows: list[tuple[int, Token]] = []
    raw: str | None = None
    chains: dict[str, tuple[Token, ...]] = {}
    block_start: int | None = None

    def flush(end_line: int):
        nonlocal rows, raw, chains, block_start
        if not rows:
            if raw is not None or chains:
                raise CorpusFormatError("comment block without tokens", line=end_line, source=source)
            block_start = None
            return
        n = len(rows)
        for lineno, tok in rows:
            if tok.head is not None and tok.head != ROOT and not 0 <= tok.head < n:
                raise CorpusFormatError(f"dangling head index {tok.head} in a {n}-token sentence",
                                        line=lineno, column=None, source=source)
            if tok.coref_chain is not None and tok.coref_chain not in chains:
                raise CorpusFormatError(f"coref chain {tok.coref_chain!r} has no representative mention",
                                        line=lineno, source=source)
        tokens = tuple(t for _, t in rows)
        text = raw if raw is not None else detokenize([t.surface for t in tokens])
        try:
            sentences.append(AnnotatedSentence(text, tokens, chains))
        except CorpusFormatError as exc:
            raise CorpusFormatError(exc.message, line=block_start, source=source) from None
        rows, raw, chains, block_start = [], None, {}, None

    lineno = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            flush(lineno)
            continue
        if line.startswith("#"):
            if rows:
                raise CorpusFormatError("comment line inside a sentence", line=lineno, column=1, source=source)
            if block_start is None:
                block_start = lineno
            body = line[1:].strip()
            if body.startswith("text") and "=" in body:
                raw = body.split("=", 1)[1].strip()
            elif body.startswith("coref") and "=" in body:
                try:
                    payload = json.loads(body.split("=", 1)[1])
                except json.JSONDecodeError as exc:
                    raise CorpusFormatError(f"bad coref JSON: {exc.msg}", line=lineno, source=source) from None
                if not isinstance(payload, dict):
                    raise CorpusFormatError("coref line must hold a JSON object", line=lineno, source=source)
                for cid, mention in payload.items():
                    chains[str(cid)] = _decode_mention(mention, lineno)
            continue
        if block_start is None:
            block_start = lineno
        parts = line.split("\t")
        if len(parts) != len(_FIELDS):
            raise CorpusFormatError(f"expected {len(_FIELDS)} tab-separated fields, found {len(parts)}",
                                    line=lineno, column=1, source=source)
        idx_s, surface, lemma, pos, ner, head_s, deprel, chain = parts
        try:
            idx = int(idx_s)
        except ValueError:
            raise CorpusFormatError(f"token index {idx_s!r} is not an integer",
                                    line=lineno, column=1, source=source) from None
        if idx != len(rows):
            kind = "duplicate" if idx < len(rows) else "non-contiguous"
            raise CorpusFormatError(f"{kind} token index {idx} (expected {len(rows)})",
                                    line=lineno, column=1, source=source)
        if not surface or surface == "_":
            raise CorpusFormatError("empty surface form", line=lineno, column=_column(line, 1), source=source)
        if pos not in PTB_TAGS:
            raise CorpusFormatError(f"unknown POS tag {pos!r}", line=lineno, column=_column(line, 3), source=source)
        if ner != NONE and ner not in NER_TYPES:
            raise CorpusFormatError(f"unknown NER tag {ner!r}", line=lineno, column=_column(line, 4), source=source)
        if head_s == "_":
            head = None
        elif head_s == "ROOT":
            head = ROOT
        else:
            try:
                head = int(head_s)
            except ValueError:
                raise CorpusFormatError(f"head {head_s!r} is not an integer, ROOT or _",
                                        line=lineno, column=_column(line, 5), source=source) from None
        rows.append((lineno, Token(
            index=idx,
            surface=surface,
            lemma=surface.lower() if lemma == "_" else lemma,
            pos=pos,
            ner=ner,
            head=head,
            deprel=None if deprel == "_" else deprel,
            coref_chain=None if chain == "_" else chain,
        )))
    flush(lineno + 1)
    return sentences


def _mention_json(chains: Mapping[str, tuple[Token, ...]]) -> str:
    return json.dumps({cid: [[t.surface, t.lemma, t.pos, t.ner] for t in chains[cid]]
                       for cid in sorted(chains)}, ensure_ascii=False)


def serialize_sentence(sentence: AnnotatedSentence) -> str:
    lines = [f"#text = {sentence.raw}"]
    if sentence.coref_chains:
        lines.append(f"#coref = {_mention_json(sentence.coref_chains)}")
    for t in sentence.tokens:
        head = "_" if t.head is None else ("ROOT" if t.head == ROOT else str(t.head))
        lines.append("\t".join([
            str(t.index), t.surface, t.lemma, t.pos, t.ner, head,
            t.deprel or "_", t.coref_chain or "_",
        ]))
    return "\n".join(lines) + "\n"


def serialize_annotated_corpus(sentences: Iterable[AnnotatedSentence]) -> str:
    return "\n".join(serialize_sentence(s) for s in sentences)


def sentence_to_dict(sentence: AnnotatedSentence) -> dict:
    """Compact JSON-friendly form used by the record store."""
    return {
        "raw": sentence.raw,
        "tokens": [[t.surface, t.lemma, t.pos, t.ner, t.head, t.deprel, t.coref_chain]
                   for t in sentence.tokens],
        "coref": {cid: [[t.surface, t.lemma, t.pos, t.ner] for t in m]
                  for cid, m in sorted(sentence.coref_chains.items())},
    }


def sentence_from_dict(data: Mapping) -> AnnotatedSentence:
    tokens = tuple(Token(i, *row) for i, row in enumerate(data["tokens"]))
    chains = {cid: tuple(Token(i, *row) for i, row in enumerate(m)) for cid, m in data.get("coref", {}).items()}
    return AnnotatedSentence(data["raw"], tokens, chains)


# ---------------------------------------------------------------------------
# Pair datasets and judge annotations

PAIR_HEADER = ("id", "target_text", "source_text", "label")

Annotator = Callable[[str], AnnotatedSentence]


def _data_lines(stream: TextIO | Iterable[str]):
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line


def read_pair_rows(stream: TextIO | Iterable[str], source: str | None = None) -> list[tuple[str, str, str, CstRelation | RelationLabel]]:
    """Parse the raw ``(id, target_text, source_text, label)`` rows without annotating."""
    rows = []
    seen: set[str] = set()
    header_seen = False
    for lineno, line in _data_lines(stream):
        parts = line.split("\t")
        if not header_seen and tuple(p.strip().lower() for p in parts) == PAIR_HEADER:
            header_seen = True
            continue
        if len(parts) != 4 or not all(p.strip() for p in parts):
            missing = [name for name, p in zip(PAIR_HEADER, parts + [""] * 4) if not p.strip()]
            detail = f"missing field {missing[0]!r}" if missing else f"expected 4 fields, found {len(parts)}"
            raise CorpusFormatError(detail, line=lineno, source=source)
        pid, target, src, label_name = (p.strip() for p in parts)
        try:
            label = parse_label(label_name)
        except ValueError:
            raise CorpusFormatError(f"unknown label {label_name!r}", line=lineno,
                                    column=_column(line, 3), source=source) from None
        if pid in seen:
            raise CorpusFormatError(f"duplicate pair id {pid!r}", line=lineno, column=1, source=source)
        seen.add(pid)
        rows.append((pid, target, src, label))
    return rows


def parse_pair_dataset(stream: TextIO | Iterable[str], annotator: Annotator | None = None,
                       source: str | None = None) -> list[tuple[SentencePair, CstRelation | RelationLabel]]:
    """Read a labelled pair dataset, annotating each sentence.

    ``annotator`` turns raw text into an :class:`AnnotatedSentence`; by default
    the bundled resource-driven annotator is used.
    """
    rows = read_pair_rows(stream, source=source)
    if annotator is None:
        from courtrel.annotate import default_annotator
        annotator = default_annotator()
    return [(SentencePair(pid, annotator(t), annotator(s)), label) for pid, t, s, label in rows]


def format_pair_dataset(rows: Iterable[tuple[str, str, str, CstRelation | RelationLabel]]) -> str:
    lines = ["\t".join(PAIR_HEADER)]
    for pid, t, s, label in rows:
        lines.append(f"{pid}\t{t}\t{s}\t{label.value}")
    return "\n".join(lines) + "\n"


def validate_dataset_census(dataset: Iterable) -> dict[CstRelation | RelationLabel, int]:
    """Label histogram of a dataset.

    Accepts ``(pair, label)`` tuples or bare labels.  Every CST relation is
    present in the result (zero when absent); relation labels that are not CST
    names, such as No Relation, appear only when they occur.
    """
    counts: Counter = Counter()
    for item in dataset:
        label = item[-1] if isinstance(item, tuple) else item
        counts[label] += 1
    census: dict[CstRelation | RelationLabel, int] = {c: counts.get(c, 0) for c in CstRelation}
    for label, n in counts.items():
        if isinstance(label, RelationLabel):
            census[label] = n
    return census


def parse_judge_annotations(stream: TextIO | Iterable[str], source: str | None = None) -> list[JudgeAnnotation]:
    out: list[JudgeAnnotation] = []
    seen: set[tuple[str, str]] = set()
    first = True
    for lineno, line in _data_lines(stream):
        parts = [p.strip() for p in line.split("\t")]
        if first and [p.lower() for p in parts] == ["pair_id", "judge_id", "label"]:
            first = False
            continue
        first = False
        if len(parts) != 3 or not all(parts):
            raise AnnotationError("expected pair_id, judge_id and label", line=lineno, source=source)
        pid, judge, name = parts
        try:
            label = parse_relation_label(name)
        except ValueError:
            raise AnnotationError(f"unknown relation label {name!r}", line=lineno,
                                  column=_column(line, 2), source=source) from None
        if (pid, judge) in seen:
            raise AnnotationError(f"duplicate annotation for pair {pid!r} by judge {judge!r}",
                                  line=lineno, source=source)
        seen.add((pid, judge))
        out.append(JudgeAnnotation(pid, judge, label))
    return out


def format_judge_annotations(annotations: Iterable[JudgeAnnotation]) -> str:
    lines = ["pair_id\tjudge_id\tlabel"]
    lines += [f"{a.pair_id}\t{a.judge_id}\t{a.label.value}" for a in annotations]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Transcripts

_ROMAN_LINE = re.compile(r"^\s*[IVXLCDM]+\.?\s*$")
_PAGE_LINE = re.compile(r"^\s*(?:-\s*\d+\s*-|(?:page\s+)?\d+(?:\s+of\s+\d+)?)\s*$", re.IGNORECASE)
_CAPTION_CONNECTORS = {"v.", "vs.", "v", "ex", "rel.", "et", "al."}
_SENTENCE_END = re.compile(r"[.?!:;][\"'’”)\]]*$")


def _is_all_caps(line: str) -> bool:
    words = [w for w in line.split() if w.lower() not in _CAPTION_CONNECTORS]
    letters = [ch for w in words for ch in w if ch.isalpha()]
    return len(letters) >= 2 and not any(ch.islower() for ch in letters)


def heading_rule(line: str, previous_ended: bool = True) -> str | None:
    """Name of the heading-strip rule ``line`` matches, if any.

    The short-line rule only applies when the preceding text ended a sentence,
    so a wrapped fragment of a running sentence is never dropped.
    """
    if _PAGE_LINE.match(line):
        return "page-number"
    if _ROMAN_LINE.match(line):
        return "roman-numeral"
    if _is_all_caps(line):
        return "all-caps"
    if previous_ended and len(line.split()) < 4 and not _SENTENCE_END.search(line.strip()):
        return "short-line"
    return None


def load_abbreviations(path=None) -> frozenset[str]:
    if path is None:
        path = _resources.resolve("abbreviations.txt")
    return frozenset(entry.strip() for _, entry in _resources.read_entries(path))


_DEFAULT_ABBREVIATIONS: frozenset[str] | None = None


def default_abbreviations() -> frozenset[str]:
    global _DEFAULT_ABBREVIATIONS
    if _DEFAULT_ABBREVIATIONS is None:
        _DEFAULT_ABBREVIATIONS = load_abbreviations()
    return _DEFAULT_ABBREVIATIONS


_BOUNDARY = re.compile(r"([.?!])([\"'’”)\]]*)(\s+)(?=[\"'“‘(\[]?[A-Z])")


@functools.lru_cache(maxsize=32)
def _abbreviation_regex(abbreviations: frozenset[str]) -> re.Pattern | None:
    entries = sorted({" ".join(a.split()) for a in abbreviations}, key=lambda a: (-len(a), a))
    if not entries:
        return None
    alts = "|".join(re.escape(a).replace(r"\ ", r"\s+") for a in entries)
    return re.compile(rf"(?<![A-Za-z0-9])(?:{alts})(?![A-Za-z0-9])", re.IGNORECASE)


def split_sentences(text: str, abbreviations: Iterable[str] | None = None) -> list[str]:
    """Split one paragraph of running text into sentences.

    A period inside or at the end of a listed abbreviation ("v.", "U. S.",
    "No.", ...) never ends a sentence.
    """
    if abbreviations is None:
        abbreviations = default_abbreviations()
    text = " ".join(text.split())
    protected: set[int] = set()
    regex = _abbreviation_regex(frozenset(abbreviations))
    if regex is not None:
        for m in regex.finditer(text):
            protected.update(i for i in range(m.start(), m.end()) if text[i] == ".")
    sentences = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        if m.start(1) in protected:
            continue
        sentence = text[start:m.end(2)].strip()
        if sentence:
            sentences.append(sentence)
        start = m.end(3)
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def transcript_paragraphs(text: str) -> list[str]:
    """Strip headings, titles and page numbers, returning paragraphs of running text."""
    paragraphs: list[str] = []
    current: list[str] = []
    previous_ended = True
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            if current:
                paragraphs.append(" ".join(current))
                current = []
            previous_ended = True
            continue
        if heading_rule(stripped, previous_ended):
            if current:
                paragraphs.append(" ".join(current))
                current = []
            previous_ended = True
            continue
        current.append(stripped)
        previous_ended = bool(_SENTENCE_END.search(stripped))
    if current:
        paragraphs.append(" ".join(current))
    return paragraphs


def load_transcript(text: str, abbreviations: frozenset[str] | None = None) -> list[str]:
    """Preprocess one transcript into a list of raw sentence texts."""
    sentences: list[str] = []
    for paragraph in transcript_paragraphs(text):
        sentences.extend(split_sentences(paragraph, abbreviations))
    return sentences
