"""Sixteen pair features for an ordered (target, source) sentence pair.

Every component lies in [0, 1].  Divisions by zero resolve to 0, except the
length difference ratio of two empty sentences, which is its neutral 0.5.
"""

from __future__ import annotations

import functools
import hashlib
import math
import os
from collections import Counter
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

from courtrel import _resources
from courtrel.annotate import AnnotationResources, default_resources, prepare_coref, remove_stopwords
from courtrel.corpus import (
    ADJ_TAGS,
    NONE,
    NOUN_TAGS,
    VERB_TAGS,
    AnnotatedSentence,
    SentencePair,
    Token,
)
from courtrel.errors import ResourceError

FEATURE_NAMES = (
    "word_cos", "noun_cos", "verb_cos", "adj_cos",
    "wor_t", "wor_s",
    "subj_overlap", "obj_overlap", "subj_noun_overlap",
    "lcsr", "ne_ratio", "semantic_sim",
    "trans_elab", "trans_followup",
    "ldr", "attribution",
)
BOOLEAN_FEATURES = ("trans_elab", "trans_followup", "attribution")

IGNORED_VERB_LEMMAS = frozenset({"be", "do", "have", "has"})
AUXILIARY_LEMMAS = frozenset({"be", "have", "do", "will", "would", "shall", "should",
                              "can", "could", "may", "might", "must"})
SUBJECT_RELATIONS = frozenset({"nsubj", "nsubjpass", "nsubj:pass", "csubj", "csubjpass",
                               "csubj:pass", "xsubj", "nsubj:xsubj"})
OBJECT_RELATIONS = frozenset({"dobj", "obj", "iobj"})

_QUOTE_PAIRS = {"'": "'", '"': '"', "``": "''", "‘": "’", "“": "”"}


@dataclass(frozen=True)
class FeatureVector:
    word_cos: float
    noun_cos: float
    verb_cos: float
    adj_cos: float
    wor_t: float
    wor_s: float
    subj_overlap: float
    obj_overlap: float
    subj_noun_overlap: float
    lcsr: float
    ne_ratio: float
    semantic_sim: float
    trans_elab: float
    trans_followup: float
    ldr: float
    attribution: float
    # True when subjects/objects came from the shallow heuristic rather than a parse.
    shallow_grammar: bool = field(default=False, compare=False)

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}

    @classmethod
    def from_values(cls, values: Sequence[float], shallow_grammar: bool = False) -> "FeatureVector":
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(values)}")
        return cls(*(float(v) for v in values), shallow_grammar=shallow_grammar)


assert tuple(f.name for f in fields(FeatureVector))[:16] == FEATURE_NAMES


# ---------------------------------------------------------------------------
# Resources


@dataclass(frozen=True)
class TransitionResources:
    elaboration_words: frozenset[str]
    elaboration_phrases: tuple[tuple[str, ...], ...]
    followup_words: frozenset[str]
    followup_phrases: tuple[tuple[str, ...], ...]
    version: str = "unversioned"

    def __post_init__(self):
        for name in ("elaboration_words", "elaboration_phrases", "followup_words", "followup_phrases"):
            entries = getattr(self, name)
            if not entries:
                raise ResourceError(f"transition list {name} is empty")
            flat = entries if isinstance(next(iter(entries)), str) else [" ".join(p) for p in entries]
            if any(e != e.lower() for e in flat):
                raise ResourceError(f"transition list {name} must be lowercase")


_TRANSITION_FILES = ("elaboration_words.txt", "elaboration_phrases.txt", "followup_words.txt", "followup_phrases.txt")


def load_transitions(directory: str | os.PathLike | None = None) -> TransitionResources:
    paths = [_resources.resolve(name, directory) for name in _TRANSITION_FILES]
    digest = hashlib.sha256(b"".join(p.read_bytes() for p in paths)).hexdigest()[:12]
    lists = [[e.strip() for _, e in _resources.read_entries(p)] for p in paths]
    return TransitionResources(
        frozenset(lists[0]),
        tuple(tuple(p.split()) for p in lists[1]),
        frozenset(lists[2]),
        tuple(tuple(p.split()) for p in lists[3]),
        digest,
    )


@functools.lru_cache(maxsize=None)
def default_transitions() -> TransitionResources:
    return load_transitions()


class SimilarityLexicon:
    """Symmetric word-pair similarities in [0, 1]; identical words score 1, unknown pairs 0."""

    def __init__(self, entries: dict[tuple[str, str], float] | None = None, version: str = "unversioned"):
        self._table: dict[frozenset, float] = {}
        for (a, b), sim in (entries or {}).items():
            if not 0.0 <= sim <= 1.0:
                raise ResourceError(f"similarity for {a!r}/{b!r} outside [0,1]: {sim}")
            self._table[frozenset((a.lower(), b.lower()))] = float(sim)
        self.version = version

    def similarity(self, a: str, b: str) -> float:
        a, b = a.lower(), b.lower()
        if a == b:
            return 1.0
        return self._table.get(frozenset((a, b)), 0.0)

    def __len__(self) -> int:
        return len(self._table)

    @classmethod
    def load(cls, path: str | os.PathLike | None = None) -> "SimilarityLexicon":
        if path is None:
            path = _resources.resolve("similarity_lexicon.tsv")
        entries = {}
        for lineno, line in _resources.read_entries(path):
            parts = line.split("\t")
            try:
                if len(parts) != 3:
                    raise ValueError
                entries[(parts[0], parts[1])] = float(parts[2])
            except ValueError:
                raise ResourceError("expected word1<TAB>word2<TAB>similarity", line=lineno, source=str(path)) from None
        try:
            return cls(entries, hashlib.sha256(open(path, "rb").read()).hexdigest()[:12])
        except ResourceError as exc:
            raise ResourceError(exc.message, source=str(path)) from None


@functools.lru_cache(maxsize=None)
def default_lexicon() -> SimilarityLexicon:
    return SimilarityLexicon.load()


# ---------------------------------------------------------------------------
# Component features


def cosine_similarity(bag_s: Iterable[str] | Counter, bag_t: Iterable[str] | Counter) -> float:
    """Cosine of two word-frequency vectors; 0 when either bag is empty."""
    fs = bag_s if isinstance(bag_s, Counter) else Counter(bag_s)
    ft = bag_t if isinstance(bag_t, Counter) else Counter(bag_t)
    if not fs or not ft:
        return 0.0
    dot = sum(n * ft[w] for w, n in fs.items() if w in ft)
    norms = sum(n * n for n in fs.values()) * sum(n * n for n in ft.values())
    return min(1.0, dot / math.sqrt(norms))


def _words(tokens: Iterable[Token]) -> list[Token]:
    return [t for t in tokens if t.is_word]


def _surfaces(sentence: AnnotatedSentence) -> list[str]:
    return [t.surface for t in _words(sentence.tokens)]


def _nouns(tokens: Iterable[Token]) -> list[str]:
    return [t.key for t in tokens if t.pos in NOUN_TAGS]


def _verbs(tokens: Iterable[Token]) -> list[str]:
    return [t.key for t in tokens if t.pos in VERB_TAGS and t.key not in IGNORED_VERB_LEMMAS]


def _adjectives(tokens: Iterable[Token]) -> list[str]:
    return [t.key for t in tokens if t.pos in ADJ_TAGS]


def pos_filtered_cosines(target: Sequence[Token], source: Sequence[Token]) -> tuple[float, float, float, float]:
    """Word, noun, verb and adjective cosines over already filtered token lists."""
    t, s = _words(target), _words(source)
    return (
        cosine_similarity([x.key for x in s], [x.key for x in t]),
        cosine_similarity(_nouns(s), _nouns(t)),
        cosine_similarity(_verbs(s), _verbs(t)),
        cosine_similarity(_adjectives(s), _adjectives(t)),
    )


def word_overlap_ratios(target: Sequence[Token | str], source: Sequence[Token | str]) -> tuple[float, float]:
    """``(|common| / |distinct target|, |common| / |distinct source|)``."""
    def distinct(tokens):
        return {t.key if isinstance(t, Token) else t.lower() for t in tokens
                if (t.is_word if isinstance(t, Token) else any(c.isalnum() for c in t))}
    dt, ds = distinct(target), distinct(source)
    common = len(dt & ds)
    return (common / len(dt) if dt else 0.0, common / len(ds) if ds else 0.0)


def _has_parse(sentence: AnnotatedSentence) -> bool:
    return any(t.deprel for t in sentence.tokens)


def subjects_objects(sentence: AnnotatedSentence) -> tuple[set[str], set[str], bool]:
    """Subject and object word sets, and whether the shallow heuristic was used.

    Without dependency labels, subjects are the nouns and pronouns before the
    first non-auxiliary verb and objects the nouns after it.
    """
    if _has_parse(sentence):
        subj = {t.key for t in sentence.tokens if (t.deprel or "").lower() in SUBJECT_RELATIONS}
        obj = {t.key for t in sentence.tokens if (t.deprel or "").lower() in OBJECT_RELATIONS}
        return subj, obj, False
    toks = sentence.tokens
    verb_at = next((i for i, t in enumerate(toks)
                    if t.pos in VERB_TAGS and t.key not in AUXILIARY_LEMMAS), None)
    if verb_at is None:
        return set(), set(), True
    subj = {t.key for t in toks[:verb_at] if t.pos in NOUN_TAGS and t.pos != "PRP$"}
    obj = {t.key for t in toks[verb_at + 1:] if t.pos in NOUN_TAGS and t.pos != "PRP$"}
    return subj, obj, True


def grammatical_overlap(target: AnnotatedSentence, source: AnnotatedSentence) -> tuple[float, float, float, bool]:
    """Subject, object and subject-noun overlap ratios, relative to the source.

    The fourth element reports whether any side fell back to the heuristic.
    """
    subj_s, obj_s, shallow_s = subjects_objects(source)
    subj_t, obj_t, shallow_t = subjects_objects(target)
    nouns_t = set(_nouns(target.tokens))
    return (
        len(subj_s & subj_t) / len(subj_s) if subj_s else 0.0,
        len(obj_s & obj_t) / len(obj_s) if obj_s else 0.0,
        len(subj_s & nouns_t) / len(subj_s) if subj_s else 0.0,
        shallow_s or shallow_t,
    )


def longest_common_run(target: Sequence[str], source: Sequence[str]) -> tuple[str, ...]:
    """Contiguous token run shared by both sequences (case-insensitive) with the longest rendering.

    Rendering joins tokens with single spaces; among runs of equal rendered
    length the earliest in the source wins.  The run is returned as it appears
    in the source.
    """
    t = [w.lower() for w in target]
    s = [w.lower() for w in source]
    best_len, best_end, best_k = 0, 0, 0
    prev = [0] * (len(t) + 1)
    for i in range(1, len(s) + 1):
        cur = [0] * (len(t) + 1)
        for j in range(1, len(t) + 1):
            if s[i - 1] == t[j - 1]:
                k = prev[j - 1] + 1
                cur[j] = k
                chars = sum(len(w) for w in s[i - k:i]) + k - 1
                if chars > best_len:
                    best_len, best_end, best_k = chars, i, k
        prev = cur
    return tuple(source[best_end - best_k:best_end])


def lcs_ratio(target: Sequence[str], source: Sequence[str]) -> float:
    """Characters in the longest common token run over characters in the source (single-spaced)."""
    n_source = len(" ".join(source))
    if not source or n_source == 0:
        return 0.0
    run = longest_common_run(target, source)
    return min(1.0, len(" ".join(run)) / n_source) if run else 0.0


def count_entities(sentence: AnnotatedSentence | Sequence[Token]) -> int:
    """Number of entity mentions: maximal runs of tokens sharing a non-NONE type."""
    tokens = sentence.tokens if isinstance(sentence, AnnotatedSentence) else sentence
    count, previous = 0, NONE
    for t in tokens:
        if t.ner != NONE and t.ner != previous:
            count += 1
        previous = t.ner
    return count


def ne_ratio(ne_source: int, ne_target: int) -> float:
    top = max(ne_source, ne_target)
    return ne_source / top if top else 0.0


def semantic_similarity(target: Sequence[Token], source: Sequence[Token], lexicon: SimilarityLexicon) -> float:
    """Mean best-match similarity of each distinct source noun and verb against the target's."""
    scores = []
    for extract in (_nouns, _verbs):
        src = sorted(set(extract(source)))
        tgt = sorted(set(extract(target)))
        for word in src:
            scores.append(max((lexicon.similarity(word, other) for other in tgt), default=0.0))
    if not scores:
        return 0.0
    return min(1.0, max(0.0, sum(scores) / len(scores)))


def _starts_with(words: Sequence[str], phrase: Sequence[str], at: int) -> bool:
    return tuple(words[at:at + len(phrase)]) == tuple(phrase)


def transition_features(source: AnnotatedSentence | Sequence[str],
                        resources: TransitionResources | None = None) -> tuple[float, float]:
    """``(trans_elab, trans_followup)`` for the source sentence.

    Elaboration: first word listed, or a listed phrase starting within the first
    six words.  Follow-up: first word listed, or a listed phrase opening the sentence.
    """
    if resources is None:
        resources = default_transitions()
    if isinstance(source, AnnotatedSentence):
        words = [t.surface.lower() for t in source.tokens if t.is_word]
    else:
        words = [w.lower() for w in source if any(c.isalnum() for c in w)]
    if not words:
        return 0.0, 0.0
    elab = words[0] in resources.elaboration_words or any(
        _starts_with(words, p, i) for i in range(min(6, len(words))) for p in resources.elaboration_phrases)
    follow = words[0] in resources.followup_words or any(
        _starts_with(words, p, 0) for p in resources.followup_phrases)
    return float(elab), float(follow)


def length_difference_ratio(len_source: int, len_target: int) -> float:
    top = max(len_source, len_target)
    if top == 0:
        return 0.5
    return 0.5 + (len_source - len_target) / (2 * top)


def quoted_spans(surfaces: Sequence[str]) -> list[tuple[str, ...]]:
    """Lowercased word spans of 1-6 words between matching quote marks.

    An opening quote without a partner is ordinary text.
    """
    spans = []
    i = 0
    while i < len(surfaces):
        closer = _QUOTE_PAIRS.get(surfaces[i])
        if closer is None:
            i += 1
            continue
        j = next((k for k in range(i + 1, len(surfaces)) if surfaces[k] == closer), None)
        if j is None:
            i += 1
            continue
        words = tuple(w.lower() for w in surfaces[i + 1:j] if any(c.isalnum() for c in w))
        if 1 <= len(words) <= 6:
            spans.append(words)
        i = j + 1
    return spans


def _contains(words: Sequence[str], span: Sequence[str]) -> bool:
    n = len(span)
    return any(tuple(words[i:i + n]) == tuple(span) for i in range(len(words) - n + 1))


def attribution_feature(target: Sequence[str], source: Sequence[str]) -> float:
    """1 when a quoted span of either sentence occurs as a word run in the other."""
    def words(surfaces):
        return [w.lower() for w in surfaces if any(c.isalnum() for c in w)]
    for quoting, other in ((source, target), (target, source)):
        other_words = words(other)
        if any(_contains(other_words, span) for span in quoted_spans(quoting)):
            return 1.0
    return 0.0


# ---------------------------------------------------------------------------


def extract_features(pair: SentencePair,
                     resources: AnnotationResources | None = None,
                     lexicon: SimilarityLexicon | None = None,
                     transitions: TransitionResources | None = None) -> FeatureVector:
    """Compute the full feature vector.

    Coreference substitution feeds the noun/verb/adjective cosines, the
    grammatical overlaps and semantic similarity; the remaining features use
    the sentences as written.  Punctuation tokens never count toward the
    common run or the lengths.
    """
    resources = resources or default_resources()
    lexicon = lexicon or default_lexicon()
    transitions = transitions or default_transitions()

    target, source = pair.target, pair.source
    resolved = prepare_coref(pair)

    plain_t = remove_stopwords(_words(target.tokens), resources)
    plain_s = remove_stopwords(_words(source.tokens), resources)
    word_cos = pos_filtered_cosines(plain_t, plain_s)[0]
    wor_t, wor_s = word_overlap_ratios(plain_t, plain_s)

    res_t = remove_stopwords(resolved.target.tokens, resources)
    res_s = remove_stopwords(resolved.source.tokens, resources)
    _, noun_cos, verb_cos, adj_cos = pos_filtered_cosines(res_t, res_s)
    subj, obj, subj_noun, shallow = grammatical_overlap(resolved.target, resolved.source)
    semantic = semantic_similarity(res_t, res_s, lexicon)

    trans_elab, trans_followup = transition_features(source, transitions)
    return FeatureVector(
        word_cos=word_cos,
        noun_cos=noun_cos,
        verb_cos=verb_cos,
        adj_cos=adj_cos,
        wor_t=wor_t,
        wor_s=wor_s,
        subj_overlap=subj,
        obj_overlap=obj,
        subj_noun_overlap=subj_noun,
        lcsr=lcs_ratio(_surfaces(target), _surfaces(source)),
        ne_ratio=ne_ratio(count_entities(source), count_entities(target)),
        semantic_sim=semantic,
        trans_elab=trans_elab,
        trans_followup=trans_followup,
        ldr=length_difference_ratio(len(_words(source.tokens)), len(_words(target.tokens))),
        attribution=attribution_feature(target.surfaces, source.surfaces),
        shallow_grammar=shallow,
    )
