"""Resource-driven linguistic annotation and coreference substitution.

This is a deterministic stand-in for a statistical pipeline: POS tags come
from a lexicon with suffix fallbacks, named entities from a gazetteer plus a
handful of regular expressions, and lemmas from inflection-stripping rules
with an irregular-forms table.  Pre-annotated input in the corpus format
bypasses all of it.
"""

from __future__ import annotations

import functools
import hashlib
import os
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from courtrel import _resources
from courtrel.corpus import (
    NER_TYPES,
    NONE,
    PRONOUN_TAGS,
    PROPER_NOUN_TAGS,
    ROOT,
    AnnotatedSentence,
    SentencePair,
    Token,
    detokenize,
)
from courtrel.errors import CorefError, ResourceError

THIRD_PERSON_PRONOUNS = {
    "he": "PERSON", "him": "PERSON", "his": "PERSON", "himself": "PERSON",
    "she": "PERSON", "her": "PERSON", "hers": "PERSON", "herself": "PERSON",
    "it": "ORGANIZATION", "its": "ORGANIZATION", "itself": "ORGANIZATION",
    "they": None, "them": None, "their": None, "theirs": None, "themselves": None,
}
QUOTE_CHARS = frozenset({"'", '"', "‘", "’", "“", "”", "``", "''"})


@dataclass(frozen=True)
class AnnotationResources:
    stopwords: frozenset[str]
    pos_lexicon: dict[str, tuple[str, str | None]]
    ne_gazetteer: dict[tuple[str, ...], str]
    abbreviations: frozenset[str] = frozenset()
    version: str = "unversioned"
    _gazetteer_index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.stopwords:
            raise ResourceError("stopword list is empty")
        for phrase, ne in self.ne_gazetteer.items():
            if ne not in NER_TYPES:
                raise ResourceError(f"gazetteer entry {' '.join(phrase)!r} has unknown type {ne!r}")
        index: dict[str, list[tuple[tuple[str, ...], str]]] = {}
        for phrase, ne in self.ne_gazetteer.items():
            index.setdefault(phrase[0], []).append((phrase, ne))
        for entries in index.values():
            entries.sort(key=lambda e: -len(e[0]))
        self._gazetteer_index.update(index)

    __hash__ = object.__hash__

    @functools.cached_property
    def verb_bases(self) -> frozenset[str]:
        return frozenset(w for w, (tag, _) in self.pos_lexicon.items() if tag in ("VB", "VBP"))


def load_resources(directory: str | os.PathLike | None = None) -> AnnotationResources:
    """Load ``stopwords.txt``, ``pos_lexicon.tsv``, ``gazetteer.tsv`` and ``abbreviations.txt``.

    Files missing from ``directory`` fall back to the bundled copies.
    """
    paths = {name: _resources.resolve(name, directory)
             for name in ("stopwords.txt", "pos_lexicon.tsv", "gazetteer.tsv", "abbreviations.txt")}
    digest = hashlib.sha256()
    for name in sorted(paths):
        digest.update(name.encode())
        digest.update(paths[name].read_bytes())

    stopwords = frozenset(e.strip().lower() for _, e in _resources.read_entries(paths["stopwords.txt"]))

    lexicon: dict[str, tuple[str, str | None]] = {}
    for lineno, entry in _resources.read_entries(paths["pos_lexicon.tsv"]):
        parts = entry.split("\t")
        if len(parts) not in (2, 3) or not parts[0] or not parts[1]:
            raise ResourceError("expected word<TAB>POS[<TAB>lemma]", line=lineno, source=str(paths["pos_lexicon.tsv"]))
        lexicon[parts[0].lower()] = (parts[1], parts[2] if len(parts) == 3 and parts[2] else None)

    abbreviations = frozenset(e.strip() for _, e in _resources.read_entries(paths["abbreviations.txt"]))

    gazetteer: dict[tuple[str, ...], str] = {}
    for lineno, entry in _resources.read_entries(paths["gazetteer.tsv"]):
        parts = entry.split("\t")
        if len(parts) != 2:
            raise ResourceError("expected phrase<TAB>TYPE", line=lineno, source=str(paths["gazetteer.tsv"]))
        if parts[1] not in NER_TYPES:
            raise ResourceError(f"unknown entity type {parts[1]!r}", line=lineno, source=str(paths["gazetteer.tsv"]))
        phrase = tuple(s for s, _, _ in tokenize(parts[0], abbreviations))
        gazetteer[phrase] = parts[1]

    return AnnotationResources(stopwords, lexicon, gazetteer, abbreviations, digest.hexdigest()[:12])


@functools.lru_cache(maxsize=None)
def default_resources() -> AnnotationResources:
    return load_resources()


def default_annotator():
    resources = default_resources()
    return lambda text: annotate_sentence(text, resources)


# ---------------------------------------------------------------------------
# Tokenisation

_NUMBER_TOKEN = r"\d+(?:[,.:/-]\d+)*(?![A-Za-z0-9])"
_WORD = r"[A-Za-z0-9]+(?:[-'’.&/][A-Za-z0-9]+)*"
_PUNCT = r"--+|\.\.\.|``|''|\S"


@functools.lru_cache(maxsize=32)
def _token_regex(abbreviations: frozenset[str]) -> re.Pattern:
    abbrevs = sorted(abbreviations, key=lambda a: (-len(a), a))
    alts = "|".join(re.escape(a).replace(r"\ ", r"\s+") for a in abbrevs)
    parts = []
    if alts:
        parts.append(rf"(?<![A-Za-z0-9])(?:{alts})(?![A-Za-z0-9])")
    parts += [_NUMBER_TOKEN, _WORD, _PUNCT]
    return re.compile("|".join(f"(?:{p})" for p in parts))


_CLITIC = re.compile(r"^(.+?)(['’]s|n['’]t)$", re.IGNORECASE)


def tokenize(text: str, abbreviations: Iterable[str] | None = None) -> list[tuple[str, int, int]]:
    """Split ``text`` into ``(surface, start, end)`` tokens.

    Punctuation is separated from words except inside configured abbreviations
    ("v.", "U. S.", ...) and numbers; possessive ``'s`` and ``n't`` are split off.
    """
    if abbreviations is None:
        abbreviations = default_resources().abbreviations
    regex = _token_regex(frozenset(abbreviations))
    out: list[tuple[str, int, int]] = []
    for m in regex.finditer(text):
        surface, start, end = m.group(0), m.start(), m.end()
        clitic = _CLITIC.match(surface) if surface[0].isalnum() else None
        if clitic and len(clitic.group(1)) > 1:
            cut = start + len(clitic.group(1))
            out.append((clitic.group(1), start, cut))
            out.append((clitic.group(2), cut, end))
        else:
            out.append((surface, start, end))
    return out


# ---------------------------------------------------------------------------
# POS tagging and lemmatisation

_PUNCT_TAGS = {
    ".": ".", "?": ".", "!": ".", ",": ",", ":": ":", ";": ":", "-": ":", "--": ":", "...": ":",
    "(": "-LRB-", ")": "-RRB-", "[": "-LRB-", "]": "-RRB-", "$": "$", "#": "#", "%": "NN",
    "&": "CC", "``": "``", "''": "''", "“": "``", "”": "''", "‘": "``", "’": "''",
}
_NUMBER = re.compile(r"^\d[\d,.:/-]*$")

_NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity", "ance", "ence", "ship", "ism", "ist", "ure", "age", "ery")
_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "al", "ic", "less", "ary", "ant", "ent")
_VOWELS = set("aeiou")


def _suffix_tag(word: str, verb_bases: frozenset[str]) -> str | None:
    if len(word) > 4 and word.endswith("ing"):
        return "VBG"
    if len(word) > 3 and word.endswith("ed"):
        return "VBD"
    if len(word) > 3 and word.endswith("ly"):
        return "RB"
    if len(word) > 4 and word.endswith("est"):
        return "JJS"
    if word.endswith(_NOUN_SUFFIXES):
        return "NN"
    if len(word) > 4 and word.endswith("s") and word[:-1].endswith(_NOUN_SUFFIXES):
        return "NNS"
    if word.endswith(_ADJ_SUFFIXES):
        return "JJ"
    if len(word) > 3 and word.endswith("s") and not word.endswith(("ss", "us", "is")):
        stem = _strip_s(word)
        return "VBZ" if stem in verb_bases else "NNS"
    return None


def _strip_s(word: str) -> str:
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith(("ses", "xes", "zes", "ches", "shes", "oes")):
        return word[:-2]
    if word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def _strip_suffix(word: str, suffix: str, verb_bases: frozenset[str]) -> str:
    stem = word[: -len(suffix)]
    if suffix == "ed" and word.endswith("ied"):
        return word[:-3] + "y"
    for candidate in (stem, stem + "e"):
        if candidate in verb_bases:
            return candidate
    if len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS | set("lsz"):
        return stem[:-1]
    if stem.endswith(("v", "z", "u", "c")) or re.search(r"[^aeiou]l$|[^aeiou]at$|[^aeiou]ur$", stem):
        return stem + "e"
    return stem


def lemmatize(word: str, tag: str, verb_bases: frozenset[str]) -> str:
    lower = word.lower()
    if tag in PROPER_NOUN_TAGS:
        return word
    if tag == "NNS" or tag == "VBZ":
        return _strip_s(lower)
    if tag in ("VBD", "VBN") and lower.endswith("ed"):
        return _strip_suffix(lower, "ed", verb_bases)
    if tag == "VBG" and lower.endswith("ing"):
        return _strip_suffix(lower, "ing", verb_bases)
    return lower


_CONTENT_TAGS = frozenset({"NN", "NNS", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "JJ", "JJR", "JJS"})
# A verb reading directly after one of these is re-read as a noun ("the rule", "his claims").
_NOMINAL_CONTEXT = frozenset({"DT", "PRP$", "JJ", "JJR", "JJS", "POS", "CD", "IN"})


def _tag_token(surface: str, position: int, resources: AnnotationResources) -> tuple[str, str]:
    """POS tag and lemma for one token, ignoring quote direction."""
    lower = surface.lower()
    if lower in resources.pos_lexicon:
        tag, lemma = resources.pos_lexicon[lower]
        if position > 0 and surface[0].isupper() and tag in _CONTENT_TAGS:
            return "NNP", surface
        if tag in PROPER_NOUN_TAGS:
            return tag, lemma or surface
        return tag, lemma or lemmatize(surface, tag, resources.verb_bases)
    if surface in _PUNCT_TAGS:
        return _PUNCT_TAGS[surface], surface
    if lower in ("'s", "’s"):
        return "POS", "'s"
    if lower in ("n't", "n’t"):
        return "RB", "not"
    if _NUMBER.match(surface):
        return "CD", surface
    if not any(ch.isalnum() for ch in surface):
        return "SYM", surface
    if surface[0].isupper():
        suffix = _suffix_tag(lower, resources.verb_bases) if position == 0 else None
        if suffix is None or (surface.isupper() and len(surface) > 1):
            return "NNP", surface
        return suffix, lemmatize(surface, suffix, resources.verb_bases)
    tag = _suffix_tag(lower, resources.verb_bases) or "NN"
    return tag, lemmatize(surface, tag, resources.verb_bases)


# ---------------------------------------------------------------------------
# Named entities

_MONTHS = {m.lower() for m in (
    "January February March April May June July August September October November December "
    "Jan. Feb. Mar. Apr. Jun. Jul. Aug. Sept. Sep. Oct. Nov. Dec.").split()}
_YEAR = re.compile(r"^(1[6-9]\d\d|20\d\d)$")
_DAY = re.compile(r"^([1-9]|[12]\d|3[01])(st|nd|rd|th)?$")
_CLOCK = re.compile(r"^([01]?\d|2[0-3]):[0-5]\d$")


def _regex_entities(surfaces: Sequence[str], tags: list[str]) -> None:
    n = len(surfaces)
    i = 0
    while i < n:
        s = surfaces[i]
        low = s.lower()
        if tags[i] != NONE:
            i += 1
            continue
        span, kind = 0, None
        if s == "$" and i + 1 < n and _NUMBER.match(surfaces[i + 1]):
            span, kind = 2, "MONEY"
            if i + 2 < n and surfaces[i + 2].lower() in ("million", "billion", "thousand"):
                span = 3
        elif _NUMBER.match(s) and i + 1 < n and surfaces[i + 1].lower() in ("dollars", "cents"):
            span, kind = 2, "MONEY"
        elif _NUMBER.match(s) and i + 1 < n and surfaces[i + 1].lower() in ("%", "percent"):
            span, kind = 2, "PERCENT"
        elif low in _MONTHS and (low.endswith(".") or surfaces[i][0].isupper()):
            span, kind = 1, "DATE"
            if i + 1 < n and _DAY.match(surfaces[i + 1]):
                span = 2
            if i + span + 1 < n and surfaces[i + span] == "," and _YEAR.match(surfaces[i + span + 1]):
                span += 2
            elif i + span < n and _YEAR.match(surfaces[i + span]):
                span += 1
            if span == 1 and low in ("may", "march"):
                span, kind = 0, None
        elif _YEAR.match(s):
            span, kind = 1, "DATE"
        elif _CLOCK.match(s):
            span, kind = 1, "TIME"
            if i + 1 < n and surfaces[i + 1].lower() in ("a.m.", "p.m.", "am", "pm"):
                span = 2
        elif low in ("noon", "midnight"):
            span, kind = 1, "TIME"
        if kind and all(t == NONE for t in tags[i:i + span]):
            for j in range(i, i + span):
                tags[j] = kind
            i += span
        else:
            i += 1


def tag_entities(surfaces: Sequence[str], resources: AnnotationResources) -> list[str]:
    """Longest-match gazetteer lookup followed by the regex rules."""
    tags = [NONE] * len(surfaces)
    index = resources._gazetteer_index
    i = 0
    while i < len(surfaces):
        for phrase, ne in index.get(surfaces[i], ()):
            if tuple(surfaces[i:i + len(phrase)]) == phrase:
                tags[i:i + len(phrase)] = [ne] * len(phrase)
                i += len(phrase)
                break
        else:
            i += 1
    _regex_entities(surfaces, tags)
    return tags


def annotate_sentence(text: str, resources: AnnotationResources | None = None) -> AnnotatedSentence:
    """Tokenise, POS-tag, lemmatise and NE-tag ``text``.  Heads and deprels stay unset."""
    if resources is None:
        resources = default_resources()
    surfaces = [s for s, _, _ in tokenize(text, resources.abbreviations)]
    ner = tag_entities(surfaces, resources)
    open_quotes: set[str] = set()
    tokens = []
    for i, surface in enumerate(surfaces):
        if surface in ("'", '"'):
            tag = "''" if surface in open_quotes else "``"
            open_quotes ^= {surface}
            lemma = surface
        else:
            tag, lemma = _tag_token(surface, i, resources)
            if tokens and tokens[-1].pos in _NOMINAL_CONTEXT and tag in ("VB", "VBP", "VBZ"):
                tag = "NNS" if tag == "VBZ" else "NN"
        tokens.append(Token(i, surface, lemma, tag, ner[i]))
    return AnnotatedSentence(text, tuple(tokens))


def remove_stopwords(tokens: Sequence, resources: AnnotationResources | frozenset[str]) -> list:
    """Order-preserving filter of tokens (or plain strings) that are not stopwords."""
    stop = resources.stopwords if isinstance(resources, AnnotationResources) else resources
    return [t for t in tokens if (t.surface if isinstance(t, Token) else t).lower() not in stop]


# ---------------------------------------------------------------------------
# Coreference

def is_pronoun(token: Token) -> bool:
    return token.pos in PRONOUN_TAGS or token.surface.lower() in THIRD_PERSON_PRONOUNS


@dataclass
class CorefChain:
    id: str
    representative: tuple[Token, ...]
    members: list[tuple[str, int]]
    """``(role, token index)`` pairs, role being ``"target"`` or ``"source"``."""


def _entity_mentions(sentence: AnnotatedSentence) -> list[tuple[int, int, str]]:
    """``(start, end, type)`` of PERSON/ORGANIZATION mentions, widened over adjacent proper nouns."""
    toks = sentence.tokens
    out = []
    i = 0
    while i < len(toks):
        ne = toks[i].ner
        if ne not in ("PERSON", "ORGANIZATION"):
            i += 1
            continue
        j = i
        while j < len(toks) and toks[j].ner == ne:
            j += 1
        start, end = i, j
        while start > 0 and toks[start - 1].pos in PROPER_NOUN_TAGS and toks[start - 1].ner == NONE:
            start -= 1
        while end < len(toks) and toks[end].pos in PROPER_NOUN_TAGS and toks[end].ner == NONE:
            end += 1
        out.append((start, end, ne))
        i = j
    return out


def naive_coref(pair: SentencePair) -> list[CorefChain]:
    """Link each third-person pronoun to the nearest preceding compatible entity mention.

    Tokens are scanned in target-then-source order.  He/she forms need a PERSON,
    it/its an ORGANIZATION, they/them either.  Mentions with the same text share
    a chain; pronouns with no candidate stay unchained.
    """
    mentions = []  # (global position of end, role, start, end, type, text)
    for role, sentence, offset in (("target", pair.target, 0), ("source", pair.source, len(pair.target.tokens))):
        for start, end, ne in _entity_mentions(sentence):
            text = " ".join(t.surface.lower() for t in sentence.tokens[start:end])
            mentions.append((offset + end, role, start, end, ne, text))

    chains: dict[str, CorefChain] = {}
    by_text: dict[str, str] = {}

    def chain_for(mention) -> CorefChain:
        _, role, start, end, _, text = mention
        if text not in by_text:
            cid = f"c{len(by_text) + 1}"
            by_text[text] = cid
            chains[cid] = CorefChain(cid, (), [])
        chain = chains[by_text[text]]
        members = [(role, k) for k in range(start, end)]
        if members[0] not in chain.members:
            chain.members.extend(members)
        return chain

    for role, sentence, offset in (("target", pair.target, 0), ("source", pair.source, len(pair.target.tokens))):
        for tok in sentence.tokens:
            agreement = THIRD_PERSON_PRONOUNS.get(tok.surface.lower(), "none")
            if agreement == "none":
                continue
            position = offset + tok.index
            candidates = [m for m in mentions if m[0] <= position and (agreement is None or m[4] == agreement)]
            if not candidates:
                continue
            nearest = max(candidates, key=lambda m: m[0])
            chain_for(nearest).members.append((role, tok.index))

    for chain in chains.values():
        chain.representative = _representative(pair, chain)
    return [c for c in chains.values() if any(is_pronoun(_member(pair, m)) for m in c.members)]


def _member(pair: SentencePair, member: tuple[str, int]) -> Token:
    role, idx = member
    return (pair.target if role == "target" else pair.source).tokens[idx]


def _representative(pair: SentencePair, chain: CorefChain) -> tuple[Token, ...]:
    """Longest mention containing a proper noun; earliest wins ties."""
    spans: list[tuple[str, int, int]] = []
    for role, idx in chain.members:
        if spans and spans[-1][0] == role and spans[-1][2] == idx and not is_pronoun(_member(pair, (role, idx))):
            spans[-1] = (role, spans[-1][1], idx + 1)
        elif not is_pronoun(_member(pair, (role, idx))):
            spans.append((role, idx, idx + 1))
    order = {"target": 0, "source": 1}
    best = None
    for role, start, end in spans:
        sentence = pair.target if role == "target" else pair.source
        toks = sentence.tokens[start:end]
        if not any(t.pos in PROPER_NOUN_TAGS for t in toks):
            continue
        rank = (-(end - start), order[role], start)
        if best is None or rank < best[0]:
            best = (rank, toks)
    if best is None:
        return ()
    return tuple(Token(i, t.surface, t.lemma, t.pos, t.ner) for i, t in enumerate(best[1]))


def attach_chains(pair: SentencePair, chains: Sequence[CorefChain]) -> SentencePair:
    """Return a copy of ``pair`` whose tokens carry the given chain ids."""
    usable = [c for c in chains if c.representative]
    out = []
    for role, sentence in (("target", pair.target), ("source", pair.source)):
        assignment = {idx: c.id for c in usable for r, idx in c.members if r == role}
        if not assignment:
            out.append(sentence)
            continue
        tokens = tuple(replace(t, coref_chain=assignment.get(t.index, t.coref_chain)) for t in sentence.tokens)
        mentions = dict(sentence.coref_chains)
        mentions.update({c.id: c.representative for c in usable if c.id in assignment.values()})
        out.append(AnnotatedSentence(sentence.raw, tokens, mentions))
    return pair.with_sentences(out[0], out[1])


def has_coref(pair: SentencePair) -> bool:
    return any(t.coref_chain for s in (pair.target, pair.source) for t in s.tokens)


def _substitute(sentence: AnnotatedSentence, mentions: dict[str, tuple[Token, ...]]) -> AnnotatedSentence:
    new_tokens: list[dict] = []
    remap: dict[int, int] = {}
    changed = False
    for tok in sentence.tokens:
        if tok.coref_chain and is_pronoun(tok):
            if tok.coref_chain not in mentions or not mentions[tok.coref_chain]:
                raise CorefError(f"coref chain {tok.coref_chain!r} has no representative mention")
            mention = mentions[tok.coref_chain]
            base = len(new_tokens)
            head_pos = base + len(mention) - 1
            for k, m in enumerate(mention):
                last = k == len(mention) - 1
                new_tokens.append(dict(
                    surface=m.surface, lemma=m.lemma, pos=m.pos, ner=m.ner,
                    head=("old", tok.head) if last else ("new", head_pos),
                    deprel=tok.deprel if last else ("compound" if tok.deprel else None),
                    coref_chain=tok.coref_chain,
                ))
            remap[tok.index] = head_pos
            changed = changed or [m.surface for m in mention] != [tok.surface]
        else:
            remap[tok.index] = len(new_tokens)
            new_tokens.append(dict(surface=tok.surface, lemma=tok.lemma, pos=tok.pos, ner=tok.ner,
                                   head=("old", tok.head), deprel=tok.deprel, coref_chain=tok.coref_chain))
    if not changed:
        return sentence
    tokens = []
    for i, d in enumerate(new_tokens):
        kind, h = d.pop("head")
        if kind == "new":
            head = h
        elif h is None or h == ROOT:
            head = h
        else:
            head = remap[h]
        tokens.append(Token(i, head=head, **d))
    used = {t.coref_chain for t in tokens if t.coref_chain}
    chains = {cid: m for cid, m in {**mentions, **sentence.coref_chains}.items() if cid in used}
    return AnnotatedSentence(detokenize([t.surface for t in tokens]), tuple(tokens), chains)


def resolve_coreferences(pair: SentencePair) -> SentencePair:
    """Replace every chained pronoun by its chain's representative mention.

    Possessives are replaced by the bare mention.  Token indices and heads are
    renumbered; the input pair is not modified.
    """
    mentions: dict[str, tuple[Token, ...]] = {}
    for sentence in (pair.source, pair.target):
        mentions.update(sentence.coref_chains)
    target = _substitute(pair.target, mentions)
    source = _substitute(pair.source, mentions)
    if target is pair.target and source is pair.source:
        return pair
    return pair.with_sentences(target, source)


def prepare_coref(pair: SentencePair) -> SentencePair:
    """Resolve coreferences, inventing chains with :func:`naive_coref` when the input has none."""
    if not has_coref(pair):
        chains = naive_coref(pair)
        if not chains:
            return pair
        pair = attach_chains(pair, chains)
    return resolve_coreferences(pair)
