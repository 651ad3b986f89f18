from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from courtrel.annotate import (
    CorefChain, annotate_sentence, attach_chains, default_resources, load_resources, naive_coref,
    remove_stopwords, resolve_coreferences, tokenize,
)
from courtrel.corpus import AnnotatedSentence, SentencePair, Token
from courtrel.errors import CorefError, ResourceError

EX4_TARGET = "Petitioner Jae Lee moved to the United States from South Korea with his parents when he was 13."
EX4_SOURCE = ("In the 35 years he has spent in this country, he has never returned to South Korea, "
              "nor has he become a U. S. citizen, living instead as a lawful permanent resident.")


def surfaces(text):
    return [s for s, _, _ in tokenize(text)]


class TestTokenize:
    def test_examples(self):
        assert surfaces("he was 13.") == ["he", "was", "13", "."]
        assert surfaces("") == []
        assert surfaces("'reasonable probability'") == ["'", "reasonable", "probability", "'"]

    def test_legal_units_kept(self):
        assert "U. S." in surfaces("533 U. S. 289")
        assert "v." in surfaces("INS v. St. Cyr")
        assert "5,000" in surfaces("paid $5,000 today")

    @given(st.text(alphabet=st.sampled_from(list("abc XY.,'\"-()0123\n")), max_size=40))
    def test_offsets_reproduce_input(self, text):
        toks = tokenize(text)
        rebuilt, pos = [], 0
        for surface, start, end in toks:
            assert text[start:end] == surface and start >= pos
            rebuilt.append(text[pos:start])
            rebuilt.append(surface)
            pos = end
        rebuilt.append(text[pos:])
        assert "".join(rebuilt) == text
        assert all(not text[a:b].strip() for a, b in zip([0] + [e for _, _, e in toks], [s for _, s, _ in toks]))


class TestAnnotateSentence:
    def test_gazetteer_person(self):
        s = annotate_sentence("Petitioner Jae Lee moved")
        assert [t.ner for t in s.tokens[1:3]] == ["PERSON", "PERSON"]

    def test_bare_number_not_entity(self):
        assert annotate_sentence("533").tokens[0].ner == "NONE"

    def test_inflection(self):
        moved = annotate_sentence("He moved").tokens[1]
        assert moved.lemma == "move" and moved.pos.startswith("VB")

    def test_regex_entities(self):
        s = annotate_sentence("He paid $5,000 on March 3, 2015 at 10:30 a.m., about 5 percent.")
        ner = {t.surface: t.ner for t in s.tokens}
        assert ner["5,000"] == "MONEY" and ner["March"] == "DATE" and ner["2015"] == "DATE"
        assert ner["10:30"] == "TIME" and ner["percent"] == "PERCENT"

    def test_no_parse_by_default(self):
        s = annotate_sentence("The court ruled.")
        assert all(t.head is None and t.deprel is None for t in s.tokens)

    @given(st.text(alphabet=st.sampled_from(list("abcdefg HIJ.,'")), max_size=30))
    def test_deterministic(self, text):
        a = annotate_sentence(text)
        b = annotate_sentence(text)
        assert a == b
        assert " ".join(a.raw.split()) == " ".join(text.split())


class TestResources:
    def test_bundled_valid(self):
        r = default_resources()
        assert r.stopwords and len(r.version) == 12

    def test_env_override(self, tmp_path, monkeypatch):
        (tmp_path / "stopwords.txt").write_text("court\n", encoding="utf-8")
        monkeypatch.setenv("COURTREL_RESOURCES", str(tmp_path))
        r = load_resources()
        assert r.stopwords == frozenset({"court"})

    def test_bad_gazetteer_type(self, tmp_path):
        (tmp_path / "gazetteer.tsv").write_text("Acme\tCOMPANY\n", encoding="utf-8")
        with pytest.raises(ResourceError, match="COMPANY"):
            load_resources(tmp_path)

    def test_empty_stopwords(self, tmp_path):
        (tmp_path / "stopwords.txt").write_text("# nothing\n", encoding="utf-8")
        with pytest.raises(ResourceError):
            load_resources(tmp_path)


class TestStopwords:
    def tok(self, words):
        return [Token(i, w, w.lower(), "NN") for i, w in enumerate(words)]

    def test_examples(self):
        r = default_resources()
        assert [t.surface for t in remove_stopwords(self.tok(["the", "court", "ruled"]), r)] == ["court", "ruled"]
        assert remove_stopwords(self.tok(["the", "of", "and"]), r) == []
        assert remove_stopwords([], r) == []

    def test_case_insensitive(self):
        assert [t.surface for t in remove_stopwords(self.tok(["The", "Court"]), default_resources())] == ["Court"]


def ex4_pair() -> SentencePair:
    target = annotate_sentence(EX4_TARGET)
    source = annotate_sentence(EX4_SOURCE)
    pair = SentencePair("ex4", target, source)
    rep = [("target", i) for i in range(3)]
    members = rep + [("target", i) for i, t in enumerate(target.tokens) if t.surface in ("he", "his")]
    members += [("source", i) for i, t in enumerate(source.tokens) if t.surface == "he"]
    chain = CorefChain("c1", tuple(Token(i, t.surface, t.lemma, t.pos, t.ner) for i, t in enumerate(target.tokens[:3])),
                       members)
    return attach_chains(pair, [chain])


class TestCoreference:
    def test_example_substitution(self):
        resolved = resolve_coreferences(ex4_pair())
        assert ("with Petitioner Jae Lee parents when Petitioner Jae Lee was 13") in resolved.target.raw
        assert resolved.source.raw.startswith("In the 35 years Petitioner Jae Lee has spent in this country, "
                                              "Petitioner Jae Lee has never returned")
        assert "nor has Petitioner Jae Lee become" in resolved.source.raw
        assert [t.index for t in resolved.target.tokens] == list(range(len(resolved.target.tokens)))

    def test_source_only_sentence(self):
        target = annotate_sentence("Petitioner Jae Lee testified.")
        source = annotate_sentence("he has never returned")
        chain = CorefChain("c1", tuple(Token(i, t.surface, t.lemma, t.pos, t.ner)
                                       for i, t in enumerate(target.tokens[:3])),
                           [("target", 0), ("target", 1), ("target", 2), ("source", 0)])
        resolved = resolve_coreferences(attach_chains(SentencePair("p", target, source), [chain]))
        assert resolved.source.raw == "Petitioner Jae Lee has never returned"

    def test_input_untouched_and_idempotent(self):
        pair = ex4_pair()
        before = pair.target.raw
        once = resolve_coreferences(pair)
        assert pair.target.raw == before
        assert resolve_coreferences(once) == once

    def test_no_pronouns_identity(self):
        pair = SentencePair("p", annotate_sentence("The court ruled."), annotate_sentence("The judge agreed."))
        assert resolve_coreferences(pair) == pair

    def test_missing_representative(self):
        tok = Token(0, "he", "he", "PRP", coref_chain="c1")
        bad = AnnotatedSentence.__new__(AnnotatedSentence)
        object.__setattr__(bad, "raw", "he")
        object.__setattr__(bad, "tokens", (tok,))
        object.__setattr__(bad, "coref_chains", {"c1": ()})
        with pytest.raises(CorefError):
            resolve_coreferences(SentencePair("p", bad, bad))

    def test_heads_remapped(self):
        target = AnnotatedSentence("Jae Lee left .", (
            Token(0, "Jae", "Jae", "NNP", "PERSON", 1, "compound"),
            Token(1, "Lee", "Lee", "NNP", "PERSON", 2, "nsubj"),
            Token(2, "left", "leave", "VBD", "NONE", -1, "root"),
            Token(3, ".", ".", ".", "NONE", 2, "punct"),
        ))
        rep = tuple(Token(i, t.surface, t.lemma, t.pos, t.ner) for i, t in enumerate(target.tokens[:2]))
        source = AnnotatedSentence("Then he returned .", (
            Token(0, "Then", "then", "RB", "NONE", 2, "advmod"),
            Token(1, "he", "he", "PRP", "NONE", 2, "nsubj", "c1"),
            Token(2, "returned", "return", "VBD", "NONE", -1, "root"),
            Token(3, ".", ".", ".", "NONE", 2, "punct"),
        ), {"c1": rep})
        out = resolve_coreferences(SentencePair("p", target, source)).source
        assert [t.surface for t in out.tokens] == ["Then", "Jae", "Lee", "returned", "."]
        assert [t.head for t in out.tokens] == [3, 2, 3, -1, 3]
        assert [t.deprel for t in out.tokens] == ["advmod", "compound", "nsubj", "root", "punct"]


class TestNaiveCoref:
    def test_single_chain(self):
        pair = SentencePair("p", annotate_sentence("Jae Lee pleaded guilty."),
                            annotate_sentence("Later he regretted it."))
        chains = naive_coref(pair)
        assert len(chains) == 1
        assert [t.surface for t in chains[0].representative] == ["Jae", "Lee"]
        assert ("source", 1) in chains[0].members

    def test_no_entities(self):
        pair = SentencePair("p", annotate_sentence("The plea was entered."), annotate_sentence("It was valid."))
        assert naive_coref(pair) == []

    def test_nearest_candidate(self):
        pair = SentencePair("p", annotate_sentence("Jae Lee met Anna Harlow."),
                            annotate_sentence("She testified first."))
        [chain] = naive_coref(pair)
        assert [t.surface for t in chain.representative] == ["Anna", "Harlow"]
