from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from courtrel._resources import bundled_dir, data_path
from courtrel.citation_rules import (
    DEFAULT_RULES, CitationRule, CitationRuleSet, detect_citation, format_rules, load_rules, parse_rules,
)
from courtrel.errors import RuleError

ST_CYR_CITE = "See INS v. St. Cyr, 533 U. S. 289, 322-323 (2001)."


def fixture_rows():
    rows = []
    with open(data_path("citation_fixture.tsv"), encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                expected, sentence = line.rstrip("\n").split("\t", 1)
                rows.append((expected, sentence))
    return rows


def test_signal_prefix_example():
    assert detect_citation(ST_CYR_CITE) == (True, "R1")


def test_plain_sentence():
    assert detect_citation("The question is whether Lee can show he was prejudiced by that erroneous advice.") \
        == (False, None)


@pytest.mark.parametrize("sentence,rule", [
    ("Id., at 59.", "R4"),
    ("Id.", "R4"),
    ("Ibid.", "R4"),
    ("Id. at 12.", "R4"),
    ("The standard appears in 466 U. S. 668, 694 (1984).", "R2"),
    ("That rule was applied in 101 F.3d 1203.", "R2"),
    ("Hill v. Lockhart (1985) controls.", "R3"),
    ("Cf. Strickland v. Washington, supra.", "R1"),
])
def test_rule_classes(sentence, rule):
    assert detect_citation(sentence) == (True, rule)


@pytest.mark.parametrize("sentence", [
    "See the discussion above.",
    "The defendant had lived here since 1982.",
    "Lee v. the world is not a case.",
    "Identity is not at issue.",
    "He served 3 years in prison.",
])
def test_near_misses(sentence):
    assert detect_citation(sentence) == (False, None)


def test_fixture_contract():
    rows = fixture_rows()
    pos = [s for e, s in rows if e == "citation"]
    neg = [s for e, s in rows if e != "citation"]
    assert len(pos) == 40 and len(neg) == 40
    assert sum(detect_citation(s)[0] for s in pos) == 40
    assert sum(detect_citation(s)[0] for s in neg) == 0


def test_disable_r1_falls_to_r2():
    assert detect_citation(ST_CYR_CITE, DEFAULT_RULES.with_enabled(R1=False)) == (True, "R2")


def test_disable_r1_from_file():
    text = format_rules(DEFAULT_RULES).replace("R1\tsignal-prefix\ttrue", "R1\tsignal-prefix\tfalse")
    assert detect_citation(ST_CYR_CITE, parse_rules(text.splitlines())) == (True, "R2")


def test_rule_order_decides():
    swapped = CitationRuleSet((DEFAULT_RULES.rules[1], DEFAULT_RULES.rules[0], *DEFAULT_RULES.rules[2:]))
    assert detect_citation(ST_CYR_CITE, swapped) == (True, "R2")


all_off = DEFAULT_RULES.with_enabled(R1=False, R2=False, R3=False, R4=False)


@given(st.text(max_size=80))
def test_all_disabled_never_fires(text):
    assert detect_citation(text, all_off) == (False, None)


def test_all_disabled_fixture():
    assert not any(detect_citation(s, all_off)[0] for _, s in fixture_rows())


def test_default_when_absent():
    assert load_rules() is DEFAULT_RULES
    assert [r.id for r in DEFAULT_RULES] == ["R1", "R2", "R3", "R4"]


def test_bundled_file_matches_defaults():
    assert load_rules(bundled_dir() / "citation_rules.tsv") == DEFAULT_RULES


def test_format_round_trip():
    assert parse_rules(format_rules(DEFAULT_RULES).splitlines()) == DEFAULT_RULES


def test_duplicate_id():
    lines = format_rules(DEFAULT_RULES).splitlines() + ["R2\treporter-cite\ttrue\t_"]
    with pytest.raises(RuleError) as err:
        parse_rules(lines, source="rules.tsv")
    assert err.value.line == 6 and "R2" in str(err.value)


def test_unknown_class():
    with pytest.raises(RuleError):
        parse_rules(["R1\tparallel-cite\ttrue\t_"])


@pytest.mark.parametrize("params", ["signals", "colour=red", "signals="])
def test_malformed_params(params):
    with pytest.raises(RuleError):
        parse_rules([f"R1\tsignal-prefix\ttrue\t{params}"] + format_rules(DEFAULT_RULES).splitlines()[2:])


def test_missing_class():
    with pytest.raises(RuleError):
        CitationRuleSet(DEFAULT_RULES.rules[:3])


def test_bad_enabled_flag():
    with pytest.raises(RuleError):
        parse_rules(["R1\tsignal-prefix\tmaybe\t_"])


def test_custom_signal():
    rule = CitationRule("S", "signal-prefix", params={"signals": ("Compare",)})
    assert rule.matches("Compare Hill v. Lockhart, 474 U. S. 52.")
    assert not rule.matches(ST_CYR_CITE)


def test_missing_file(tmp_path):
    with pytest.raises(RuleError):
        load_rules(tmp_path / "absent.tsv")
