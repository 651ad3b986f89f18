"""Rule grammar for explicit citation sentences.

A sentence matched by any enabled rule is labelled Citation without consulting
the classifier.  Rules are tried in order and the first match wins.

Rule file format, one rule per line::

    id<TAB>pattern_class<TAB>enabled<TAB>parameters

``pattern_class`` is one of ``signal-prefix``, ``reporter-cite``,
``case-name`` or ``short-cite``; ``enabled`` is ``true``/``false``;
``parameters`` is ``_`` for the class defaults or ``key=v1|v2;key=...``.

=============== ============ ==============================================
class           key          meaning (default)
=============== ============ ==============================================
signal-prefix   signals      opening signals (See|See also|Cf.|E.g.,|Accord)
reporter-cite   reporters    reporter abbreviations (U. S.|U.S.|S. Ct.|F.2d|F.3d)
case-name       requires     what must accompany the case name
                             (reporter|year)
short-cite      forms        whole-sentence short forms (Id.|Ibid.)
=============== ============ ==============================================

Every rule file must contain at least one rule of each class.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from courtrel.errors import RuleError

PATTERN_CLASSES = ("signal-prefix", "reporter-cite", "case-name", "short-cite")

DEFAULT_PARAMS: dict[str, dict[str, tuple[str, ...]]] = {
    "signal-prefix": {"signals": ("See", "See also", "Cf.", "E.g.,", "Accord")},
    "reporter-cite": {"reporters": ("U. S.", "U.S.", "S. Ct.", "F.2d", "F.3d")},
    "case-name": {"requires": ("reporter", "year")},
    "short-cite": {"forms": ("Id.", "Ibid.")},
}

_NAME_WORD = r"[A-Z][\w.'’&-]*"
_NAME = rf"{_NAME_WORD}(?:,?\s+(?:{_NAME_WORD}|of|the|and|for|ex\s+rel\.|&))*"
CASE_NAME = re.compile(rf"(?<![\w.]){_NAME}\s+v\.\s+{_NAME_WORD}")
YEAR_PARENTHETICAL = re.compile(r"\((?:[^()]*?\s)?\d{4}\s*\)")
_PAGES = r"\d{1,5}(?:\s*[-–]\s*\d{1,5})?"


def reporter_regex(reporters: Iterable[str]) -> re.Pattern:
    alts = "|".join(re.escape(r).replace(r"\ ", r"\s*") for r in sorted(reporters, key=len, reverse=True))
    return re.compile(
        rf"(?<!\d)\d{{1,4}}\s+(?:{alts})\s+{_PAGES}(?:\s*,\s*{_PAGES})*(?:\s*{YEAR_PARENTHETICAL.pattern})?"
    )


@dataclass(frozen=True)
class CitationRule:
    id: str
    pattern_class: str
    enabled: bool = True
    params: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if self.pattern_class not in PATTERN_CLASSES:
            raise RuleError(f"rule {self.id!r}: unknown pattern class {self.pattern_class!r}")
        merged = dict(DEFAULT_PARAMS[self.pattern_class])
        for key, values in self.params.items():
            if key not in merged:
                raise RuleError(f"rule {self.id!r}: unknown parameter {key!r} for {self.pattern_class}")
            if not values or any(not v for v in values):
                raise RuleError(f"rule {self.id!r}: parameter {key!r} needs non-empty values")
            merged[key] = tuple(values)
        if self.pattern_class == "case-name" and not set(merged["requires"]) <= {"reporter", "year"}:
            raise RuleError(f"rule {self.id!r}: requires must be drawn from reporter|year")
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "_reporter", reporter_regex(DEFAULT_PARAMS["reporter-cite"]["reporters"]
                                                              if self.pattern_class != "reporter-cite"
                                                              else merged["reporters"]))

    def matches(self, sentence: str) -> bool:
        text = " ".join(sentence.split())
        kind = self.pattern_class
        if kind == "signal-prefix":
            for signal in sorted(self.params["signals"], key=len, reverse=True):
                if text.startswith(signal) and (len(text) == len(signal) or not text[len(signal)].isalnum()):
                    rest = text[len(signal):]
                    return bool(CASE_NAME.search(rest) or self._reporter.search(rest))
            return False
        if kind == "reporter-cite":
            return bool(self._reporter.search(text))
        if kind == "case-name":
            if not CASE_NAME.search(text):
                return False
            needs = self.params["requires"]
            return ("reporter" in needs and bool(self._reporter.search(text))) or (
                "year" in needs and bool(YEAR_PARENTHETICAL.search(text)))
        # short-cite
        forms = self.params["forms"]
        if text in forms:
            return True
        return bool(re.match(r"Id\.,?\s+at\s+\d", text))


@dataclass(frozen=True)
class CitationRuleSet:
    rules: tuple[CitationRule, ...]

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        ids = [r.id for r in self.rules]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise RuleError(f"duplicate rule id {dupes[0]!r}")
        missing = [c for c in PATTERN_CLASSES if c not in {r.pattern_class for r in self.rules}]
        if missing:
            raise RuleError(f"rule set lacks pattern class {missing[0]!r}")

    def __iter__(self):
        return iter(self.rules)

    def with_enabled(self, **flags: bool) -> "CitationRuleSet":
        """Copy with rules switched on or off by id, e.g. ``with_enabled(R1=False)``."""
        return CitationRuleSet(tuple(
            CitationRule(r.id, r.pattern_class, flags.get(r.id, r.enabled), r.params, r.description)
            for r in self.rules))


DEFAULT_RULES = CitationRuleSet((
    CitationRule("R1", "signal-prefix", description="introductory signal followed by a case name or reporter cite"),
    CitationRule("R2", "reporter-cite", description="volume, reporter and page, e.g. 533 U. S. 289"),
    CitationRule("R3", "case-name", description="'A v. B' with a reporter cite or year parenthetical"),
    CitationRule("R4", "short-cite", description="Id. / Ibid. short forms"),
))


def _parse_params(text: str, lineno: int, source: str | None) -> dict[str, tuple[str, ...]]:
    text = text.strip()
    if text in ("", "_", "-"):
        return {}
    params = {}
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        if "=" not in chunk:
            raise RuleError(f"malformed parameter {chunk.strip()!r} (expected key=value)", line=lineno, source=source)
        key, value = chunk.split("=", 1)
        params[key.strip()] = tuple(v.strip() for v in value.split("|"))
    return params


_BOOL = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}


def parse_rules(lines: Iterable[str], source: str | None = None) -> CitationRuleSet:
    rules = []
    seen = set()
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 3 or len(parts) > 5:
            raise RuleError("expected id<TAB>pattern_class<TAB>enabled<TAB>parameters", line=lineno, source=source)
        rid, kind, enabled = (p.strip() for p in parts[:3])
        if rid in seen:
            raise RuleError(f"duplicate rule id {rid!r}", line=lineno, source=source)
        seen.add(rid)
        if enabled.lower() not in _BOOL:
            raise RuleError(f"enabled flag must be true or false, not {enabled!r}", line=lineno, source=source)
        params = _parse_params(parts[3] if len(parts) > 3 else "", lineno, source)
        try:
            rules.append(CitationRule(rid, kind, _BOOL[enabled.lower()], params,
                                      parts[4].strip() if len(parts) > 4 else ""))
        except RuleError as exc:
            raise RuleError(exc.message, line=lineno, source=source) from None
    try:
        return CitationRuleSet(tuple(rules))
    except RuleError as exc:
        raise RuleError(exc.message, source=source) from None


def load_rules(source: str | os.PathLike | Iterable[str] | None = None) -> CitationRuleSet:
    """Rule set from a file path or iterable of lines; the built-in rules when ``source`` is None."""
    if source is None:
        return DEFAULT_RULES
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise RuleError(f"cannot read rule file: {exc}", source=str(path)) from exc
        return parse_rules(text.splitlines(), source=str(path))
    return parse_rules(source)


def format_rules(rules: CitationRuleSet) -> str:
    lines = ["# id\tpattern_class\tenabled\tparameters\tdescription"]
    for r in rules:
        params = ";".join(f"{k}={'|'.join(v)}" for k, v in r.params.items())
        lines.append(f"{r.id}\t{r.pattern_class}\t{'true' if r.enabled else 'false'}\t{params}\t{r.description}")
    return "\n".join(lines) + "\n"


def detect_citation(sentence: str, rules: CitationRuleSet | None = None) -> tuple[bool, str | None]:
    """``(True, rule_id)`` for the first enabled rule matching ``sentence``, else ``(False, None)``."""
    for rule in (rules or DEFAULT_RULES):
        if rule.enabled and rule.matches(sentence):
            return True, rule.id
    return False, None
