"""Boolean keyword rules: parser, pretty-printer, matcher and taxonomy files.

Grammar::

    expr    := orExpr
    orExpr  := andExpr { ("||" | "OR") andExpr }
    andExpr := term { "&&" term }
    term    := "(" expr ")" | phrase

A phrase is a run of consecutive words.  Matching works on tokens: the
text is lowercased and split on every character that is not a letter, a
digit, ``#`` or ``-``; a phrase matches when its tokens occur contiguously.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Union

from .errors import FormatError, RuleSyntaxError
from .model import GeoPost

_TOKEN_RE = re.compile(r"(?:[^\W_]|[#\-])+")
_SEP = "\x00"

DEFAULT_TAXONOMY_NAMES = ("haze-general", "haze-hashtag", "haze-impact", "haze-health")


def tokenize(text: str) -> list:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Phrase:
    tokens: tuple

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("empty phrase")


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("AND needs at least two children")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("OR needs at least two children")


RuleExpr = Union[Phrase, And, Or]


# -- parsing -----------------------------------------------------------------

_LEX_RE = re.compile(r"\s*(?:(\()|(\))|(&&)|(\|\|)|([^\s()&|]+)|(\S))")


def _lex(source: str):
    pos = 0
    out = []
    while True:
        m = _LEX_RE.match(source, pos)
        if m is None or m.end() == pos:
            break
        start = m.start(m.lastindex)
        kind = m.lastindex
        text = m.group(kind)
        if kind == 6:
            raise RuleSyntaxError(f"unexpected character {text!r}", source, start)
        if kind == 5 and text == "OR":
            out.append(("||", text, start))
        else:
            out.append(({1: "(", 2: ")", 3: "&&", 4: "||", 5: "word"}[kind], text, start))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _lex(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def pos(self):
        return self.tokens[self.i][2] if self.i < len(self.tokens) else len(self.source)

    def fail(self, message):
        raise RuleSyntaxError(message, self.source, self.pos())

    def parse(self) -> RuleExpr:
        if not self.tokens:
            self.fail("empty rule")
        node = self.or_expr()
        if self.peek() is not None:
            if self.peek() == ")":
                self.fail("unbalanced ')'")
            self.fail(f"unexpected {self.tokens[self.i][1]!r}")
        return node

    def or_expr(self):
        children = [self.and_expr()]
        while self.peek() == "||":
            self.i += 1
            children.append(self.and_expr())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def and_expr(self):
        children = [self.term()]
        while self.peek() == "&&":
            self.i += 1
            children.append(self.term())
        return children[0] if len(children) == 1 else And(tuple(children))

    def term(self):
        kind = self.peek()
        if kind == "(":
            self.i += 1
            node = self.or_expr()
            if self.peek() != ")":
                self.fail("missing ')'")
            self.i += 1
            return node
        if kind == "word":
            start = self.pos()
            words = []
            while self.peek() == "word":
                words.append(self.tokens[self.i][1])
                self.i += 1
            toks = tuple(tokenize(" ".join(words)))
            if not toks:
                raise RuleSyntaxError("empty phrase", self.source, start)
            return Phrase(toks)
        if kind is None:
            self.fail("dangling operator" if self.i else "empty rule")
        if kind == ")":
            self.fail("empty phrase" if self.i and self.tokens[self.i - 1][0] == "(" else "unbalanced ')'")
        self.fail(f"dangling operator {self.tokens[self.i][1]!r}")


def parse_rule(source: str) -> RuleExpr:
    """Parse one boolean rule; raises :class:`RuleSyntaxError` with a position."""
    return _Parser(source).parse()


def pretty(rule: RuleExpr) -> str:
    """Canonical text form; ``parse_rule(pretty(r)) == r``."""
    if isinstance(rule, Phrase):
        return " ".join(rule.tokens)

    def wrap(child):
        return pretty(child) if isinstance(child, Phrase) else f"({pretty(child)})"

    op = " && " if isinstance(rule, And) else " || "
    return op.join(wrap(c) for c in rule.children)


def phrases(rule: RuleExpr) -> list:
    """Phrase leaves, left to right, duplicates kept."""
    if isinstance(rule, Phrase):
        return [rule]
    out = []
    for child in rule.children:
        out.extend(phrases(child))
    return out


def conjunct_count(rule: RuleExpr) -> int:
    """Number of AND-terms when the rule is expanded to disjunctive normal form."""
    if isinstance(rule, Phrase):
        return 1
    counts = [conjunct_count(c) for c in rule.children]
    if isinstance(rule, Or):
        return sum(counts)
    total = 1
    for c in counts:
        total *= c
    return total


# -- matching ----------------------------------------------------------------


class TokenizedText:
    __slots__ = ("tokens", "token_set", "joined")

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.token_set = frozenset(self.tokens)
        self.joined = _SEP + _SEP.join(self.tokens) + _SEP

    def has_phrase(self, toks: tuple) -> bool:
        if len(toks) == 1:
            return toks[0] in self.token_set
        if toks[0] not in self.token_set:
            return False
        return (_SEP + _SEP.join(toks) + _SEP) in self.joined


def _eval(rule: RuleExpr, tt: TokenizedText) -> bool:
    if isinstance(rule, Phrase):
        return tt.has_phrase(rule.tokens)
    if isinstance(rule, And):
        return all(_eval(c, tt) for c in rule.children)
    return any(_eval(c, tt) for c in rule.children)


def matches(rule: RuleExpr, text: Union[str, TokenizedText]) -> bool:
    tt = text if isinstance(text, TokenizedText) else TokenizedText(text)
    return _eval(rule, tt)


@dataclass(frozen=True)
class Taxonomy:
    name: str
    rules: tuple

    @property
    def keyword_count(self) -> int:
        """Distinct phrase leaves across all rules."""
        return len({p.tokens for r in self.rules for p in phrases(r)})

    @property
    def conjunct_count(self) -> int:
        return sum(conjunct_count(r) for r in self.rules)

    @cached_property
    def _anchors(self) -> frozenset:
        # a rule can only hold if some phrase's first token is present
        return frozenset(p.tokens[0] for r in self.rules for p in phrases(r))

    def matches(self, text: Union[str, TokenizedText]) -> bool:
        tt = text if isinstance(text, TokenizedText) else TokenizedText(text)
        if self._anchors.isdisjoint(tt.token_set):
            return False
        return any(_eval(r, tt) for r in self.rules)


def classify(post: Union[GeoPost, str], taxonomies: Iterable[Taxonomy]) -> frozenset:
    """Names of every taxonomy whose rules match; topics may overlap."""
    text = post.text if isinstance(post, GeoPost) else post
    tt = TokenizedText(text)
    return frozenset(t.name for t in taxonomies if t.matches(tt))


# -- taxonomy files ----------------------------------------------------------

_HEADER_RE = re.compile(r"^\[([^\[\]]+)\]$")


def _is_comment(line: str) -> bool:
    return line == "#" or line.startswith("# ") or line.startswith("#\t")


def parse_taxonomies(text: str, path=None) -> list:
    """Parse the sectioned rule format; ``#`` starts a comment only before a space."""
    sections: dict = {}
    order = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or _is_comment(line):
            continue
        m = _HEADER_RE.match(line)
        if m:
            current = m.group(1).strip()
            if current in sections:
                raise FormatError(f"duplicate section [{current}]", path=path, line=lineno)
            sections[current] = []
            order.append(current)
            continue
        if current is None:
            raise FormatError("rule outside of any [topic] section", path=path, line=lineno)
        try:
            sections[current].append(parse_rule(line))
        except RuleSyntaxError as e:
            raise FormatError(str(e), path=path, line=lineno) from e
    return [Taxonomy(name, tuple(sections[name])) for name in order]


def load_taxonomies(path=None) -> list:
    """Load a taxonomy file; with no path, the bundled haze taxonomies."""
    if path is None:
        text = resources.files("hazewatch").joinpath("data/taxonomies.txt").read_text("utf-8")
        return parse_taxonomies(text, path="<bundled taxonomies.txt>")
    path = Path(path)
    return parse_taxonomies(path.read_text("utf-8"), path=path)


def load_meta_keywords(path=None) -> list:
    if path is None:
        text = resources.files("hazewatch").joinpath("data/meta_keywords.txt").read_text("utf-8")
        return parse_taxonomies(text, path="<bundled meta_keywords.txt>")
    path = Path(path)
    return parse_taxonomies(path.read_text("utf-8"), path=path)
