"""Tokenizer and recursive-descent parser for the query grammar.

    SELECT (* | col (, col)*) FROM rel (alias)?
        (JOIN rel (alias)? ON col = col)*
        (WHERE pred (AND pred)*)? (LIMIT n)?

    pred := col op literal
          | col CONTAINS 'text'
          | DATE_NEAR(col, col, n)
          | DATE_WITHIN(col, 'date', 'date')

Keywords are case-insensitive; identifiers are ``[A-Za-z_][A-Za-z0-9_]*``;
strings are single-quoted with ``''`` escaping a quote.  Error offsets are
byte offsets into the query text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import ParseError
from ..model import UncertainDate, nfc, parse_uncertain_date

KEYWORDS = {"select", "from", "join", "on", "where", "and", "limit", "contains"}
FUNCTIONS = {"date_near", "date_within"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | string | symbol | end
    text: str
    offset: int  # char offset into the query text


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<int>\d+)
  | (?P<string>'(?:[^']|'')*')
  | (?P<symbol><=|>=|!=|[*,.()=<>-])
    """,
    re.VERBOSE,
)


def _byte(text: str, char_offset: int) -> int:
    return len(text[:char_offset].encode("utf-8"))


def tokenize_query(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos] == "'":
                raise ParseError("unterminated string", offset=_byte(text, pos))
            raise ParseError(
                f"unexpected character {text[pos]!r}", offset=_byte(text, pos)
            )
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(Token("end", "", pos))
    return tokens


@dataclass(frozen=True)
class ColumnRef:
    qualifier: str | None
    name: str
    offset: int

    def text(self) -> str:
        return f"{self.qualifier}.{self.name}" if self.qualifier else self.name


@dataclass(frozen=True)
class RelationTerm:
    name: str  # "view_or_table" or "source.table"
    alias: str | None
    offset: int

    def display(self) -> str:
        return self.alias or self.name.split(".")[-1]


@dataclass(frozen=True)
class JoinSpec:
    relation: RelationTerm
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class CompareAst:
    column: ColumnRef
    op: str
    literal: int | str
    literal_is_string: bool
    offset: int


@dataclass(frozen=True)
class ContainsAst:
    column: ColumnRef
    needle: str
    offset: int


@dataclass(frozen=True)
class DateNearAst:
    column_a: ColumnRef
    column_b: ColumnRef
    k_years: int
    offset: int


@dataclass(frozen=True)
class DateWithinAst:
    column: ColumnRef
    lo: UncertainDate
    hi: UncertainDate
    offset: int


PredicateAst = CompareAst | ContainsAst | DateNearAst | DateWithinAst


@dataclass(frozen=True)
class QueryAst:
    select: tuple[ColumnRef, ...] | None  # None = SELECT *
    relation: RelationTerm
    joins: tuple[JoinSpec, ...]
    where: tuple[PredicateAst, ...]
    limit: int | None
    text: str = field(compare=False, default="")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize_query(text)
        self.i = 0

    # -- token helpers ----------------------------------------------------
    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, offset=_byte(self.text, tok.offset))

    def at_keyword(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text.lower() == word

    def expect_keyword(self, word: str):
        if not self.at_keyword(word):
            self.fail(f"expected {word.upper()}")
        self.next()

    def expect_symbol(self, sym: str):
        t = self.peek()
        if t.kind != "symbol" or t.text != sym:
            self.fail(f"expected {sym!r}")
        self.next()

    def ident(self, what: str) -> Token:
        t = self.peek()
        if t.kind != "ident" or t.text.lower() in KEYWORDS or t.text.lower() in FUNCTIONS:
            self.fail(f"expected {what}")
        return self.next()

    def string(self, what: str) -> str:
        t = self.peek()
        if t.kind != "string":
            self.fail(f"expected {what}")
        self.next()
        return nfc(t.text[1:-1].replace("''", "'"))

    def integer(self, what: str) -> int:
        neg = False
        t = self.peek()
        if t.kind == "symbol" and t.text == "-":
            self.next()
            neg = True
            t = self.peek()
        if t.kind != "int":
            self.fail(f"expected {what}")
        self.next()
        return -int(t.text) if neg else int(t.text)

    # -- grammar ----------------------------------------------------------
    def column(self) -> ColumnRef:
        first = self.ident("a column name")
        if self.peek().kind == "symbol" and self.peek().text == ".":
            self.next()
            second = self.ident("a column name after '.'")
            return ColumnRef(first.text, second.text, first.offset)
        return ColumnRef(None, first.text, first.offset)

    def relation(self) -> RelationTerm:
        first = self.ident("a relation name")
        name = first.text
        if self.peek().kind == "symbol" and self.peek().text == ".":
            self.next()
            second = self.ident("a table name after '.'")
            name = f"{first.text}.{second.text}"
        alias = None
        t = self.peek()
        if t.kind == "ident" and t.text.lower() not in KEYWORDS and t.text.lower() not in FUNCTIONS:
            alias = self.next().text
        return RelationTerm(name, alias, first.offset)

    def predicate(self) -> PredicateAst:
        t = self.peek()
        if t.kind == "ident" and t.text.lower() in FUNCTIONS:
            return self.function_predicate()
        if t.kind == "ident" and self.tokens[self.i + 1].kind == "symbol" \
                and self.tokens[self.i + 1].text == "(":
            self.fail(f"unknown function {t.text!r}", t)
        col = self.column()
        if self.at_keyword("contains"):
            self.next()
            needle = self.string("a quoted string after CONTAINS")
            return ContainsAst(col, needle, col.offset)
        op_tok = self.peek()
        if op_tok.kind != "symbol" or op_tok.text not in ("=", "!=", "<", ">", "<=", ">="):
            self.fail("expected a comparison operator or CONTAINS")
        self.next()
        lit_tok = self.peek()
        if lit_tok.kind == "string":
            literal: int | str = self.string("a literal")
            is_string = True
        else:
            literal = self.integer("a literal")
            is_string = False
        return CompareAst(col, op_tok.text, literal, is_string, col.offset)

    def function_predicate(self) -> PredicateAst:
        fn = self.next()
        name = fn.text.lower()
        self.expect_symbol("(")
        if name == "date_near":
            a = self.column()
            self.expect_symbol(",")
            b = self.column()
            self.expect_symbol(",")
            k_tok = self.peek()
            k = self.integer("a year count")
            if k < 0:
                self.fail("DATE_NEAR year count must be >= 0", k_tok)
            self.expect_symbol(")")
            return DateNearAst(a, b, k, fn.offset)
        col = self.column()
        self.expect_symbol(",")
        lo_tok = self.peek()
        lo = self._date_literal(self.string("a quoted date"), lo_tok)
        self.expect_symbol(",")
        hi_tok = self.peek()
        hi = self._date_literal(self.string("a quoted date"), hi_tok)
        if lo.earliest_day > hi.latest_day:
            self.fail("empty DATE_WITHIN range", lo_tok)
        self.expect_symbol(")")
        return DateWithinAst(col, lo, hi, fn.offset)

    def _date_literal(self, text: str, tok: Token) -> UncertainDate:
        try:
            return parse_uncertain_date(text)
        except ParseError as e:
            raise ParseError(
                f"bad date literal {text!r}: {e}", offset=_byte(self.text, tok.offset)
            ) from e

    def query(self) -> QueryAst:
        self.expect_keyword("select")
        select: tuple[ColumnRef, ...] | None
        if self.peek().kind == "symbol" and self.peek().text == "*":
            self.next()
            select = None
        else:
            cols = [self.column()]
            while self.peek().kind == "symbol" and self.peek().text == ",":
                self.next()
                cols.append(self.column())
            select = tuple(cols)
        self.expect_keyword("from")
        relation = self.relation()
        joins = []
        while self.at_keyword("join"):
            self.next()
            rel = self.relation()
            self.expect_keyword("on")
            left = self.column()
            self.expect_symbol("=")
            right = self.column()
            joins.append(JoinSpec(rel, left, right))
        where = []
        if self.at_keyword("where"):
            self.next()
            where.append(self.predicate())
            while self.at_keyword("and"):
                self.next()
                where.append(self.predicate())
        limit = None
        if self.at_keyword("limit"):
            tok = self.peek()
            self.next()
            limit = self.integer("a row count after LIMIT")
            if limit < 1:
                self.fail("LIMIT must be positive", tok)
        if self.peek().kind != "end":
            self.fail(f"unexpected trailing input {self.peek().text!r}")
        return QueryAst(select, relation, tuple(joins), tuple(where), limit, self.text)


def parse_query(text: str) -> QueryAst:
    """Parse a query; raises ParseError with a byte offset on bad syntax."""
    return _Parser(text).query()
