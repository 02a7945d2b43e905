"""Filter DSL over segment records: parser, printer, evaluator, select.

Grammar (keywords case-insensitive, strings single-quoted, numbers
decimal with optional sign):

    expr     := or_expr
    or_expr  := and_expr ("or" and_expr)*
    and_expr := unary ("and" unary)*
    unary    := "not" unary | "(" expr ")" | atom
    atom     := field cmp literal
              | field "contains" string
              | "has" "(" field ")"
              | "has_event" "(" string ["," number] ")"
    cmp      := "<" | "<=" | ">" | ">=" | "==" | "!="

Absent-field semantics are two-valued: any comparison (or contains /
has_event) over an absent field evaluates false, so its negation is
true; ``has(field)`` is the explicit presence test.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as _dc_replace
from typing import Any, Iterator

from .manifest import (
    ENUM_DOMAINS,
    FIELD_KINDS,
    Manifest,
    SegmentRecord,
    manifest_sha256,
)


class QueryError(ValueError):
    """Syntax or type error in a filter expression."""

    def __init__(self, message: str, offset: int | None = None, expected: list[str] | None = None):
        self.offset = offset
        self.expected = expected
        detail = message
        if offset is not None:
            detail = f"at byte offset {offset}: {detail}"
        if expected:
            detail = f"{detail} (expected one of: {', '.join(expected)})"
        super().__init__(detail)


# ---------------------------------------------------------------------------
# AST


class FilterExpr:
    """Base class for filter AST nodes."""

    precedence = 4

    def to_text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()

    def _child_text(self, child: "FilterExpr", tight: bool = False) -> str:
        needs = (
            child.precedence < self.precedence
            or (tight and child.precedence == self.precedence)
        )
        return f"({child.to_text()})" if needs else child.to_text()


def _literal_text(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return "'" + str(value) + "'"


@dataclass(frozen=True)
class Comparison(FilterExpr):
    field: str
    op: str
    value: Any

    def to_text(self) -> str:
        return f"{self.field} {self.op} {_literal_text(self.value)}"


@dataclass(frozen=True)
class ContainsText(FilterExpr):
    field: str
    needle: str

    def to_text(self) -> str:
        return f"{self.field} contains '{self.needle}'"


@dataclass(frozen=True)
class HasField(FilterExpr):
    field: str

    def to_text(self) -> str:
        return f"has({self.field})"


@dataclass(frozen=True)
class HasEvent(FilterExpr):
    label: str
    min_score: float | None = None

    def to_text(self) -> str:
        if self.min_score is None:
            return f"has_event('{self.label}')"
        return f"has_event('{self.label}', {self.min_score!r})"


@dataclass(frozen=True)
class Not(FilterExpr):
    operand: FilterExpr

    precedence = 3

    def to_text(self) -> str:
        return f"not {self._child_text(self.operand)}"


@dataclass(frozen=True)
class And(FilterExpr):
    left: FilterExpr
    right: FilterExpr

    precedence = 2

    def to_text(self) -> str:
        return f"{self._child_text(self.left)} and {self._child_text(self.right, tight=True)}"


@dataclass(frozen=True)
class Or(FilterExpr):
    left: FilterExpr
    right: FilterExpr

    precedence = 1

    def to_text(self) -> str:
        return f"{self._child_text(self.left)} or {self._child_text(self.right, tight=True)}"


# ---------------------------------------------------------------------------
# lexer

_KEYWORDS = frozenset({"and", "or", "not", "has", "has_event", "contains", "true", "false"})
_OPERATORS = ("<=", ">=", "==", "!=", "<", ">")


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | keyword | number | string | op | lparen | rparen | comma | end
    text: str
    offset: int  # byte offset in the UTF-8 encoding of the query


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def _tokenize(text: str) -> Iterator[_Token]:
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        off = _byte_offset(text, pos)
        if ch == "(":
            yield _Token("lparen", "(", off)
            pos += 1
        elif ch == ")":
            yield _Token("rparen", ")", off)
            pos += 1
        elif ch == ",":
            yield _Token("comma", ",", off)
            pos += 1
        elif ch == "'":
            end = text.find("'", pos + 1)
            if end < 0:
                raise QueryError("unterminated string literal", off)
            yield _Token("string", text[pos + 1 : end], off)
            pos = end + 1
        elif text.startswith(_OPERATORS, pos):
            for op in _OPERATORS:
                if text.startswith(op, pos):
                    yield _Token("op", op, off)
                    pos += len(op)
                    break
        elif ch.isdigit() or (
            ch in "+-" and pos + 1 < n and (text[pos + 1].isdigit() or text[pos + 1] == ".")
        ) or (ch == "." and pos + 1 < n and text[pos + 1].isdigit()):
            end = pos + 1
            while end < n and (text[end].isdigit() or text[end] in ".eE" or
                               (text[end] in "+-" and text[end - 1] in "eE")):
                end += 1
            lexeme = text[pos:end]
            try:
                float(lexeme)
            except ValueError:
                raise QueryError(f"invalid number {lexeme!r}", off) from None
            yield _Token("number", lexeme, off)
            pos = end
        elif ch.isalpha() or ch == "_":
            end = pos + 1
            while end < n and (text[end].isalnum() or text[end] == "_"):
                end += 1
            word = text[pos:end]
            kind = "keyword" if word.lower() in _KEYWORDS else "ident"
            yield _Token(kind, word.lower() if kind == "keyword" else word, off)
            pos = end
        else:
            raise QueryError(f"unexpected character {ch!r}", off)
    yield _Token("end", "", _byte_offset(text, n))


# ---------------------------------------------------------------------------
# parser

_FILTERABLE = dict(FIELD_KINDS)
_NUMERIC_OPS = frozenset(_OPERATORS)
_EQUALITY_OPS = frozenset({"==", "!="})


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(_tokenize(text))
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.current
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None, expected: list[str] | None = None) -> _Token:
        tok = self.current
        if tok.kind != kind or (text is not None and tok.text != text):
            shown = expected or [text or kind]
            found = tok.text or "end of input"
            raise QueryError(f"found {found!r}", tok.offset, shown)
        return self.advance()

    def parse(self) -> FilterExpr:
        expr = self.parse_or()
        if self.current.kind != "end":
            raise QueryError(
                f"found {self.current.text!r}", self.current.offset, ["and", "or", "end of input"]
            )
        return expr

    def parse_or(self) -> FilterExpr:
        expr = self.parse_and()
        while self.current.kind == "keyword" and self.current.text == "or":
            self.advance()
            expr = Or(expr, self.parse_and())
        return expr

    def parse_and(self) -> FilterExpr:
        expr = self.parse_unary()
        while self.current.kind == "keyword" and self.current.text == "and":
            self.advance()
            expr = And(expr, self.parse_unary())
        return expr

    def parse_unary(self) -> FilterExpr:
        tok = self.current
        if tok.kind == "keyword" and tok.text == "not":
            self.advance()
            return Not(self.parse_unary())
        if tok.kind == "lparen":
            self.advance()
            expr = self.parse_or()
            self.expect("rparen", expected=[")"])
            return expr
        return self.parse_atom()

    def parse_atom(self) -> FilterExpr:
        tok = self.current
        if tok.kind == "keyword" and tok.text == "has":
            self.advance()
            self.expect("lparen", expected=["("])
            field_tok = self.current
            if field_tok.kind != "ident":
                raise QueryError(f"found {field_tok.text!r}", field_tok.offset, ["field name"])
            self.advance()
            self._check_field(field_tok)
            self.expect("rparen", expected=[")"])
            return HasField(field_tok.text)
        if tok.kind == "keyword" and tok.text == "has_event":
            self.advance()
            self.expect("lparen", expected=["("])
            label_tok = self.expect("string", expected=["quoted event label"])
            min_score: float | None = None
            if self.current.kind == "comma":
                self.advance()
                score_tok = self.expect("number", expected=["score threshold"])
                min_score = float(score_tok.text)
            self.expect("rparen", expected=[")"])
            return HasEvent(label_tok.text, min_score)
        if tok.kind == "ident":
            field_tok = self.advance()
            kind = self._check_field(field_tok)
            nxt = self.current
            if nxt.kind == "keyword" and nxt.text == "contains":
                self.advance()
                if kind != "string":
                    raise QueryError(
                        f"'contains' requires a text field, but {field_tok.text!r} is {kind}",
                        field_tok.offset,
                    )
                needle = self.expect("string", expected=["quoted text"])
                return ContainsText(field_tok.text, needle.text)
            if nxt.kind != "op":
                raise QueryError(
                    f"found {nxt.text or 'end of input'!r}",
                    nxt.offset,
                    list(_OPERATORS) + ["contains"],
                )
            op_tok = self.advance()
            return self._comparison(field_tok, kind, op_tok)
        raise QueryError(
            f"found {tok.text or 'end of input'!r}",
            tok.offset,
            ["field name", "has", "has_event", "not", "("],
        )

    def _check_field(self, tok: _Token) -> str:
        kind = _FILTERABLE.get(tok.text)
        if kind is None:
            raise QueryError(f"unknown field {tok.text!r}", tok.offset)
        return kind

    def _comparison(self, field_tok: _Token, kind: str, op_tok: _Token) -> Comparison:
        op = op_tok.text
        lit = self.current
        if kind == "number":
            value_tok = self.expect("number", expected=["numeric literal"])
            return Comparison(field_tok.text, op, float(value_tok.text))
        if kind == "bool":
            if op not in _EQUALITY_OPS:
                raise QueryError(
                    f"operator {op!r} not valid for boolean field {field_tok.text!r}",
                    op_tok.offset, ["==", "!="],
                )
            if lit.kind == "keyword" and lit.text in ("true", "false"):
                self.advance()
                return Comparison(field_tok.text, op, lit.text == "true")
            raise QueryError(f"found {lit.text!r}", lit.offset, ["true", "false"])
        if kind == "string" or kind.startswith("enum:"):
            if op not in _EQUALITY_OPS:
                raise QueryError(
                    f"operator {op!r} not valid for text field {field_tok.text!r} "
                    "(strings support == and != only)",
                    op_tok.offset, ["==", "!="],
                )
            value_tok = self.expect("string", expected=["quoted string"])
            domain = ENUM_DOMAINS.get(kind)
            if domain is not None and value_tok.text not in domain:
                raise QueryError(
                    f"invalid value {value_tok.text!r} for {field_tok.text}; "
                    f"one of {', '.join(domain)}",
                    value_tok.offset,
                )
            return Comparison(field_tok.text, op, value_tok.text)
        raise QueryError(
            f"field {field_tok.text!r} ({kind}) cannot be compared; use has_event for sound events",
            field_tok.offset,
        )


def parse_filter(text: str) -> FilterExpr:
    """Parse and type-check a filter expression against the record schema."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# evaluation


def _compare(op: str, left: Any, right: Any) -> bool:
    if op == "==":
        return left == right
    if op == "!=":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    return left >= right


def evaluate(expr: FilterExpr, record: SegmentRecord) -> bool:
    """Evaluate a type-checked expression; absent fields compare false."""
    if isinstance(expr, Comparison):
        value = getattr(record, expr.field)
        if value is None:
            return False
        return _compare(expr.op, value, expr.value)
    if isinstance(expr, ContainsText):
        value = getattr(record, expr.field)
        return value is not None and expr.needle in value
    if isinstance(expr, HasField):
        return getattr(record, expr.field) is not None
    if isinstance(expr, HasEvent):
        events = record.sound_events
        if events is None:
            return False
        return any(
            label == expr.label and (expr.min_score is None or score >= expr.min_score)
            for label, score in events
        )
    if isinstance(expr, Not):
        return not evaluate(expr.operand, record)
    if isinstance(expr, And):
        return evaluate(expr.left, record) and evaluate(expr.right, record)
    if isinstance(expr, Or):
        return evaluate(expr.left, record) or evaluate(expr.right, record)
    raise TypeError(f"not a filter expression: {expr!r}")


def select(manifest: Manifest, expr: FilterExpr) -> Manifest:
    """Subset manifest preserving record order and all sources.

    The result's run_metadata extends the parent's with the filter text
    and the parent manifest's content hash.
    """
    metadata = dict(manifest.run_metadata)
    metadata["filter_query"] = expr.to_text()
    metadata["parent_manifest_sha256"] = manifest_sha256(manifest)
    return Manifest(
        schema_version=manifest.schema_version,
        sources=[_dc_replace(s) for s in manifest.sources],
        records=[r.copy() for r in manifest.records if evaluate(expr, r)],
        run_metadata=metadata,
        extras=dict(manifest.extras),
    )
