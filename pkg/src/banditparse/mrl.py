"""Machine-readable geo query language: tree form, text form, token form.

A query is a small function tree over a closed operator inventory, e.g.

    query(west(area(keyval('name','Paris')),nwr(keyval('railway','station'))),qtype(count))

The tree linearizes into a flat token sequence by pre-order traversal,
with each function token carrying its child count as a suffix and string
leaves marked ``@s``:

    query@2 west@2 area@1 keyval@2 name@0 Paris@s nwr@1 keyval@2 railway@0 station@s qtype@1 count@0

Key-position leaves (the first argument of ``keyval`` and the argument of
``findkey``) linearize as zero-arity tokens (``name@0``); value-position
leaves linearize as ``@s`` tokens. Both are single-quoted strings in the
text form. The token sequence is an exact arity-consistent tree encoding,
so a stack decoder (`delinearize`) inverts it deterministically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence, Union


class MrlError(ValueError):
    """Base class for query language errors."""


class MrlSyntaxError(MrlError):
    """Malformed query text; carries the character position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class UnknownOperatorError(MrlError):
    """Operator name outside the closed inventory."""


class ArityError(MrlError):
    """Child count or child kind not allowed for the operator."""


class DelinearizeError(MrlError):
    """Token sequence is not a valid pre-order tree encoding."""


class TruncatedSequenceError(DelinearizeError):
    """Token sequence ended while children were still expected."""


class ExtraTokensError(DelinearizeError):
    """Tokens remained after the tree was complete."""


@dataclass(frozen=True)
class StringLeaf:
    """A string-valued leaf (OSM key, OSM value, name, or literal)."""

    text: str


@dataclass(frozen=True)
class FuncNode:
    """An operator application; children are FuncNodes or StringLeafs."""

    op: str
    children: tuple = ()


Node = Union[FuncNode, StringLeaf]

# Closed operator inventory.
OPERATORS = frozenset({
    "query", "area", "nwr", "search", "center", "around", "keyval",
    "qtype", "count", "latlong", "findkey", "least", "topx", "maxdist",
    "north", "east", "south", "west", "and", "or",
})

CARDINAL_OPS = frozenset({"north", "east", "south", "west"})

# Child-slot kinds.
KEY = "key"        # string leaf in key position, linearizes as surface@0
VAL = "val"        # string leaf in value position, linearizes as surface@s


def _f(*ops: str) -> frozenset:
    return frozenset(ops)


_TAG_EXPR = _f("keyval", "and", "or")
_QTYPE_ARG = _f("count", "latlong", "findkey", "least")
_CONTENT = _f("nwr", "around") | CARDINAL_OPS

# (operator, child count) -> tuple of slot specs. A slot spec is either
# KEY, VAL, or a frozenset of admissible child operators. Absent entries
# are arity violations.
_SLOTS: dict[tuple[str, int], tuple] = {
    ("query", 1): (_f("qtype"),),
    ("query", 2): (_f("area") | _CONTENT, _f("qtype")),
    ("query", 3): (_f("area"), _f("nwr"), _f("qtype")),
    ("area", 1): (_f("keyval"),),
    ("keyval", 2): (KEY, VAL),
    ("qtype", 1): (_QTYPE_ARG,),
    ("qtype", 2): (_QTYPE_ARG, _QTYPE_ARG),
    ("count", 0): (),
    ("latlong", 0): (),
    ("findkey", 1): (KEY,),
    ("least", 1): (_f("topx"),),
    ("topx", 1): (VAL,),
    ("around", 3): (_f("center"), _f("search"), _f("maxdist")),
    ("around", 4): (_f("center"), _f("search"), _f("maxdist"), _f("topx")),
    ("center", 1): (_f("area", "nwr"),),
    ("center", 2): (_f("area"), _f("nwr")),
    ("search", 1): (_f("nwr"),),
    ("maxdist", 1): (VAL,),
}
for _k in range(1, 4):
    _SLOTS[("nwr", _k)] = (_TAG_EXPR,) * _k
for _k in range(2, 4):
    _SLOTS[("and", _k)] = (_TAG_EXPR,) * _k
    _SLOTS[("or", _k)] = (_TAG_EXPR,) * _k
for _c in CARDINAL_OPS:
    _SLOTS[(_c, 2)] = (_f("area"), _f("nwr"))

# Leaf text: single word, no quotes/parens/spaces, so the token form and
# the quoted text form both stay unambiguous.
_LEAF_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


def slot_spec(op: str, arity: int) -> tuple:
    """Child slot kinds for `op` applied to `arity` children.

    Raises UnknownOperatorError / ArityError when no such form exists.
    """
    if op not in OPERATORS:
        raise UnknownOperatorError(f"unknown operator {op!r}")
    spec = _SLOTS.get((op, arity))
    if spec is None:
        raise ArityError(f"operator {op!r} does not take {arity} children")
    return spec


def _check_leaf_text(text: str) -> None:
    if not _LEAF_RE.match(text):
        raise ArityError(f"invalid leaf text {text!r}")


def validate_ast(node: Node, require_query_root: bool = True) -> None:
    """Check the closed-grammar invariants; raise MrlError on violation."""
    if require_query_root:
        if not isinstance(node, FuncNode) or node.op != "query":
            raise ArityError("root operator must be 'query'")
    _validate_node(node)


def _validate_node(node: Node) -> None:
    if isinstance(node, StringLeaf):
        _check_leaf_text(node.text)
        return
    spec = slot_spec(node.op, len(node.children))
    for slot, child in zip(spec, node.children):
        if slot is KEY:
            if not isinstance(child, StringLeaf):
                raise ArityError(f"{node.op!r} expects a key leaf")
            _check_leaf_text(child.text)
            if child.text in OPERATORS:
                raise ArityError(f"key {child.text!r} collides with an operator name")
        elif slot is VAL:
            if not isinstance(child, StringLeaf):
                raise ArityError(f"{node.op!r} expects a value leaf")
            _check_leaf_text(child.text)
        else:
            if not isinstance(child, FuncNode):
                raise ArityError(f"{node.op!r} expects an operator child, got a leaf")
            if child.op not in slot:
                raise ArityError(
                    f"{child.op!r} not allowed as child {node.children.index(child)} of {node.op!r}"
                )
            _validate_node(child)


# ---------------------------------------------------------------------------
# Text form


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def parse_mrl(text: str) -> FuncNode:
    """Parse query text into a validated tree.

    Whitespace-insensitive outside quotes. Zero-arity operators may be
    written bare (``count``) or with empty parens (``count()``).
    """
    if not text or not text.strip():
        raise MrlSyntaxError("empty query text", 0)
    parser = _TextParser(text)
    node = parser.parse_node()
    parser.skip_ws()
    if parser.pos != len(parser.text):
        raise MrlSyntaxError("trailing characters after query", parser.pos)
    validate_ast(node)
    return node


class _TextParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def parse_node(self) -> Node:
        self.skip_ws()
        if self.pos >= len(self.text):
            raise MrlSyntaxError("unexpected end of input", self.pos)
        ch = self.text[self.pos]
        if ch == "'":
            return self._parse_quoted()
        m = _IDENT_RE.match(self.text, self.pos)
        if not m:
            raise MrlSyntaxError(f"unexpected character {ch!r}", self.pos)
        op = m.group(0)
        if op not in OPERATORS:
            raise UnknownOperatorError(f"unknown operator {op!r}")
        self.pos = m.end()
        self.skip_ws()
        children: list[Node] = []
        if self.pos < len(self.text) and self.text[self.pos] == "(":
            self.pos += 1
            self.skip_ws()
            if self.pos < len(self.text) and self.text[self.pos] == ")":
                self.pos += 1
            else:
                while True:
                    children.append(self.parse_node())
                    self.skip_ws()
                    if self.pos >= len(self.text):
                        raise MrlSyntaxError("unclosed argument list", self.pos)
                    if self.text[self.pos] == ",":
                        self.pos += 1
                        continue
                    if self.text[self.pos] == ")":
                        self.pos += 1
                        break
                    raise MrlSyntaxError("expected ',' or ')'", self.pos)
        return FuncNode(op, tuple(children))

    def _parse_quoted(self) -> StringLeaf:
        start = self.pos
        end = self.text.find("'", self.pos + 1)
        if end < 0:
            raise MrlSyntaxError("unterminated string literal", start)
        return self._finish_quoted(start, end)

    def _finish_quoted(self, start: int, end: int) -> StringLeaf:
        text = self.text[start + 1:end]
        if not text:
            raise MrlSyntaxError("empty string literal", start)
        self.pos = end + 1
        return StringLeaf(text)


def serialize_mrl(node: Node) -> str:
    """Canonical text form: no whitespace, bare zero-arity operators."""
    if isinstance(node, StringLeaf):
        return f"'{node.text}'"
    if not node.children:
        return node.op
    inner = ",".join(serialize_mrl(c) for c in node.children)
    return f"{node.op}({inner})"


# ---------------------------------------------------------------------------
# Token form

KIND_FUNC = "func"
KIND_LEAF = "string-leaf"


@dataclass(frozen=True)
class Token:
    """One linearized token; text form ``surface@arity`` or ``surface@s``."""

    surface: str
    kind: str
    arity: int = 0

    def to_text(self) -> str:
        if self.kind == KIND_LEAF:
            return f"{self.surface}@s"
        return f"{self.surface}@{self.arity}"


@dataclass(frozen=True)
class LinearQuery:
    """Pre-order token sequence of a query tree."""

    tokens: tuple

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def to_text(self) -> str:
        return " ".join(t.to_text() for t in self.tokens)

    def surfaces(self) -> list[str]:
        return [t.to_text() for t in self.tokens]

    @classmethod
    def from_text(cls, text: str) -> "LinearQuery":
        return cls(tuple(parse_token(part) for part in text.split()))

    @classmethod
    def from_surfaces(cls, surfaces: Sequence[str]) -> "LinearQuery":
        return cls(tuple(parse_token(s) for s in surfaces))


def parse_token(text: str) -> Token:
    """Parse one ``surface@arity`` / ``surface@s`` token."""
    head, sep, suffix = text.rpartition("@")
    if not sep or not head:
        raise DelinearizeError(f"malformed token {text!r}")
    if suffix == "s":
        return Token(head, KIND_LEAF)
    if not suffix.isdigit():
        raise DelinearizeError(f"malformed arity suffix in {text!r}")
    return Token(head, KIND_FUNC, int(suffix))


def linearize(ast: FuncNode) -> LinearQuery:
    """Pre-order traversal; one token per tree node."""
    out: list[Token] = []
    _emit(ast, None, out)
    return LinearQuery(tuple(out))


def _emit(node: Node, slot, out: list) -> None:
    if isinstance(node, StringLeaf):
        if slot is KEY:
            out.append(Token(node.text, KIND_FUNC, 0))
        else:
            out.append(Token(node.text, KIND_LEAF))
        return
    out.append(Token(node.op, KIND_FUNC, len(node.children)))
    spec = slot_spec(node.op, len(node.children))
    for child_slot, child in zip(spec, node.children):
        _emit(child, child_slot, out)


def delinearize(tokens, require_query_root: bool = True) -> FuncNode:
    """Rebuild the tree from a pre-order token sequence.

    Accepts a LinearQuery, a sequence of Tokens, or a sequence of token
    strings. Raises TruncatedSequenceError / ExtraTokensError /
    DelinearizeError for sequences no valid tree produces.
    """
    if isinstance(tokens, LinearQuery):
        toks = list(tokens.tokens)
    else:
        toks = [t if isinstance(t, Token) else parse_token(t) for t in tokens]
    stream = iter(toks)
    consumed = [0]

    def take() -> Token:
        for tok in stream:
            consumed[0] += 1
            return tok
        raise TruncatedSequenceError(
            f"sequence ended after {consumed[0]} tokens with children still expected"
        )

    root_slot = _f("query") if require_query_root else OPERATORS

    def consume(slot) -> Node:
        tok = take()
        if slot is KEY:
            if tok.kind != KIND_FUNC or tok.arity != 0 or tok.surface in OPERATORS:
                raise DelinearizeError(f"expected a key token, got {tok.to_text()!r}")
            _check_leaf_text(tok.surface)
            return StringLeaf(tok.surface)
        if slot is VAL:
            if tok.kind != KIND_LEAF:
                raise DelinearizeError(f"expected a value token, got {tok.to_text()!r}")
            _check_leaf_text(tok.surface)
            return StringLeaf(tok.surface)
        if tok.kind != KIND_FUNC or tok.surface not in OPERATORS:
            raise DelinearizeError(f"expected an operator token, got {tok.to_text()!r}")
        if tok.surface not in slot:
            raise DelinearizeError(f"operator {tok.surface!r} not allowed here")
        try:
            spec = slot_spec(tok.surface, tok.arity)
        except ArityError as exc:
            raise DelinearizeError(str(exc)) from exc
        children = tuple(consume(s) for s in spec)
        return FuncNode(tok.surface, children)

    root = consume(root_slot)
    leftover = len(toks) - consumed[0]
    if leftover:
        raise ExtraTokensError(f"{leftover} tokens remain after a complete tree")
    return root
