"""Human-readable statement blocks for query trees, and the reverse map
from per-statement Yes/No verdicts to per-token rewards.

A statement captures one meaningful fragment of a query (the town, the
kind of place searched for, the question type, a proximity or distance
restriction, a cardinal-direction restriction) together with the token
indices of the linearized query that express it. Statement spans are
pairwise disjoint. The root ``query`` token belongs to no span.

Verdicts map back to token rewards span-wise. Tokens covered by no
statement inherit the conjunction of all verdicts: they earn reward 1
only when every statement was marked correct, so structural skeleton
tokens get credit exactly on fully correct queries.
"""

from __future__ import annotations

from dataclasses import dataclass

from .mrl import CARDINAL_OPS, FuncNode, LinearQuery, linearize, validate_ast

STYPE_ORDER = (
    "Town",
    "ReferencePoint",
    "POI",
    "QuestionType",
    "ProximityAroundNear",
    "RestrictionClosest",
    "Distance",
    "CardinalDirection",
)


@dataclass(frozen=True)
class Statement:
    """One row of a feedback form."""

    stype: str
    display_text: str
    payload: tuple
    token_span: frozenset

    def to_payload(self) -> dict:
        return {
            "stype": self.stype,
            "display_text": self.display_text,
            "payload": [list(p) if isinstance(p, tuple) else p for p in self.payload],
            "token_span": sorted(self.token_span),
        }


@dataclass(frozen=True)
class StatementBlock:
    question: str
    statements: tuple
    query: LinearQuery

    def covered_indices(self) -> frozenset:
        out = set()
        for s in self.statements:
            out.update(s.token_span)
        return frozenset(out)


@dataclass(frozen=True)
class Marking:
    """One verdict (``yes`` or ``no``) per statement, by statement index."""

    verdicts: tuple

    @classmethod
    def from_pairs(cls, pairs, n_statements: int) -> "Marking":
        got = {}
        for idx, verdict in pairs:
            if verdict not in ("yes", "no"):
                raise ValueError(f"verdict must be yes or no, got {verdict!r}")
            if idx in got:
                raise ValueError(f"duplicate verdict for statement {idx}")
            got[int(idx)] = verdict
        if sorted(got) != list(range(n_statements)):
            raise ValueError(
                f"need exactly one verdict for each of {n_statements} statements"
            )
        return cls(tuple(got[i] for i in range(n_statements)))

    def all_yes(self) -> bool:
        return all(v == "yes" for v in self.verdicts)


def _subtree_size(node) -> int:
    if isinstance(node, FuncNode):
        return 1 + sum(_subtree_size(c) for c in node.children)
    return 1


def _keyvals(node) -> list[tuple[str, str]]:
    """All (key, value) pairs in a tag expression subtree, in order."""
    if node.op == "keyval":
        return [(node.children[0].text, node.children[1].text)]
    out = []
    for child in node.children:
        out.extend(_keyvals(child))
    return out


def _tags_phrase(pairs) -> str:
    return ", ".join(f"{k}={v}" for k, v in pairs)


def _qtype_phrase(arg: FuncNode) -> str:
    if arg.op == "count":
        return "the number of matching places"
    if arg.op == "latlong":
        return "the location of the matching places"
    if arg.op == "least":
        k = arg.children[0].children[0].text
        return f"whether at least {k} matching place exists"
    return f"the {arg.children[0].text} of the matching places"


def _qtype_payload(arg: FuncNode) -> str:
    if arg.op in ("count", "latlong"):
        return arg.op
    if arg.op == "least":
        return f"least({arg.children[0].children[0].text})"
    return f"findkey({arg.children[0].text})"


_DIRECTION_WORD = {"north": "northern", "south": "southern",
                   "east": "eastern", "west": "western"}


def _distance_phrase(literal: str) -> str:
    from .geo import DISTANCE_LITERALS

    if literal in DISTANCE_LITERALS:
        return f"{DISTANCE_LITERALS[literal]:.0f} m ({literal})"
    return f"{literal} m"


class _Walker:
    """Pre-order walk mirroring linearization, firing Table-style triggers."""

    def __init__(self):
        self.found: dict[str, Statement] = {}
        self.idx = 0

    def emit(self, stype: str, text: str, payload, span) -> None:
        self.found[stype] = Statement(stype, text, tuple(payload), frozenset(span))

    def span_of(self, node) -> range:
        return range(self.idx, self.idx + _subtree_size(node))

    def skip(self, node) -> None:
        self.idx += _subtree_size(node)

    def walk_query(self, ast: FuncNode) -> None:
        self.idx += 1  # the root query token stays uncovered
        for child in ast.children[:-1]:
            if child.op == "area":
                self.take_area(child)
            elif child.op == "nwr":
                self.take_poi(child, include_search=False)
            elif child.op in CARDINAL_OPS:
                self.emit(
                    "CardinalDirection",
                    f"Only the {_DIRECTION_WORD[child.op]} part of the area is considered.",
                    (child.op,),
                    (self.idx,),
                )
                self.idx += 1
                area, nwr = child.children
                self.take_area(area)
                self.take_poi(nwr, include_search=False)
            else:
                self.take_around(child)
        self.take_qtype(ast.children[-1])

    def take_area(self, area: FuncNode) -> None:
        pairs = _keyvals(area.children[0])
        self.emit(
            "Town",
            f"The question concerns the area of {pairs[0][1]}.",
            pairs,
            self.span_of(area),
        )
        self.skip(area)

    def take_poi(self, node: FuncNode, include_search: bool) -> None:
        # node is the nwr, or the search wrapping it when include_search set
        nwr = node.children[0] if include_search else node
        pairs = _keyvals(nwr)
        self.emit(
            "POI",
            f"The question looks for places tagged {_tags_phrase(pairs)}.",
            pairs,
            self.span_of(node),
        )
        self.skip(node)

    def take_around(self, around: FuncNode) -> None:
        center = around.children[0]
        # around and center operator tokens carry the proximity reading
        self.emit(
            "ProximityAroundNear",
            "The search is restricted to places near a reference point.",
            ("around",),
            (self.idx, self.idx + 1),
        )
        self.idx += 2
        for part in center.children:
            if part.op == "area":
                self.take_area(part)
            else:
                pairs = _keyvals(part)
                self.emit(
                    "ReferencePoint",
                    f"The reference point is the place tagged {_tags_phrase(pairs)}.",
                    pairs,
                    self.span_of(part),
                )
                self.skip(part)
        self.take_poi(around.children[1], include_search=True)
        maxdist = around.children[2]
        literal = maxdist.children[0].text
        self.emit(
            "Distance",
            f"The search radius is {_distance_phrase(literal)}.",
            (literal,),
            self.span_of(maxdist),
        )
        self.skip(maxdist)
        if len(around.children) == 4:
            topx = around.children[3]
            if topx.children[0].text == "1":
                self.emit(
                    "RestrictionClosest",
                    "Only the closest such place is requested.",
                    ("closest",),
                    self.span_of(topx),
                )
            self.skip(topx)

    def take_qtype(self, qtype: FuncNode) -> None:
        phrases = [_qtype_phrase(a) for a in qtype.children]
        self.emit(
            "QuestionType",
            f"The question asks for {' and '.join(phrases)}.",
            tuple(_qtype_payload(a) for a in qtype.children),
            self.span_of(qtype),
        )
        self.skip(qtype)


def generate_statements(ast: FuncNode, question: str = "") -> StatementBlock:
    """Build the statement block for a valid query tree.

    At least one statement always fires, because every query carries a
    question type.
    """
    validate_ast(ast)
    walker = _Walker()
    walker.walk_query(ast)
    ordered = tuple(
        walker.found[st] for st in STYPE_ORDER if st in walker.found
    )
    return StatementBlock(question, ordered, linearize(ast))


def map_marking_to_token_rewards(block: StatementBlock, marking: Marking):
    """Turn verdicts into (sequence_reward, token_rewards, covered).

    Span tokens get 1 on yes and 0 on no. Tokens outside every span get
    the conjunction verdict. The sequence reward is 1 iff every
    statement was marked yes.
    """
    if len(marking.verdicts) != len(block.statements):
        raise ValueError(
            f"marking has {len(marking.verdicts)} verdicts for "
            f"{len(block.statements)} statements"
        )
    n = len(block.query)
    all_yes = marking.all_yes()
    rewards = [1 if all_yes else 0] * n
    for stmt, verdict in zip(block.statements, marking.verdicts):
        value = 1 if verdict == "yes" else 0
        for i in stmt.token_span:
            rewards[i] = value
    return (1 if all_yes else 0), rewards, sorted(block.covered_indices())


# ---------------------------------------------------------------------------
# Tag descriptions (tooltips)

_DESCRIPTIONS: dict | None = None

DEFAULT_DESCRIPTION = "No description available"


def _load_descriptions() -> dict:
    global _DESCRIPTIONS
    if _DESCRIPTIONS is None:
        from importlib import resources

        table = {}
        path = resources.files("banditparse").joinpath("data/osm_descriptions.txt")
        for raw in path.read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tag, _, text = line.partition("\t")
            table[tag.strip()] = text.strip()
        _DESCRIPTIONS = table
    return _DESCRIPTIONS


def describe_tag(key: str, value: str | None = None) -> str:
    """Tooltip text for an OSM tag, falling back from key=value to key."""
    table = _load_descriptions()
    if value is not None and f"{key}={value}" in table:
        return table[f"{key}={value}"]
    return table.get(key, DEFAULT_DESCRIPTION)
