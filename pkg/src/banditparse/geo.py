"""Toy geographical database and query evaluation.

Entities carry OSM-style ``key=value`` tags and a point coordinate.
Named areas are axis-aligned latitude/longitude boxes. A query tree
selects a subset of entities (area containment, tag matching, cardinal
halves, proximity around a reference point) and projects the selection
to an answer: a count, a list of coordinates, an existence flag, or the
values of a tag key.

Answers compare by exact set equality after sorting. A query that
refers to something the database cannot resolve (an unknown area name,
a reference point with no matching entity, a distance literal that is
not a number) evaluates to the distinguished empty answer rather than
raising, because such queries are routinely produced by an imperfect
parser and simply count as wrong.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .mrl import CARDINAL_OPS, FuncNode, StringLeaf, validate_ast

EARTH_RADIUS_M = 6_371_000.0

# Symbolic distance literals understood by maxdist.
DISTANCE_LITERALS = {
    "DIST_INTOWN": 2_000.0,
    "DIST_OUTTOWN": 20_000.0,
}


def haversine(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in meters between two (lat, lon) points."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class Entity:
    """One point of interest: id, coordinate, and its tag dictionary."""

    id: int
    lat: float
    lon: float
    tags: tuple[tuple[str, str], ...]

    def tag(self, key: str) -> str | None:
        for k, v in self.tags:
            if k == key:
                return v
        return None

    def matches(self, key: str, value: str) -> bool:
        return self.tag(key) == value


@dataclass(frozen=True)
class Box:
    """Axis-aligned area: south/west/north/east bounds in degrees."""

    south: float
    west: float
    north: float
    east: float

    def __post_init__(self):
        if not (self.south < self.north and self.west < self.east):
            raise ValueError(f"degenerate box {self}")

    def contains(self, lat: float, lon: float) -> bool:
        return self.south <= lat <= self.north and self.west <= lon <= self.east

    def half(self, direction: str) -> "Box":
        """The half of the box on the given cardinal side of its midline."""
        mid_lat = (self.south + self.north) / 2.0
        mid_lon = (self.west + self.east) / 2.0
        if direction == "north":
            return Box(mid_lat, self.west, self.north, self.east)
        if direction == "south":
            return Box(self.south, self.west, mid_lat, self.east)
        if direction == "east":
            return Box(self.south, mid_lon, self.north, self.east)
        if direction == "west":
            return Box(self.south, self.west, self.north, mid_lon)
        raise ValueError(f"not a cardinal direction: {direction!r}")


@dataclass
class GeoDb:
    """Immutable-after-load collection of entities and named areas."""

    entities: list[Entity] = field(default_factory=list)
    areas: dict[str, Box] = field(default_factory=dict)

    def __post_init__(self):
        ids = [e.id for e in self.entities]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate entity ids")
        for e in self.entities:
            if not (-90.0 <= e.lat <= 90.0 and -180.0 <= e.lon <= 180.0):
                raise ValueError(f"entity {e.id} has out-of-range coordinates")

    def tag_inventory(self) -> list[tuple[str, str]]:
        """Sorted list of distinct (key, value) pairs present in the db."""
        seen = set()
        for e in self.entities:
            seen.update(e.tags)
        return sorted(seen)


def load_geodb(entities_path, areas_path) -> GeoDb:
    """Read a database from its two line-oriented fixture files.

    Entity lines: ``id, lat, lon, key=value;key=value;...``
    Area lines: ``name, south, west, north, east``
    Blank lines and lines starting with ``#`` are skipped.
    """
    entities = []
    with open(entities_path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            ident, lat, lon, tagblob = (part.strip() for part in line.split(",", 3))
            tags = []
            if tagblob:
                for pair in tagblob.split(";"):
                    key, _, value = pair.partition("=")
                    tags.append((key.strip(), value.strip()))
            entities.append(Entity(int(ident), float(lat), float(lon), tuple(tags)))
    areas = {}
    with open(areas_path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            name, south, west, north, east = (p.strip() for p in line.split(","))
            areas[name] = Box(float(south), float(west), float(north), float(east))
    return GeoDb(entities, areas)


def save_geodb(db: GeoDb, entities_path, areas_path) -> None:
    with open(entities_path, "w", encoding="utf-8") as fh:
        for e in db.entities:
            blob = ";".join(f"{k}={v}" for k, v in e.tags)
            fh.write(f"{e.id}, {e.lat:.6f}, {e.lon:.6f}, {blob}\n")
    with open(areas_path, "w", encoding="utf-8") as fh:
        for name in sorted(db.areas):
            b = db.areas[name]
            fh.write(f"{name}, {b.south:.4f}, {b.west:.4f}, {b.north:.4f}, {b.east:.4f}\n")


def default_db() -> GeoDb:
    """The database bundled with the package."""
    from importlib import resources

    data = resources.files("banditparse").joinpath("data")
    return load_geodb(
        str(data.joinpath("entities.txt")), str(data.joinpath("areas.txt"))
    )


# ---------------------------------------------------------------------------
# Answers


@dataclass(frozen=True)
class Answer:
    """Result of evaluating a query. ``kind`` selects the variant.

    Lists are stored as sorted tuples so equality is set equality.
    Count and existence answers are definite even when the count is 0,
    so only list-producing projections with no results and unresolvable
    queries collapse to the empty answer.
    """

    kind: str
    value: object = None

    @staticmethod
    def count(n: int) -> "Answer":
        if n < 0:
            raise ValueError("negative count")
        return Answer("count", int(n))

    @staticmethod
    def locations(points) -> "Answer":
        pts = tuple(sorted((float(lat), float(lon)) for lat, lon in points))
        if not pts:
            return EMPTY_ANSWER
        return Answer("locations", pts)

    @staticmethod
    def values(strings) -> "Answer":
        vals = tuple(sorted(set(str(s) for s in strings)))
        if not vals:
            return EMPTY_ANSWER
        return Answer("values", vals)

    @staticmethod
    def exists(flag: bool) -> "Answer":
        return Answer("exists", bool(flag))

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"

    def render(self) -> str:
        """Canonical one-line text form, used for display and tuple answers."""
        if self.kind == "count":
            return str(self.value)
        if self.kind == "locations":
            return " ".join(f"{lat:.6f},{lon:.6f}" for lat, lon in self.value)
        if self.kind == "values":
            return " ".join(self.value)
        if self.kind == "exists":
            return "yes" if self.value else "no"
        return ""


EMPTY_ANSWER = Answer("empty", None)


# ---------------------------------------------------------------------------
# Evaluation


class _Unanswerable(Exception):
    """Internal signal that the query cannot be resolved on this db."""


def _match_tags(node: FuncNode, entity: Entity) -> bool:
    """Evaluate a keyval / and / or expression against one entity."""
    if node.op == "keyval":
        key, value = node.children
        return entity.matches(key.text, value.text)
    truths = (_match_tags(c, entity) for c in node.children)
    return all(truths) if node.op == "and" else any(truths)


def _match_nwr(nwr: FuncNode, entity: Entity) -> bool:
    return all(_match_tags(c, entity) for c in nwr.children)


def _area_box(area: FuncNode, db: GeoDb) -> Box:
    name = area.children[0].children[1].text
    box = db.areas.get(name)
    if box is None:
        raise _Unanswerable(f"unknown area {name!r}")
    return box


def _resolve_distance(leaf: StringLeaf) -> float:
    text = leaf.text
    if text in DISTANCE_LITERALS:
        return DISTANCE_LITERALS[text]
    try:
        meters = float(text)
    except ValueError:
        raise _Unanswerable(f"not a distance: {text!r}") from None
    if meters <= 0:
        raise _Unanswerable(f"non-positive distance: {text!r}")
    return meters


def _resolve_topx(node: FuncNode) -> int:
    text = node.children[0].text
    try:
        k = int(text)
    except ValueError:
        raise _Unanswerable(f"not a rank: {text!r}") from None
    if k < 1:
        raise _Unanswerable(f"non-positive rank: {text!r}")
    return k


def _select_around(around: FuncNode, db: GeoDb) -> list[Entity]:
    center, search = around.children[0], around.children[1]
    maxdist = _resolve_distance(around.children[2].children[0])
    topk = _resolve_topx(around.children[3]) if len(around.children) == 4 else None

    refs = list(db.entities)
    for part in center.children:
        if part.op == "area":
            box = _area_box(part, db)
            refs = [e for e in refs if box.contains(e.lat, e.lon)]
        else:
            refs = [e for e in refs if _match_nwr(part, e)]
    if not refs:
        raise _Unanswerable("no entity matches the reference point")
    ref = min(refs, key=lambda e: e.id)

    pool = [e for e in db.entities if e.id != ref.id and _match_nwr(search.children[0], e)]
    ranked = sorted(
        (haversine((ref.lat, ref.lon), (e.lat, e.lon)), e.id, e) for e in pool
    )
    within = [(d, _, e) for d, _, e in ranked if d <= maxdist]
    if topk is not None:
        within = within[:topk]
    return [e for _, _, e in within]


def _select(selectors: tuple, db: GeoDb) -> list[Entity]:
    """Run the selection pipeline: area and cardinal filters, then tags."""
    if len(selectors) == 1 and selectors[0].op == "around":
        return _select_around(selectors[0], db)

    pool = list(db.entities)
    for sel in selectors:
        if sel.op == "area":
            box = _area_box(sel, db)
            pool = [e for e in pool if box.contains(e.lat, e.lon)]
        elif sel.op == "nwr":
            pool = [e for e in pool if _match_nwr(sel, e)]
        elif sel.op in CARDINAL_OPS:
            area, nwr = sel.children
            half = _area_box(area, db).half(sel.op)
            pool = [e for e in pool if half.contains(e.lat, e.lon) and _match_nwr(nwr, e)]
        else:
            raise ValueError(f"unexpected selector {sel.op!r}")
    return pool


def _project(arg: FuncNode, selected: list[Entity]) -> Answer:
    if arg.op == "count":
        return Answer.count(len(selected))
    if arg.op == "latlong":
        return Answer.locations((e.lat, e.lon) for e in selected)
    if arg.op == "least":
        need = _resolve_topx(arg.children[0])
        return Answer.exists(len(selected) >= need)
    if arg.op == "findkey":
        key = arg.children[0].text
        found = [e.tag(key) for e in selected]
        return Answer.values(v for v in found if v is not None)
    raise ValueError(f"unexpected qtype argument {arg.op!r}")


def execute(ast: FuncNode, db: GeoDb) -> Answer:
    """Evaluate a valid query tree against the database.

    Multi-argument qtype nodes produce a values answer whose entries are
    the rendered per-argument results, prefixed with the argument index
    so the combined answer stays comparable after sorting.
    """
    validate_ast(ast)
    qtype = ast.children[-1]
    try:
        selected = _select(ast.children[:-1], db)
        parts = [_project(arg, selected) for arg in qtype.children]
    except _Unanswerable:
        return EMPTY_ANSWER
    if len(parts) == 1:
        return parts[0]
    return Answer("values", tuple(sorted(f"{i}:{p.render()}" for i, p in enumerate(parts))))
