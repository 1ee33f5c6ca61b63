"""Synthetic question corpus over the toy geo database.

Each example pairs an English question with the query tree it should
parse to. Surface variety comes from several skeletons per question
type plus per-tag noun pools, so a parser trained on a slice of the
corpus sees most constructions but not every phrasing of them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .geo import GeoDb, execute
from .mrl import FuncNode, StringLeaf, parse_mrl, serialize_mrl


class CorpusExhaustedError(RuntimeError):
    """Template inventory ran out before enough distinct examples."""


# (key, value) -> (singular, plural, plural variant). The phrases are
# pairwise distinct across tags so a question determines its tag.
NOUNS = {
    ("tourism", "hotel"): ("hotel", "hotels", "places to stay"),
    ("tourism", "museum"): ("museum", "museums", "exhibition halls"),
    ("tourism", "attraction"): ("attraction", "attractions", "tourist attractions"),
    ("tourism", "viewpoint"): ("viewpoint", "viewpoints", "scenic overlooks"),
    ("tourism", "guest_house"): ("guest house", "guest houses", "pensions"),
    ("amenity", "restaurant"): ("restaurant", "restaurants", "places to eat"),
    ("amenity", "bank"): ("bank", "banks", "bank branches"),
    ("amenity", "bar"): ("bar", "bars", "pubs"),
    ("amenity", "cafe"): ("cafe", "cafes", "coffee shops"),
    ("amenity", "pharmacy"): ("pharmacy", "pharmacies", "chemists"),
    ("amenity", "parking"): ("car park", "car parks", "parking lots"),
    ("amenity", "fuel"): ("petrol station", "petrol stations", "filling stations"),
    ("amenity", "atm"): ("cash machine", "cash machines", "cash points"),
    ("amenity", "library"): ("library", "libraries", "public libraries"),
    ("amenity", "cinema"): ("cinema", "cinemas", "movie theaters"),
    ("amenity", "police"): ("police station", "police stations", "police posts"),
    ("amenity", "post_office"): ("post office", "post offices", "postal branches"),
    ("amenity", "fast_food"): ("fast food place", "fast food places", "takeaways"),
    ("amenity", "drinking_water"): ("drinking fountain", "drinking fountains", "water taps"),
    ("shop", "bakery"): ("bakery", "bakeries", "bread shops"),
    ("shop", "supermarket"): ("supermarket", "supermarkets", "grocery stores"),
    ("shop", "butcher"): ("butcher", "butchers", "meat shops"),
    ("shop", "clothes"): ("clothing store", "clothing stores", "boutiques"),
    ("shop", "hairdresser"): ("hairdresser", "hairdressers", "barber shops"),
    ("shop", "convenience"): ("convenience store", "convenience stores", "corner shops"),
    ("railway", "station"): ("train station", "train stations", "railway stations"),
    ("highway", "bus_stop"): ("bus stop", "bus stops", "bus halts"),
    ("leisure", "park"): ("park", "parks", "green spaces"),
    ("leisure", "playground"): ("playground", "playgrounds", "play areas"),
    ("historic", "monument"): ("monument", "monuments", "memorials"),
}

# Property key -> (singular phrase, plural phrase).
PROPERTIES = {
    "name": ("name", "names"),
    "website": ("website", "websites"),
    "phone": ("phone number", "phone numbers"),
    "opening_hours": ("opening hours", "opening hours"),
    "cuisine": ("cuisine", "cuisines"),
    "wheelchair": ("wheelchair access", "wheelchair access levels"),
}

QTYPES = ("count", "latlong", "exists", "findkey")

SKELETONS = {
    "count": (
        "How many {noun} are there in {place}?",
        "How many {noun} does {place} have?",
        "Count the {noun} in {place}.",
    ),
    "latlong": (
        "Where are {noun} in {place}?",
        "Give me the locations of {noun} in {place}.",
        "Show me {noun} in {place}.",
    ),
    "exists": (
        "Are there any {noun} in {place}?",
        "Does {place} have {noun}?",
        "Can I find {noun} in {place}?",
    ),
    "findkey": (
        "What are the {prop} of {noun} in {place}?",
        "Give me the {prop} of {noun} in {place}.",
        "List the {prop} of {noun} in {place}.",
    ),
}

# Nearest-one questions name a single entity, so they get their own
# skeletons built around the singular noun form.
CLOSEST_SKELETONS = {
    "latlong": (
        "Where is the closest {noun} to the {ref} in {area}?",
        "Which {noun} is closest to the {ref} in {area}?",
    ),
    "findkey": (
        "What is the {prop} of the closest {noun} to the {ref} in {area}?",
        "Give me the {prop} of the closest {noun} to the {ref} in {area}.",
    ),
}

DIRECTIONS = ("east", "north", "south", "west")
_DIR_ADJECTIVE = {
    "east": "eastern", "north": "northern",
    "south": "southern", "west": "western",
}

# Proximity attachment -> distance literal for the query.
PROXIMITY_STYLES = (
    ("{noun} near the {ref}", "DIST_INTOWN"),
    ("{noun} within walking distance of the {ref}", "DIST_INTOWN"),
    ("{noun} within driving distance of the {ref}", "DIST_OUTTOWN"),
)


def _kv(key: str, value: str) -> FuncNode:
    return FuncNode("keyval", (StringLeaf(key), StringLeaf(value)))


def _area_node(name: str) -> FuncNode:
    return FuncNode("area", (_kv("name", name),))


def _qtype_node(qtype: str, key: str | None) -> FuncNode:
    if qtype == "count":
        arg = FuncNode("count")
    elif qtype == "latlong":
        arg = FuncNode("latlong")
    elif qtype == "exists":
        arg = FuncNode("least", (FuncNode("topx", (StringLeaf("1"),)),))
    elif qtype == "findkey":
        arg = FuncNode("findkey", (StringLeaf(key),))
    else:
        raise ValueError(f"unknown question type {qtype!r}")
    return FuncNode("qtype", (arg,))


@dataclass(frozen=True)
class TemplateChoice:
    """One fully instantiated template.

    modifier is None, ("cardinal", direction, phrasing),
    ("proximity", style_index, ref_name), or ("closest", ref_name).
    """

    qtype: str
    skeleton: int
    area: str
    tag: tuple[str, str]
    noun: int = 0
    key: str | None = None
    modifier: tuple | None = None

    def question(self) -> str:
        nouns = NOUNS[self.tag]
        prop = None
        if self.qtype == "findkey":
            prop_forms = PROPERTIES[self.key]
            prop = prop_forms[1]
        if self.modifier is not None and self.modifier[0] == "closest":
            text = CLOSEST_SKELETONS[self.qtype][self.skeleton]
            return text.format(
                noun=nouns[0], ref=self.modifier[1], area=self.area,
                prop=prop_forms[0] if prop else None,
            )
        noun = nouns[1 + self.noun]
        place = self.area
        if self.modifier is not None:
            kind = self.modifier[0]
            if kind == "cardinal":
                _, direction, phrasing = self.modifier
                if phrasing == 0:
                    place = f"the {direction} of {self.area}"
                else:
                    place = f"{_DIR_ADJECTIVE[direction]} {self.area}"
            elif kind == "proximity":
                _, style, ref = self.modifier
                noun = PROXIMITY_STYLES[style][0].format(noun=noun, ref=ref)
        return SKELETONS[self.qtype][self.skeleton].format(
            noun=noun, place=place, prop=prop,
        )

    def ast(self) -> FuncNode:
        area = _area_node(self.area)
        nwr = FuncNode("nwr", (_kv(*self.tag),))
        qt = _qtype_node(self.qtype, self.key)
        if self.modifier is None:
            return FuncNode("query", (area, nwr, qt))
        kind = self.modifier[0]
        if kind == "cardinal":
            half = FuncNode(self.modifier[1], (area, nwr))
            return FuncNode("query", (half, qt))
        if kind == "proximity":
            _, style, ref = self.modifier
            literal = PROXIMITY_STYLES[style][1]
            around = FuncNode("around", (
                FuncNode("center", (area, FuncNode("nwr", (_kv("name", ref),)))),
                FuncNode("search", (nwr,)),
                FuncNode("maxdist", (StringLeaf(literal),)),
            ))
            return FuncNode("query", (around, qt))
        if kind == "closest":
            around = FuncNode("around", (
                FuncNode("center", (area, FuncNode("nwr", (_kv("name", self.modifier[1]),)))),
                FuncNode("search", (nwr,)),
                FuncNode("maxdist", (StringLeaf("DIST_INTOWN"),)),
                FuncNode("topx", (StringLeaf("1"),)),
            ))
            return FuncNode("query", (around, qt))
        raise ValueError(f"unknown modifier {self.modifier!r}")


@dataclass(frozen=True)
class CorpusExample:
    question: str
    gold_query: FuncNode


@dataclass(frozen=True)
class Splits:
    d_sup: tuple
    d_dev: tuple
    d_test: tuple
    d_log: tuple


DESK_SPLIT_SIZES = (300, 200, 300, 1500)

PAPER_SPLIT_SIZES = (2000, 1843, 2000, 22765)


def tokenize_question(text: str) -> list[str]:
    """Lowercased word tokens; punctuation is dropped."""
    return re.findall(r"[a-z0-9]+", text.lower())


def _verbalizable_tags(db: GeoDb) -> list[tuple[str, str]]:
    present = {pair for e in db.entities for pair in e.tags}
    return sorted(pair for pair in present if pair in NOUNS)


def _shared_names(db: GeoDb) -> list[str]:
    """Names borne by some entity inside every area, usable as reference
    points regardless of which area a template picks."""
    per_area = []
    for box in db.areas.values():
        names = {e.tag("name") for e in db.entities
                 if e.tag("name") and box.contains(e.lat, e.lon)}
        per_area.append(names)
    if not per_area:
        return []
    shared = set.intersection(*per_area)
    return sorted(shared)


def _property_keys(db: GeoDb) -> list[str]:
    present = {k for e in db.entities for (k, _) in e.tags}
    return sorted(k for k in present if k in PROPERTIES)


def _inventory_bound(n_areas: int, n_tags: int, n_refs: int, n_keys: int) -> int:
    plain = 3 * 2
    cardinal = 3 * 2 * len(DIRECTIONS) * 2
    proximity = 3 * 2 * len(PROXIMITY_STYLES) * n_refs
    closest = 2 * n_refs
    per_pair = (
        (plain + cardinal + proximity)              # count
        + (plain + cardinal + proximity + closest)  # latlong
        + (plain + cardinal + proximity)            # exists
        + (plain + cardinal + proximity + closest) * max(n_keys, 0)
    )
    return n_areas * n_tags * per_pair


def _draw(rng, areas, tags, refs, keys) -> TemplateChoice:
    qtype = QTYPES[rng.integers(len(QTYPES))]
    tag = tags[rng.integers(len(tags))]
    area = areas[rng.integers(len(areas))]
    key = keys[rng.integers(len(keys))] if qtype == "findkey" else None

    r = rng.random()
    if not refs and r >= 0.65:
        r = 0.0  # no shared reference points, so no proximity templates
    if r < 0.40:
        modifier = None
    elif r < 0.65:
        direction = DIRECTIONS[rng.integers(len(DIRECTIONS))]
        modifier = ("cardinal", direction, int(rng.integers(2)))
    elif r < 0.85 or qtype in ("count", "exists"):
        style = int(rng.integers(len(PROXIMITY_STYLES)))
        ref = refs[rng.integers(len(refs))]
        modifier = ("proximity", style, ref)
    else:
        ref = refs[rng.integers(len(refs))]
        modifier = ("closest", ref)

    if modifier is not None and modifier[0] == "closest":
        skeleton = int(rng.integers(len(CLOSEST_SKELETONS[qtype])))
        return TemplateChoice(qtype, skeleton, area, tag, 0, key, modifier)
    skeleton = int(rng.integers(len(SKELETONS[qtype])))
    noun = int(rng.integers(2))
    return TemplateChoice(qtype, skeleton, area, tag, noun, key, modifier)


def generate_corpus(db: GeoDb, n: int, seed: int = 0) -> list[CorpusExample]:
    """Sample n distinct template questions whose gold queries all
    produce a non-empty answer on db. Deterministic for a given seed."""
    if n < 1:
        raise ValueError("need at least one example")
    areas = sorted(db.areas)
    tags = _verbalizable_tags(db)
    refs = _shared_names(db)
    keys = _property_keys(db)
    if not areas or not tags:
        raise CorpusExhaustedError("database offers no template fillers")
    if not keys:
        keys = ["name"]
    bound = _inventory_bound(len(areas), len(tags), len(refs), len(keys))
    if n > bound:
        raise CorpusExhaustedError(
            f"asked for {n} examples but the template inventory holds "
            f"at most {bound}"
        )

    rng = np.random.default_rng(seed)
    out: list[CorpusExample] = []
    seen: set[str] = set()
    budget = 80 * n + 400
    while len(out) < n:
        if budget == 0:
            raise CorpusExhaustedError(
                f"template inventory exhausted after producing "
                f"{len(out)} of {n} examples"
            )
        budget -= 1
        choice = _draw(rng, areas, tags, refs, keys)
        question = choice.question()
        if question in seen:
            continue
        ast = choice.ast()
        if execute(ast, db).is_empty:
            continue
        seen.add(question)
        out.append(CorpusExample(question, ast))
    return out


def split(examples, sizes, seed: int = 0) -> Splits:
    """Shuffle and cut into supervised / dev / test / log portions."""
    if len(sizes) != 4:
        raise ValueError("expected four split sizes")
    if any(s < 0 for s in sizes):
        raise ValueError("split sizes must be nonnegative")
    if sum(sizes) > len(examples):
        raise ValueError(
            f"asked for {sum(sizes)} examples across splits "
            f"but only {len(examples)} are available"
        )
    order = np.random.default_rng(seed).permutation(len(examples))
    parts = []
    start = 0
    for size in sizes:
        idx = order[start:start + size]
        parts.append(tuple(examples[i] for i in idx))
        start += size
    return Splits(*parts)


def save_corpus(path, examples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            if "\t" in ex.question or "\n" in ex.question:
                raise ValueError(f"question not serializable: {ex.question!r}")
            fh.write(f"{ex.question}\t{serialize_mrl(ex.gold_query)}\n")


def load_corpus(path) -> list[CorpusExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                question, mrl = line.split("\t")
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected question TAB query")
            out.append(CorpusExample(question, parse_mrl(mrl)))
    return out
