"""Random valid query trees, for property tests and synthetic workloads."""

from __future__ import annotations

import numpy as np

from .mrl import FuncNode, StringLeaf

DEFAULT_AREAS = ("Paris", "Lyon", "Nice", "Lille")
DEFAULT_TAGS = (
    ("tourism", "hotel"),
    ("amenity", "restaurant"),
    ("amenity", "bank"),
    ("railway", "station"),
    ("shop", "bakery"),
)
DEFAULT_KEYS = ("name", "website", "phone", "opening_hours")
DEFAULT_DISTS = ("DIST_INTOWN", "DIST_OUTTOWN", "1000", "5000")
DEFAULT_NAMES = ("Station", "Cathedral", "TownHall", "Market")


class QueryPools:
    """Vocabulary pools the generator draws from."""

    def __init__(self, areas=DEFAULT_AREAS, tags=DEFAULT_TAGS, keys=DEFAULT_KEYS,
                 dists=DEFAULT_DISTS, names=DEFAULT_NAMES):
        self.areas = tuple(areas)
        self.tags = tuple(tags)
        self.keys = tuple(keys)
        self.dists = tuple(dists)
        self.names = tuple(names)


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def _keyval(rng, pools) -> FuncNode:
    k, v = _pick(rng, pools.tags)
    return FuncNode("keyval", (StringLeaf(k), StringLeaf(v)))


def _name_keyval(rng, pools) -> FuncNode:
    return FuncNode("keyval", (StringLeaf("name"), StringLeaf(_pick(rng, pools.names))))


def _tag_expr(rng, pools, depth=0) -> FuncNode:
    roll = rng.random()
    if depth == 0 and roll < 0.2:
        op = "and" if rng.random() < 0.5 else "or"
        k = 2 if rng.random() < 0.8 else 3
        return FuncNode(op, tuple(_tag_expr(rng, pools, depth + 1) for _ in range(k)))
    return _keyval(rng, pools)


def _nwr(rng, pools, allow_name=False) -> FuncNode:
    if allow_name and rng.random() < 0.5:
        return FuncNode("nwr", (_name_keyval(rng, pools),))
    k = 1 if rng.random() < 0.8 else int(rng.integers(2, 4))
    return FuncNode("nwr", tuple(_tag_expr(rng, pools) for _ in range(k)))


def _area(rng, pools) -> FuncNode:
    kv = FuncNode("keyval", (StringLeaf("name"), StringLeaf(_pick(rng, pools.areas))))
    return FuncNode("area", (kv,))


def _qtype_arg(rng, pools) -> FuncNode:
    roll = rng.random()
    if roll < 0.35:
        return FuncNode("count")
    if roll < 0.65:
        return FuncNode("latlong")
    if roll < 0.85:
        return FuncNode("findkey", (StringLeaf(_pick(rng, pools.keys)),))
    return FuncNode("least", (FuncNode("topx", (StringLeaf("1"),)),))


def _qtype(rng, pools) -> FuncNode:
    k = 1 if rng.random() < 0.9 else 2
    return FuncNode("qtype", tuple(_qtype_arg(rng, pools) for _ in range(k)))


def _around(rng, pools) -> FuncNode:
    roll = rng.random()
    if roll < 0.5:
        center = FuncNode("center", (_area(rng, pools), _nwr(rng, pools, allow_name=True)))
    elif roll < 0.8:
        center = FuncNode("center", (_nwr(rng, pools, allow_name=True),))
    else:
        center = FuncNode("center", (_area(rng, pools),))
    search = FuncNode("search", (_nwr(rng, pools),))
    maxdist = FuncNode("maxdist", (StringLeaf(_pick(rng, pools.dists)),))
    children = [center, search, maxdist]
    if rng.random() < 0.5:
        topk = "1" if rng.random() < 0.7 else str(int(rng.integers(2, 4)))
        children.append(FuncNode("topx", (StringLeaf(topk),)))
    return FuncNode("around", tuple(children))


def random_query_ast(rng: np.random.Generator, pools: QueryPools | None = None) -> FuncNode:
    """One random query satisfying all grammar invariants."""
    pools = pools or QueryPools()
    qt = _qtype(rng, pools)
    roll = rng.random()
    if roll < 0.08:
        return FuncNode("query", (qt,))
    if roll < 0.18:
        return FuncNode("query", (_area(rng, pools), qt))
    if roll < 0.45:
        return FuncNode("query", (_area(rng, pools), _nwr(rng, pools), qt))
    if roll < 0.6:
        return FuncNode("query", (_nwr(rng, pools), qt))
    if roll < 0.8:
        card = _pick(rng, ("north", "east", "south", "west"))
        return FuncNode("query", (FuncNode(card, (_area(rng, pools), _nwr(rng, pools))), qt))
    return FuncNode("query", (_around(rng, pools), qt))
