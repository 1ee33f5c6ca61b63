import math

import numpy as np
import pytest

from banditparse.geo import (
    EMPTY_ANSWER,
    Answer,
    Box,
    Entity,
    GeoDb,
    execute,
    haversine,
    load_geodb,
    save_geodb,
)
from banditparse.mrl import parse_mrl
from banditparse.randgen import QueryPools, random_query_ast
from banditparse.toydb import make_toy_db


def ent(id, lat, lon, **tags):
    return Entity(id, lat, lon, tuple(sorted(tags.items())))


def paris_db(n_hotels=3):
    entities = [
        ent(i, 48.80 + 0.01 * i, 2.30 + 0.01 * i, tourism="hotel")
        for i in range(1, n_hotels + 1)
    ]
    entities.append(ent(50, 48.86, 2.35, railway="station", name="Gare"))
    entities.append(ent(60, 10.0, 10.0, tourism="hotel"))  # far away
    return GeoDb(entities, {"Paris": Box(48.75, 2.25, 48.95, 2.45)})


class TestHaversine:
    def test_zero_for_identical_points(self):
        assert haversine((48.85, 2.35), (48.85, 2.35)) == 0.0

    def test_one_degree_longitude_at_equator(self):
        assert abs(haversine((0.0, 0.0), (0.0, 1.0)) - 111194.9) < 1.0

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a = (rng.uniform(-90, 90), rng.uniform(-180, 180))
            b = (rng.uniform(-90, 90), rng.uniform(-180, 180))
            d_ab, d_ba = haversine(a, b), haversine(b, a)
            assert d_ab == d_ba
            assert d_ab >= 0.0


class TestDb:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            GeoDb([ent(1, 0, 0), ent(1, 1, 1)], {})

    def test_out_of_range_coordinates_rejected(self):
        with pytest.raises(ValueError):
            GeoDb([ent(1, 95.0, 0.0)], {})

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError):
            Box(1.0, 2.0, 1.0, 3.0)

    def test_save_load_round_trip(self, tmp_path):
        db = make_toy_db(4)
        save_geodb(db, tmp_path / "e.txt", tmp_path / "a.txt")
        back = load_geodb(tmp_path / "e.txt", tmp_path / "a.txt")
        assert back.entities == db.entities
        assert back.areas == db.areas

    def test_bundled_files_match_generator(self):
        from banditparse.geo import default_db

        db = default_db()
        fresh = make_toy_db(0)
        assert db.entities == fresh.entities
        assert db.areas == fresh.areas


class TestAnswers:
    def test_locations_sorted(self):
        a = Answer.locations([(2.0, 1.0), (1.0, 5.0)])
        assert a.value == ((1.0, 5.0), (2.0, 1.0))

    def test_values_deduplicated_and_sorted(self):
        assert Answer.values(["b", "a", "b"]).value == ("a", "b")

    def test_empty_lists_collapse_to_empty(self):
        assert Answer.locations([]) is EMPTY_ANSWER
        assert Answer.values([]) is EMPTY_ANSWER

    def test_count_zero_is_definite(self):
        assert not Answer.count(0).is_empty

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            Answer.count(-1)


class TestExecuteExamples:
    def test_count_hotels_in_area(self):
        q = parse_mrl(
            "query(area(keyval('name','Paris')),nwr(keyval('tourism','hotel')),qtype(count))"
        )
        assert execute(q, paris_db(3)) == Answer.count(3)

    def test_empty_db_counts_zero(self):
        q = parse_mrl("query(nwr(keyval('tourism','hotel')),qtype(count))")
        assert execute(q, GeoDb([], {})) == Answer.count(0)

    def test_findkey_single_match(self):
        db = GeoDb([ent(1, 48.86, 2.35, tourism="hotel", name="Ritz")], {})
        q = parse_mrl("query(nwr(keyval('tourism','hotel')),qtype(findkey('name')))")
        assert execute(q, db) == Answer.values(["Ritz"])

    def test_unknown_area_is_empty(self):
        q = parse_mrl("query(area(keyval('name','Nowhere')),qtype(count))")
        assert execute(q, paris_db()) is EMPTY_ANSWER

    def test_closest_is_nearest_by_distance(self):
        db = make_toy_db(0)
        q = parse_mrl(
            "query(around(center(area(keyval('name','Lyon')),nwr(keyval('name','GrandHotel'))),"
            "search(nwr(keyval('amenity','restaurant'))),maxdist('DIST_OUTTOWN'),topx('1')),"
            "qtype(latlong))"
        )
        result = execute(q, db)
        hotel = next(e for e in db.entities if e.tag("name") == "GrandHotel" and 45 < e.lat < 46)
        rests = [e for e in db.entities if e.matches("amenity", "restaurant") and e.id != hotel.id]
        best = min(rests, key=lambda e: (haversine((hotel.lat, hotel.lon), (e.lat, e.lon)), e.id))
        assert result == Answer.locations([(best.lat, best.lon)])

    def test_nonnumeric_distance_is_empty(self):
        db = paris_db()
        q = parse_mrl(
            "query(around(center(nwr(keyval('name','Gare'))),"
            "search(nwr(keyval('tourism','hotel'))),maxdist('sideways')),qtype(count))"
        )
        assert execute(q, db) is EMPTY_ANSWER


# ---------------------------------------------------------------------------
# Brute-force reference interpreter, written independently of the package
# pipeline: plain nested loops, its own haversine arrangement, its own
# constant table. Only the Answer container and its render method are shared.


class _Unresolvable(Exception):
    pass


_REF_DISTS = {"DIST_INTOWN": 2000.0, "DIST_OUTTOWN": 20000.0}


def _ref_haversine(p, q):
    lat1, lon1, lat2, lon2 = map(math.radians, (p[0], p[1], q[0], q[1]))
    s = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2.0 * 6371000.0 * math.atan2(math.sqrt(s), math.sqrt(max(0.0, 1.0 - s)))


def _ref_tag_value(e, key):
    for k, v in e.tags:
        if k == key:
            return v
    return None


def _ref_expr_ok(expr, e):
    if expr.op == "keyval":
        return _ref_tag_value(e, expr.children[0].text) == expr.children[1].text
    if expr.op == "and":
        for c in expr.children:
            if not _ref_expr_ok(c, e):
                return False
        return True
    if expr.op == "or":
        for c in expr.children:
            if _ref_expr_ok(c, e):
                return True
        return False
    raise AssertionError(expr.op)


def _ref_nwr_ok(nwr, e):
    for c in nwr.children:
        if not _ref_expr_ok(c, e):
            return False
    return True


def _ref_box(area_node, db):
    name = area_node.children[0].children[1].text
    if name not in db.areas:
        raise _Unresolvable
    return db.areas[name]


def _ref_in_box(e, box):
    return box.south <= e.lat <= box.north and box.west <= e.lon <= box.east


def _ref_in_half(e, box, direction):
    if not _ref_in_box(e, box):
        return False
    if direction == "north":
        return e.lat >= (box.south + box.north) / 2.0
    if direction == "south":
        return e.lat <= (box.south + box.north) / 2.0
    if direction == "east":
        return e.lon >= (box.west + box.east) / 2.0
    return e.lon <= (box.west + box.east) / 2.0


def _ref_positive_int(text):
    try:
        k = int(text)
    except ValueError:
        raise _Unresolvable from None
    if k < 1:
        raise _Unresolvable
    return k


def _ref_select(selectors, db):
    if len(selectors) == 1 and selectors[0].op == "around":
        around = selectors[0]
        center = around.children[0]
        refs = []
        for e in db.entities:
            keep = True
            for part in center.children:
                if part.op == "area":
                    keep = keep and _ref_in_box(e, _ref_box(part, db))
                else:
                    keep = keep and _ref_nwr_ok(part, e)
            if keep:
                refs.append(e)
        if not refs:
            raise _Unresolvable
        ref = refs[0]
        for e in refs[1:]:
            if e.id < ref.id:
                ref = e
        dist_text = around.children[2].children[0].text
        if dist_text in _REF_DISTS:
            radius = _REF_DISTS[dist_text]
        else:
            try:
                radius = float(dist_text)
            except ValueError:
                raise _Unresolvable from None
            if radius <= 0:
                raise _Unresolvable
        scored = []
        for e in db.entities:
            if e.id == ref.id:
                continue
            if _ref_nwr_ok(around.children[1].children[0], e):
                d = _ref_haversine((ref.lat, ref.lon), (e.lat, e.lon))
                if d <= radius:
                    scored.append((d, e.id, e))
        scored.sort(key=lambda t: (t[0], t[1]))
        if len(around.children) == 4:
            scored = scored[: _ref_positive_int(around.children[3].children[0].text)]
        return [e for _, _, e in scored]

    selected = []
    for e in db.entities:
        keep = True
        for sel in selectors:
            if sel.op == "area":
                keep = keep and _ref_in_box(e, _ref_box(sel, db))
            elif sel.op == "nwr":
                keep = keep and _ref_nwr_ok(sel, e)
            else:
                box = _ref_box(sel.children[0], db)
                keep = keep and _ref_in_half(e, box, sel.op) and _ref_nwr_ok(sel.children[1], e)
        if keep:
            selected.append(e)
    return selected


def _ref_project(arg, selected):
    if arg.op == "count":
        return Answer("count", len(selected))
    if arg.op == "latlong":
        if not selected:
            return Answer("empty", None)
        return Answer("locations", tuple(sorted((e.lat, e.lon) for e in selected)))
    if arg.op == "least":
        k = _ref_positive_int(arg.children[0].children[0].text)
        return Answer("exists", len(selected) >= k)
    key = arg.children[0].text
    vals = set()
    for e in selected:
        v = _ref_tag_value(e, key)
        if v is not None:
            vals.add(v)
    if not vals:
        return Answer("empty", None)
    return Answer("values", tuple(sorted(vals)))


def ref_execute(ast, db):
    try:
        selected = _ref_select(ast.children[:-1], db)
        parts = [_ref_project(a, selected) for a in ast.children[-1].children]
    except _Unresolvable:
        return Answer("empty", None)
    if len(parts) == 1:
        return parts[0]
    return Answer("values", tuple(sorted(f"{i}:{p.render()}" for i, p in enumerate(parts))))


def fuzz_pools():
    return QueryPools(
        areas=("Paris", "Lyon", "Nice", "Lille", "Atlantis"),
        tags=(
            ("tourism", "hotel"), ("tourism", "museum"), ("amenity", "restaurant"),
            ("amenity", "bank"), ("amenity", "cafe"), ("amenity", "parking"),
            ("shop", "bakery"), ("shop", "supermarket"), ("railway", "station"),
            ("leisure", "park"), ("highway", "bus_stop"), ("bogus", "nope"),
        ),
        keys=("name", "website", "cuisine", "wheelchair", "unobtainium"),
        dists=("DIST_INTOWN", "DIST_OUTTOWN", "1000", "15000", "bogus"),
        names=("CentralStation", "GrandHotel", "CityMuseum", "OldMarket", "NoSuchPlace"),
    )


def test_execute_matches_reference_interpreter():
    db = make_toy_db(0)
    rng = np.random.default_rng(11)
    pools = fuzz_pools()
    non_empty = 0
    for _ in range(300):
        ast = random_query_ast(rng, pools)
        got = execute(ast, db)
        want = ref_execute(ast, db)
        assert got == want, f"mismatch on {ast}"
        if not got.is_empty:
            non_empty += 1
    assert non_empty > 150  # the fuzz mix must exercise real answers


def test_execute_matches_reference_on_handmade_db():
    db = paris_db(4)
    rng = np.random.default_rng(12)
    pools = QueryPools(
        areas=("Paris", "Ghost"),
        tags=(("tourism", "hotel"), ("railway", "station"), ("shop", "none")),
        keys=("name", "tourism"),
        dists=("DIST_INTOWN", "DIST_OUTTOWN", "250000"),
        names=("Gare", "Missing"),
    )
    for _ in range(200):
        ast = random_query_ast(rng, pools)
        assert execute(ast, db) == ref_execute(ast, db)
