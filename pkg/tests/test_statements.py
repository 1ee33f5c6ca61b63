import numpy as np
import pytest

from banditparse.mrl import FuncNode, linearize, parse_mrl
from banditparse.randgen import random_query_ast
from banditparse.statements import (
    DEFAULT_DESCRIPTION,
    Marking,
    describe_tag,
    generate_statements,
    map_marking_to_token_rewards,
)

STATION_WEST = (
    "query(west(area(keyval('name','Paris')),nwr(keyval('railway','station'))),qtype(count))"
)


def stypes(block):
    return {s.stype for s in block.statements}


def by_stype(block, stype):
    return next(s for s in block.statements if s.stype == stype)


class TestTriggers:
    def test_station_west_example(self):
        block = generate_statements(parse_mrl(STATION_WEST))
        assert stypes(block) == {"Town", "POI", "QuestionType", "CardinalDirection"}
        assert by_stype(block, "Town").payload == (("name", "Paris"),)
        assert by_stype(block, "POI").payload == (("railway", "station"),)
        assert by_stype(block, "QuestionType").payload == ("count",)
        assert by_stype(block, "CardinalDirection").payload == ("west",)

    def test_full_around_query(self):
        q = parse_mrl(
            "query(around(center(area(keyval('name','Edinburgh'))),"
            "search(nwr(keyval('amenity','bank'))),maxdist('DIST_INTOWN'),topx('1')),"
            "qtype(latlong))"
        )
        block = generate_statements(q)
        assert stypes(block) == {
            "Town", "POI", "QuestionType",
            "ProximityAroundNear", "RestrictionClosest", "Distance",
        }
        assert by_stype(block, "POI").payload == (("amenity", "bank"),)
        assert by_stype(block, "Distance").payload == ("DIST_INTOWN",)

    def test_reference_point_from_center_tags(self):
        q = parse_mrl(
            "query(around(center(area(keyval('name','Paris')),nwr(keyval('name','Gare'))),"
            "search(nwr(keyval('tourism','hotel'))),maxdist('500')),qtype(count))"
        )
        block = generate_statements(q)
        assert "ReferencePoint" in stypes(block)
        assert by_stype(block, "ReferencePoint").payload == (("name", "Gare"),)
        assert "RestrictionClosest" not in stypes(block)

    def test_bar_count_has_exactly_two_statements(self):
        block = generate_statements(parse_mrl("query(nwr(keyval('amenity','bar')),qtype(count))"))
        assert [s.stype for s in block.statements] == ["POI", "QuestionType"]

    def test_question_type_always_fires(self):
        block = generate_statements(parse_mrl("query(qtype(count))"))
        assert stypes(block) == {"QuestionType"}


class TestMarkingMap:
    def test_all_yes(self):
        block = generate_statements(parse_mrl(STATION_WEST))
        marking = Marking.from_pairs([(i, "yes") for i in range(4)], 4)
        seq, rewards, covered = map_marking_to_token_rewards(block, marking)
        assert seq == 1
        assert rewards == [1] * 12
        assert covered == sorted(range(1, 12))

    def test_cardinal_no_zeroes_west_and_skeleton(self):
        block = generate_statements(parse_mrl(STATION_WEST))
        verdicts = []
        for i, s in enumerate(block.statements):
            verdicts.append((i, "no" if s.stype == "CardinalDirection" else "yes"))
        seq, rewards, _ = map_marking_to_token_rewards(block, Marking.from_pairs(verdicts, 4))
        toks = block.query.surfaces()
        assert seq == 0
        assert rewards[toks.index("west@2")] == 0
        assert rewards[toks.index("query@2")] == 0  # uncovered skeleton
        for surf in ("Paris@s", "name@0", "railway@0", "station@s", "count@0"):
            assert rewards[toks.index(surf)] == 1

    def test_single_statement_no_is_all_zeros(self):
        block = generate_statements(parse_mrl("query(qtype(count))"))
        seq, rewards, _ = map_marking_to_token_rewards(block, Marking.from_pairs([(0, "no")], 1))
        assert seq == 0
        assert rewards == [0, 0, 0]  # query@1 qtype@1 count@0

    def test_incomplete_marking_rejected(self):
        with pytest.raises(ValueError):
            Marking.from_pairs([(0, "yes")], 2)

    def test_duplicate_verdict_rejected(self):
        with pytest.raises(ValueError):
            Marking.from_pairs([(0, "yes"), (0, "no")], 2)

    def test_bad_verdict_rejected(self):
        with pytest.raises(ValueError):
            Marking.from_pairs([(0, "maybe")], 1)


class TestDescribeTag:
    def test_parking(self):
        assert describe_tag("amenity", "parking") == "A place for parking cars"

    def test_hotel_nonempty(self):
        text = describe_tag("tourism", "hotel")
        assert text and text != DEFAULT_DESCRIPTION

    def test_key_fallback(self):
        assert describe_tag("amenity", "zzz_unknown") == describe_tag("amenity")

    def test_unknown(self):
        assert describe_tag("zzz", "zzz") == DEFAULT_DESCRIPTION


# ---------------------------------------------------------------------------
# Independent trigger oracle: expected statement types derived from a plain
# tree scan, with no reference to the generator's walker.


def _ops(node):
    if isinstance(node, FuncNode):
        yield node.op
        for c in node.children:
            yield from _ops(c)


def expected_stypes(ast):
    ops = list(_ops(ast))
    has_around = "around" in ops
    want = {"QuestionType"}
    if "area" in ops:
        want.add("Town")
    if has_around:
        want.add("ProximityAroundNear")
        want.add("Distance")
        around = ast.children[0]
        center = around.children[0]
        if any(c.op == "nwr" for c in center.children):
            want.add("ReferencePoint")
        want.add("POI")  # search is always present under around
        if len(around.children) == 4 and around.children[3].children[0].text == "1":
            want.add("RestrictionClosest")
    else:
        # any nwr outside a center/search context marks the POI
        if "nwr" in ops:
            want.add("POI")
    if any(d in ops for d in ("north", "south", "east", "west")):
        want.add("CardinalDirection")
    return want


class TestProperties:
    def test_trigger_conformance_random(self):
        rng = np.random.default_rng(13)
        for _ in range(400):
            ast = random_query_ast(rng)
            block = generate_statements(ast)
            assert stypes(block) == expected_stypes(ast), ast

    def test_spans_disjoint_and_in_range(self):
        rng = np.random.default_rng(14)
        for _ in range(300):
            ast = random_query_ast(rng)
            block = generate_statements(ast)
            n = len(block.query)
            seen = set()
            for s in block.statements:
                assert s.token_span
                assert all(0 <= i < n for i in s.token_span)
                assert not (seen & s.token_span)
                seen |= s.token_span

    def test_span_surfaces_belong_to_statement(self):
        structural = {
            "Town": {"area", "keyval", "and", "or"},
            "ReferencePoint": {"nwr", "keyval", "and", "or"},
            "POI": {"nwr", "search", "keyval", "and", "or"},
            "QuestionType": {"qtype", "count", "latlong", "findkey", "least", "topx"},
            "ProximityAroundNear": {"around", "center"},
            "RestrictionClosest": {"topx", "1"},  # the construct is topx(1)
            "Distance": {"maxdist"},
            "CardinalDirection": {"north", "south", "east", "west"},
        }
        rng = np.random.default_rng(15)
        for _ in range(300):
            ast = random_query_ast(rng)
            block = generate_statements(ast)
            toks = [t.surface for t in block.query]
            for s in block.statements:
                payload_words = set()
                for p in s.payload:
                    if isinstance(p, tuple):
                        payload_words.update(p)
                    else:
                        payload_words.add(p)
                        # composite entries like findkey(name) carry words
                        payload_words.update(p.replace("(", " ").replace(")", " ").split())
                for i in s.token_span:
                    assert toks[i] in payload_words or toks[i] in structural[s.stype], (
                        s.stype, toks[i])

    def test_reward_vector_length_and_monotonicity(self):
        rng = np.random.default_rng(16)
        for _ in range(200):
            ast = random_query_ast(rng)
            block = generate_statements(ast)
            k = len(block.statements)
            yes = Marking.from_pairs([(i, "yes") for i in range(k)], k)
            _, base, _ = map_marking_to_token_rewards(block, yes)
            assert len(base) == len(linearize(ast))
            for flip in range(k):
                pairs = [(i, "no" if i == flip else "yes") for i in range(k)]
                _, flipped, _ = map_marking_to_token_rewards(block, Marking.from_pairs(pairs, k))
                assert all(f <= b for f, b in zip(flipped, base))
