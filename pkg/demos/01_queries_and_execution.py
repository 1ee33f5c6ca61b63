"""Parse a geographic query, linearize it for a parser, and execute it.

The query language is a small functional MRL: a query names an area, a
set of OSM-style tag filters, and a question type. Sequence models do
not emit trees, so trees are flattened into a pre-order token sequence
with explicit arities (the @2/@1/@0/@s suffixes) that rebuilds exactly
one tree.
"""

from banditparse.geo import default_db, execute
from banditparse.mrl import delinearize, linearize, parse_mrl, serialize_mrl

db = default_db()

text = "query(area(keyval('name','Paris')),nwr(keyval('amenity','bank')),qtype(count))"
ast = parse_mrl(text)
print("parsed: ", serialize_mrl(ast))

# the linearized form is what the neural parser actually produces
linear = linearize(ast)
print("tokens: ", " ".join(linear.surfaces()))

# arity markers make the flattening reversible
rebuilt = delinearize(linear)
assert serialize_mrl(rebuilt) == text
print("round trip ok")

answer = execute(ast, db)
print("how many banks in Paris ->", answer.render())

# a proximity query: hotels within walking distance of a landmark
near = parse_mrl(
    "query(around(center(area(keyval('name','Paris')),nwr(keyval('name','OldMarket'))),"
    "search(nwr(keyval('tourism','hotel'))),maxdist('DIST_INTOWN')),qtype(latlong))"
)
print("hotels near the OldMarket ->", execute(near, db).render())

# question types share the same skeleton: swap qtype(count) for qtype(latlong),
# qtype(least(topx('1'))) (existence), or qtype(findkey('website'))
exists = parse_mrl(
    "query(area(keyval('name','Lille')),nwr(keyval('shop','bakery')),"
    "qtype(least(topx('1'))))"
)
print("is there a bakery in Lille ->", execute(exists, db).render())
