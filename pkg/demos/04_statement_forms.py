"""Turn a parser output into a human-checkable statement form.

Instead of asking a user to read the query language, each aspect of the
query becomes one plain-language statement with Yes/No radio buttons.
Marking a statement No zeroes the reward for the tokens it covers;
tokens no statement covers take the conjunction of all verdicts.
"""

from banditparse.mrl import linearize, parse_mrl
from banditparse.statements import (
    Marking,
    describe_tag,
    generate_statements,
    map_marking_to_token_rewards,
)

ast = parse_mrl(
    "query(west(area(keyval('name','Paris')),nwr(keyval('railway','station'))),"
    "qtype(count))"
)
question = "How many stations are west of Paris?"
block = generate_statements(ast, question)

print("question:", question)
print("tokens:  ", " ".join(linearize(ast).surfaces()))
print()
for i, stmt in enumerate(block.statements):
    span = ",".join(str(j) for j in sorted(stmt.token_span))
    print(f"  [{i}] ({stmt.stype}) {stmt.display_text}  [tokens {span}]")

# tooltips explain raw OSM tags to non-experts
print()
print("tooltip railway=station:", describe_tag("railway", "station"))
print("tooltip amenity=parking:", describe_tag("amenity", "parking"))

# suppose the user says the direction is wrong but everything else holds
marking = Marking.from_pairs(
    [(0, "yes"), (1, "yes"), (2, "yes"), (3, "no")][: len(block.statements)],
    len(block.statements),
)
seq_reward, token_rewards, covered = map_marking_to_token_rewards(block, marking)
print()
print("verdicts:     ", marking.verdicts)
print("seq reward:   ", seq_reward)
print("token rewards:", token_rewards)
print("covered:      ", covered)
