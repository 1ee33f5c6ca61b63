"""Sample a question corpus from templates over the builtin database.

Every example pairs a natural-language question with a gold query whose
answer on the database is non-empty. Question texts are unique, so a
question always identifies its gold query; that is what later lets us
score a logged parser output against the example it came from.
"""

from banditparse.corpus import generate_corpus, split
from banditparse.geo import default_db, execute
from banditparse.mrl import serialize_mrl

db = default_db()
examples = generate_corpus(db, 400, seed=7)
print(f"generated {len(examples)} examples")

for ex in examples[:5]:
    print()
    print(" q:", ex.question)
    print(" m:", serialize_mrl(ex.gold_query))
    print(" a:", execute(ex.gold_query, db).render())

# four disjoint portions: supervised seed data, validation, test, and the
# large unlabeled pool the parser will be logged on
parts = split(examples, (60, 40, 60, 240), seed=7)
print()
print("split sizes:", len(parts.d_sup), len(parts.d_dev), len(parts.d_test),
      len(parts.d_log))
