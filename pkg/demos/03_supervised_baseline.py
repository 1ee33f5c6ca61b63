"""Train a small supervised parser and watch it decode.

The parser is a GRU encoder/decoder with attention, written in numpy
with manual gradients and Adadelta updates. This demo trains at the
desk profile's dimensions on a few hundred pairs, which takes well
under a minute and yields a model that is right about parts of most
questions: exactly the situation token-level feedback is made for.
"""

from banditparse.corpus import generate_corpus, split, tokenize_question
from banditparse.geo import default_db
from banditparse.model import batch_beam_search
from banditparse.training import desk_profile, evaluate_answer_f1, train_supervised

db = default_db()
examples = generate_corpus(db, 650, seed=1)
parts = split(examples, (300, 150, 200, 0), seed=1)

config = desk_profile(seed=0, validation_interval=100)
result = train_supervised(parts.d_sup, parts.d_dev, db, config)
print(f"dev F1 went {result.init_f1:.3f} -> {result.best_f1:.3f} "
      f"(best at update {result.best_update})")
for update, f1 in result.validations:
    print(f"  update {update:4d}: dev F1 {f1:.3f}")

test = evaluate_answer_f1(result.model, parts.d_test, db, config)
print(f"test: precision {test.precision:.3f} recall {test.recall:.3f} "
      f"F1 {test.f1:.3f}")

# look at a few raw decodes: beam search returns (tokens, log probability)
questions = [ex.question for ex in parts.d_test[:3]]
beams = batch_beam_search(
    model=result.model,
    questions=[tokenize_question(q) for q in questions],
    beam_size=config.beam_size,
    max_len=config.max_output_length,
)
for question, hyps in zip(questions, beams):
    print()
    print(" q:", question)
    if hyps:
        tokens, logp = hyps[0]
        print(f" top-1 ({logp:7.2f}):", " ".join(tokens))
    else:
        print(" no finished hypothesis")
