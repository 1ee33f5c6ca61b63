"""Improve a parser from its own logged outputs plus error markings.

The loop: decode the unlabeled pool once (the log), attach token-level
rewards by comparing to gold (here simulated; the HTTP service collects
the same signal from humans), then continue training on the log with a
counterfactual objective. No new gold trees are ever shown to the model.

This one runs the full desk-profile pipeline, so give it a minute or
two; the improvement only emerges with a decently sized log.
"""

from banditparse.corpus import DESK_SPLIT_SIZES, generate_corpus, split
from banditparse.counterfactual import (
    create_log,
    objective_dpm,
    objective_dpm_t,
    objective_dpm_t_osl,
    refresh_osl,
    simulate_feedback,
    train_counterfactual,
)
from banditparse.geo import default_db
from banditparse.training import desk_profile, evaluate_answer_f1, train_supervised

db = default_db()
examples = generate_corpus(db, sum(DESK_SPLIT_SIZES), seed=0)
parts = split(examples, DESK_SPLIT_SIZES, seed=0)
config = desk_profile(seed=0)

baseline = train_supervised(parts.d_sup, parts.d_dev, db, config).model
base_f1 = evaluate_answer_f1(baseline, parts.d_test, db, config).f1
print(f"baseline test F1 {base_f1:.3f}")

# one decode per pool question; outputs that do not form a tree are dropped
records, dropped = create_log(baseline, [ex.question for ex in parts.d_log], config)
print(f"log holds {len(records)} outputs ({dropped} malformed)")

gold = {ex.question: ex.gold_query for ex in parts.d_log}
marked = [simulate_feedback(r, gold[r.question]) for r in records]
fully = sum(r.seq_reward for r in marked)
partial = sum(1 for r in marked if any(r.token_rewards) and not r.seq_reward)
print(f"{fully} fully correct, {partial} partially correct")

# the estimators the objectives ascend, on the first few records:
# the token-level one keeps a learning signal even when no sequence is
# perfect, and the reweighted variant rescales it by the log's mean
# sequence probability so the numbers stay in a trainable range
sample = marked[:32]
osl = refresh_osl(baseline, marked)
dpm_v, _ = objective_dpm(sample, baseline)
t_v, _ = objective_dpm_t(sample, baseline)
t_osl_v, _ = objective_dpm_t_osl(sample, baseline, osl)
print(f"DPM value on 32 records:       {dpm_v:.3e}")
print(f"DPM+T value on 32 records:     {t_v:+.3f}")
print(f"DPM+T+OSL value on 32 records: {t_osl_v:+.3f}")

result = train_counterfactual(marked, "DPM+T+OSL", baseline, parts.d_dev, db, config)
cf_f1 = evaluate_answer_f1(result.model, parts.d_test, db, config).f1
print(f"after DPM+T+OSL: test F1 {cf_f1:.3f} ({cf_f1 - base_f1:+.3f} vs baseline)")
