"""Paired significance testing between two parser evaluations.

Answer F1 alone says nothing about whether a gap between two systems
could be shuffle luck. The approximate randomization test swaps the
two systems' per-question correctness flags at random and asks how
often the shuffled gap matches the observed one.
"""

import numpy as np

from banditparse.metrics import approx_randomization_test, correct_flags

rng = np.random.default_rng(11)
n = 300

# synthetic per-question outcomes for three systems over the same test
# set: A and B agree on most questions, C is plainly worse than A
gold = list(range(n))
system_a = [q if rng.random() < 0.55 else -1 for q in gold]
system_b = [a if rng.random() < 0.9 else (q if rng.random() < 0.5 else -2)
            for a, q in zip(system_a, gold)]
system_c = [q if rng.random() < 0.35 else -1 for q in gold]

flags_a = correct_flags(system_a, gold)
flags_b = correct_flags(system_b, gold)
flags_c = correct_flags(system_c, gold)
print(f"accuracy A {flags_a.mean():.3f}  B {flags_b.mean():.3f}  C {flags_c.mean():.3f}")

p_ab = approx_randomization_test(flags_a, flags_b, rounds=10_000, seed=0)
p_ac = approx_randomization_test(flags_a, flags_c, rounds=10_000, seed=0)
p_aa = approx_randomization_test(flags_a, flags_a, rounds=10_000, seed=0)
print(f"A vs B: p = {p_ab:.4f} (close systems, difference not significant)")
print(f"A vs C: p = {p_ac:.4f} (clear gap, significant)")
print(f"A vs A: p = {p_aa:.4f} (identical flags always tie)")

# the p-value is one-sided on the absolute mean difference, so the
# labels of the two systems do not matter
assert approx_randomization_test(flags_c, flags_a, rounds=1_000, seed=3) == \
    approx_randomization_test(flags_a, flags_c, rounds=1_000, seed=3)
print("swapping the argument order leaves the p-value unchanged")
