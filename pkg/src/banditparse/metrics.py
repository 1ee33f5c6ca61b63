"""Corpus-level answer accuracy metrics and a paired significance test.

Recall is the fraction of items whose predicted answer exactly equals
the gold answer. Precision uses the same correct count but divides by
the number of predictions that produced a non-empty answer, so a parser
that abstains (or emits unanswerable queries) is not charged on
precision for those items. F1 is the harmonic mean.
"""

from __future__ import annotations

import numpy as np

from .geo import Answer


def corpus_f1(predictions: list[Answer], golds: list[Answer]) -> dict:
    """Precision / recall / F1 over exact answer matches.

    Zero denominators yield zero for the affected metric; F1 is zero
    whenever either component is zero.
    """
    if len(predictions) != len(golds):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions vs {len(golds)} golds"
        )
    correct = sum(1 for p, g in zip(predictions, golds) if p == g)
    answered = sum(1 for p in predictions if not p.is_empty)
    recall = correct / len(golds) if golds else 0.0
    precision = correct / answered if answered else 0.0
    if precision + recall > 0.0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def correct_flags(predictions: list[Answer], golds: list[Answer]) -> np.ndarray:
    """Per-item 0/1 exact-match indicators, for significance testing."""
    if len(predictions) != len(golds):
        raise ValueError("length mismatch")
    return np.array([int(p == g) for p, g in zip(predictions, golds)], dtype=np.int64)


def approx_randomization_test(
    correct_flags_a, correct_flags_b, rounds: int = 10_000, seed: int = 0
) -> float:
    """Paired approximate randomization test on per-item correctness.

    Each round swaps the two systems' flags per item with probability
    one half and checks whether the shuffled mean-accuracy difference
    is at least as large as the observed one. The add-one estimator
    p = (c + 1) / (rounds + 1) keeps the p-value strictly positive.
    """
    a = np.asarray(correct_flags_a, dtype=np.float64)
    b = np.asarray(correct_flags_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("flag vectors must be 1-d and of equal length")
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    observed = abs(a.mean() - b.mean())
    rng = np.random.default_rng(seed)
    count = 0
    for _ in range(rounds):
        swap = rng.random(a.shape[0]) < 0.5
        a_shuf = np.where(swap, b, a)
        b_shuf = np.where(swap, a, b)
        if abs(a_shuf.mean() - b_shuf.mean()) >= observed - 1e-12:
            count += 1
    return (count + 1) / (rounds + 1)
