"""Supervised parser training: optimizer, schedules, answer-level eval.

The trainer consumes question/query pairs, teaches the model to emit
the linearized query followed by the end symbol, and keeps the
checkpoint whose decoded answers score best on the development set.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import tokenize_question
from .geo import EMPTY_ANSWER, GeoDb, execute
from .metrics import correct_flags, corpus_f1
from .model import (
    EOS,
    ModelConfig,
    ParserModel,
    Vocab,
    batch_beam_search,
    cross_entropy,
)
from .mrl import MrlError, delinearize, linearize


@dataclass(frozen=True)
class TrainConfig:
    embed_size: int = 32
    hidden_size: int = 64
    minibatch_size: int = 16
    validation_interval: int = 25
    max_updates: int = 500
    max_output_length: int = 64
    gradient_clip_norm: float = 1.0
    rho: float = 0.95
    eps: float = 1e-6
    beam_size: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.minibatch_size < 1:
            raise ValueError("minibatch size must be at least 1")
        if self.gradient_clip_norm <= 0:
            raise ValueError("clip norm must be positive")
        if self.beam_size < 1:
            raise ValueError("beam size must be at least 1")
        if self.validation_interval < 1:
            raise ValueError("validation interval must be at least 1")


def desk_profile(seed: int = 0, **overrides) -> TrainConfig:
    """Small dimensions that train in seconds on a laptop."""
    return replace(TrainConfig(seed=seed), **overrides)


def paper_profile(seed: int = 0, **overrides) -> TrainConfig:
    """Full-scale dimensions; far too slow for routine test runs."""
    base = TrainConfig(
        embed_size=1000, hidden_size=1024, minibatch_size=80,
        validation_interval=100, max_updates=20_000, max_output_length=200,
        gradient_clip_norm=1.0, beam_size=12, seed=seed,
    )
    return replace(base, **overrides)


class Adadelta:
    """Per-parameter adaptive steps from running squared averages."""

    def __init__(self, params: dict, rho: float = 0.95, eps: float = 1e-6):
        self.rho = rho
        self.eps = eps
        self.sq_grad = {k: np.zeros_like(v) for k, v in params.items()}
        self.sq_step = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        """Descend every parameter along its gradient, in place."""
        rho, eps = self.rho, self.eps
        for name, g in grads.items():
            eg = self.sq_grad[name]
            eg *= rho
            eg += (1.0 - rho) * g * g
            ex = self.sq_step[name]
            dx = -np.sqrt(ex + eps) / np.sqrt(eg + eps) * g
            ex *= rho
            ex += (1.0 - rho) * dx * dx
            params[name] += dx


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Scale grads in place so their global norm is at most max_norm.

    Returns the pre-clip global norm.
    """
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def training_pair(example) -> tuple[list[str], list[str]]:
    """(source tokens, target tokens with the end symbol appended)."""
    return (
        tokenize_question(example.question),
        linearize(example.gold_query).surfaces() + [EOS],
    )


def build_vocabs(examples) -> tuple[Vocab, Vocab]:
    pairs = [training_pair(ex) for ex in examples]
    src = Vocab.from_corpus([x for x, _ in pairs])
    tgt = Vocab.from_corpus([y for _, y in pairs])
    return src, tgt


def decode_top1(model: ParserModel, questions, beam_size: int,
                max_len: int) -> list[tuple[str, ...]]:
    """Best decoded token sequence per question."""
    token_lists = [tokenize_question(q) for q in questions]
    results = batch_beam_search(model, token_lists, beam_size, max_len)
    return [tuple(hyps[0][0]) if hyps else () for hyps in results]


def tokens_to_answer(tokens, db: GeoDb):
    """Interpret decoded tokens; malformed sequences answer nothing."""
    try:
        ast = delinearize(list(tokens))
    except MrlError:
        return EMPTY_ANSWER
    return execute(ast, db)


@dataclass(frozen=True)
class EvalResult:
    precision: float
    recall: float
    f1: float
    flags: tuple  # per-example correctness, aligned with the input order


def evaluate_answer_f1(model: ParserModel, examples, db: GeoDb,
                       config: TrainConfig) -> EvalResult:
    decoded = decode_top1(
        model, [ex.question for ex in examples],
        config.beam_size, config.max_output_length,
    )
    predictions = [tokens_to_answer(tokens, db) for tokens in decoded]
    golds = [execute(ex.gold_query, db) for ex in examples]
    scores = corpus_f1(predictions, golds)
    flags = tuple(bool(f) for f in correct_flags(predictions, golds))
    return EvalResult(scores["precision"], scores["recall"], scores["f1"], flags)


@dataclass
class TrainResult:
    model: ParserModel
    init_f1: float
    validations: tuple  # ((update index, dev f1), ...)
    best_update: int
    best_f1: float


def _run_updates(model, pairs, opt, config, rng, evaluate, init_f1,
                 grad_fn=None, on_validate=None):
    """Shared minibatch loop.

    ``evaluate`` scores the current model, ``grad_fn(model, batch)``
    supplies descent gradients (plain cross-entropy when omitted), and
    ``on_validate`` runs right after each validation. The starting
    parameters count as the update-0 checkpoint with score ``init_f1``,
    so a run that never improves on them hands them back.
    """
    if grad_fn is None:
        grad_fn = _compute_grads
    best_f1 = init_f1
    best_update = 0
    best_params = {k: v.copy() for k, v in model.params.items()}
    validations = []
    order: list[int] = []
    update = 0
    while update < config.max_updates:
        if not order:
            order = list(rng.permutation(len(pairs)))
        take = order[: config.minibatch_size]
        del order[: config.minibatch_size]
        batch = [pairs[i] for i in take]
        grads = grad_fn(model, batch)
        clip_gradients(grads, config.gradient_clip_norm)
        opt.step(model.params, grads)
        update += 1
        if update % config.validation_interval == 0:
            f1 = evaluate(model)
            validations.append((update, f1))
            if f1 > best_f1:
                best_f1 = f1
                best_update = update
                best_params = {k: v.copy() for k, v in model.params.items()}
            if on_validate is not None:
                on_validate(model)
    if validations:
        model.params = best_params
    return model, tuple(validations), best_update, best_f1


def _compute_grads(model, batch):
    _, grads = cross_entropy(model, batch)
    return grads


def train_supervised(d_sup, d_dev, db: GeoDb,
                     config: TrainConfig) -> TrainResult:
    """Teach a fresh model the supervised pairs.

    Validation runs after every config.validation_interval updates and
    the parameters from the best-scoring validation are returned. When
    no validation fires (fewer updates than one interval) the final
    parameters stand.
    """
    if not d_sup:
        raise ValueError("empty supervised set")
    rng = np.random.default_rng(config.seed)
    src_vocab, tgt_vocab = build_vocabs(d_sup)
    model = ParserModel(
        src_vocab, tgt_vocab,
        ModelConfig(config.embed_size, config.hidden_size, config.seed),
    )
    pairs = [training_pair(ex) for ex in d_sup]
    opt = Adadelta(model.params, config.rho, config.eps)
    init_f1 = evaluate_answer_f1(model, d_dev, db, config).f1

    def score(m):
        return evaluate_answer_f1(m, d_dev, db, config).f1

    model, validations, best_update, best_f1 = _run_updates(
        model, pairs, opt, config, rng, score, init_f1,
    )
    return TrainResult(model, init_f1, validations, best_update, best_f1)
