"""Optimizer, schedule, and supervised-training tests."""

import numpy as np
import pytest

from banditparse.corpus import generate_corpus, split
from banditparse.geo import default_db
from banditparse.model import EOS
from banditparse.training import (
    Adadelta,
    TrainConfig,
    clip_gradients,
    desk_profile,
    evaluate_answer_f1,
    paper_profile,
    tokens_to_answer,
    train_supervised,
    training_pair,
)

DB = default_db()


def tiny_config(**overrides) -> TrainConfig:
    base = dict(
        embed_size=8, hidden_size=12, minibatch_size=4,
        validation_interval=10, max_updates=40, max_output_length=24,
        beam_size=2, seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(minibatch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(gradient_clip_norm=0.0)
    with pytest.raises(ValueError):
        TrainConfig(beam_size=0)


def test_profiles():
    assert desk_profile().hidden_size == 64
    assert desk_profile(max_updates=7).max_updates == 7
    paper = paper_profile()
    assert (paper.hidden_size, paper.embed_size) == (1024, 1000)
    assert (paper.minibatch_size, paper.validation_interval) == (80, 100)
    assert (paper.beam_size, paper.max_output_length) == (12, 200)
    assert paper.gradient_clip_norm == 1.0


def test_clip_gradients_scales_to_threshold():
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([[0.0, 4.0]])}
    norm = clip_gradients(grads, 1.0)
    assert norm == pytest.approx(5.0)
    clipped = np.sqrt(sum((g ** 2).sum() for g in grads.values()))
    assert clipped == pytest.approx(1.0)
    assert grads["a"][0] == pytest.approx(0.6)


def test_clip_gradients_leaves_small_gradients_alone():
    grads = {"a": np.array([0.3, 0.4])}
    norm = clip_gradients(grads, 1.0)
    assert norm == pytest.approx(0.5)
    assert np.allclose(grads["a"], [0.3, 0.4])


def test_adadelta_descends_quadratic():
    # Cold-started steps are near sqrt(eps) sized, so progress is slow
    # at first and accelerates as the step accumulator fills.
    params = {"x": np.array([5.0])}
    opt = Adadelta(params, rho=0.95, eps=1e-6)
    for _ in range(300):
        opt.step(params, {"x": params["x"].copy()})  # grad of 0.5 x^2
    assert 0.1 < abs(params["x"][0]) < 5.0
    for _ in range(1700):
        opt.step(params, {"x": params["x"].copy()})
    assert abs(params["x"][0]) < 1e-6


def test_training_pair_appends_end_symbol():
    ex = generate_corpus(DB, 1, seed=0)[0]
    src, tgt = training_pair(ex)
    assert src == [t.lower() for t in src]
    assert tgt[-1] == EOS
    assert all("@" in tok for tok in tgt[:-1])


def test_tokens_to_answer_handles_garbage():
    ex = generate_corpus(DB, 1, seed=0)[0]
    src, tgt = training_pair(ex)
    good = tokens_to_answer(tgt[:-1], DB)
    assert not good.is_empty
    assert tokens_to_answer(("query@1",), DB).is_empty
    assert tokens_to_answer((), DB).is_empty
    assert tokens_to_answer(("hello", "world"), DB).is_empty


def test_empty_supervised_set_rejected():
    with pytest.raises(ValueError):
        train_supervised([], [], DB, tiny_config())


@pytest.fixture(scope="module")
def small_run():
    examples = generate_corpus(DB, 60, seed=4)
    parts = split(examples, (24, 12, 12, 12), seed=0)
    config = tiny_config()
    return parts, config, train_supervised(parts.d_sup, parts.d_dev, DB, config)


def test_validation_cadence(small_run):
    _, config, result = small_run
    steps = [u for u, _ in result.validations]
    assert steps == [10, 20, 30, 40]


def test_returned_model_is_best_checkpoint(small_run):
    parts, config, result = small_run
    best = max(f1 for _, f1 in result.validations)
    assert result.best_f1 == best
    rescored = evaluate_answer_f1(result.model, parts.d_dev, DB, config)
    assert rescored.f1 == pytest.approx(result.best_f1)
    assert len(rescored.flags) == len(parts.d_dev)


def test_same_seed_reproduces_parameters(small_run):
    parts, config, first = small_run
    second = train_supervised(parts.d_sup, parts.d_dev, DB, config)
    for name, value in first.model.params.items():
        assert np.array_equal(value, second.model.params[name])
    assert first.validations == second.validations


def test_training_improves_dev_f1():
    examples = generate_corpus(DB, 120, seed=0)
    parts = split(examples, (50, 40, 0, 0), seed=0)
    config = desk_profile(seed=0, max_updates=300, validation_interval=50)
    result = train_supervised(parts.d_sup, parts.d_dev, DB, config)
    assert result.best_f1 > result.init_f1
