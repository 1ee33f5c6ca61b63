"""Learning from logged feedback: estimators, reweighting, training.

A log holds one parser output per question together with binary
rewards, sequence-level and token-level. The estimators reward the
model for probability it puts on positively marked material:

- the sequence-level estimator averages reward times sequence
  probability over the minibatch,
- its reweighted variant divides by the mean sequence probability of
  the whole log under snapshot parameters, which both debiases the
  multiplicative estimate and lifts the vanishingly small gradients
  that adaptive optimizers otherwise leave frozen,
- the token-level estimator sums log-probabilities of tokens marked
  correct, ignoring the rest,
- and the bandit-to-supervised conversion simply treats fully correct
  outputs as extra gold pairs.

Sequence probabilities include the terminal end symbol; token rewards
cover exactly the logged tokens, so the end-symbol position carries no
token-level weight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .corpus import tokenize_question
from .geo import GeoDb
from .model import EOS, ParserModel, batch_beam_search, cross_entropy, score_batch
from .mrl import MrlError, delinearize, linearize
from .training import Adadelta, TrainConfig, TrainResult, _run_updates, evaluate_answer_f1

OBJECTIVES = ("DPM", "DPM+OSL", "DPM+T", "DPM+T+OSL", "B2S")

_SCORE_CHUNK = 256  # records per forward pass when scoring a whole log


@dataclass(frozen=True)
class FeedbackRecord:
    """One logged output with (possibly pending) reward annotations."""

    question: str
    tokens: tuple
    propensity: float = 1.0
    seq_reward: int | None = None
    token_rewards: tuple | None = None
    covered: tuple | None = None
    source: str = "simulated"
    timing_seconds: float | None = None

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("record holds no tokens")
        if not 0.0 < self.propensity <= 1.0:
            raise ValueError("propensity must lie in (0, 1]")
        if self.seq_reward is not None and self.seq_reward not in (0, 1):
            raise ValueError("sequence reward must be 0 or 1")
        if self.token_rewards is not None:
            if len(self.token_rewards) != len(self.tokens):
                raise ValueError(
                    "need one token reward per token, got "
                    f"{len(self.token_rewards)} for {len(self.tokens)}"
                )
            if any(r not in (0, 1) for r in self.token_rewards):
                raise ValueError("token rewards must be 0 or 1")
        if self.covered is not None:
            bad = [i for i in self.covered if not 0 <= i < len(self.tokens)]
            if bad:
                raise ValueError(f"covered indices out of range: {bad}")

    @property
    def has_rewards(self) -> bool:
        return self.seq_reward is not None and self.token_rewards is not None


def record_to_json(record: FeedbackRecord) -> str:
    payload = {
        "question": record.question,
        "tokens": list(record.tokens),
        "propensity": record.propensity,
        "seq_reward": record.seq_reward,
        "token_rewards": (
            None if record.token_rewards is None else list(record.token_rewards)
        ),
        "covered": None if record.covered is None else list(record.covered),
        "source": record.source,
        "timing_seconds": record.timing_seconds,
    }
    return json.dumps(payload, ensure_ascii=False)


def record_from_json(line: str) -> FeedbackRecord:
    raw = json.loads(line)
    return FeedbackRecord(
        question=raw["question"],
        tokens=tuple(raw["tokens"]),
        propensity=raw["propensity"],
        seq_reward=raw["seq_reward"],
        token_rewards=(
            None if raw["token_rewards"] is None else tuple(raw["token_rewards"])
        ),
        covered=None if raw["covered"] is None else tuple(raw["covered"]),
        source=raw["source"],
        timing_seconds=raw["timing_seconds"],
    )


def save_log(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_json(record) + "\n")


def append_record(path, record: FeedbackRecord) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(record_to_json(record) + "\n")


def load_log(path) -> list[FeedbackRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_from_json(line))
    return out


# ---------------------------------------------------------------------------
# Log creation and simulated feedback


def create_log(model: ParserModel, questions, config: TrainConfig,
               source: str = "simulated"):
    """Decode one output per question; keep the well-formed ones.

    Returns (records, dropped) where dropped counts outputs that do not
    delinearize into a query tree. Rewards are left unset.
    """
    decoded = batch_beam_search(
        model, [tokenize_question(q) for q in questions],
        config.beam_size, config.max_output_length,
    )
    records = []
    dropped = 0
    for question, hyps in zip(questions, decoded):
        tokens = tuple(hyps[0][0]) if hyps else ()
        try:
            delinearize(list(tokens))
        except MrlError:
            dropped += 1
            continue
        records.append(FeedbackRecord(question, tokens, 1.0, source=source))
    return records, dropped


def simulate_feedback(record: FeedbackRecord, gold_query) -> FeedbackRecord:
    """Positional token match against the gold query's linearization."""
    gold = linearize(gold_query).surfaces()
    tokens = record.tokens
    token_rewards = tuple(
        int(j < len(gold) and tokens[j] == gold[j]) for j in range(len(tokens))
    )
    seq_reward = int(list(tokens) == gold)
    return replace(
        record,
        seq_reward=seq_reward,
        token_rewards=token_rewards,
        covered=tuple(range(len(tokens))),
    )


def b2s_extract(log) -> list[tuple[str, tuple]]:
    """Fully correct records become plain supervised pairs."""
    pairs = []
    for record in log:
        if record.seq_reward is None:
            raise ValueError("record has no sequence reward yet")
        if record.seq_reward == 1:
            pairs.append((record.question, record.tokens))
    return pairs


# ---------------------------------------------------------------------------
# Estimator arithmetic on plain numbers


def dpm_value(rewards, probs) -> float:
    """Mean of reward times sequence probability."""
    rewards = np.asarray(rewards, dtype=float)
    probs = np.asarray(probs, dtype=float)
    return float((rewards * probs).mean())


def dpm_r_value(rewards, probs) -> float:
    """Self-normalized variant: reweighted over the same sample."""
    rewards = np.asarray(rewards, dtype=float)
    probs = np.asarray(probs, dtype=float)
    total = probs.sum()
    if total <= 0.0:
        raise ValueError("all sequence probabilities are zero")
    return float((rewards * probs).sum() / total)


def dpm_osl_value(rewards, probs, z: float) -> float:
    if z <= 0.0:
        raise ValueError("reweighting denominator must be positive")
    return dpm_value(rewards, probs) / z


def dpm_t_value(token_rewards, token_logprobs) -> float:
    """Mean over records of the reward-weighted token log-prob sum."""
    total = 0.0
    for rewards, logps in zip(token_rewards, token_logprobs):
        total += float(np.dot(np.asarray(rewards, float), np.asarray(logps, float)))
    return total / len(token_rewards)


def dpm_t_osl_value(token_rewards, token_logprobs, z: float) -> float:
    if z <= 0.0:
        raise ValueError("reweighting denominator must be positive")
    return dpm_t_value(token_rewards, token_logprobs) / z


# ---------------------------------------------------------------------------
# Model-facing objectives (value plus ascent gradients)


def _record_batch(records) -> list[tuple[list[str], list[str]]]:
    return [
        (tokenize_question(r.question), list(r.tokens) + [EOS]) for r in records
    ]


def _require_rewards(records) -> None:
    for r in records:
        if not r.has_rewards:
            raise ValueError(f"record lacks rewards: {r.question!r}")


def log_seq_probs(model: ParserModel, records) -> np.ndarray:
    """Sequence probability (with end symbol) of each logged output."""
    probs = []
    for start in range(0, len(records), _SCORE_CHUNK):
        chunk = records[start:start + _SCORE_CHUNK]
        logp, _ = score_batch(model, _record_batch(chunk))
        probs.extend(np.exp(logp.sum(axis=1)))
    return np.array(probs)


def objective_dpm(records, model: ParserModel):
    """Sequence-level estimator over a minibatch.

    The gradient pushes probability toward rewarded sequences through
    the identity grad(r * p) = r * p * grad(log p).
    """
    _require_rewards(records)
    batch = _record_batch(records)
    rewards = np.array([r.seq_reward for r in records], dtype=float)
    logp, _ = score_batch(model, batch)
    probs = np.exp(logp.sum(axis=1))
    value = dpm_value(rewards, probs)
    m = len(records)
    weights = np.zeros_like(logp)
    for i, (_, y) in enumerate(batch):
        weights[i, : len(y)] = rewards[i] * probs[i] / m
    if not weights.any():
        return value, {k: np.zeros_like(v) for k, v in model.params.items()}
    _, grads = score_batch(model, batch, weights=weights)
    return value, grads


def objective_dpm_r(log, model: ParserModel) -> float:
    """Self-normalized estimator over the full log; value only."""
    _require_rewards(log)
    rewards = [r.seq_reward for r in log]
    probs = log_seq_probs(model, log)
    return dpm_r_value(rewards, probs)


@dataclass(frozen=True)
class OslState:
    """Snapshot parameters and the mean log probability they assign."""

    params: dict
    z: float
    size: int

    def __post_init__(self):
        if self.z <= 0.0:
            raise ValueError("reweighting denominator must be positive")


def refresh_osl(model: ParserModel, log) -> OslState:
    """Snapshot current parameters and rescore the entire log."""
    if not log:
        raise ValueError("cannot reweight over an empty log")
    z = float(log_seq_probs(model, log).mean())
    params = {k: v.copy() for k, v in model.params.items()}
    return OslState(params, z, len(log))


def objective_dpm_osl(records, model: ParserModel, osl: OslState):
    value, grads = objective_dpm(records, model)
    for g in grads.values():
        g /= osl.z
    return value / osl.z, grads


def objective_dpm_t(records, model: ParserModel):
    """Token-level estimator: rewarded tokens contribute their
    log-probability, unrewarded tokens contribute nothing."""
    _require_rewards(records)
    batch = _record_batch(records)
    m = len(records)
    T = max(len(y) for _, y in batch)
    weights = np.zeros((m, T))
    for i, record in enumerate(records):
        n = len(record.tokens)
        weights[i, :n] = np.asarray(record.token_rewards, dtype=float) / m
        # the appended end symbol carries no token reward
    if not weights.any():
        return 0.0, {k: np.zeros_like(v) for k, v in model.params.items()}
    logp, grads = score_batch(model, batch, weights=weights)
    value = float((weights * logp).sum())
    return value, grads


def objective_dpm_t_osl(records, model: ParserModel, osl: OslState):
    value, grads = objective_dpm_t(records, model)
    for g in grads.values():
        g /= osl.z
    return value / osl.z, grads


# ---------------------------------------------------------------------------
# Counterfactual training loop


def train_counterfactual(log, objective: str, baseline: ParserModel,
                         d_dev, db: GeoDb, config: TrainConfig) -> TrainResult:
    """Continue training the baseline parser from logged feedback.

    Ascends the chosen estimator (B2S descends plain cross-entropy on
    the fully correct subset). Reweighted objectives refresh their
    denominator over the whole log after every validation. Returns the
    checkpoint with the best development answer F1.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    if not log:
        raise ValueError("empty feedback log")
    _require_rewards(log)
    model = baseline.clone()
    rng = np.random.default_rng(config.seed)
    opt = Adadelta(model.params, config.rho, config.eps)
    init_f1 = evaluate_answer_f1(model, d_dev, db, config).f1

    if objective == "B2S":
        pairs = b2s_extract(log)
        if not pairs:
            raise ValueError(
                "no fully correct records in the log; nothing to convert "
                "to supervised pairs"
            )
        items = [(tokenize_question(q), list(tokens) + [EOS]) for q, tokens in pairs]

        def grad_fn(m, batch):
            _, grads = cross_entropy(m, batch)
            return grads

        on_validate = None
    else:
        items = list(log)
        osl_box = {}
        if objective.endswith("OSL"):
            osl_box["state"] = refresh_osl(model, log)

        def grad_fn(m, batch):
            if objective == "DPM":
                _, grads = objective_dpm(batch, m)
            elif objective == "DPM+OSL":
                _, grads = objective_dpm_osl(batch, m, osl_box["state"])
            elif objective == "DPM+T":
                _, grads = objective_dpm_t(batch, m)
            else:
                _, grads = objective_dpm_t_osl(batch, m, osl_box["state"])
            return {k: -g for k, g in grads.items()}  # ascent via descent

        def on_validate(m):
            if objective.endswith("OSL"):
                osl_box["state"] = refresh_osl(m, log)

    def score(m):
        return evaluate_answer_f1(m, d_dev, db, config).f1

    model, validations, best_update, best_f1 = _run_updates(
        model, items, opt, config, rng, score, init_f1,
        grad_fn=grad_fn, on_validate=on_validate,
    )
    return TrainResult(model, init_f1, validations, best_update, best_f1)
