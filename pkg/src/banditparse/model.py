"""Sequence-to-sequence parser: GRU encoder, GRU decoder, bilinear
attention, all in double-precision numpy with hand-written backprop.

The model maps a question token sequence to a distribution over target
token sequences, factorized stepwise: the probability of an output
sequence is the product of per-step softmax probabilities. Scoring
functions operate on exactly the tokens they are given; callers that
want the probability of a complete, properly terminated sequence append
the end-of-sequence symbol themselves.

The one backward pass computes the gradient of

    S = sum over batch items and steps of  w[b, t] * log p(y[b, t])

for an arbitrary weight matrix ``w``. Cross-entropy training and all
the reward-weighted objectives are instances of this with different
weights, since d(c * p)/dw = c * p * dlog(p)/dw for p held by the model.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
SPECIALS = (PAD, UNK, BOS, EOS)


class Vocab:
    """Dense token-index map with fixed special symbols at the front."""

    def __init__(self, tokens):
        self.tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate tokens")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.pad = self.index[PAD]
        self.unk = self.index[UNK]
        self.bos = self.index[BOS]
        self.eos = self.index[EOS]

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_corpus(cls, sequences) -> "Vocab":
        seen = set()
        for seq in sequences:
            seen.update(seq)
        return cls(sorted(seen))

    def encode(self, tokens) -> list[int]:
        return [self.index.get(t, self.unk) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t in self.tokens:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
        if tokens[: len(SPECIALS)] != list(SPECIALS):
            raise ValueError("vocabulary file does not start with the special symbols")
        return cls(tokens[len(SPECIALS):])


@dataclass(frozen=True)
class ModelConfig:
    embed_size: int
    hidden_size: int
    seed: int = 0


NEG_INF = -1e30


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class ParserModel:
    """Parameter container plus the source and target vocabularies."""

    def __init__(self, src_vocab: Vocab, tgt_vocab: Vocab, config: ModelConfig,
                 params: dict | None = None):
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.config = config
        self.params = params if params is not None else self._init_params()

    def _init_params(self) -> dict:
        rng = np.random.default_rng(self.config.seed)
        E, H = self.config.embed_size, self.config.hidden_size
        Vs, Vt = len(self.src_vocab), len(self.tgt_vocab)

        def mat(rows, cols):
            bound = 1.0 / np.sqrt(rows)
            return rng.uniform(-bound, bound, size=(rows, cols))

        p = {"src_emb": mat(Vs, E), "tgt_emb": mat(Vt, E)}
        for pre in ("e_", "d_"):
            for gate in ("z", "r", "h"):
                p[f"{pre}W{gate}"] = mat(E, H)
                p[f"{pre}U{gate}"] = mat(H, H)
                p[f"{pre}b{gate}"] = np.zeros(H)
        p["bridge_W"] = mat(H, H)
        p["bridge_b"] = np.zeros(H)
        p["att_W"] = mat(H, H)
        p["out_W1"] = mat(2 * H, H)
        p["out_b1"] = np.zeros(H)
        p["out_W2"] = mat(H, Vt)
        p["out_b2"] = np.zeros(Vt)
        return p

    def clone(self) -> "ParserModel":
        return ParserModel(
            self.src_vocab, self.tgt_vocab, self.config,
            {k: v.copy() for k, v in self.params.items()},
        )

    def zero_grads(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.params.items()}


def _gru_step(p, pre, x, h):
    z = _sigmoid(x @ p[pre + "Wz"] + h @ p[pre + "Uz"] + p[pre + "bz"])
    r = _sigmoid(x @ p[pre + "Wr"] + h @ p[pre + "Ur"] + p[pre + "br"])
    hc = np.tanh(x @ p[pre + "Wh"] + (r * h) @ p[pre + "Uh"] + p[pre + "bh"])
    h_new = (1.0 - z) * h + z * hc
    return h_new, (x, h, z, r, hc)


def _gru_backward(p, grads, pre, cache, dh):
    x, h_prev, z, r, hc = cache
    dz = dh * (hc - h_prev)
    dhc = dh * z
    dh_prev = dh * (1.0 - z)
    dhc_pre = dhc * (1.0 - hc * hc)
    grads[pre + "Wh"] += x.T @ dhc_pre
    grads[pre + "bh"] += dhc_pre.sum(axis=0)
    rh = r * h_prev
    grads[pre + "Uh"] += rh.T @ dhc_pre
    drh = dhc_pre @ p[pre + "Uh"].T
    dr = drh * h_prev
    dh_prev = dh_prev + drh * r
    dz_pre = dz * z * (1.0 - z)
    dr_pre = dr * r * (1.0 - r)
    grads[pre + "Wz"] += x.T @ dz_pre
    grads[pre + "bz"] += dz_pre.sum(axis=0)
    grads[pre + "Uz"] += h_prev.T @ dz_pre
    grads[pre + "Wr"] += x.T @ dr_pre
    grads[pre + "br"] += dr_pre.sum(axis=0)
    grads[pre + "Ur"] += h_prev.T @ dr_pre
    dh_prev = dh_prev + dz_pre @ p[pre + "Uz"].T + dr_pre @ p[pre + "Ur"].T
    dx = dz_pre @ p[pre + "Wz"].T + dr_pre @ p[pre + "Wr"].T + dhc_pre @ p[pre + "Wh"].T
    return dh_prev, dx


def _pad_batch(seqs: list[list[int]], pad: int):
    n = max(len(s) for s in seqs)
    ids = np.full((len(seqs), n), pad, dtype=np.int64)
    mask = np.zeros((len(seqs), n))
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = 1.0
    return ids, mask


def _encode(model: ParserModel, X, src_mask):
    p = model.params
    B, S = X.shape
    emb = p["src_emb"][X]
    h = np.zeros((B, model.config.hidden_size))
    hs = np.empty((B, S, model.config.hidden_size))
    steps = []
    for t in range(S):
        h_new, cache = _gru_step(p, "e_", emb[:, t], h)
        m = src_mask[:, t : t + 1]
        h = m * h_new + (1.0 - m) * h
        steps.append(cache)
        hs[:, t] = h
    s0_pre = h @ p["bridge_W"] + p["bridge_b"]
    s0 = np.tanh(s0_pre)
    return hs, s0, {"X": X, "mask": src_mask, "steps": steps, "s0": s0, "h_last": h}


def _attend(p, s, hs, src_mask):
    a = s @ p["att_W"]
    scores = np.einsum("bh,bsh->bs", a, hs)
    scores = np.where(src_mask > 0, scores, NEG_INF)
    alpha = np.exp(scores - scores.max(axis=1, keepdims=True))
    alpha = alpha / alpha.sum(axis=1, keepdims=True)
    ctx = np.einsum("bs,bsh->bh", alpha, hs)
    return a, alpha, ctx


def _output_logits(p, s, ctx):
    so = np.concatenate([s, ctx], axis=1)
    o = np.tanh(so @ p["out_W1"] + p["out_b1"])
    logits = o @ p["out_W2"] + p["out_b2"]
    return so, o, logits


def _decode_teacher(model, s0, hs, src_mask, Y_in):
    p = model.params
    B, T = Y_in.shape
    s = s0
    logps = np.empty((B, T, len(model.tgt_vocab)))
    steps = []
    for t in range(T):
        x = p["tgt_emb"][Y_in[:, t]]
        s_new, gru_cache = _gru_step(p, "d_", x, s)
        a, alpha, ctx = _attend(p, s_new, hs, src_mask)
        so, o, logits = _output_logits(p, s_new, ctx)
        logps[:, t] = _log_softmax(logits)
        steps.append((gru_cache, s_new, a, alpha, ctx, so, o))
        s = s_new
    return logps, steps


def score_batch(model: ParserModel, batch, weights=None):
    """Teacher-forced log-probabilities, optionally with gradients.

    ``batch`` is a list of (source tokens, target tokens) pairs; scoring
    covers exactly the target tokens given. Returns (logp, grads) where
    ``logp`` is a (B, max_T) matrix of per-token log-probabilities with
    zeros past each sequence end, and ``grads``, present when a weight
    matrix is supplied, is the gradient of sum(weights * logp) with
    respect to every parameter. Weights beyond a target's length must
    be zero; the matrix may be shorter-rank broadcastable (B, T).
    """
    if not batch:
        raise ValueError("empty batch")
    xs = [model.src_vocab.encode(x) for x, _ in batch]
    ys = [model.tgt_vocab.encode(y) for _, y in batch]
    if any(len(x) == 0 for x in xs) or any(len(y) == 0 for y in ys):
        raise ValueError("empty sequence in batch")
    X, src_mask = _pad_batch(xs, model.src_vocab.pad)
    Y, tgt_mask = _pad_batch(ys, model.tgt_vocab.pad)
    bos = np.full((len(ys), 1), model.tgt_vocab.bos, dtype=np.int64)
    Y_in = np.concatenate([bos, Y[:, :-1]], axis=1)

    hs, s0, enc_cache = _encode(model, X, src_mask)
    logps_full, dec_steps = _decode_teacher(model, s0, hs, src_mask, Y_in)
    B, T = Y.shape
    rows = np.arange(B)[:, None]
    logp = logps_full[rows, np.arange(T)[None, :], Y] * tgt_mask

    if weights is None:
        return logp, None

    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (B, T):
        raise ValueError(f"weights shape {w.shape} does not match batch {(B, T)}")
    if np.any((w != 0.0) & (tgt_mask == 0.0)):
        raise ValueError("nonzero weight on a padding position")

    p = model.params
    grads = model.zero_grads()
    H = model.config.hidden_size
    dh_enc = np.zeros_like(hs)
    ds_carry = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        gru_cache, s_new, a, alpha, ctx, so, o = dec_steps[t]
        probs = np.exp(logps_full[:, t])
        dlogits = -w[:, t : t + 1] * probs
        dlogits[rows[:, 0], Y[:, t]] += w[:, t]
        grads["out_W2"] += o.T @ dlogits
        grads["out_b2"] += dlogits.sum(axis=0)
        du = (dlogits @ p["out_W2"].T) * (1.0 - o * o)
        grads["out_W1"] += so.T @ du
        grads["out_b1"] += du.sum(axis=0)
        dso = du @ p["out_W1"].T
        ds = dso[:, :H] + ds_carry
        dctx = dso[:, H:]
        dalpha = np.einsum("bh,bsh->bs", dctx, hs)
        dh_enc += alpha[:, :, None] * dctx[:, None, :]
        dscores = alpha * (dalpha - (dalpha * alpha).sum(axis=1, keepdims=True))
        da = np.einsum("bs,bsh->bh", dscores, hs)
        dh_enc += dscores[:, :, None] * a[:, None, :]
        ds = ds + da @ p["att_W"].T
        grads["att_W"] += s_new.T @ da
        ds_carry, dx = _gru_backward(p, grads, "d_", gru_cache, ds)
        np.add.at(grads["tgt_emb"], Y_in[:, t], dx)

    s0_grad = ds_carry * (1.0 - enc_cache["s0"] ** 2)
    grads["bridge_W"] += enc_cache["h_last"].T @ s0_grad
    grads["bridge_b"] += s0_grad.sum(axis=0)
    dh = s0_grad @ p["bridge_W"].T
    S = X.shape[1]
    for t in range(S - 1, -1, -1):
        dh = dh + dh_enc[:, t]
        m = src_mask[:, t : t + 1]
        dh_prev_keep = (1.0 - m) * dh
        dh_step, dx = _gru_backward(p, grads, "e_", enc_cache["steps"][t], m * dh)
        dh = dh_prev_keep + dh_step
        np.add.at(grads["src_emb"], X[:, t], m * dx)
    return logp, grads


def token_logprobs(model: ParserModel, x_tokens, y_tokens) -> np.ndarray:
    """Per-token conditional log-probabilities for one pair."""
    logp, _ = score_batch(model, [(list(x_tokens), list(y_tokens))])
    return logp[0, : len(y_tokens)]


def seq_prob(model: ParserModel, x_tokens, y_tokens) -> float:
    """Product of the per-token probabilities of exactly these tokens."""
    return float(np.exp(token_logprobs(model, x_tokens, y_tokens).sum()))


def cross_entropy(model: ParserModel, batch, want_grads: bool = True):
    """Mean negated log-likelihood of the batch targets.

    Returns (loss, grads); grads are for descent on the loss and are
    None when not requested.
    """
    lengths = [len(y) for _, y in batch]
    T = max(lengths)
    w = np.zeros((len(batch), T))
    for i, n in enumerate(lengths):
        w[i, :n] = -1.0 / len(batch)
    logp, grads = score_batch(model, batch, weights=w if want_grads else None)
    loss = -logp.sum() / len(batch)
    return loss, grads


# ---------------------------------------------------------------------------
# Decoding


def batch_beam_search(model: ParserModel, questions, beam_size: int, max_len: int):
    """K-best decoding for many questions at once.

    Returns, per question, up to ``beam_size`` (tokens, logprob) pairs
    sorted by descending log-probability. A hypothesis is complete when
    it emits the end symbol (whose log-probability it absorbs) or when
    it reaches ``max_len`` tokens. Special symbols other than the end
    symbol are never proposed.
    """
    if beam_size < 1:
        raise ValueError("beam size must be at least 1")
    if not questions:
        return []
    p = model.params
    tv = model.tgt_vocab
    xs = [model.src_vocab.encode(q) for q in questions]
    if any(len(x) == 0 for x in xs):
        raise ValueError("empty question")
    X, src_mask = _pad_batch(xs, model.src_vocab.pad)
    hs, s0, _ = _encode(model, X, src_mask)

    nq = len(questions)
    states = s0.copy()
    qids = np.arange(nq)
    last = np.full(nq, tv.bos, dtype=np.int64)
    logp_acc = np.zeros(nq)
    histories: list[tuple] = [()] * nq
    finished: list[list] = [[] for _ in range(nq)]
    banned = [tv.pad, tv.unk, tv.bos]

    for _ in range(max_len):
        if len(qids) == 0:
            break
        x = p["tgt_emb"][last]
        s_new, _ = _gru_step(p, "d_", x, states)
        _, _, ctx = _attend(p, s_new, hs[qids], src_mask[qids])
        _, _, logits = _output_logits(p, s_new, ctx)
        # scores stay true model log-probabilities; banned symbols are
        # only removed from the proposal set, not from the softmax
        step_logp = _log_softmax(logits)
        step_logp[:, banned] = NEG_INF
        cand = logp_acc[:, None] + step_logp

        new_rows, new_tokens = [], []
        for q in range(nq):
            mine = np.flatnonzero(qids == q)
            if mine.size == 0:
                continue
            flat = cand[mine].ravel()
            k = min(beam_size, flat.size)
            top = np.argsort(-flat, kind="stable")[:k]
            for idx in top:
                score = flat[idx]
                if score <= NEG_INF / 2:  # a banned or dead continuation
                    continue
                row = mine[idx // len(tv)]
                tok = int(idx % len(tv))
                if tok == tv.eos:
                    finished[q].append((histories[row], float(score)))
                else:
                    new_rows.append(row)
                    new_tokens.append(tok)
        if not new_rows:
            qids = qids[:0]  # every surviving candidate emitted the end symbol
            break
        rows = np.array(new_rows)
        states = s_new[rows]
        qids = qids[rows]
        logp_acc = np.array([cand[r, t] for r, t in zip(new_rows, new_tokens)])
        histories = [histories[r] + (t,) for r, t in zip(new_rows, new_tokens)]
        last = np.array(new_tokens, dtype=np.int64)

    for row in range(len(qids)):  # hypotheses cut off at the length limit
        finished[qids[row]].append((histories[row], float(logp_acc[row])))

    results = []
    for q in range(nq):
        ranked = sorted(finished[q], key=lambda it: -it[1])[:beam_size]
        results.append([(tv.decode(toks), score) for toks, score in ranked])
    return results


def beam_search(model: ParserModel, x_tokens, beam_size: int, max_len: int):
    """K-best list for one question."""
    return batch_beam_search(model, [list(x_tokens)], beam_size, max_len)[0]


def greedy_decode(model: ParserModel, x_tokens, max_len: int):
    """Most likely continuation one step at a time; beam of one."""
    return beam_search(model, x_tokens, 1, max_len)[0]


# ---------------------------------------------------------------------------
# Checkpoints


def save_model(model: ParserModel, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "config.json"), "w", encoding="utf-8") as fh:
        json.dump({"format": 1, **asdict(model.config)}, fh, indent=2)
    np.savez(os.path.join(directory, "params.npz"), **model.params)
    model.src_vocab.save(os.path.join(directory, "src_vocab.txt"))
    model.tgt_vocab.save(os.path.join(directory, "tgt_vocab.txt"))


def load_model(directory) -> ParserModel:
    with open(os.path.join(directory, "config.json"), encoding="utf-8") as fh:
        raw = json.load(fh)
    if raw.pop("format", None) != 1:
        raise ValueError("unsupported checkpoint format")
    config = ModelConfig(**raw)
    src_vocab = Vocab.load(os.path.join(directory, "src_vocab.txt"))
    tgt_vocab = Vocab.load(os.path.join(directory, "tgt_vocab.txt"))
    with np.load(os.path.join(directory, "params.npz")) as data:
        params = {k: data[k].copy() for k in data.files}
    return ParserModel(src_vocab, tgt_vocab, config, params)
