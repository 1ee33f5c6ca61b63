"""End-to-end acceptance checks, one printed verdict per guarantee.

Run with ``pytest tests/test_acceptance.py -s`` to see the checklist;
each test prints a single [PASS]/[FAIL] line naming the guarantee it
stands for. The final check retrains the parser from its own logged
mistakes (three runs per objective) and dominates the runtime with a
few minutes of numpy.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from gradcheck import assert_grads_close, fd_grads, tiny_model
from test_geo import fuzz_pools, ref_execute
from test_statements import expected_stypes

from banditparse.corpus import (
    DESK_SPLIT_SIZES,
    generate_corpus,
    split,
    tokenize_question,
)
from banditparse.counterfactual import (
    FeedbackRecord,
    create_log,
    objective_dpm,
    objective_dpm_osl,
    objective_dpm_r,
    objective_dpm_t,
    objective_dpm_t_osl,
    record_to_json,
    refresh_osl,
    simulate_feedback,
    train_counterfactual,
)
from banditparse.geo import EMPTY_ANSWER, Answer, default_db, execute
from banditparse.metrics import approx_randomization_test, corpus_f1
from banditparse.model import EOS, cross_entropy
from banditparse.mrl import delinearize, linearize, parse_mrl, serialize_mrl
from banditparse.randgen import random_query_ast
from banditparse.service import FeedbackService, ServiceError
from banditparse.statements import (
    Marking,
    generate_statements,
    map_marking_to_token_rewards,
)
from banditparse.toydb import make_toy_db
from banditparse.training import desk_profile, evaluate_answer_f1, train_supervised


@contextmanager
def criterion(name):
    ok = False
    try:
        yield
        ok = True
    finally:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")


def _mixed_records():
    """Logged outputs with a mix of full, partial, and zero credit."""
    return [
        FeedbackRecord(
            "how many hotels", ("query@2", "nwr@1", "count@0"), 1.0, 1, (1, 1, 1), ()
        ),
        FeedbackRecord("many paris", ("qtype@1", "count@0"), 1.0, 0, (0, 1), ()),
        FeedbackRecord("where bars", ("count@0",), 1.0, 0, (0,), ()),
    ]


def test_reweighted_estimator_identities():
    with criterion(
        "estimator identities: full-log reweighting equals the self-normalized "
        "ratio (1e-12 relative); unit token rewards negate bare-token "
        "cross-entropy exactly"
    ):
        # reweighting over the whole log, with the denominator snapshot
        # taken at the current parameters, is the self-normalized ratio
        m = tiny_model(seed=21)
        records = _mixed_records()
        osl = refresh_osl(m, records)
        value, _ = objective_dpm_osl(records, m, osl)
        assert value == pytest.approx(objective_dpm_r(records, m), rel=1e-12)

        # with every token reward set to 1, the token-level estimator of
        # a single record is exactly the negated cross-entropy over the
        # bare tokens (no end symbol appended)
        m2 = tiny_model(seed=22)
        for rec in _mixed_records():
            full = FeedbackRecord(
                rec.question, rec.tokens, 1.0, 1, (1,) * len(rec.tokens), ()
            )
            loss, _ = cross_entropy(
                m2, [(tokenize_question(full.question), list(full.tokens))]
            )
            value_t, _ = objective_dpm_t([full], m2)
            assert value_t == -loss


def test_objective_gradients_match_finite_differences():
    started = time.time()
    with criterion(
        "gradient suite: cross-entropy and all four counterfactual objectives "
        "match central finite differences (rel err < 1e-4) on a <=100-parameter "
        "model in under a minute"
    ):
        m = tiny_model(
            embed=1, hidden=2, src=["how", "many", "bars"],
            tgt=["query@1", "count@0"],
        )
        n_params = sum(v.size for v in m.params.values())
        assert n_params <= 100, n_params

        records = [
            FeedbackRecord("how many bars", ("query@1", "count@0"), 1.0, 1, (1, 1), ()),
            FeedbackRecord("many bars", ("count@0",), 1.0, 0, (1,), ()),
            FeedbackRecord("bars how", ("query@1",), 1.0, 0, (0,), ()),
        ]
        batch = [
            (tokenize_question(r.question), list(r.tokens) + [EOS]) for r in records
        ]

        _, ce_grads = cross_entropy(m, batch)
        assert_grads_close(
            ce_grads,
            fd_grads(m, lambda mm: cross_entropy(mm, batch, want_grads=False)[0]),
        )

        _, dpm_grads = objective_dpm(records, m)
        assert_grads_close(
            dpm_grads, fd_grads(m, lambda mm: objective_dpm(records, mm)[0])
        )

        osl = refresh_osl(m, records)  # frozen snapshot: the denominator is a constant
        _, osl_grads = objective_dpm_osl(records, m, osl)
        assert_grads_close(
            osl_grads,
            fd_grads(m, lambda mm: objective_dpm_osl(records, mm, osl)[0]),
        )

        _, t_grads = objective_dpm_t(records, m)
        assert_grads_close(
            t_grads, fd_grads(m, lambda mm: objective_dpm_t(records, mm)[0])
        )

        # the tiny denominator scales the objective up by orders of
        # magnitude; the wider step keeps the difference quotient out of
        # cancellation territory
        _, t_osl_grads = objective_dpm_t_osl(records, m, osl)
        assert_grads_close(
            t_osl_grads,
            fd_grads(
                m, lambda mm: objective_dpm_t_osl(records, mm, osl)[0], step=1e-4
            ),
        )

        assert time.time() - started < 60.0


def test_query_tree_round_trips():
    with criterion(
        "round-trip suite: 10,000 random query trees survive "
        "linearize/delinearize and serialize/parse unchanged"
    ):
        rng = np.random.default_rng(617)
        for _ in range(10_000):
            ast = random_query_ast(rng)
            assert delinearize(linearize(ast)) == ast
            assert parse_mrl(serialize_mrl(ast)) == ast


def test_statement_trigger_conformance():
    with criterion(
        "statement suite: trigger conformance on 1,000 random trees against an "
        "independent tree-scan oracle, and the worked station-count example "
        "yields exactly its four statements"
    ):
        rng = np.random.default_rng(618)
        for _ in range(1_000):
            ast = random_query_ast(rng)
            block = generate_statements(ast)
            assert {s.stype for s in block.statements} == expected_stypes(ast), ast

        block = generate_statements(parse_mrl(
            "query(west(area(keyval('name','Paris')),"
            "nwr(keyval('railway','station'))),qtype(count))"
        ))
        got = {s.stype: s.payload for s in block.statements}
        assert got == {
            "Town": (("name", "Paris"),),
            "POI": (("railway", "station"),),
            "QuestionType": ("count",),
            "CardinalDirection": ("west",),
        }


def test_executor_matches_reference():
    with criterion(
        "executor suite: execute() agrees with a brute-force reference "
        "interpreter on 1,000 random queries over two fixture databases"
    ):
        pools = fuzz_pools()
        non_empty = 0
        for db, seed in ((make_toy_db(0), 619), (default_db(), 620)):
            rng = np.random.default_rng(seed)
            for _ in range(500):
                ast = random_query_ast(rng, pools)
                got = execute(ast, db)
                assert got == ref_execute(ast, db), ast
                if not got.is_empty:
                    non_empty += 1
        assert non_empty > 300  # the mix must exercise real answers


def test_metric_hand_checks():
    with criterion(
        "metric suite: precision 2/3 with recall 1/2 gives F1 4/7; identical "
        "systems tie at p = 1.0; all-correct vs all-wrong over 20 items is "
        "significant at 10,000 rounds"
    ):
        golds = [Answer.count(n) for n in (1, 2, 3, 4)]
        predictions = [Answer.count(1), Answer.count(2), Answer.count(9), EMPTY_ANSWER]
        scores = corpus_f1(predictions, golds)
        assert scores["precision"] == pytest.approx(2 / 3, rel=1e-12)
        assert scores["recall"] == pytest.approx(1 / 2, rel=1e-12)
        assert scores["f1"] == pytest.approx(4 / 7, rel=1e-12)

        same = np.array([1, 0, 1, 1, 0], dtype=np.int64)
        assert approx_randomization_test(same, same, rounds=10_000, seed=0) == 1.0

        all_right = np.ones(20, dtype=np.int64)
        all_wrong = np.zeros(20, dtype=np.int64)
        p = approx_randomization_test(all_right, all_wrong, rounds=10_000, seed=0)
        assert p < 0.05


SERVICE_QUERIES = [
    ("where can I park in Edinburgh",
     "query(area(keyval('name','Edinburgh')),nwr(keyval('amenity','parking')),"
     "qtype(latlong))"),
    ("how many bars are there in Leith",
     "query(area(keyval('name','Leith')),nwr(keyval('amenity','bar')),qtype(count))"),
    ("hotels near the station of Stockbridge",
     "query(around(center(area(keyval('name','Stockbridge')),"
     "nwr(keyval('railway','station'))),search(nwr(keyval('tourism','hotel'))),"
     "maxdist('DIST_INTOWN')),qtype(latlong))"),
]


class _Clock:
    def __init__(self):
        self.now = 50_000.0

    def __call__(self):
        return self.now


def test_feedback_service_replay(tmp_path):
    with criterion(
        "feedback service: the submission log replays byte-for-byte from an "
        "offline recomputation, duplicate submissions are rejected, and timing "
        "stats match hand-computed mean/stddev"
    ):
        pending = [
            FeedbackRecord(q, tuple(linearize(parse_mrl(mrl)).surfaces()))
            for q, mrl in SERVICE_QUERIES
        ]
        clock = _Clock()
        log_path = tmp_path / "markings.jsonl"
        service = FeedbackService(pending, log_path, clock)

        # answer the three forms with varied verdicts and timings
        timings = (10.0, 20.0, 30.0)
        wrong_statement = (None, 0, 2)
        submitted = []
        for timing, wrong in zip(timings, wrong_statement):
            form = service.next_form()
            clock.now += timing
            pairs = [
                (i, "no" if i == wrong else "yes")
                for i in range(len(form.block.statements))
            ]
            service.submit_marking(form.form_id, pairs)
            submitted.append((form, pairs, timing))

        # a second submission against any completed form is refused
        with pytest.raises(ServiceError) as err:
            service.submit_marking(submitted[0][0].form_id, submitted[0][1])
        assert err.value.status == 409

        # offline recomputation: rebuild every record from the statement
        # block, the verdicts, and the clock alone, then compare the log
        # file line by line, byte for byte
        expected_lines = []
        for form, pairs, timing in submitted:
            marking = Marking.from_pairs(pairs, len(form.block.statements))
            seq, rewards, covered = map_marking_to_token_rewards(form.block, marking)
            record = FeedbackRecord(
                question=form.question,
                tokens=tuple(form.block.query.surfaces()),
                propensity=1.0,
                seq_reward=seq,
                token_rewards=tuple(rewards),
                covered=tuple(covered),
                source="human",
                timing_seconds=timing,
            )
            expected_lines.append(record_to_json(record) + "\n")
        assert log_path.read_text(encoding="utf-8") == "".join(expected_lines)

        stats = service.progress()
        assert stats["submitted"] == 3 and stats["pending"] == 0
        assert stats["mean_timing"] == pytest.approx(20.0, rel=1e-12)
        assert stats["stddev_timing"] == pytest.approx(
            math.sqrt(200.0 / 3.0), rel=1e-12
        )


def test_counterfactual_trend():
    started = time.time()
    with criterion(
        "trend reproduction: from one logged pipeline, mean test F1 over three "
        "runs orders DPM+T+OSL >= DPM+T >= DPM, beats B2S, and clears the "
        "baseline by at least 2 points inside 30 minutes"
    ):
        db = default_db()
        config = desk_profile(seed=0)
        examples = generate_corpus(db, sum(DESK_SPLIT_SIZES), seed=0)
        parts = split(examples, DESK_SPLIT_SIZES, seed=0)

        sup = train_supervised(parts.d_sup, parts.d_dev, db, config)
        baseline_f1 = evaluate_answer_f1(sup.model, parts.d_test, db, config).f1

        records, _ = create_log(
            sup.model, [ex.question for ex in parts.d_log], config
        )
        gold = {ex.question: ex.gold_query for ex in parts.d_log}
        marked = [simulate_feedback(r, gold[r.question]) for r in records]

        means = {}
        for objective in ("B2S", "DPM", "DPM+T", "DPM+T+OSL"):
            scores = []
            for run in range(3):
                result = train_counterfactual(
                    marked, objective, sup.model, parts.d_dev, db,
                    desk_profile(seed=run),
                )
                scores.append(
                    evaluate_answer_f1(result.model, parts.d_test, db, config).f1
                )
            means[objective] = float(np.mean(scores))

        print(f"  baseline  {baseline_f1:.4f}")
        for objective, mean in means.items():
            print(f"  {objective:9s} {mean:.4f} ({100 * (mean - baseline_f1):+.2f} points)")

        assert means["DPM+T+OSL"] >= baseline_f1 + 0.02
        assert means["DPM+T+OSL"] >= means["DPM+T"] >= means["DPM"]
        assert means["DPM+T+OSL"] >= means["B2S"]
        assert time.time() - started < 30 * 60
