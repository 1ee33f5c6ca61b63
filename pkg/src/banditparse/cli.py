"""Command line pipeline around the parser and its feedback loop.

Commands mirror the experimental protocol: generate a corpus, train the
supervised baseline, decode a feedback log, attach simulated or human
markings, continue training counterfactually, evaluate, and test
significance. Every command is deterministic for a given seed, prints a
human-readable summary, and can write the same result as JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from statistics import fmean, pstdev

from .corpus import (
    DESK_SPLIT_SIZES,
    PAPER_SPLIT_SIZES,
    generate_corpus,
    load_corpus,
    save_corpus,
    split,
)
from .counterfactual import (
    OBJECTIVES,
    create_log,
    load_log,
    save_log,
    simulate_feedback,
    train_counterfactual,
)
from .geo import default_db
from .metrics import approx_randomization_test
from .model import load_model, save_model
from .toydb import make_toy_db
from .training import desk_profile, evaluate_answer_f1, paper_profile, train_supervised

SYSTEM_NAMES = ("baseline",) + OBJECTIVES

SPLIT_NAMES = ("sup", "dev", "test", "log")


def die(message: str) -> None:
    raise SystemExit(f"error: {message}")


def require(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        die(f"{what} not found: {path}")
    return path


def resolve_db(name: str):
    return default_db() if name == "default" else make_toy_db()


def parse_overrides(items) -> dict:
    """Turn repeated key=value flags into TrainConfig keyword overrides."""
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            die(f"override {item!r} is not of the form key=value")
        try:
            number = float(value) if any(c in value for c in ".eE") else int(value)
        except ValueError:
            die(f"override value {value!r} is not a number")
        out[key.strip()] = number
    return out


def resolve_config(profile: str, seed: int, overrides: dict):
    maker = desk_profile if profile == "desk" else paper_profile
    try:
        return maker(seed, **overrides)
    except TypeError as err:
        die(f"bad override: {err}")


def load_split(corpus_dir, name: str):
    corpus_dir = require(corpus_dir, "corpus directory")
    return load_corpus(require(corpus_dir / f"{name}.tsv", f"{name} split"))


def write_manifest(directory: Path, command: str, args, **extra) -> None:
    payload = {
        "command": command,
        "seed": getattr(args, "seed", None),
        "profile": getattr(args, "profile", None),
        "paths": {
            key: str(getattr(args, key))
            for key in ("db", "corpus", "log", "model", "out")
            if getattr(args, key, None) is not None
        },
        "objective": getattr(args, "objective", None),
        "overrides": parse_overrides(getattr(args, "override", None)),
    }
    payload.update(extra)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Commands


def cmd_gen_corpus(args) -> None:
    db = resolve_db(args.db)
    sizes = DESK_SPLIT_SIZES if args.profile == "desk" else PAPER_SPLIT_SIZES
    examples = generate_corpus(db, sum(sizes), seed=args.seed)
    parts = split(examples, sizes, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    portions = dict(zip(SPLIT_NAMES, (parts.d_sup, parts.d_dev, parts.d_test, parts.d_log)))
    for name, part in portions.items():
        save_corpus(out / f"{name}.tsv", part)
    write_manifest(out, "gen-corpus", args, sizes=list(sizes))
    counts = ", ".join(f"{name}={len(part)}" for name, part in portions.items())
    print(f"wrote {len(examples)} examples to {out} ({counts})")


def cmd_train_sup(args) -> None:
    db = resolve_db(args.db)
    config = resolve_config(args.profile, args.seed, parse_overrides(args.override))
    d_sup = load_split(args.corpus, "sup")
    d_dev = load_split(args.corpus, "dev")
    result = train_supervised(d_sup, d_dev, db, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out)
    payload = {
        "init_f1": result.init_f1,
        "best_f1": result.best_f1,
        "best_update": result.best_update,
        "validations": [list(v) for v in result.validations],
    }
    write_json(out / "metrics.json", payload)
    write_manifest(out, "train-sup", args)
    print(
        f"supervised baseline: dev F1 {result.best_f1:.4f} at update "
        f"{result.best_update} (untrained {result.init_f1:.4f}); saved to {out}"
    )


def cmd_make_log(args) -> None:
    model = load_model(require(args.model, "model directory"))
    config = resolve_config(args.profile, args.seed, parse_overrides(args.override))
    d_log = load_split(args.corpus, "log")
    records, dropped = create_log(model, [ex.question for ex in d_log], config)
    if not records:
        die("every decoded output was malformed; nothing to log")
    save_log(args.out, records)
    print(
        f"logged {len(records)} decoded outputs to {args.out} "
        f"({dropped} dropped as malformed)"
    )


def cmd_simulate_feedback(args) -> None:
    records = load_log(require(args.log, "feedback log"))
    gold = {ex.question: ex.gold_query for ex in load_split(args.corpus, "log")}
    rewarded = []
    for rec in records:
        if rec.question not in gold:
            die(f"logged question has no gold query in the corpus: {rec.question!r}")
        rewarded.append(simulate_feedback(rec, gold[rec.question]))
    save_log(args.out, rewarded)
    correct = sum(r.seq_reward for r in rewarded)
    print(
        f"marked {len(rewarded)} records against gold ({correct} fully correct); "
        f"wrote {args.out}"
    )


def cmd_serve_feedback(args) -> None:
    import uvicorn

    from .service import FeedbackService, create_app

    service = FeedbackService.from_files(require(args.log, "feedback log"), args.out)
    stats = service.progress()
    print(
        f"serving {stats['pending']} pending forms "
        f"({stats['submitted']} already submitted) on {args.host}:{args.port}; "
        f"markings append to {args.out}"
    )
    uvicorn.run(create_app(service), host=args.host, port=args.port, log_level="warning")


def cmd_train_cf(args) -> None:
    if args.runs < 1:
        die("need at least one run")
    db = resolve_db(args.db)
    overrides = parse_overrides(args.override)
    baseline = load_model(require(args.model, "baseline model directory"))
    log = load_log(require(args.log, "feedback log"))
    d_dev = load_split(args.corpus, "dev")
    d_test = load_split(args.corpus, "test")
    base_config = resolve_config(args.profile, args.seed, overrides)
    base_f1 = evaluate_answer_f1(baseline, d_test, db, base_config).f1

    out = Path(args.out) if args.out else None
    runs = []
    for r in range(args.runs):
        config = resolve_config(args.profile, args.seed + r, overrides)
        if args.objective == "baseline":
            model = baseline
        else:
            model = train_counterfactual(
                log, args.objective, baseline, d_dev, db, config
            ).model
        result = evaluate_answer_f1(model, d_test, db, config)
        runs.append({
            "seed": config.seed,
            "precision": result.precision,
            "recall": result.recall,
            "f1": result.f1,
        })
        if out is not None:
            save_model(model, out / f"run{r}")
        print(f"run {r} (seed {config.seed}): test F1 {result.f1:.4f}")

    f1s = [run["f1"] for run in runs]
    mean, spread = fmean(f1s), pstdev(f1s)
    print(f"{args.objective}: test F1 {mean:.4f} ± {spread:.4f} over {args.runs} run(s)")
    print(f"baseline test F1 {base_f1:.4f}; ΔF1 {mean - base_f1:+.4f}")
    if out is not None:
        write_json(out / "results.json", {
            "objective": args.objective,
            "runs": runs,
            "mean_f1": mean,
            "stddev_f1": spread,
            "baseline_f1": base_f1,
            "delta_f1": mean - base_f1,
        })
        write_manifest(out, "train-cf", args)


def cmd_evaluate(args) -> None:
    db = resolve_db(args.db)
    config = resolve_config(args.profile, args.seed, parse_overrides(args.override))
    model = load_model(require(args.model, "model directory"))
    examples = load_split(args.corpus, args.split)
    result = evaluate_answer_f1(model, examples, db, config)
    print(
        f"{args.split}: precision {result.precision:.4f}  recall {result.recall:.4f}  "
        f"F1 {result.f1:.4f}  ({len(examples)} questions)"
    )
    if args.out:
        write_json(args.out, {
            "split": args.split,
            "model": str(args.model),
            "precision": result.precision,
            "recall": result.recall,
            "f1": result.f1,
            "flags": [int(f) for f in result.flags],
        })


def cmd_significance(args) -> None:
    with open(require(args.eval_a, "evaluation file"), encoding="utf-8") as fh:
        a = json.load(fh)
    with open(require(args.eval_b, "evaluation file"), encoding="utf-8") as fh:
        b = json.load(fh)
    if len(a["flags"]) != len(b["flags"]):
        die("evaluations cover different numbers of questions; cannot pair them")
    p = approx_randomization_test(a["flags"], b["flags"], rounds=args.rounds, seed=args.seed)
    acc_a = fmean(a["flags"]) if a["flags"] else 0.0
    acc_b = fmean(b["flags"]) if b["flags"] else 0.0
    print(
        f"accuracy A {acc_a:.4f} vs B {acc_b:.4f}; "
        f"p = {p:.4f} ({args.rounds} randomization rounds)"
    )
    if args.out:
        write_json(args.out, {
            "accuracy_a": acc_a,
            "accuracy_b": acc_b,
            "p_value": p,
            "rounds": args.rounds,
        })


# ---------------------------------------------------------------------------
# Argument plumbing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banditparse",
        description="corpus generation, parser training, feedback collection, "
        "counterfactual learning, and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        return p

    def seed_profile_db(p, db=True):
        p.add_argument("--seed", type=int, default=0, help="random seed")
        p.add_argument("--profile", choices=("desk", "paper"), default="desk",
                       help="hyperparameter scale")
        if db:
            p.add_argument("--db", choices=("default", "toy"), default="default",
                           help="geographic database")

    def override_flag(p):
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="training config field override (repeatable)")

    p = add("gen-corpus", cmd_gen_corpus, "sample a question corpus and split it")
    seed_profile_db(p)
    p.add_argument("--out", required=True, help="output corpus directory")

    p = add("train-sup", cmd_train_sup, "train the supervised baseline parser")
    seed_profile_db(p)
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="model output directory")
    override_flag(p)

    p = add("make-log", cmd_make_log, "decode the log split into a feedback log")
    seed_profile_db(p, db=False)
    p.add_argument("--model", required=True, help="baseline model directory")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="feedback log path (JSONL)")
    override_flag(p)

    p = add("simulate-feedback", cmd_simulate_feedback,
            "mark logged outputs against gold queries")
    p.add_argument("--log", required=True, help="unmarked feedback log")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="marked feedback log path")

    p = add("serve-feedback", cmd_serve_feedback,
            "serve marking forms for human annotators over HTTP")
    p.add_argument("--log", required=True, help="unmarked feedback log")
    p.add_argument("--out", required=True, help="marking log to append to")
    p.add_argument("--host", default="127.0.0.1", help="bind address")
    p.add_argument("--port", type=int, default=8000, help="bind port")

    p = add("train-cf", cmd_train_cf, "continue training from a marked log")
    seed_profile_db(p)
    p.add_argument("--log", required=True, help="marked feedback log")
    p.add_argument("--model", required=True, help="baseline model directory")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--objective", required=True, choices=SYSTEM_NAMES,
                   help="training objective or baseline passthrough")
    p.add_argument("--runs", type=int, default=1, help="seeds to average over")
    p.add_argument("--out", help="output directory for models and results")
    override_flag(p)

    p = add("evaluate", cmd_evaluate, "answer-level precision/recall/F1")
    seed_profile_db(p)
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--split", choices=SPLIT_NAMES, default="test",
                   help="corpus portion to evaluate on")
    p.add_argument("--out", help="write precision/recall/F1 and per-item flags as JSON")
    override_flag(p)

    p = add("significance", cmd_significance,
            "approximate randomization test between two evaluations")
    p.add_argument("eval_a", help="first evaluate --out file")
    p.add_argument("eval_b", help="second evaluate --out file")
    p.add_argument("--rounds", type=int, default=10_000, help="randomization rounds")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", help="write the p-value as JSON")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
