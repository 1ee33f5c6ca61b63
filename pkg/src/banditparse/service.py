"""Collecting human markings of statement forms over HTTP.

Each pending question-query pair becomes a one-shot form. Serving a
form stamps its start time, the single allowed submission stamps the
end, and the difference is stored as the annotation time. Completed
markings are mapped to token rewards and appended to a JSONL log, so
the log alone is enough to rebuild the progress counters.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from statistics import fmean, pstdev

from pydantic import BaseModel

from .counterfactual import FeedbackRecord, append_record, load_log, record_to_json
from .mrl import delinearize
from .statements import (
    Marking,
    StatementBlock,
    describe_tag,
    generate_statements,
    map_marking_to_token_rewards,
)


class ServiceError(Exception):
    """Protocol violation carrying the HTTP status it maps to."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def build_tooltips(block: StatementBlock) -> dict:
    """Hover text for every tag key and key=value pair in the block."""
    out = {}
    for stmt in block.statements:
        for part in stmt.payload:
            if isinstance(part, tuple) and len(part) == 2:
                key, value = part
                out.setdefault(key, describe_tag(key))
                out.setdefault(f"{key}={value}", describe_tag(key, value))
    return out


@dataclass
class FormSession:
    """One form's lifecycle: pending, served, submitted."""

    form_id: str
    question: str
    block: StatementBlock
    tooltips: dict = field(default_factory=dict)
    served_at: float | None = None
    submitted_at: float | None = None
    record: FeedbackRecord | None = None

    @property
    def done(self) -> bool:
        return self.record is not None

    def payload(self) -> dict:
        return {
            "form_id": self.form_id,
            "question": self.question,
            "statements": [s.to_payload() for s in self.block.statements],
            "tooltips": dict(self.tooltips),
            "served_at": self.served_at,
        }


class FeedbackService:
    """Form queue plus the append-only result log.

    ``pending`` is a sequence of reward-free FeedbackRecords (question
    and tokens only). If ``log_path`` already holds records from an
    earlier run they are absorbed, so restarting the service resumes
    where the log left off instead of reopening finished forms.
    """

    def __init__(self, pending, log_path, clock=time.time):
        self.log_path = str(log_path)
        self.clock = clock
        self._lock = threading.Lock()
        self.sessions: list[FormSession] = []
        self._by_id: dict[str, FormSession] = {}
        self._by_question: dict[str, FormSession] = {}
        for i, rec in enumerate(pending):
            ast = delinearize(list(rec.tokens))
            block = generate_statements(ast, rec.question)
            form = FormSession(
                form_id=f"f{i:04d}",
                question=rec.question,
                block=block,
                tooltips=build_tooltips(block),
            )
            if form.question in self._by_question:
                raise ValueError(f"duplicate pending question: {form.question!r}")
            self.sessions.append(form)
            self._by_id[form.form_id] = form
            self._by_question[form.question] = form
        self._absorb_existing_log()

    @classmethod
    def from_files(cls, pending_path, log_path, clock=time.time):
        return cls(load_log(pending_path), log_path, clock)

    def _absorb_existing_log(self) -> None:
        try:
            existing = load_log(self.log_path)
        except FileNotFoundError:
            return
        for rec in existing:
            form = self._by_question.get(rec.question)
            if form is None:
                raise ValueError(
                    f"log entry matches no pending form: {rec.question!r}"
                )
            if form.done:
                raise ValueError(
                    f"log holds two submissions for one form: {rec.question!r}"
                )
            if tuple(rec.tokens) != tuple(form.block.query.surfaces()):
                raise ValueError(
                    f"log tokens disagree with the pending form for {rec.question!r}"
                )
            form.record = rec

    # -- form lifecycle ----------------------------------------------------

    def next_form(self) -> FormSession:
        """Hand out forms in queue order; fall back to stragglers.

        Prefers forms nobody has seen yet, then re-serves abandoned ones
        (same served_at, so a reload does not reset the clock), and
        reports exhaustion only once everything is submitted.
        """
        with self._lock:
            for form in self.sessions:
                if not form.done and form.served_at is None:
                    form.served_at = float(self.clock())
                    return form
            for form in self.sessions:
                if not form.done:
                    return form
            raise ServiceError(404, "no forms pending")

    def serve_form(self, form_id: str) -> FormSession:
        with self._lock:
            form = self._by_id.get(form_id)
            if form is None:
                raise ServiceError(404, f"unknown form {form_id!r}")
            if form.done:
                raise ServiceError(409, f"form {form_id} was already submitted")
            if form.served_at is None:
                form.served_at = float(self.clock())
            return form

    def submit_marking(self, form_id: str, pairs) -> FeedbackRecord:
        """Apply one complete marking and append the resulting record.

        ``pairs`` is an iterable of (statement index, "yes"/"no").
        """
        with self._lock:
            form = self._by_id.get(form_id)
            if form is None:
                raise ServiceError(404, f"unknown form {form_id!r}")
            if form.done:
                raise ServiceError(409, f"form {form_id} was already submitted")
            if form.served_at is None:
                raise ServiceError(409, f"form {form_id} has not been served yet")
            try:
                marking = Marking.from_pairs(pairs, len(form.block.statements))
            except (TypeError, ValueError) as err:
                raise ServiceError(400, str(err))
            submitted = float(self.clock())
            seq_reward, token_rewards, covered = map_marking_to_token_rewards(
                form.block, marking
            )
            record = FeedbackRecord(
                question=form.question,
                tokens=tuple(form.block.query.surfaces()),
                propensity=1.0,
                seq_reward=seq_reward,
                token_rewards=tuple(token_rewards),
                covered=tuple(covered),
                source="human",
                timing_seconds=submitted - form.served_at,
            )
            append_record(self.log_path, record)
            form.submitted_at = submitted
            form.record = record
            return record

    # -- reporting ---------------------------------------------------------

    def progress(self) -> dict:
        finished = [form.record for form in self.sessions if form.done]
        return _progress_stats(finished, len(self.sessions))


def _progress_stats(records, total_forms: int) -> dict:
    timings = [r.timing_seconds for r in records if r.timing_seconds is not None]
    return {
        "pending": total_forms - len(records),
        "submitted": len(records),
        "mean_timing": fmean(timings) if timings else None,
        "stddev_timing": pstdev(timings) if timings else None,
    }


def replay_progress(log_path, total_forms: int) -> dict:
    """Progress counters recomputed from the log file alone."""
    try:
        records = load_log(log_path)
    except FileNotFoundError:
        records = []
    return _progress_stats(records, total_forms)


# ---------------------------------------------------------------------------
# HTTP layer


class VerdictIn(BaseModel):
    index: int
    verdict: str


class MarkingIn(BaseModel):
    verdicts: list[VerdictIn]


def create_app(service: FeedbackService):
    """Wrap a FeedbackService in the fixed four-endpoint HTTP API."""
    from fastapi import FastAPI, HTTPException
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="statement marking service")
    # the marking form may be opened from disk or another port
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    def guarded(fn, *args):
        try:
            return fn(*args)
        except ServiceError as err:
            raise HTTPException(status_code=err.status, detail=err.message)

    @app.get("/api/forms/next")
    def forms_next():
        return guarded(service.next_form).payload()

    @app.get("/api/forms/{form_id}")
    def forms_get(form_id: str):
        return guarded(service.serve_form, form_id).payload()

    @app.post("/api/forms/{form_id}/marking")
    def forms_mark(form_id: str, body: MarkingIn):
        pairs = [(v.index, v.verdict) for v in body.verdicts]
        record = guarded(service.submit_marking, form_id, pairs)
        return {"form_id": form_id, "record": json.loads(record_to_json(record))}

    @app.get("/api/progress")
    def progress():
        return service.progress()

    return app
