"""HTTP API exposing annotation sessions to the human-facing UI.

JSON over HTTP under /api/v1. Every mutation is serialized per session
and carries a monotonically increasing revision; a submission against a
stale revision is rejected with 409 so no edit is lost or applied twice.
"""

from __future__ import annotations

import io
import threading
import uuid
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import active, corpus, esegraph, featurize, npex
from .active import SessionState
from .corpus import HUMAN, UNLABELED, Pool, bio_spans, spans_to_bio
from .crf import decode
from .featurize import FeaturizeConfig
from .npex import collect_nps


class CreateSessionRequest(BaseModel):
    corpus_path: str
    format: str = "conll2003"
    entity_class: str
    mode: str = "EAL"
    batch_size: int = Field(default=100, ge=1)
    n: int = Field(default=10, ge=1)
    threshold: Optional[float] = None


class SpanLabel(BaseModel):
    sentence_id: int
    start: int = Field(ge=0)
    end: int  # exclusive


class SubmitLabelsRequest(BaseModel):
    revision: int
    spans: List[SpanLabel]


class SeedExpandRequest(BaseModel):
    seed: str


class ConfirmRequest(BaseModel):
    revision: int
    surfaces: List[str]


@dataclass
class _Session:
    state: SessionState
    revision: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)
    training: bool = False
    nps: list = field(default_factory=list)
    coocs: list = field(default_factory=list)


def _spans_to_labels(spans: List[SpanLabel], pool: Pool,
                     batch_ids: List[int]) -> Dict[int, List[str]]:
    by_sentence: Dict[int, List[tuple]] = {sid: [] for sid in batch_ids}
    for span in spans:
        if span.sentence_id not in by_sentence:
            raise HTTPException(422, f"sentence {span.sentence_id} is not in the "
                                     f"current batch")
        length = len(pool.by_id(span.sentence_id))
        if not (0 <= span.start < span.end <= length):
            raise HTTPException(422, f"span [{span.start}, {span.end}) out of bounds "
                                     f"for sentence {span.sentence_id}")
        by_sentence[span.sentence_id].append((span.start, span.end))
    labels = {}
    for sid, sentence_spans in by_sentence.items():
        try:
            labels[sid] = spans_to_bio(sentence_spans, len(pool.by_id(sid)))
        except ValueError as exc:
            raise HTTPException(422, f"sentence {sid}: {exc}") from exc
    return labels


def create_app(session_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="sparsent annotation service")
    sessions: Dict[str, _Session] = {}

    def get(session_id: str) -> _Session:
        if session_id not in sessions:
            raise HTTPException(404, f"unknown session {session_id}")
        return sessions[session_id]

    def check_revision(sess: _Session, revision: int) -> None:
        if revision != sess.revision:
            raise HTTPException(409, f"stale revision {revision}; "
                                     f"current is {sess.revision}")

    def batch_payload(sess: _Session) -> dict:
        state = sess.state
        out = []
        for sid in state.pending_batch:
            sentence = state.pool.by_id(sid)
            highlights = []
            if state.model is not None:
                pred = decode(state.model, sentence)
                highlights = [{"start": s, "end": e}
                              for s, e, _ in bio_spans(pred)]
            out.append({
                "sentence_id": sid,
                "tokens": [{"surface": t.surface, "pos": t.pos}
                           for t in sentence.tokens],
                "prehighlights": highlights,
            })
        return {"revision": sess.revision, "sentences": out,
                "mode": state.mode, "iteration": state.iteration}

    @app.post("/api/v1/sessions")
    def create_session(req: CreateSessionRequest):
        try:
            pool = corpus.load_corpus(req.corpus_path, req.format)
        except (OSError, corpus.CorpusFormatError) as exc:
            raise HTTPException(422, str(exc)) from exc
        pool = corpus.restrict_to_class(pool, req.entity_class)
        try:
            state = SessionState(pool=pool, mode=req.mode,
                                 batch_size=req.batch_size, n=req.n,
                                 threshold=req.threshold)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        sess = _Session(state=state)
        sess.nps = collect_nps(pool)
        session_id = uuid.uuid4().hex
        sessions[session_id] = sess
        return {"session_id": session_id, "revision": sess.revision,
                "pool_size": len(pool)}

    @app.get("/api/v1/sessions/{session_id}/batch")
    def get_batch(session_id: str):
        sess = get(session_id)
        with sess.lock:
            if not sess.state.pending_batch:
                if sess.state.model is None and sess.state.mode != "AR":
                    # no model yet: batch comes from confirm_candidates
                    return batch_payload(sess)
                if sess.state.pool.unlabeled():
                    active.sample_batch(sess.state)
            return batch_payload(sess)

    @app.post("/api/v1/sessions/{session_id}/labels")
    def submit_labels(session_id: str, req: SubmitLabelsRequest):
        sess = get(session_id)
        with sess.lock:
            check_revision(sess, req.revision)
            if not sess.state.pending_batch:
                raise HTTPException(422, "no batch pending")
            labels = _spans_to_labels(req.spans, sess.state.pool,
                                      sess.state.pending_batch)
            sess.training = True
            try:
                active.step(sess.state, labels)
            except ValueError as exc:
                raise HTTPException(422, str(exc)) from exc
            finally:
                sess.training = False
            sess.revision += 1
            point = sess.state.history[-1]
            return {"revision": sess.revision, "metrics": point.to_json()}

    @app.post("/api/v1/sessions/{session_id}/expand")
    def seed_expand(session_id: str, req: SeedExpandRequest):
        sess = get(session_id)
        with sess.lock:
            if not sess.coocs:
                sess.coocs = featurize.featurize_all(
                    sess.state.pool, sess.nps, config=FeaturizeConfig())
            counts = {np_.surface: np_.count for np_ in sess.nps}
            try:
                ranked = esegraph.expand([req.seed], sess.coocs, counts=counts)
            except esegraph.SeedNotFoundError as exc:
                raise HTTPException(404, str(exc)) from exc
            return {"revision": sess.revision,
                    "candidates": [{"surface": s, "score": score}
                                   for s, score in ranked.entries]}

    @app.post("/api/v1/sessions/{session_id}/confirm")
    def confirm_candidates(session_id: str, req: ConfirmRequest):
        sess = get(session_id)
        with sess.lock:
            check_revision(sess, req.revision)
            by_surface = {np_.surface: np_ for np_ in sess.nps}
            confirmed = [by_surface[s] for s in req.surfaces if s in by_surface]
            if not confirmed:
                raise HTTPException(422, "no confirmed surface matches a known NP")
            active.bootstrap_from_ese(sess.state, confirmed)
            sess.revision += 1
            return batch_payload(sess)

    @app.get("/api/v1/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        sess = get(session_id)
        return {"revision": sess.revision, "training": sess.training,
                "history": [p.to_json() for p in sess.state.history],
                "labeled": sess.state.human_count,
                "auto": sess.state.auto_count}

    @app.get("/api/v1/sessions/{session_id}/model")
    def export_model(session_id: str):
        sess = get(session_id)
        if sess.state.model is None:
            raise HTTPException(404, "no model trained yet")
        return sess.state.model.to_json()

    @app.get("/api/v1/sessions/{session_id}/annotations")
    def export_annotations(session_id: str, format: str = "conll2003",
                           scheme: str = "bio"):
        sess = get(session_id)
        if format != "conll2003":
            raise HTTPException(422, f"unsupported export format {format!r}")
        pool = sess.state.pool
        buf = io.StringIO()
        for s in pool.sentences:
            labels = s.working if s.working else ["O"] * len(s)
            if scheme == "io":
                labels = corpus.bio_to_io(labels)
            for tok, tag in zip(s.tokens, labels):
                if tag in ("B", "I") and pool.entity_class:
                    tag = f"{tag}-{pool.entity_class}"
                buf.write(f"{tok.surface} {tok.pos} O {tag}\n")
            buf.write("\n")
        from fastapi.responses import PlainTextResponse
        return PlainTextResponse(buf.getvalue())

    @app.get("/api/v1/sessions/{session_id}/states")
    def sentence_states(session_id: str):
        sess = get(session_id)
        return {"states": [{"sentence_id": s.id, "state": s.state}
                           for s in sess.state.pool.sentences]}

    return app
