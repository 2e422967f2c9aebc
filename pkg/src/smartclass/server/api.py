"""HTTP API over the platform.

State-changing routes append to the event log before responding and return
the appended record's seq. The chat route enforces the attendance gate with
403 before any retrieval work happens. Schema violations surface as FastAPI's
standard 422 responses with the offending field named.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException
from fastapi.staticfiles import StaticFiles

from .. import attendance as att
from .. import ecosmart as eco
from ..assistant import AccessDenied, ChatQuery
from ..quizgen import InsufficientMaterial, NoContext, QuizError
from ..retrieval import EmptyDocument
from . import schemas
from .platform import Platform, UnknownDocument, UnknownRoom, UnknownSession

logger = logging.getLogger(__name__)


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="smartclass", version="0.1.0")
    app.state.platform = platform

    admin_token = platform.config.server.admin_token

    def admin_guard(x_admin_token: Optional[str] = Header(default=None)) -> None:
        if admin_token and x_admin_token != admin_token:
            raise HTTPException(status_code=401, detail="admin token required")

    def session_out(session: att.ClassSession, seq: Optional[int] = None) -> schemas.SessionOut:
        return schemas.SessionOut(
            session_id=session.session_id,
            class_id=session.class_id,
            state=session.state,
            window_start=session.window_start,
            window_end=session.window_end,
            pairing_window_ms=session.pairing_window_ms,
            network_id=session.network_id,
            room_id=platform.session_rooms.get(session.session_id, ""),
            seq=seq,
        )

    def attendance_rows(session_id: str) -> list[schemas.AttendanceRow]:
        names = {r.student_id: r.display_name for r in platform.registry.students()}
        return [
            schemas.AttendanceRow(
                student_id=r.student_id,
                display_name=names.get(r.student_id, r.student_id),
                status=r.status.value,
                reason=r.reason.value,
                evidence=r.evidence,
            )
            for r in platform.attendance_results(session_id)
        ]

    @app.get("/api/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse()

    # -- students -----------------------------------------------------------

    @app.post(
        "/api/students",
        response_model=schemas.StudentOut,
        status_code=201,
        dependencies=[Depends(admin_guard)],
    )
    def register_student(req: schemas.RegisterStudentRequest) -> schemas.StudentOut:
        try:
            record, seq = platform.register_student(req.student_id, req.display_name, req.tag_uid, req.mac)
        except (att.DuplicateStudentId, att.DuplicateTag, att.DuplicateMac, att.InvalidCredential) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return schemas.StudentOut(
            student_id=record.student_id,
            display_name=record.display_name,
            tag_uid=record.tag_uid,
            mac=record.mac,
            seq=seq,
        )

    @app.get("/api/students", response_model=list[schemas.StudentOut])
    def list_students() -> list[schemas.StudentOut]:
        return [
            schemas.StudentOut(
                student_id=r.student_id, display_name=r.display_name, tag_uid=r.tag_uid, mac=r.mac
            )
            for r in platform.registry.students()
        ]

    # -- sessions -----------------------------------------------------------

    @app.post(
        "/api/sessions",
        response_model=schemas.SessionOut,
        status_code=201,
        dependencies=[Depends(admin_guard)],
    )
    def open_session(req: schemas.OpenSessionRequest) -> schemas.SessionOut:
        try:
            session, seq = platform.open_session(
                req.class_id,
                req.window_start,
                req.window_end,
                req.pairing_window_ms,
                req.network_id,
                req.room_id,
            )
        except att.InvalidWindow as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return session_out(session, seq)

    @app.get("/api/sessions", response_model=list[schemas.SessionOut])
    def list_sessions() -> list[schemas.SessionOut]:
        return [session_out(platform.sessions[sid]) for sid in platform.sessions]

    @app.get("/api/sessions/{session_id}", response_model=schemas.SessionOut)
    def get_session(session_id: str) -> schemas.SessionOut:
        try:
            return session_out(platform.get_session(session_id))
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}") from exc

    @app.post(
        "/api/sessions/{session_id}/close",
        response_model=schemas.CloseSessionResponse,
        dependencies=[Depends(admin_guard)],
    )
    def close_session(session_id: str) -> schemas.CloseSessionResponse:
        try:
            closed_now, seq = platform.close_session(session_id)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}") from exc
        return schemas.CloseSessionResponse(
            session_id=session_id, state="closed", already_closed=not closed_now, seq=seq
        )

    @app.get("/api/sessions/{session_id}/attendance", response_model=schemas.AttendanceResponse)
    def attendance(session_id: str) -> schemas.AttendanceResponse:
        try:
            rows = attendance_rows(session_id)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}") from exc
        return schemas.AttendanceResponse(
            session_id=session_id, state=platform.get_session(session_id).state, results=rows
        )

    # -- documents ------------------------------------------------------------

    @app.post(
        "/api/documents",
        response_model=schemas.DocumentOut,
        status_code=201,
        dependencies=[Depends(admin_guard)],
    )
    def ingest_document(req: schemas.IngestDocumentRequest) -> schemas.DocumentOut:
        try:
            document, seq = platform.ingest_document(req.doc_id, req.title, req.text)
        except EmptyDocument as exc:
            raise HTTPException(status_code=400, detail="text must be non-empty") from exc
        return schemas.DocumentOut(doc_id=document.doc_id, title=document.title, version=document.version, seq=seq)

    @app.get("/api/documents", response_model=list[schemas.DocumentOut])
    def list_documents() -> list[schemas.DocumentOut]:
        return [
            schemas.DocumentOut(doc_id=d.doc_id, title=d.title, version=d.version)
            for d in platform.documents.values()
        ]

    # -- chat -------------------------------------------------------------------

    @app.post("/api/chat", response_model=schemas.ChatResponse)
    def chat(req: schemas.ChatRequest) -> schemas.ChatResponse:
        try:
            answer, seq = platform.chat(
                ChatQuery(
                    student_id=req.student_id,
                    session_id=req.session_id,
                    doc_id=req.doc_id,
                    text=req.text,
                    k=req.k,
                )
            )
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {req.session_id!r}") from exc
        except UnknownDocument as exc:
            raise HTTPException(status_code=404, detail=f"unknown document {req.doc_id!r}") from exc
        except att.UnknownStudent as exc:
            raise HTTPException(status_code=404, detail=f"unknown student {req.student_id!r}") from exc
        except AccessDenied as exc:
            raise HTTPException(
                status_code=403,
                detail={"error": "access_denied", "status": exc.status.value, "reason": exc.reason.value},
            ) from exc
        return schemas.ChatResponse(
            answer=answer.text, citations=list(answer.citations), generator_id=answer.generator_id, seq=seq
        )

    # -- quiz ---------------------------------------------------------------------

    @app.post("/api/quiz", response_model=schemas.QuizResponse)
    def quiz(req: schemas.QuizGenerateRequest) -> schemas.QuizResponse:
        try:
            result, seq = platform.quiz(req.doc_id, req.topic, req.num_questions)
        except UnknownDocument as exc:
            raise HTTPException(status_code=404, detail=f"unknown document {req.doc_id!r}") from exc
        except NoContext as exc:
            raise HTTPException(status_code=422, detail={"error": "no_context", "message": str(exc)}) from exc
        except (InsufficientMaterial, QuizError) as exc:
            raise HTTPException(status_code=422, detail={"error": "quiz_failed", "message": str(exc)}) from exc
        assert result.request is not None
        return schemas.QuizResponse(
            doc_id=req.doc_id,
            topic=req.topic,
            num_questions=result.request.num_questions,
            generator_id=result.generator_id,
            questions=[
                schemas.QuestionOut(
                    stem=q.stem,
                    options=q.options,
                    correct=q.correct,
                    source_chunk=q.source_chunk,
                    difficulty=q.difficulty,
                )
                for q in result.questions
            ],
            seq=seq,
        )

    # -- environment ----------------------------------------------------------------

    @app.get("/api/rooms", response_model=list[str])
    def list_rooms() -> list[str]:
        return sorted(platform.rooms)

    @app.get("/api/rooms/{room_id}/environment", response_model=schemas.EnvironmentResponse)
    def environment(room_id: str) -> schemas.EnvironmentResponse:
        try:
            room = platform.get_room(room_id)
        except UnknownRoom as exc:
            raise HTTPException(status_code=404, detail=f"unknown room {room_id!r}") from exc
        reading = None
        if room.reading is not None:
            reading = schemas.ReadingOut(
                temp_c=room.reading.temp_c,
                humidity_pct=room.reading.humidity_pct,
                lux=room.reading.lux,
                air_ppm=room.reading.air_ppm,
                timestamp=room.reading.timestamp,
            )
        return schemas.EnvironmentResponse(
            room_id=room_id,
            reading=reading,
            actuators=room.actuators.as_dict(),
            toggles=dict(room.toggles),
            last_update_ms=room.last_update_ms,
        )

    # -- test-only event injection -----------------------------------------------------

    @app.post(
        "/api/devices/events",
        response_model=schemas.InjectEventResponse,
        dependencies=[Depends(admin_guard)],
    )
    def inject_event(req: schemas.InjectEventRequest) -> schemas.InjectEventResponse:
        if not platform.config.server.allow_event_injection:
            raise HTTPException(status_code=403, detail="event injection disabled")
        kind = att.EventKind(req.kind)
        try:
            if req.session_id is not None:
                ack, seq = platform.record_auth_event(
                    req.session_id, kind, req.timestamp, req.node_id, req.payload
                )
                acks = [(req.session_id, ack)]
            else:
                acks, seq = platform.broadcast_auth_event(kind, req.timestamp, req.node_id, req.payload)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=f"unknown session {req.session_id!r}") from exc
        except att.SessionClosed as exc:
            raise HTTPException(status_code=400, detail=f"session closed: {exc}") from exc
        return schemas.InjectEventResponse(
            acks=[
                {
                    "session_id": sid,
                    "completes": a.completes,
                    "reason": a.reason.value,
                    "student_id": a.student_id,
                }
                for sid, a in acks
            ],
            seq=seq,
        )

    # -- state ---------------------------------------------------------------------------

    @app.get("/api/state/digest", response_model=schemas.DigestResponse)
    def digest() -> schemas.DigestResponse:
        return schemas.DigestResponse(digest=platform.state_digest(), last_seq=platform.log.last_seq)

    dist = platform.config.server.dashboard_dist
    if dist and Path(dist).is_dir():
        app.mount("/dashboard", StaticFiles(directory=dist, html=True), name="dashboard")

    return app
