"""Event-sourced platform state.

Every mutation goes through a command method that validates its inputs,
appends one record to the event log, and then applies the record through
``_apply``; replay folds the same ``_apply`` over a stored log, so a replayed
platform reaches exactly the live state. ``state_digest`` hashes the canonical
projection (attendance results, actuator states, cache keys, request
counters) used to prove that equality.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .. import attendance as att
from .. import ecosmart as eco
from ..assistant import (
    AccessDenied,
    Answer,
    ChatQuery,
    Generator,
    RemoteGenerator,
    answer_query,
    authorize,
)
from ..quizgen import Quiz, QuizRequest, generate_quiz
from ..retrieval import Document, IndexCache, make_document
from .config import PlatformConfig
from .eventlog import EventLog, EventLogRecord


class UnknownSession(Exception):
    pass


class UnknownDocument(Exception):
    pass


class UnknownRoom(Exception):
    pass


def _now_ms() -> int:
    return int(time.time() * 1000)


@dataclass
class RoomState:
    actuators: eco.ActuatorState = field(default_factory=eco.ActuatorState)
    reading: Optional[eco.Reading] = None
    last_update_ms: Optional[int] = None
    last_commands: list[eco.Command] = field(default_factory=list)
    toggles: dict[str, int] = field(
        default_factory=lambda: {"hvac_cooling": 0, "lighting": 0, "ventilation": 0}
    )


class Platform:
    """Hub wiring attendance, environment, retrieval, chat and quiz together."""

    def __init__(self, config: Optional[PlatformConfig] = None, event_log: Optional[EventLog] = None):
        self.config = config or PlatformConfig()
        self.log = event_log if event_log is not None else EventLog()
        self.registry = att.Registry()
        self.sessions: dict[str, att.ClassSession] = {}
        self.session_rooms: dict[str, str] = {}
        self.documents: dict[str, Document] = {}
        self.rooms: dict[str, RoomState] = {}
        self.counters = {"chat": 0, "quiz": 0}
        self.cache = IndexCache(self.config.retrieval.chunk_size, self.config.retrieval.overlap)
        self.fraud = self.config.attendance.fraud.to_fraud_config()
        self.control = self.config.control.to_control_config()
        self.light_curve = self.config.curves.light.to_curve()
        self.air_curve = self.config.curves.air.to_curve()
        self._write = threading.RLock()
        for record in self.log.records:
            self._apply(record)

    # -- generators ---------------------------------------------------------

    def chat_generator(self) -> Optional[Generator]:
        gen = self.config.generator
        if gen.mode == "remote" and gen.endpoint:
            return RemoteGenerator(gen.endpoint, gen.timeout_s, gen.api_key(), gen.identity)
        return None  # pipeline default: deterministic stubs

    # -- command methods (validate, append, apply) ---------------------------

    def register_student(
        self, student_id: str, display_name: str, tag_uid: str, mac: str, timestamp: Optional[int] = None
    ) -> tuple[att.StudentRecord, int]:
        with self._write:
            if not student_id or not display_name:
                raise att.InvalidCredential("student_id and display_name must be non-empty")
            tag = att.normalize_tag_uid(tag_uid)
            mac_c = att.normalize_mac(mac)
            if student_id in self.registry:
                raise att.DuplicateStudentId(student_id)
            if self.registry.by_tag(tag) is not None:
                raise att.DuplicateTag(tag)
            if self.registry.by_mac(mac_c) is not None:
                raise att.DuplicateMac(mac_c)
            record = self.log.append(
                "attendance",
                "student_registered",
                {"student_id": student_id, "display_name": display_name, "tag_uid": tag, "mac": mac_c},
                timestamp if timestamp is not None else _now_ms(),
            )
            self._apply(record)
            return self.registry.get(student_id), record.seq

    def open_session(
        self,
        class_id: str,
        window_start: int,
        window_end: int,
        pairing_window_ms: Optional[int] = None,
        network_id: str = "",
        room_id: str = "",
        timestamp: Optional[int] = None,
    ) -> tuple[att.ClassSession, int]:
        with self._write:
            pairing = (
                pairing_window_ms
                if pairing_window_ms is not None
                else self.config.attendance.pairing_window_ms
            )
            if window_start >= window_end:
                raise att.InvalidWindow(f"window_start {window_start} must precede window_end {window_end}")
            if pairing <= 0:
                raise att.InvalidWindow(f"pairing_window_ms must be positive, got {pairing}")
            session_id = att.ClassSession(class_id, window_start, window_end, pairing, network_id).session_id
            record = self.log.append(
                "attendance",
                "session_opened",
                {
                    "session_id": session_id,
                    "class_id": class_id,
                    "window_start": window_start,
                    "window_end": window_end,
                    "pairing_window_ms": pairing,
                    "network_id": network_id,
                    "room_id": room_id,
                },
                timestamp if timestamp is not None else _now_ms(),
            )
            self._apply(record)
            return self.sessions[session_id], record.seq

    def record_auth_event(
        self,
        session_id: str,
        kind: att.EventKind,
        event_timestamp: int,
        node_id: str,
        payload: dict,
    ) -> tuple[att.Ack, int]:
        with self._write:
            session = self.get_session(session_id)
            if session.closed:
                raise att.SessionClosed(session_id)
            record = self.log.append(
                "attendance",
                "auth_event",
                {
                    "session_ids": [session_id],
                    "kind": att.EventKind(kind).value,
                    "event_timestamp": int(event_timestamp),
                    "node_id": node_id,
                    "payload": payload,
                },
                event_timestamp,
            )
            acks = self._apply(record)
            return acks[0][1], record.seq

    def broadcast_auth_event(
        self, kind: att.EventKind, event_timestamp: int, node_id: str, payload: dict
    ) -> tuple[list[tuple[str, att.Ack]], Optional[int]]:
        """Deliver a device auth event to every open session."""
        with self._write:
            targets = [sid for sid in self.sessions if not self.sessions[sid].closed]
            if not targets:
                return [], None
            record = self.log.append(
                "attendance",
                "auth_event",
                {
                    "session_ids": targets,
                    "kind": att.EventKind(kind).value,
                    "event_timestamp": int(event_timestamp),
                    "node_id": node_id,
                    "payload": payload,
                },
                event_timestamp,
            )
            return self._apply(record), record.seq

    def close_session(self, session_id: str, timestamp: Optional[int] = None) -> tuple[bool, Optional[int]]:
        """Returns (closed_now, seq); closing twice is a no-op with seq None."""
        with self._write:
            session = self.get_session(session_id)
            if session.closed:
                return False, None
            results = [
                {
                    "student_id": r.student_id,
                    "status": r.status.value,
                    "reason": r.reason.value,
                    "evidence": list(r.evidence) if r.evidence else None,
                }
                for r in att.evaluate_attendance(session, self.registry, self.fraud)
            ]
            record = self.log.append(
                "attendance",
                "session_closed",
                {"session_id": session_id, "final_results": results},
                timestamp if timestamp is not None else _now_ms(),
            )
            self._apply(record)
            return True, record.seq

    def ingest_document(
        self, doc_id: str, title: str, text: str, timestamp: Optional[int] = None
    ) -> tuple[Document, int]:
        with self._write:
            make_document(doc_id, title, text)  # validates non-empty text
            record = self.log.append(
                "documents",
                "document_ingested",
                {"doc_id": doc_id, "title": title, "text": text},
                timestamp if timestamp is not None else _now_ms(),
            )
            self._apply(record)
            return self.documents[doc_id], record.seq

    def report_environment(
        self,
        room_id: str,
        event_timestamp: int,
        temp_c: float,
        humidity_pct: float,
        lux_raw: float,
        air_raw: float,
    ) -> tuple[RoomState, list[eco.Command], int]:
        with self._write:
            # Validate up front so a bad report never lands in the log.
            lux = eco.calibrate(self.light_curve, lux_raw)
            ppm = eco.calibrate(self.air_curve, air_raw)
            eco.validate_reading(temp_c, humidity_pct, lux, ppm, event_timestamp)
            record = self.log.append(
                "environment",
                "sensor_report",
                {
                    "room_id": room_id,
                    "event_timestamp": int(event_timestamp),
                    "temp_c": temp_c,
                    "humidity_pct": humidity_pct,
                    "lux_raw": lux_raw,
                    "air_raw": air_raw,
                },
                event_timestamp,
            )
            commands = self._apply(record)
            return self.rooms[room_id], commands, record.seq

    def chat(self, query: ChatQuery, timestamp: Optional[int] = None) -> tuple[Answer, int]:
        """Gated Q&A. The gate runs before anything is appended or retrieved."""
        with self._write:
            session = self.get_session(query.session_id)
            document = self.get_document(query.doc_id)
            decision = authorize(session, self.registry, query.student_id, self.fraud)
            if not decision.allowed:
                raise AccessDenied(query.student_id, decision.status, decision.reason)
            record = self.log.append(
                "chat",
                "chat_requested",
                {
                    "student_id": query.student_id,
                    "session_id": query.session_id,
                    "doc_id": query.doc_id,
                    "text": query.text,
                    "k": query.k,
                },
                timestamp if timestamp is not None else _now_ms(),
            )
            self._apply(record)
            answer = answer_query(
                query,
                session=session,
                registry=self.registry,
                document=document,
                cache=self.cache,
                generator=self.chat_generator(),
                default_k=self.config.retrieval.default_k,
                fraud=self.fraud,
            )
            return answer, record.seq

    def quiz(
        self,
        doc_id: str,
        topic: str,
        num_questions: Optional[int] = None,
        timestamp: Optional[int] = None,
    ) -> tuple[Quiz, int]:
        with self._write:
            document = self.get_document(doc_id)
            n = num_questions if num_questions is not None else self.config.quiz.default_num_questions
            request = QuizRequest(doc_id=doc_id, topic=topic, num_questions=n)
            record = self.log.append(
                "quiz",
                "quiz_requested",
                {"doc_id": doc_id, "topic": topic, "num_questions": n},
                timestamp if timestamp is not None else _now_ms(),
            )
            self._apply(record)
            quiz = generate_quiz(
                request,
                self.chat_generator(),
                document=document,
                cache=self.cache,
                default_k=self.config.retrieval.default_k,
            )
            return quiz, record.seq

    # -- apply (shared by live path and replay) ------------------------------

    def _apply(self, record: EventLogRecord):
        payload = record.payload
        kind = record.kind
        if kind == "student_registered":
            return self.registry.register(
                payload["student_id"], payload["display_name"], payload["tag_uid"], payload["mac"]
            )
        if kind == "session_opened":
            session = att.ClassSession(
                payload["class_id"],
                payload["window_start"],
                payload["window_end"],
                payload["pairing_window_ms"],
                payload["network_id"],
                session_id=payload["session_id"],
            )
            self.sessions[session.session_id] = session
            if payload.get("room_id"):
                self.session_rooms[session.session_id] = payload["room_id"]
            return session
        if kind == "auth_event":
            acks = []
            for sid in payload["session_ids"]:
                ack = self.sessions[sid].record_event(
                    self.registry,
                    att.EventKind(payload["kind"]),
                    payload["event_timestamp"],
                    payload["node_id"],
                    payload["payload"],
                )
                acks.append((sid, ack))
            return acks
        if kind == "session_closed":
            self.sessions[payload["session_id"]].close()
            return None
        if kind == "document_ingested":
            self.documents[payload["doc_id"]] = make_document(
                payload["doc_id"], payload["title"], payload["text"]
            )
            return self.documents[payload["doc_id"]]
        if kind == "sensor_report":
            room = self.rooms.setdefault(payload["room_id"], RoomState())
            reading = eco.validate_reading(
                payload["temp_c"],
                payload["humidity_pct"],
                eco.calibrate(self.light_curve, payload["lux_raw"]),
                eco.calibrate(self.air_curve, payload["air_raw"]),
                payload["event_timestamp"],
            )
            new_state, commands = eco.control_step(reading, room.actuators, self.control)
            room.actuators = new_state
            room.reading = reading
            room.last_update_ms = payload["event_timestamp"]
            room.last_commands = commands
            for c in commands:
                room.toggles[c.actuator] += 1
            return commands
        if kind == "chat_requested":
            self.cache.get_or_build(self.documents[payload["doc_id"]])
            self.counters["chat"] += 1
            return None
        if kind == "quiz_requested":
            self.cache.get_or_build(self.documents[payload["doc_id"]])
            self.counters["quiz"] += 1
            return None
        raise ValueError(f"unknown event kind {kind!r} at seq {record.seq}")

    # -- reads ----------------------------------------------------------------

    def get_session(self, session_id: str) -> att.ClassSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def get_document(self, doc_id: str) -> Document:
        try:
            return self.documents[doc_id]
        except KeyError:
            raise UnknownDocument(doc_id) from None

    def get_room(self, room_id: str) -> RoomState:
        try:
            return self.rooms[room_id]
        except KeyError:
            raise UnknownRoom(room_id) from None

    def attendance_results(self, session_id: str) -> list[att.AttendanceResult]:
        return att.evaluate_attendance(self.get_session(session_id), self.registry, self.fraud)

    # -- digest and replay ------------------------------------------------------

    def state_projection(self) -> dict:
        """Canonical serializable view of the digest-relevant state."""
        return {
            "attendance": {
                sid: [
                    {
                        "student_id": r.student_id,
                        "status": r.status.value,
                        "reason": r.reason.value,
                        "evidence": list(r.evidence) if r.evidence else None,
                    }
                    for r in sorted(
                        att.evaluate_attendance(self.sessions[sid], self.registry, self.fraud),
                        key=lambda r: r.student_id,
                    )
                ]
                for sid in sorted(self.sessions)
            },
            "actuators": {
                room_id: self.rooms[room_id].actuators.as_dict() for room_id in sorted(self.rooms)
            },
            "cache_keys": [list(key) for key in self.cache.keys()],
            "counters": {k: self.counters[k] for k in sorted(self.counters)},
        }

    def state_digest(self) -> str:
        canonical = json.dumps(
            self.state_projection(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def replay(
        cls, records: Iterable[EventLogRecord], config: Optional[PlatformConfig] = None
    ) -> "Platform":
        """Fold records over an empty platform; no side effects beyond state."""
        platform = cls(config, EventLog())
        for record in records:
            platform._apply(record)
        return platform
