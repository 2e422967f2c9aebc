"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"


class RegisterStudentRequest(BaseModel):
    student_id: str = Field(min_length=1)
    display_name: str = Field(min_length=1)
    tag_uid: str = Field(min_length=8, max_length=20)
    mac: str = Field(min_length=12)


class StudentOut(BaseModel):
    student_id: str
    display_name: str
    tag_uid: str
    mac: str
    seq: Optional[int] = None


class OpenSessionRequest(BaseModel):
    class_id: str = Field(min_length=1)
    window_start: int = Field(ge=0)
    window_end: int = Field(ge=0)
    pairing_window_ms: Optional[int] = Field(default=None, gt=0)
    network_id: str = ""
    room_id: str = ""


class SessionOut(BaseModel):
    session_id: str
    class_id: str
    state: Literal["open", "closed"]
    window_start: int
    window_end: int
    pairing_window_ms: int
    network_id: str
    room_id: str = ""
    seq: Optional[int] = None


class CloseSessionResponse(BaseModel):
    session_id: str
    state: Literal["open", "closed"]
    already_closed: bool
    seq: Optional[int] = None


class AttendanceRow(BaseModel):
    student_id: str
    display_name: str
    status: Literal["present", "absent", "flagged"]
    reason: str
    evidence: Optional[tuple[int, int]] = None


class AttendanceResponse(BaseModel):
    session_id: str
    state: Literal["open", "closed"]
    results: list[AttendanceRow]


class IngestDocumentRequest(BaseModel):
    doc_id: str = Field(min_length=1)
    title: str = ""
    text: str = Field(min_length=1)


class DocumentOut(BaseModel):
    doc_id: str
    title: str
    version: str
    seq: Optional[int] = None


class ChatRequest(BaseModel):
    student_id: str = Field(min_length=1)
    session_id: str = Field(min_length=1)
    doc_id: str = Field(min_length=1)
    text: str = Field(min_length=1)
    k: Optional[int] = Field(default=None, ge=1)


class ChatResponse(BaseModel):
    answer: str
    citations: list[int]
    generator_id: str
    seq: int


class QuizGenerateRequest(BaseModel):
    doc_id: str = Field(min_length=1)
    topic: str = Field(min_length=1)
    num_questions: Optional[int] = Field(default=None, ge=1)


class QuestionOut(BaseModel):
    stem: str
    options: tuple[str, str, str, str]
    correct: int
    source_chunk: Optional[int] = None
    difficulty: Optional[str] = None


class QuizResponse(BaseModel):
    doc_id: str
    topic: str
    num_questions: int
    generator_id: str
    questions: list[QuestionOut]
    seq: int


class ReadingOut(BaseModel):
    temp_c: float
    humidity_pct: float
    lux: float
    air_ppm: float
    timestamp: int


class EnvironmentResponse(BaseModel):
    room_id: str
    reading: Optional[ReadingOut] = None
    actuators: dict[str, bool]
    toggles: dict[str, int]
    last_update_ms: Optional[int] = None


class InjectEventRequest(BaseModel):
    kind: Literal["rfid_scan", "wifi_presence"]
    node_id: str = "injected"
    timestamp: int = Field(ge=0)
    session_id: Optional[str] = None  # None broadcasts to every open session
    payload: dict


class InjectEventResponse(BaseModel):
    acks: list[dict]
    seq: Optional[int] = None


class DigestResponse(BaseModel):
    digest: str
    last_seq: int
