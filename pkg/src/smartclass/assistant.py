"""Attendance-gated classroom Q&A.

The pipeline is gate -> retrieve -> compose -> generate: a student must be
verified Present in the session before any retrieval happens, the top-k
passages are folded into a fixed prompt template, and the answer comes from a
pluggable generator. The default generator is a deterministic extractive stub
so the whole pipeline is reproducible offline; a remote HTTP generator can be
configured and falls back to the stub on failure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Protocol, runtime_checkable

import httpx

from .attendance import (
    ClassSession,
    FraudConfig,
    DEFAULT_FRAUD,
    Reason,
    Registry,
    Status,
    evaluate_attendance,
)
from .retrieval import (
    DEFAULT_K,
    Document,
    IndexCache,
    RetrievalQuery,
    search,
    split_sentences,
    tokenize,
)

EXTRACTIVE_STUB_ID = "extractive-stub"

_PROMPT_HEADER = (
    "You are a classroom assistant. Answer the student's question using only the "
    "numbered passages below, and cite passage numbers in square brackets."
)
_QUESTION_MARKER = "\n\nQuestion: "
_PASSAGE_HEADER_RE = re.compile(r"(?m)^\[(\d+)\] \(chunk (\d+)\)$")
_CITATION_RE = re.compile(r"\[(\d+)\]")


class AssistantError(Exception):
    pass


class AccessDenied(AssistantError):
    def __init__(self, student_id: str, status: Status, reason: Reason):
        self.student_id = student_id
        self.status = status
        self.reason = reason
        super().__init__(f"{student_id} is {status.value} ({reason.value})")


class NoContext(AssistantError):
    pass


class GeneratorUnavailable(AssistantError):
    pass


@dataclass(frozen=True)
class ChatQuery:
    student_id: str
    session_id: str
    doc_id: str
    text: str
    k: Optional[int] = None

    def __post_init__(self):
        if not self.text:
            raise AssistantError("query text must be non-empty")


@dataclass(frozen=True)
class Passage:
    chunk_id: int
    text: str
    score: float


@dataclass(frozen=True)
class AnswerContext:
    passages: tuple[Passage, ...]
    prompt: str


@dataclass(frozen=True)
class Answer:
    text: str
    citations: tuple[int, ...]
    generator_id: str


@dataclass(frozen=True)
class AuthDecision:
    allowed: bool
    status: Status
    reason: Reason


@runtime_checkable
class Generator(Protocol):
    generator_id: str

    def generate(self, prompt: str) -> str: ...


class ExtractiveStub:
    """Deterministic stand-in for an external LLM: quotes the best sentence."""

    generator_id = EXTRACTIVE_STUB_ID

    def generate(self, prompt: str) -> str:
        return extractive_generate(prompt)


class RemoteGenerator:
    """Minimal HTTP generator client: POST {"prompt": ...} -> {"text": ...}.

    Timeout-bounded; any transport or shape error surfaces as
    GeneratorUnavailable so callers can fall back to the stub.
    """

    def __init__(
        self,
        endpoint: str,
        timeout_s: float = 10.0,
        api_key: Optional[str] = None,
        generator_id: str = "remote",
    ) -> None:
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.api_key = api_key
        self.generator_id = generator_id

    def generate(self, prompt: str) -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(
                self.endpoint, json={"prompt": prompt}, timeout=self.timeout_s, headers=headers
            )
            resp.raise_for_status()
            text = resp.json().get("text")
        except Exception as exc:
            raise GeneratorUnavailable(str(exc)) from exc
        if not isinstance(text, str) or not text:
            raise GeneratorUnavailable("remote generator returned no text")
        return text


def authorize(
    session: ClassSession,
    registry: Registry,
    student_id: str,
    fraud: FraudConfig = DEFAULT_FRAUD,
) -> AuthDecision:
    """Allowed iff the dual-factor evaluation marks the student Present now."""
    registry.get(student_id)  # raises UnknownStudent
    for result in evaluate_attendance(session, registry, fraud):
        if result.student_id == student_id:
            return AuthDecision(result.status is Status.PRESENT, result.status, result.reason)
    raise AssertionError("registered student missing from evaluation")


def compose_prompt(query_text: str, passages: list[Passage] | tuple[Passage, ...]) -> str:
    """Fixed template: header, numbered passages with chunk ids, question.

    Byte-deterministic for given inputs; passages appear in the given
    (score-descending) order.
    """
    if not passages:
        raise NoContext("no passages to compose a prompt from")
    blocks = [f"[{i}] (chunk {p.chunk_id})\n{p.text}" for i, p in enumerate(passages, 1)]
    return _PROMPT_HEADER + "\n\n" + "\n\n".join(blocks) + _QUESTION_MARKER + query_text


def _parse_prompt(prompt: str) -> tuple[str, list[tuple[int, int, str]]]:
    """Recover (question, [(number, chunk_id, text)]) from a composed prompt."""
    qpos = prompt.rfind(_QUESTION_MARKER)
    if qpos == -1:
        raise AssistantError("prompt missing question marker")
    question = prompt[qpos + len(_QUESTION_MARKER) :]
    body = prompt[:qpos]
    headers = list(_PASSAGE_HEADER_RE.finditer(body))
    if not headers:
        raise AssistantError("prompt contains no passages")
    passages = []
    for i, m in enumerate(headers):
        text_start = m.end() + 1  # past the header's newline
        text_end = headers[i + 1].start() - 2 if i + 1 < len(headers) else len(body)
        passages.append((int(m.group(1)), int(m.group(2)), body[text_start:text_end]))
    return question, passages


def extractive_generate(prompt: str) -> str:
    """Stub generation: best sentence of the top passage by query-token overlap.

    Overlap counts distinct shared tokens; ties keep the earlier sentence, and
    a zero-overlap query falls back to the first sentence. Output is a fixed
    framing line, the sentence, and the passage's citation marker.
    """
    question, passages = _parse_prompt(prompt)
    number, _chunk_id, text = passages[0]
    sentences = split_sentences(text)
    if not sentences:
        sentences = [text.strip() or "(no content)"]
    qtokens = set(tokenize(question))
    best = max(range(len(sentences)), key=lambda i: (len(qtokens & set(tokenize(sentences[i]))), -i))
    return f"Based on the course material: {sentences[best]} [{number}]"


def _extract_citations(answer_text: str, passages: list[Passage] | tuple[Passage, ...]) -> tuple[int, ...]:
    """Map [n] markers in the answer back to chunk ids, in first-use order."""
    seen: list[int] = []
    for m in _CITATION_RE.finditer(answer_text):
        n = int(m.group(1))
        if 1 <= n <= len(passages):
            cid = passages[n - 1].chunk_id
            if cid not in seen:
                seen.append(cid)
    return tuple(seen)


def answer_query(
    query: ChatQuery,
    *,
    session: ClassSession,
    registry: Registry,
    document: Document,
    cache: IndexCache,
    generator: Optional[Generator] = None,
    default_k: int = DEFAULT_K,
    fraud: FraudConfig = DEFAULT_FRAUD,
) -> Answer:
    """Full gated pipeline; no retrieval happens for a non-Present student."""
    decision = authorize(session, registry, query.student_id, fraud)
    if not decision.allowed:
        raise AccessDenied(query.student_id, decision.status, decision.reason)

    index = cache.get_or_build(document)
    hits = search(index, RetrievalQuery(query.text, query.k or default_k))
    passages = tuple(Passage(cid, index.chunk(cid).text, score) for cid, score in hits)
    prompt = compose_prompt(query.text, passages)

    text: Optional[str] = None
    generator_id = EXTRACTIVE_STUB_ID
    if generator is not None:
        try:
            text = generator.generate(prompt)
            generator_id = generator.generator_id
        except GeneratorUnavailable:
            text = None
    if text is None or not text.strip():
        text = extractive_generate(prompt)
        generator_id = EXTRACTIVE_STUB_ID
    return Answer(text, _extract_citations(text, passages), generator_id)
