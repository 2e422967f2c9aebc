"""Multiple-choice quiz generation with strict output parsing.

Quiz text must follow a fixed plain-text grammar (``Qn.`` stem, options
``A)`` through ``D)``, one ``Answer: X`` line, blocks separated by a single
blank line) so that generator output can be machine-checked: exactly one
correct answer, four distinct options, no markup characters. A deterministic
cloze-style stub generator blanks the longest content token of successive
source sentences; remote generators get one retry with the failure report
before the pipeline falls back to the stub.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .assistant import Generator, GeneratorUnavailable
from .retrieval import (
    DEFAULT_K,
    Document,
    IndexCache,
    RetrievalQuery,
    fnv1a64,
    search,
    split_sentences,
)

CLOZE_STUB_ID = "cloze-stub"
DEFAULT_NUM_QUESTIONS = 5
MARKUP_CHARS = set("*#`<>")
BLANK = "____"

OPTION_LABELS = "ABCD"

_Q_LINE_RE = re.compile(r"^Q(\d+)\. (.*)$")
_OPTION_LINE_RE = re.compile(r"^([A-D])\) (.*)$")
_ANSWER_LINE_RE = re.compile(r"^Answer: (.*)$")

_WORD_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9'\-]*")

# Small fixed list; a content token is >= 5 chars and not one of these.
STOPWORDS = frozenset(
    """
    about above after again against along among because before being below
    between both could doing during every further having itself might never
    other others ought shall should since still their theirs there these
    those through under until where which while whose within without would
    yours
    """.split()
)


class QuizError(Exception):
    pass


class NoContext(QuizError):
    pass


class InsufficientMaterial(QuizError):
    pass


class IssueCode(str, Enum):
    EMPTY = "empty"
    MALFORMED_BLOCK = "malformed_block"
    BAD_QUESTION_NUMBER = "bad_question_number"
    EMPTY_STEM = "empty_stem"
    MISSING_OPTION = "missing_option"
    BAD_OPTION_LABEL = "bad_option_label"
    MISSING_ANSWER = "missing_answer"
    DUPLICATE_ANSWER = "duplicate_answer"
    BAD_ANSWER_LABEL = "bad_answer_label"
    MARKUP_FORBIDDEN = "markup_forbidden"
    DUPLICATE_OPTION = "duplicate_option"
    CORRECT_OUT_OF_RANGE = "correct_out_of_range"
    COUNT_MISMATCH = "count_mismatch"


@dataclass(frozen=True)
class QuizRequest:
    doc_id: str
    topic: str
    num_questions: int = DEFAULT_NUM_QUESTIONS

    def __post_init__(self):
        if not self.topic:
            raise QuizError("topic must be non-empty")
        if self.num_questions < 1:
            raise QuizError(f"num_questions must be >= 1, got {self.num_questions}")


@dataclass
class Question:
    stem: str
    options: tuple[str, str, str, str]
    correct: int
    source_chunk: Optional[int] = None
    difficulty: Optional[str] = None  # heuristic tag, not validated


@dataclass
class Quiz:
    questions: list[Question]
    request: Optional[QuizRequest] = None
    generator_id: str = ""


@dataclass(frozen=True)
class ParseIssue:
    ordinal: int  # 1-based question block; 0 for quiz-level issues
    code: IssueCode
    detail: str = ""


@dataclass
class ParseReport:
    issues: list[ParseIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


def _markup_in(text: str) -> str:
    return "".join(sorted(MARKUP_CHARS & set(text)))


# -- grammar: serialize and parse ---------------------------------------------


def serialize_quiz(questions: Sequence[Question]) -> str:
    """Canonical quiz text; parse_quiz_response(serialize_quiz(q)) round-trips."""
    blocks = []
    for i, q in enumerate(questions, 1):
        lines = [f"Q{i}. {q.stem}"]
        lines.extend(f"{label}) {opt}" for label, opt in zip(OPTION_LABELS, q.options))
        lines.append(f"Answer: {OPTION_LABELS[q.correct]}")
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def _parse_block(ordinal: int, lines: list[str], issues: list[ParseIssue]) -> Optional[Question]:
    before = len(issues)

    answer_lines = [ln for ln in lines if _ANSWER_LINE_RE.match(ln)]
    if len(answer_lines) > 1:
        issues.append(ParseIssue(ordinal, IssueCode.DUPLICATE_ANSWER, f"{len(answer_lines)} Answer lines"))
    elif not answer_lines:
        issues.append(ParseIssue(ordinal, IssueCode.MISSING_ANSWER))

    m = _Q_LINE_RE.match(lines[0]) if lines else None
    stem = ""
    if m is None:
        issues.append(ParseIssue(ordinal, IssueCode.MALFORMED_BLOCK, "block must start with 'Qn. <stem>'"))
    else:
        if int(m.group(1)) != ordinal:
            issues.append(
                ParseIssue(ordinal, IssueCode.BAD_QUESTION_NUMBER, f"expected Q{ordinal}, got Q{m.group(1)}")
            )
        stem = m.group(2)
        if not stem.strip():
            issues.append(ParseIssue(ordinal, IssueCode.EMPTY_STEM))

    option_lines = lines[1:5]
    options: list[str] = []
    for want, ln in zip(OPTION_LABELS, option_lines):
        om = _OPTION_LINE_RE.match(ln)
        if om is None or om.group(1) != want:
            issues.append(ParseIssue(ordinal, IssueCode.BAD_OPTION_LABEL, f"expected '{want}) ...', got {ln!r}"))
            options.append("")
        else:
            options.append(om.group(2))
    if len(option_lines) < 4:
        issues.append(ParseIssue(ordinal, IssueCode.MISSING_OPTION, f"only {len(option_lines)} option lines"))

    correct = -1
    if len(answer_lines) == 1:
        label = _ANSWER_LINE_RE.match(answer_lines[0]).group(1)
        if label not in OPTION_LABELS:
            issues.append(ParseIssue(ordinal, IssueCode.BAD_ANSWER_LABEL, f"Answer must be A-D, got {label!r}"))
        else:
            correct = OPTION_LABELS.index(label)

    expected_len = 6
    if len(lines) > expected_len:
        extras = [ln for ln in lines[5:] if not _ANSWER_LINE_RE.match(ln)]
        if extras:
            issues.append(ParseIssue(ordinal, IssueCode.MALFORMED_BLOCK, f"unexpected line {extras[0]!r}"))
    elif len(lines) == expected_len and not _ANSWER_LINE_RE.match(lines[5]):
        issues.append(ParseIssue(ordinal, IssueCode.MALFORMED_BLOCK, f"expected 'Answer: X', got {lines[5]!r}"))

    for piece in [stem, *options]:
        bad = _markup_in(piece)
        if bad:
            issues.append(ParseIssue(ordinal, IssueCode.MARKUP_FORBIDDEN, f"contains {bad!r}"))

    if len(issues) > before:
        return None
    return Question(stem=stem, options=tuple(options), correct=correct)


def parse_quiz_response(text: str) -> Quiz | ParseReport:
    """Strict parse of the quiz grammar; a ParseReport is the failure channel."""
    issues: list[ParseIssue] = []
    if not text.strip():
        return ParseReport([ParseIssue(0, IssueCode.EMPTY, "no text")])
    if not text.endswith("\n"):
        issues.append(ParseIssue(0, IssueCode.MALFORMED_BLOCK, "text must end with a newline"))
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    blocks: list[list[str]] = [[]]
    for ln in lines:
        if ln == "":
            if not blocks[-1]:
                issues.append(ParseIssue(len(blocks), IssueCode.MALFORMED_BLOCK, "extra blank line"))
            blocks.append([])
        else:
            blocks[-1].append(ln)
    if blocks and not blocks[-1]:
        blocks.pop()
    blocks = [b for b in blocks if b]

    questions: list[Question] = []
    for ordinal, block in enumerate(blocks, 1):
        q = _parse_block(ordinal, block, issues)
        if q is not None:
            questions.append(q)

    if issues:
        return ParseReport(issues)
    return Quiz(questions=questions)


def validate_quiz(quiz: Quiz, request: QuizRequest) -> ParseReport:
    """Re-check count, option distinctness, answer range, and no-markup."""
    issues: list[ParseIssue] = []
    if len(quiz.questions) != request.num_questions:
        issues.append(
            ParseIssue(
                0,
                IssueCode.COUNT_MISMATCH,
                f"expected {request.num_questions} questions, got {len(quiz.questions)}",
            )
        )
    for ordinal, q in enumerate(quiz.questions, 1):
        if len(q.options) != 4 or any(not opt for opt in q.options):
            issues.append(ParseIssue(ordinal, IssueCode.MISSING_OPTION))
        if len(set(q.options)) != len(q.options):
            issues.append(ParseIssue(ordinal, IssueCode.DUPLICATE_OPTION))
        if not 0 <= q.correct <= 3:
            issues.append(ParseIssue(ordinal, IssueCode.CORRECT_OUT_OF_RANGE, f"correct={q.correct}"))
        for piece in [q.stem, *q.options]:
            bad = _markup_in(piece)
            if bad:
                issues.append(ParseIssue(ordinal, IssueCode.MARKUP_FORBIDDEN, f"contains {bad!r}"))
        if not q.stem.strip():
            issues.append(ParseIssue(ordinal, IssueCode.EMPTY_STEM))
    return ParseReport(issues)


# -- prompt -------------------------------------------------------------------


def build_quiz_prompt(topic: str, num_questions: int, passages: Sequence[tuple[int, str]]) -> str:
    """Deterministic prompt demanding the exact output grammar."""
    if not passages:
        raise NoContext("no passages for quiz prompt")
    header = (
        f"Write exactly {num_questions} multiple-choice questions about \"{topic}\" "
        "using only the numbered passages below.\n"
        "Output format, one block per question, blocks separated by a single blank line:\n"
        "Q1. <question text>\n"
        "A) <option>\n"
        "B) <option>\n"
        "C) <option>\n"
        "D) <option>\n"
        "Answer: <A, B, C or D>\n"
        "Number questions from 1 upward. Each question has exactly one correct answer and "
        "four distinct options. Plain text only: never use the characters * # ` < or >."
    )
    blocks = [f"[{i}] (chunk {cid})\n{text}" for i, (cid, text) in enumerate(passages, 1)]
    return header + "\n\n" + "\n\n".join(blocks) + "\n"


# -- cloze stub ---------------------------------------------------------------


def _content_tokens(sentence: str) -> list[tuple[str, int]]:
    """(token, char offset) pairs for tokens >= 5 chars that are not stopwords."""
    out = []
    for m in _WORD_RE.finditer(sentence):
        tok = m.group(0)
        if len(tok) >= 5 and tok.lower() not in STOPWORDS:
            out.append((tok, m.start()))
    return out


def _sanitize(text: str) -> str:
    return "".join(ch for ch in text if ch not in MARKUP_CHARS)


def cloze_stub_generate(
    passages: Sequence[tuple[int, str]], num_questions: int, doc_version: str = ""
) -> str:
    """Deterministic cloze quiz text in the output grammar.

    Question i blanks the longest content token (ties: earliest) of the i-th
    qualifying sentence in passage order. Distractors are the three longest
    other content tokens, drawn from the remaining passages first, then from
    the source passage; option order is a seeded shuffle keyed on
    (doc_version, ordinal).
    """
    sentences: list[tuple[int, int, str]] = []  # (passage_idx, chunk_id, sentence)
    for pidx, (cid, text) in enumerate(passages):
        for sent in split_sentences(text):
            if _content_tokens(sent):
                sentences.append((pidx, cid, sent))
    if len(sentences) < num_questions:
        raise InsufficientMaterial(
            f"{len(sentences)} qualifying sentences for {num_questions} questions"
        )

    # Global distractor pool: first occurrence wins, case-insensitive.
    pool: list[tuple[str, int, int]] = []  # (token, occurrence_idx, passage_idx)
    seen_lower: set[str] = set()
    occ = 0
    for pidx, (_cid, text) in enumerate(passages):
        for tok, _off in _content_tokens(text):
            low = tok.lower()
            if low not in seen_lower:
                seen_lower.add(low)
                pool.append((tok, occ, pidx))
            occ += 1

    questions: list[Question] = []
    for ordinal in range(1, num_questions + 1):
        pidx, _cid, sent = sentences[ordinal - 1]
        tokens = _content_tokens(sent)
        tok, off = max(tokens, key=lambda t: (len(t[0]), -t[1]))
        stem = _sanitize(sent[:off] + BLANK + sent[off + len(tok) :])

        candidates = [p for p in pool if p[0].lower() != tok.lower()]
        foreign = sorted((c for c in candidates if c[2] != pidx), key=lambda c: (-len(c[0]), c[1]))
        local = sorted((c for c in candidates if c[2] == pidx), key=lambda c: (-len(c[0]), c[1]))
        distractors = [c[0] for c in (foreign + local)[:3]]
        if len(distractors) < 3:
            raise InsufficientMaterial(f"only {len(distractors)} distractor tokens available")

        options = [tok, *distractors]
        rng = random.Random(fnv1a64(f"{doc_version}:{ordinal}".encode("utf-8")))
        rng.shuffle(options)
        questions.append(Question(stem=stem, options=tuple(options), correct=options.index(tok)))

    return serialize_quiz(questions)


class ClozeStubGenerator:
    """Generator facade over cloze_stub_generate for a fixed passage set."""

    generator_id = CLOZE_STUB_ID

    def __init__(self, passages: Sequence[tuple[int, str]], num_questions: int, doc_version: str = ""):
        self._passages = list(passages)
        self._num_questions = num_questions
        self._doc_version = doc_version

    def generate(self, prompt: str) -> str:
        return cloze_stub_generate(self._passages, self._num_questions, self._doc_version)


# -- orchestration ------------------------------------------------------------


def _tag_difficulty(questions: list[Question]) -> None:
    """Stem-length terciles; a display heuristic, never validated against."""
    order = sorted(range(len(questions)), key=lambda i: (len(questions[i].stem), i))
    names = ("basic", "intermediate", "advanced")
    for rank, idx in enumerate(order):
        questions[idx].difficulty = names[min(rank * 3 // max(len(questions), 1), 2)]


def _attach_sources(quiz: Quiz, passages: Sequence[tuple[int, str]]) -> None:
    for q in quiz.questions:
        correct_text = q.options[q.correct] if 0 <= q.correct < len(q.options) else ""
        q.source_chunk = next(
            (cid for cid, text in passages if correct_text and correct_text in text),
            passages[0][0],
        )


def retrieve_passages(
    request: QuizRequest, *, document: Document, cache: IndexCache, default_k: int = DEFAULT_K
) -> tuple[list[tuple[int, str]], list[tuple[int, str]]]:
    """(positive-similarity passages, all top-k passages) for the topic.

    NoContext when the topic retrieves nothing above score 0. The full top-k
    list backs the stub when the positive passages alone cannot supply enough
    cloze material.
    """
    index = cache.get_or_build(document)
    k = max(default_k, request.num_questions)
    hits = search(index, RetrievalQuery(request.topic, k))
    retrieved = [(cid, index.chunk(cid).text) for cid, _ in hits]
    passages = [(cid, index.chunk(cid).text) for cid, score in hits if score > 0.0]
    if not passages:
        raise NoContext(f"topic {request.topic!r} retrieved nothing above score 0")
    return passages, retrieved


def generate_quiz(
    request: QuizRequest,
    generator: Optional[Generator] = None,
    *,
    document: Document,
    cache: IndexCache,
    default_k: int = DEFAULT_K,
) -> Quiz:
    """Retrieve, prompt, generate, parse, validate; stub fallback guarantees
    the result satisfies the quiz invariants."""
    passages, retrieved = retrieve_passages(
        request, document=document, cache=cache, default_k=default_k
    )

    if generator is not None:
        prompt = build_quiz_prompt(request.topic, request.num_questions, passages)
        attempt_prompt = prompt
        for _attempt in range(2):
            try:
                text = generator.generate(attempt_prompt)
            except GeneratorUnavailable:
                break
            parsed = parse_quiz_response(text)
            if isinstance(parsed, Quiz):
                report = validate_quiz(parsed, request)
                if report.ok:
                    parsed.request = request
                    parsed.generator_id = generator.generator_id
                    _attach_sources(parsed, passages)
                    _tag_difficulty(parsed.questions)
                    return parsed
                issues = report.issues
            else:
                issues = parsed.issues
            feedback = "; ".join(f"Q{i.ordinal}: {i.code.value} {i.detail}".strip() for i in issues)
            attempt_prompt = prompt + f"\nYour previous reply was rejected ({feedback}). Follow the format exactly.\n"

    try:
        text = cloze_stub_generate(passages, request.num_questions, document.version)
        source_pool = passages
    except InsufficientMaterial:
        # Widen to every retrieved chunk before giving up.
        text = cloze_stub_generate(retrieved, request.num_questions, document.version)
        source_pool = retrieved
    parsed = parse_quiz_response(text)
    assert isinstance(parsed, Quiz), "stub output must parse"
    report = validate_quiz(parsed, request)
    assert report.ok, f"stub output must validate: {report.issues}"
    parsed.request = request
    parsed.generator_id = CLOZE_STUB_ID
    _attach_sources(parsed, source_pool)
    _tag_difficulty(parsed.questions)
    return parsed
