"""Document ingestion and semantic retrieval.

Instructor material is split into character chunks with a recursive
separator ladder, embedded with a deterministic signed feature-hashing
bag-of-words (no external model, bit-identical across runs and platforms),
and served through an exact full-scan cosine top-k index. A session cache
keyed on (doc_id, content digest) prevents reprocessing of unchanged
documents.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

EMBEDDING_DIMS = 1024
DEFAULT_CHUNK_SIZE = 1000
DEFAULT_OVERLAP = 200
DEFAULT_SEPARATORS: tuple[str, ...] = ("\n\n", "\n", " ", "")
DEFAULT_K = 4

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class RetrievalError(Exception):
    pass


class InvalidParams(RetrievalError):
    pass


class EmptyDocument(RetrievalError):
    pass


class EmptyIndex(RetrievalError):
    pass


class IndexFormatError(RetrievalError):
    pass


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    text: str
    version: str


def make_document(doc_id: str, title: str, text: str) -> Document:
    """Document with version = content digest, so same text means same version."""
    if not text:
        raise EmptyDocument(doc_id)
    return Document(doc_id, title, text, digest_text(text))


@dataclass(frozen=True)
class Chunk:
    chunk_id: int
    doc_id: str
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class RetrievalQuery:
    text: str
    k: int = DEFAULT_K

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParams(f"k must be >= 1, got {self.k}")


# -- splitting ---------------------------------------------------------------


def split_text(
    text: str,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
    separators: Sequence[str] = DEFAULT_SEPARATORS,
    doc_id: str = "",
) -> list[Chunk]:
    """Recursive separator-aware splitting into chunks of at most chunk_size.

    Tries each separator in order: pieces that fit are greedily merged back
    together (the merged span keeps its interior separators) while staying
    within chunk_size; oversized pieces recurse on the remaining separators.
    The empty-string separator means forced character windows, and only there
    does the ``overlap`` apply: each forced window re-includes the last
    ``overlap`` characters of its predecessor. Separators at final chunk
    boundaries are consumed, so gaps between adjacent chunk spans consist
    solely of separator characters.
    """
    if overlap < 0 or chunk_size <= overlap:
        raise InvalidParams(f"need chunk_size > overlap >= 0, got {chunk_size} / {overlap}")
    if not text:
        return []
    spans = _split_span(text, 0, len(text), list(separators), chunk_size, overlap)
    return [Chunk(i, doc_id, s, e, text[s:e]) for i, (s, e) in enumerate(spans)]


def _char_windows(start: int, end: int, chunk_size: int, overlap: int) -> list[tuple[int, int]]:
    out = []
    p = start
    while True:
        q = min(p + chunk_size, end)
        out.append((p, q))
        if q >= end:
            return out
        p = q - overlap


def _split_span(
    text: str, start: int, end: int, seps: list[str], chunk_size: int, overlap: int
) -> list[tuple[int, int]]:
    if end - start <= chunk_size:
        return [(start, end)]
    while seps:
        sep = seps[0]
        rest = seps[1:]
        if sep == "":
            return _char_windows(start, end, chunk_size, overlap)
        if sep in text[start:end]:
            break
        seps = rest
    else:
        return _char_windows(start, end, chunk_size, overlap)

    pieces: list[tuple[int, int]] = []
    cursor = start
    while True:
        hit = text.find(sep, cursor, end)
        if hit == -1:
            pieces.append((cursor, end))
            break
        pieces.append((cursor, hit))
        cursor = hit + len(sep)

    out: list[tuple[int, int]] = []
    buf: Optional[tuple[int, int]] = None
    for s, e in pieces:
        if e == s:
            continue
        if e - s > chunk_size:
            if buf is not None:
                out.append(buf)
                buf = None
            out.extend(_split_span(text, s, e, rest, chunk_size, overlap))
            continue
        if buf is None:
            buf = (s, e)
        elif e - buf[0] <= chunk_size:
            buf = (buf[0], e)
        else:
            out.append(buf)
            buf = (s, e)
    if buf is not None:
        out.append(buf)
    return out


# -- embedding ---------------------------------------------------------------


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit: h = 0xcbf29ce484222325; per byte h ^= b, h *= 0x100000001b3 (mod 2^64)."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _U64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics."""
    return _TOKEN_RE.findall(text.lower())


def split_sentences(text: str) -> list[str]:
    """Naive sentence split on terminal punctuation followed by whitespace."""
    return [s for s in _SENTENCE_SPLIT_RE.split(text.strip()) if s]


def token_bucket_sign(token: str) -> tuple[int, int]:
    """Feature-hash placement for a token.

    bucket = fnv1a64(utf-8 token) mod EMBEDDING_DIMS (low bits); the sign
    comes from the hash's most significant bit: +1 when bit 63 is clear,
    -1 when set.
    """
    h = fnv1a64(token.encode("utf-8"))
    bucket = h % EMBEDDING_DIMS
    sign = -1 if (h >> 63) & 1 else 1
    return bucket, sign


def embed(text: str) -> np.ndarray:
    """Signed hashed bag-of-words, L2-normalized; the zero vector stays zero."""
    v = np.zeros(EMBEDDING_DIMS, dtype=np.float64)
    for token in tokenize(text):
        bucket, sign = token_bucket_sign(token)
        v[bucket] += sign
    norm = float(np.linalg.norm(v))
    if norm > 0.0:
        v /= norm
    return v


# -- index and search --------------------------------------------------------


@dataclass
class VectorIndex:
    doc_id: str
    doc_version: str
    chunks: list[Chunk]
    vectors: np.ndarray  # shape (n_chunks, EMBEDDING_DIMS)

    def __len__(self) -> int:
        return len(self.chunks)

    def chunk(self, chunk_id: int) -> Chunk:
        return self.chunks[chunk_id]


def build_index(
    document: Document,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
    separators: Sequence[str] = DEFAULT_SEPARATORS,
) -> VectorIndex:
    chunks = split_text(document.text, chunk_size, overlap, separators, doc_id=document.doc_id)
    if chunks:
        vectors = np.stack([embed(c.text) for c in chunks])
    else:
        vectors = np.zeros((0, EMBEDDING_DIMS), dtype=np.float64)
    return VectorIndex(document.doc_id, document.version, chunks, vectors)


def search(index: VectorIndex, query: RetrievalQuery | str, k: Optional[int] = None) -> list[tuple[int, float]]:
    """Exact top-k cosine scan.

    Scores descend; ties break toward the lower chunk_id. Chunk vectors are
    unit or zero norm, so cosine reduces to a dot product; a token-free query
    scores 0.0 against everything.
    """
    if isinstance(query, str):
        query = RetrievalQuery(query, k if k is not None else DEFAULT_K)
    if len(index) == 0:
        raise EmptyIndex(index.doc_id)
    q = embed(query.text)
    scores = index.vectors @ q
    ranked = sorted(
        ((c.chunk_id, float(scores[i])) for i, c in enumerate(index.chunks)),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return ranked[: min(query.k, len(index))]


class IndexCache:
    """Session cache of built indexes keyed by (doc_id, doc_version).

    Builds are serialized per key so concurrent first queries trigger exactly
    one build; ``build_count`` counts actual builds and is the observable for
    reprocessing-avoidance checks.
    """

    def __init__(
        self,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        overlap: int = DEFAULT_OVERLAP,
        separators: Sequence[str] = DEFAULT_SEPARATORS,
    ) -> None:
        self.chunk_size = chunk_size
        self.overlap = overlap
        self.separators = tuple(separators)
        self.build_count = 0
        self._indexes: dict[tuple[str, str], VectorIndex] = {}
        self._key_locks: dict[tuple[str, str], threading.Lock] = {}
        self._meta = threading.Lock()

    def get_or_build(self, document: Document) -> VectorIndex:
        key = (document.doc_id, document.version)
        with self._meta:
            cached = self._indexes.get(key)
            if cached is not None:
                return cached
            lock = self._key_locks.setdefault(key, threading.Lock())
        with lock:
            with self._meta:
                cached = self._indexes.get(key)
            if cached is not None:
                return cached
            built = build_index(document, self.chunk_size, self.overlap, self.separators)
            with self._meta:
                self._indexes[key] = built
                self.build_count += 1
            return built

    def keys(self) -> list[tuple[str, str]]:
        with self._meta:
            return sorted(self._indexes.keys())


def cache_get_or_build(cache: IndexCache, document: Document) -> VectorIndex:
    return cache.get_or_build(document)


# -- optional persistence ----------------------------------------------------

_INDEX_FORMAT = "smartclass-index"
_INDEX_VERSION = 1


def dump_index(index: VectorIndex, path: str | Path) -> None:
    """Line-delimited dump: one JSON header, then one JSON row per chunk.

    Header: {"format", "version", "doc_id", "doc_version", "dims"}. Rows:
    {"chunk_id", "start", "end", "text", "vector"} with the full float list;
    JSON round-trips binary64 exactly, so load reproduces vectors bitwise.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {
                    "format": _INDEX_FORMAT,
                    "version": _INDEX_VERSION,
                    "doc_id": index.doc_id,
                    "doc_version": index.doc_version,
                    "dims": EMBEDDING_DIMS,
                },
                sort_keys=True,
            )
            + "\n"
        )
        for chunk, vec in zip(index.chunks, index.vectors):
            fh.write(
                json.dumps(
                    {
                        "chunk_id": chunk.chunk_id,
                        "start": chunk.start,
                        "end": chunk.end,
                        "text": chunk.text,
                        "vector": vec.tolist(),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_index(path: str | Path) -> VectorIndex:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise IndexFormatError("empty index file")
    header = json.loads(lines[0])
    if header.get("format") != _INDEX_FORMAT or header.get("version") != _INDEX_VERSION:
        raise IndexFormatError(f"unrecognized index header: {lines[0][:80]}")
    if header.get("dims") != EMBEDDING_DIMS:
        raise IndexFormatError(f"dimension mismatch: {header.get('dims')} != {EMBEDDING_DIMS}")
    chunks: list[Chunk] = []
    vectors: list[list[float]] = []
    for i, line in enumerate(lines[1:]):
        row = json.loads(line)
        if row["chunk_id"] != i:
            raise IndexFormatError(f"chunk ids must be dense, got {row['chunk_id']} at row {i}")
        chunks.append(Chunk(row["chunk_id"], header["doc_id"], row["start"], row["end"], row["text"]))
        vectors.append(row["vector"])
    arr = np.array(vectors, dtype=np.float64) if vectors else np.zeros((0, EMBEDDING_DIMS))
    return VectorIndex(header["doc_id"], header["doc_version"], chunks, arr)
