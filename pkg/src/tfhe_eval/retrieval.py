"""Documentation retrieval for the RAG workflow.

Documents are chunked on paragraph/code-fence boundaries, embedded by a
pluggable provider, and served by exhaustive cosine top-k search. The mock
embedder is a deterministic token-overlap embedding: token counts hashed
into a fixed number of buckets.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

INDEX_FORMAT_VERSION = 1

DEFAULT_MAX_CHUNK_CHARS = 1200
DEFAULT_OVERLAP_CHARS = 200
DEFAULT_TOP_K = 4
DEFAULT_EXCERPT_BUDGET = 6000

# Code-tuned embedding model used when an HTTP embedding provider is
# configured without an explicit model id.
DEFAULT_REAL_EMBEDDER = "jinaai/jina-embeddings-v2-base-code"

MOCK_EMBEDDER_ID = "mock-hash-v1"
MOCK_DIMENSION = 256


class RetrievalError(Exception):
    pass


@dataclass(frozen=True)
class DocChunk:
    chunk_id: int
    source: str
    text: str
    token_estimate: int
    start: int = 0
    end: int = 0


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.values)

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("embedding vector must be non-empty")
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError("embedding vector has non-finite components")


@dataclass(frozen=True)
class RetrievalIndex:
    entries: tuple[tuple[DocChunk, EmbeddingVector], ...]
    embedder_id: str
    built_at: float

    def __post_init__(self) -> None:
        dims = {vec.dimension for _, vec in self.entries}
        if len(dims) > 1:
            raise ValueError(f"mixed embedding dimensions in index: {dims}")


def chunk_document(
    text: str,
    max_chunk_chars: int = DEFAULT_MAX_CHUNK_CHARS,
    overlap_chars: int = DEFAULT_OVERLAP_CHARS,
    source: str = "<memory>",
    first_chunk_id: int = 0,
) -> list[DocChunk]:
    """Split a document into overlapping chunks covering the full text.

    Chunks prefer paragraph boundaries that do not fall inside a fenced code
    block and hard-split when no boundary is in range. Consecutive chunks
    overlap by overlap_chars (less near short chunks).
    """
    if max_chunk_chars <= overlap_chars or overlap_chars < 0:
        raise ValueError("require max_chunk_chars > overlap_chars >= 0")
    if not text:
        return []
    boundaries = _paragraph_boundaries(text)
    chunks: list[DocChunk] = []
    start = 0
    prev_end = 0
    chunk_id = first_chunk_id
    n = len(text)
    while start < n:
        hard_end = min(start + max_chunk_chars, n)
        if hard_end == n:
            end = n
        else:
            # A boundary must extend coverage past the previous chunk, or the
            # overlap rewind would re-pick it and stall on degenerate chunks.
            floor = max(start, prev_end)
            candidates = [b for b in boundaries if floor < b <= hard_end]
            end = candidates[-1] if candidates else hard_end
        body = text[start:end]
        chunks.append(
            DocChunk(
                chunk_id=chunk_id,
                source=source,
                text=body,
                token_estimate=len(body.split()),
                start=start,
                end=end,
            )
        )
        chunk_id += 1
        prev_end = end
        if end >= n:
            break
        start = max(end - overlap_chars, start + 1)
    return chunks


def _paragraph_boundaries(text: str) -> list[int]:
    """Positions after blank-line runs, excluding ones inside code fences."""
    fence_spans = []
    fence_positions = [m.start() for m in re.finditer(r"```", text)]
    for open_pos, close_pos in zip(fence_positions[0::2], fence_positions[1::2]):
        fence_spans.append((open_pos, close_pos + 3))
    boundaries = []
    for match in re.finditer(r"\n\s*\n", text):
        pos = match.end()
        if any(lo < pos <= hi for lo, hi in fence_spans):
            continue
        boundaries.append(pos)
    return boundaries


def reconstruct(chunks: Sequence[DocChunk]) -> str:
    """Rebuild the source text from chunks, dropping overlaps."""
    if not chunks:
        return ""
    pieces = [chunks[0].text]
    for prev, cur in zip(chunks, chunks[1:]):
        pieces.append(cur.text[prev.end - cur.start:])
    return "".join(pieces)


def _stable_bucket(token: str, dimension: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % dimension


_WORD_RE = re.compile(r"\w+")


def mock_embed_one(text: str, dimension: int = MOCK_DIMENSION) -> EmbeddingVector:
    """Deterministic embedding: lowercase word counts hashed into buckets."""
    counts = [0.0] * dimension
    for token in _WORD_RE.findall(text.lower()):
        counts[_stable_bucket(token, dimension)] += 1.0
    return EmbeddingVector(tuple(counts))


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "mock"  # mock | openai_style
    model_id: str = MOCK_EMBEDDER_ID
    endpoint: str = ""
    credential_ref: str = ""
    dimension: int = MOCK_DIMENSION
    request_timeout: float = 60.0
    max_retries: int = 2

    @property
    def embedder_id(self) -> str:
        return self.model_id if self.kind != "mock" else MOCK_EMBEDDER_ID


def embed(
    texts: Sequence[str],
    provider: EmbedderConfig | None = None,
    transport: Callable | None = None,
) -> list[EmbeddingVector]:
    """One embedding vector per input text, all with the same dimension."""
    provider = provider or EmbedderConfig()
    if provider.kind == "mock":
        return [mock_embed_one(text, provider.dimension) for text in texts]
    if provider.kind == "openai_style":
        vectors = _http_embed(texts, provider, transport)
        dims = {len(v) for v in vectors}
        if len(dims) > 1:
            raise RetrievalError(f"provider returned mixed dimensions: {dims}")
        return [EmbeddingVector(tuple(float(x) for x in v)) for v in vectors]
    raise RetrievalError(f"unknown embedder kind {provider.kind!r}")


def _http_embed(texts, provider: EmbedderConfig, transport) -> list[list[float]]:
    import os

    if transport is None:
        from .gateway import _requests_transport as transport  # noqa: PLC0415
    secret = os.environ.get(provider.credential_ref, "")
    if provider.credential_ref and not secret:
        raise RetrievalError(
            f"environment variable {provider.credential_ref} is not set"
        )
    headers = {"Content-Type": "application/json"}
    if secret:
        headers["Authorization"] = f"Bearer {secret}"
    payload = {"model": provider.model_id, "input": list(texts)}
    last_error: Exception | None = None
    for attempt in range(provider.max_retries + 1):
        if attempt:
            time.sleep(0.5 * 2 ** (attempt - 1))
        try:
            status, body = transport(
                provider.endpoint, headers, payload, provider.request_timeout
            )
        except Exception as exc:  # transport-level failure, retry
            last_error = exc
            continue
        if status == 429 or status >= 500:
            last_error = RetrievalError(f"embedding provider HTTP {status}")
            continue
        if status >= 400:
            raise RetrievalError(f"embedding provider HTTP {status}: {body}")
        try:
            data = sorted(body["data"], key=lambda item: item.get("index", 0))
            return [item["embedding"] for item in data]
        except (KeyError, TypeError) as exc:
            raise RetrievalError(f"malformed embedding response: {body}") from exc
    raise RetrievalError(f"embedding provider failed: {last_error}")


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dimension != b.dimension:
        raise RetrievalError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}"
        )
    dot = sum(x * y for x, y in zip(a.values, b.values))
    norm_a = math.sqrt(sum(x * x for x in a.values))
    norm_b = math.sqrt(sum(y * y for y in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def build_index(
    chunks: Sequence[DocChunk],
    provider: EmbedderConfig | None = None,
    transport: Callable | None = None,
) -> RetrievalIndex:
    provider = provider or EmbedderConfig()
    vectors = embed([chunk.text for chunk in chunks], provider, transport)
    return RetrievalIndex(
        entries=tuple(zip(chunks, vectors)),
        embedder_id=provider.embedder_id,
        built_at=time.time(),
    )


def retrieve(
    index: RetrievalIndex,
    query: str,
    top_k: int = DEFAULT_TOP_K,
    provider: EmbedderConfig | None = None,
    transport: Callable | None = None,
) -> list[tuple[DocChunk, float]]:
    """Exhaustive cosine scoring; ties break by ascending chunk_id."""
    if top_k < 0:
        raise ValueError("top_k must be >= 0")
    if top_k == 0 or not index.entries:
        return []
    provider = provider or EmbedderConfig()
    if provider.embedder_id != index.embedder_id:
        raise RetrievalError(
            f"index built with embedder {index.embedder_id!r}, "
            f"query uses {provider.embedder_id!r}"
        )
    query_vec = embed([query], provider, transport)[0]
    scored = [
        (chunk, cosine(query_vec, vector)) for chunk, vector in index.entries
    ]
    scored.sort(key=lambda item: (-item[1], item[0].chunk_id))
    return scored[:top_k]


EXCERPT_HEADER = "=== TFHE documentation excerpts ==="


def augment_prompt(
    base_system_prompt: str,
    hits: Sequence[tuple[DocChunk, float]],
    budget_chars: int = DEFAULT_EXCERPT_BUDGET,
) -> str:
    """Append retrieved excerpts to the system prompt, whole chunks only."""
    if not hits:
        return base_system_prompt
    sections: list[str] = []
    used = 0
    for chunk, _score in hits:
        excerpt = f"[source: {chunk.source}]\n{chunk.text.strip()}"
        if used + len(excerpt) > budget_chars:
            break
        sections.append(excerpt)
        used += len(excerpt)
    if not sections:
        return base_system_prompt
    return (
        base_system_prompt
        + "\n\n"
        + EXCERPT_HEADER
        + "\n\n"
        + "\n\n---\n\n".join(sections)
    )


def ingest_paths(
    paths: Iterable[Path],
    max_chunk_chars: int = DEFAULT_MAX_CHUNK_CHARS,
    overlap_chars: int = DEFAULT_OVERLAP_CHARS,
    suffixes: tuple[str, ...] = (".md", ".txt", ".h", ".c", ".rst"),
) -> list[DocChunk]:
    """Chunk documentation files (or directories of them) into one list."""
    files: list[Path] = []
    for path in paths:
        path = Path(path)
        if path.is_dir():
            files.extend(
                sorted(p for p in path.rglob("*") if p.suffix in suffixes and p.is_file())
            )
        elif path.is_file():
            files.append(path)
        else:
            raise RetrievalError(f"documentation path does not exist: {path}")
    chunks: list[DocChunk] = []
    for file_path in files:
        text = file_path.read_text(encoding="utf-8", errors="replace")
        chunks.extend(
            chunk_document(
                text,
                max_chunk_chars=max_chunk_chars,
                overlap_chars=overlap_chars,
                source=str(file_path),
                first_chunk_id=len(chunks),
            )
        )
    return chunks


def save_index(index: RetrievalIndex, path: Path) -> None:
    dimension = index.entries[0][1].dimension if index.entries else 0
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "embedder_id": index.embedder_id,
        "dimension": dimension,
        "entry_count": len(index.entries),
        "built_at": index.built_at,
        "entries": [
            {
                "chunk_id": chunk.chunk_id,
                "source": chunk.source,
                "text": chunk.text,
                "token_estimate": chunk.token_estimate,
                "start": chunk.start,
                "end": chunk.end,
                "vector": list(vector.values),
            }
            for chunk, vector in index.entries
        ],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_index(path: Path) -> RetrievalIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise RetrievalError(f"unsupported index format version {version!r}")
    entries = []
    for item in payload["entries"]:
        chunk = DocChunk(
            chunk_id=item["chunk_id"],
            source=item["source"],
            text=item["text"],
            token_estimate=item["token_estimate"],
            start=item.get("start", 0),
            end=item.get("end", 0),
        )
        vector = EmbeddingVector(tuple(float(x) for x in item["vector"]))
        if vector.dimension != payload["dimension"]:
            raise RetrievalError("index entry dimension disagrees with header")
        entries.append((chunk, vector))
    if len(entries) != payload.get("entry_count"):
        raise RetrievalError("index entry count disagrees with header")
    return RetrievalIndex(
        entries=tuple(entries),
        embedder_id=payload["embedder_id"],
        built_at=payload.get("built_at", 0.0),
    )
