"""Candidate-code extraction and generation-phase error detection.

Wrong Format: no complete fenced code block can be pulled out of a response.
Repetition: a candidate whose normalized form already failed compilation in
an earlier iteration of the same run.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Iterable

CODE = "code"
WRONG_FORMAT = "wrong_format"

_FENCE = "```"


@dataclass(frozen=True)
class ExtractionResult:
    outcome: str  # CODE | WRONG_FORMAT
    code: str | None
    block_count: int

    def __post_init__(self) -> None:
        if self.outcome == CODE and not self.code:
            raise ValueError("code outcome requires a non-empty body")

    @property
    def is_code(self) -> bool:
        return self.outcome == CODE


def extract_code(response: str) -> ExtractionResult:
    """Pull the candidate program out of a free-text model response.

    Triple-backtick markers are paired left to right; each complete pair
    with a non-empty body is a block, and the last block wins (iterative
    models restate drafts before the final program). No complete non-empty
    block means Wrong Format.
    """
    bodies = []
    positions = [m.start() for m in re.finditer(re.escape(_FENCE), response)]
    for open_idx, close_idx in zip(positions[0::2], positions[1::2]):
        inner = response[open_idx + len(_FENCE): close_idx]
        if "\n" not in inner:
            # Inline backtick pair, not a fenced block.
            continue
        # First line after the opening fence is the info string.
        _, _, body = inner.partition("\n")
        body = body.strip("\n")
        if body.strip():
            bodies.append(body)
    if not bodies:
        return ExtractionResult(WRONG_FORMAT, None, 0)
    return ExtractionResult(CODE, bodies[-1], len(bodies))


def normalize(code: str) -> str:
    """Comment-free, whitespace-collapsed form used for repetition checks.

    Idempotent; an unterminated block comment is treated as running to the
    end of the input.
    """
    out: list[str] = []
    i = 0
    n = len(code)
    while i < n:
        ch = code[i]
        if ch == '"' or ch == "'":
            quote = ch
            j = i + 1
            while j < n:
                if code[j] == "\\":
                    j += 2
                    continue
                if code[j] == quote:
                    j += 1
                    break
                j += 1
            out.append(code[i:j])
            i = j
        elif code.startswith("//", i):
            j = code.find("\n", i)
            i = n if j < 0 else j
        elif code.startswith("/*", i):
            j = code.find("*/", i + 2)
            i = n if j < 0 else j + 2
            out.append(" ")
        else:
            out.append(ch)
            i += 1
    return re.sub(r"\s+", " ", "".join(out)).strip()


@dataclass(frozen=True)
class NormalizedFingerprint:
    digest: str


def fingerprint(code: str) -> NormalizedFingerprint:
    normalized = normalize(code)
    return NormalizedFingerprint(hashlib.sha256(normalized.encode("utf-8")).hexdigest())


def detect_repetition(
    history: Iterable[NormalizedFingerprint], candidate: str
) -> bool:
    """True iff the candidate normalizes to a previously failed attempt.

    History must hold only fingerprints of iterations that failed
    compilation; matching is exact under normalization, never fuzzy.
    """
    return fingerprint(candidate) in set(history)
