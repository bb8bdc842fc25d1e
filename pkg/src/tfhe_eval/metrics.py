"""Evaluation-phase metrics: pass@k, CrystalBLEU, and per-cell aggregation.

CrystalBLEU here means BLEU over C-family token n-grams computed after the
most frequent ("trivially shared") n-grams of a background corpus have been
deleted from both candidate and reference counts.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

TokenSequence = tuple[str, ...]

_EPSILON = 1e-9

# Longest-first so multi-char operators win over their prefixes.
_OPERATORS = [
    "<<=", ">>=", "...",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "##",
]

_TOKEN_RE = re.compile(
    r"""
    (?P<string>"(?:\\.|[^"\\])*")
  | (?P<char>'(?:\\.|[^'\\])+')
  | (?P<number>(?:0[xX][0-9a-fA-F]+|\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)[uUlLfF]*)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<op>""" + "|".join(re.escape(op) for op in _OPERATORS) + r""")
  | (?P<punct>[-+*/%=<>!&|^~?:;,.(){}\[\]#])
    """,
    re.VERBOSE,
)

_COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?(?:\*/|\Z)", re.DOTALL)


def lex(code: str) -> TokenSequence:
    """Lex C-family source into tokens; comments and whitespace are dropped.

    Total function: bytes that fit no token class become single-character
    tokens, so any input lexes.
    """
    stripped = _strip_comments(code)
    tokens: list[str] = []
    pos = 0
    end = len(stripped)
    while pos < end:
        ch = stripped[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(stripped, pos)
        if m:
            tokens.append(m.group(0))
            pos = m.end()
        else:
            tokens.append(ch)
            pos += 1
    return tuple(tokens)


def _strip_comments(code: str) -> str:
    """Remove // and /* */ comments, respecting string and char literals."""
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
            # Unterminated block comment extends to end of input.
            i = n if j < 0 else j + 2
            out.append(" ")
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


@dataclass(frozen=True)
class TrivialNgramSet:
    """Most frequent background-corpus n-grams, per order 1..max_order."""

    ngrams: frozenset[tuple[str, ...]]
    k: int
    max_order: int
    corpus_id: str

    def __contains__(self, ngram: tuple[str, ...]) -> bool:
        return ngram in self.ngrams

    @staticmethod
    def empty(max_order: int = 4) -> "TrivialNgramSet":
        return TrivialNgramSet(frozenset(), 0, max_order, "empty")


def ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


def trivial_ngrams(
    corpus: Iterable[TokenSequence],
    k: int,
    max_order: int = 4,
    corpus_id: str = "unnamed",
) -> TrivialNgramSet:
    """Retain the k most frequent n-grams per order over the corpus.

    Ties at the cutoff break by lexicographic n-gram order, so the result is
    deterministic for any corpus ordering.
    """
    sequences = list(corpus)
    if not sequences:
        raise ValueError("background corpus must be non-empty")
    if k < 0:
        raise ValueError("k must be >= 0")
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    selected: set[tuple[str, ...]] = set()
    if k > 0:
        for order in range(1, max_order + 1):
            counts: Counter = Counter()
            for seq in sequences:
                counts.update(ngram_counts(seq, order))
            ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
            selected.update(ngram for ngram, _ in ranked[:k])
    return TrivialNgramSet(frozenset(selected), k, max_order, corpus_id)


def crystal_bleu(
    candidate: TokenSequence,
    reference: TokenSequence,
    trivial: TrivialNgramSet | None = None,
    max_order: int = 4,
) -> float:
    """BLEU with uniform weights over orders 1..max_order after deleting
    trivially shared n-grams from both candidate and reference counts.

    Clipped modified precision per order; brevity penalty
    exp(1 - |ref|/|cand|) when the candidate is shorter; orders where the
    candidate has effective n-grams but no matches contribute epsilon inside
    the geometric mean; orders empty on both sides carry no signal and are
    excluded. A candidate with no effective n-grams at any order scores 0.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    trivial_set: frozenset = trivial.ngrams if trivial is not None else frozenset()

    log_sum = 0.0
    active_orders = 0
    candidate_has_content = False
    for order in range(1, max_order + 1):
        cand_counts = _effective_counts(candidate, order, trivial_set)
        ref_counts = _effective_counts(reference, order, trivial_set)
        total = sum(cand_counts.values())
        if total > 0:
            candidate_has_content = True
        if total == 0 and sum(ref_counts.values()) == 0:
            continue
        matches = sum(
            min(count, ref_counts[ngram]) for ngram, count in cand_counts.items()
        )
        precision = matches / total if total > 0 and matches > 0 else _EPSILON
        log_sum += math.log(precision)
        active_orders += 1

    if not candidate_has_content:
        return 0.0
    geo_mean = math.exp(log_sum / active_orders) if active_orders else 1.0

    cand_len = len(candidate)
    ref_len = len(reference)
    if cand_len < ref_len:
        brevity = math.exp(1.0 - ref_len / cand_len) if cand_len > 0 else 0.0
    else:
        brevity = 1.0
    return min(1.0, brevity * geo_mean)


def _effective_counts(
    tokens: Sequence[str], order: int, trivial_set: frozenset
) -> Counter:
    counts = ngram_counts(tokens, order)
    for ngram in trivial_set:
        if len(ngram) == order:
            counts.pop(ngram, None)
    return counts


@dataclass(frozen=True)
class PassAtKInput:
    n_t: int
    n: int
    k: int

    def __post_init__(self) -> None:
        if self.n_t < 1:
            raise ValueError("n_t must be positive")
        if not 0 <= self.n <= self.n_t:
            raise ValueError("n must satisfy 0 <= n <= n_t")
        if not 1 <= self.k <= self.n_t:
            raise ValueError("k must satisfy 1 <= k <= n_t")


def pass_at_k(inp: PassAtKInput) -> float:
    """pass@k = 1 - C(n_t - n, k) / C(n_t, k), evaluated exactly.

    Exact rational arithmetic keeps the result correctly rounded, so
    pass@1 equals n / n_t to machine precision.
    """
    numerator = math.comb(inp.n_t - inp.n, inp.k)
    denominator = math.comb(inp.n_t, inp.k)
    return float(1 - Fraction(numerator, denominator))


@dataclass
class CellAggregate:
    """Metrics for one (task, model, method) cell of the experiment matrix."""

    task_id: str
    model_id: str
    method: str
    n_runs: int
    mean_crystal_bleu: float
    pass1_comp: float
    pass1_func: float
    wrong_format_rate: float
    repetition_rate: float
    total_iterations: int
    input_tokens: int
    output_tokens: int


@dataclass
class AggregateReport:
    cells: list[CellAggregate]
    metadata: dict = field(default_factory=dict)


def aggregate(records: Iterable) -> AggregateReport:
    """Aggregate run records into per-(task, model, method) cells.

    Per cell: mean CrystalBLEU of the final extracted code, pass@1 for
    compilability and functional correctness with n_t = repeat count,
    wrong-format and repetition rates over iterations, and summed token
    usage. Records must agree on the configured repeat count within a cell.
    """
    by_cell: dict[tuple[str, str, str], list] = defaultdict(list)
    for record in records:
        by_cell[(record.task_id, record.model_id, record.method)].append(record)

    cells: list[CellAggregate] = []
    for (task_id, model_id, method), runs in sorted(by_cell.items()):
        declared = {
            run.config_snapshot.get("repeats")
            for run in runs
            if getattr(run, "config_snapshot", None)
        }
        declared.discard(None)
        if len(declared) > 1:
            raise ValueError(
                f"mixed n_t in cell ({task_id}, {model_id}, {method}): {sorted(declared)}"
            )
        n_t = len(runs)
        n_comp = sum(1 for run in runs if run.compiled)
        n_func = sum(1 for run in runs if run.functional_pass)
        total_iters = sum(len(run.iterations) for run in runs)
        wrong_format = sum(
            1 for run in runs for it in run.iterations if it.wrong_format
        )
        repetitions = sum(
            1 for run in runs for it in run.iterations if it.repetition_flag
        )
        cells.append(
            CellAggregate(
                task_id=task_id,
                model_id=model_id,
                method=method,
                n_runs=n_t,
                mean_crystal_bleu=sum(run.crystal_bleu for run in runs) / n_t,
                pass1_comp=pass_at_k(PassAtKInput(n_t, n_comp, 1)),
                pass1_func=pass_at_k(PassAtKInput(n_t, n_func, 1)),
                wrong_format_rate=wrong_format / total_iters if total_iters else 0.0,
                repetition_rate=repetitions / total_iters if total_iters else 0.0,
                total_iterations=total_iters,
                input_tokens=sum(run.totals.input_tokens for run in runs),
                output_tokens=sum(run.totals.output_tokens for run in runs),
            )
        )
    return AggregateReport(cells=cells)


def extract_doc_code_blocks(text: str) -> list[str]:
    """All fenced code-block bodies in a document, for corpus building."""
    bodies: list[str] = []
    parts = text.split("```")
    # Odd-indexed parts are inside fences; drop the info line of each.
    for idx in range(1, len(parts) - 1, 2):
        block = parts[idx]
        if "\n" in block:
            _, _, body = block.partition("\n")
        else:
            body = block
        if body.strip():
            bodies.append(body)
    return bodies


def background_corpus(
    ground_truth_codes: dict[str, str],
    doc_texts: Iterable[str] = (),
) -> tuple[list[TokenSequence], str]:
    """Token sequences for the trivial-n-gram corpus plus a provenance id.

    The corpus is every ground-truth implementation plus any fenced code
    blocks found in the supplied documentation texts.
    """
    sequences: list[TokenSequence] = []
    for task_id in sorted(ground_truth_codes):
        sequences.append(lex(ground_truth_codes[task_id]))
    n_blocks = 0
    for text in doc_texts:
        for block in extract_doc_code_blocks(text):
            sequences.append(lex(block))
            n_blocks += 1
    corpus_id = f"ground_truths({len(ground_truth_codes)})+doc_blocks({n_blocks})"
    return sequences, corpus_id
