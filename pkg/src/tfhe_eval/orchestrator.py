"""Evaluator loops over the experiment matrix (tasks x models x methods x repeats).

A run drives one model through up to max_iterations of generate -> extract ->
compile, feeding compiler diagnostics back as revision prompts, then measures
the terminal artifact: functional tests when it compiled, CrystalBLEU against
the task's ground truth either way.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import records as rec
from .corpus import TaskManifest
from .extraction import NormalizedFingerprint, detect_repetition, extract_code, fingerprint
from .gateway import (
    Conversation,
    GatewayError,
    Message,
    ModelConfig,
    Usage,
    build_provider,
)
from .metrics import TokenSequence, TrivialNgramSet, background_corpus, crystal_bleu, lex, trivial_ngrams
from .retrieval import (
    DEFAULT_EXCERPT_BUDGET,
    DEFAULT_TOP_K,
    EmbedderConfig,
    RetrievalIndex,
    augment_prompt,
    retrieve,
)
from .toolchain import FORMAT_REQUIREMENT, build_revision_prompt

log = logging.getLogger(__name__)

BASELINE = "baseline"
RAG = "rag"
FEWSHOT = "fewshot"
RAG_FEWSHOT = "rag_fewshot"
METHODS = (BASELINE, RAG, FEWSHOT, RAG_FEWSHOT)

SYSTEM_PROMPT = (
    "You are an expert C developer specializing in the TFHE gate-bootstrapping "
    "API. Implement exactly the function the user asks for, compiling against "
    "#include <tfhe/tfhe.h>. Do not define a main function; the harness links "
    "your code against its own test driver. "
    + FORMAT_REQUIREMENT
)


class OrchestratorError(Exception):
    pass


@dataclass(frozen=True)
class MethodConfig:
    name: str
    rag_top_k: Optional[int] = None
    rag_budget_chars: Optional[int] = None
    fewshot_example_ref: Optional[Path] = None
    fewshot_exclude_or: bool = False

    def __post_init__(self) -> None:
        if self.name not in METHODS:
            raise ValueError(f"unknown method {self.name!r}")
        if self.uses_rag != (self.rag_top_k is not None):
            raise ValueError(f"rag params must be present iff method uses RAG ({self.name})")
        if self.uses_fewshot != (self.fewshot_example_ref is not None):
            raise ValueError(
                f"fewshot_example_ref must be present iff method uses few-shot ({self.name})"
            )

    @property
    def uses_rag(self) -> bool:
        return self.name in (RAG, RAG_FEWSHOT)

    @property
    def uses_fewshot(self) -> bool:
        return self.name in (FEWSHOT, RAG_FEWSHOT)


def method_config(
    name: str,
    fewshot_example_ref: Optional[Path] = None,
    rag_top_k: int = DEFAULT_TOP_K,
    rag_budget_chars: int = DEFAULT_EXCERPT_BUDGET,
    fewshot_exclude_or: bool = False,
) -> MethodConfig:
    """MethodConfig with defaults filled in for the parameters the method uses."""
    uses_rag = name in (RAG, RAG_FEWSHOT)
    uses_fewshot = name in (FEWSHOT, RAG_FEWSHOT)
    if uses_fewshot and fewshot_example_ref is None:
        raise OrchestratorError(f"method {name} requires a few-shot exemplar path")
    return MethodConfig(
        name=name,
        rag_top_k=rag_top_k if uses_rag else None,
        rag_budget_chars=rag_budget_chars if uses_rag else None,
        fewshot_example_ref=Path(fewshot_example_ref) if uses_fewshot else None,
        fewshot_exclude_or=fewshot_exclude_or,
    )


@dataclass(frozen=True)
class RunSettings:
    max_iterations: int = 10
    repeats: int = 5
    error_budget_bytes: int = 4000
    max_error_lines: int = 20
    context_policy: str = "keep_all"  # keep_all | keep_last_n
    keep_last_n: int = 3
    crystal_max_order: int = 4
    trivial_k: int = 50
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.context_policy not in ("keep_all", "keep_last_n"):
            raise ValueError(f"unknown context policy {self.context_policy!r}")


def build_first_prompt(
    task: TaskManifest,
    method: MethodConfig,
    index: Optional[RetrievalIndex] = None,
    embedder: Optional[EmbedderConfig] = None,
) -> Conversation:
    """System + first user message for a task under a given method."""
    if method.uses_rag and index is None:
        raise OrchestratorError(f"method {method.name} requires a retrieval index")
    system = SYSTEM_PROMPT
    if method.uses_rag:
        hits = retrieve(
            index, task.description, top_k=method.rag_top_k, provider=embedder
        )
        system = augment_prompt(system, hits, budget_chars=method.rag_budget_chars)

    parts = [
        f"Task: {task.title}",
        "",
        task.description,
        "",
        "Reference plaintext implementation (no encryption):",
        "```c",
        task.reference_plaintext_code().rstrip("\n"),
        "```",
    ]
    if method.uses_fewshot and not (
        method.fewshot_exclude_or and task.task_id == "or_gate"
    ):
        try:
            exemplar = method.fewshot_example_ref.read_text(encoding="utf-8")
        except OSError as exc:
            raise OrchestratorError(f"cannot read few-shot exemplar: {exc}") from exc
        parts += [
            "",
            "Here is a correct implementation of an OR gate using the TFHE "
            "bootsOR function, as a worked example:",
            "```c",
            exemplar.rstrip("\n"),
            "```",
        ]
    user = "\n".join(parts)
    return Conversation((Message("system", system), Message("user", user)))


def _context_view(conv: Conversation, settings: RunSettings) -> Conversation:
    """What the model sees: full history, or last-N exchanges when configured."""
    if settings.context_policy == "keep_all":
        return conv
    leading = [m for m in conv.messages if m.role == "system"]
    body = list(conv.messages[len(leading):])
    first_user = body[:1]
    tail = body[1:]
    keep = 2 * settings.keep_last_n
    if len(tail) > keep:
        tail = tail[len(tail) - keep:]
        # The view must alternate: an assistant turn follows the first user
        # message, so drop a leading user turn left over from truncation.
        if tail and tail[0].role == "user":
            tail = tail[1:]
    return Conversation(tuple(leading + first_user + tail))


def _run_tag(task_id: str, model_id: str, method: str, repeat_index: int) -> str:
    return f"{task_id}__{model_id}__{method}__r{repeat_index}"


def _config_snapshot(
    model: ModelConfig,
    method: MethodConfig,
    settings: RunSettings,
    trivial: TrivialNgramSet,
    library_mode: str,
) -> dict:
    return {
        "model": {
            "model_id": model.model_id,
            "provider_kind": model.provider_kind,
            "temperature": model.temperature,
            "top_p": model.top_p,
            "max_output_tokens": model.max_output_tokens,
        },
        "method": {
            "name": method.name,
            "rag_top_k": method.rag_top_k,
            "rag_budget_chars": method.rag_budget_chars,
            "fewshot_example_ref": (
                str(method.fewshot_example_ref) if method.fewshot_example_ref else None
            ),
            "fewshot_exclude_or": method.fewshot_exclude_or,
        },
        "max_iterations": settings.max_iterations,
        "repeats": settings.repeats,
        "context_policy": settings.context_policy,
        "library_mode": library_mode,
        "crystal_bleu": {
            "max_order": settings.crystal_max_order,
            "trivial_k": trivial.k,
            "corpus_id": trivial.corpus_id,
            "smoothing": "add-epsilon-1e-9",
        },
        "extraction_rules": {
            "wrong_format": "no complete fenced code block",
            "repetition": "normalized candidate matches a prior failing attempt",
        },
    }


def run_one(
    task: TaskManifest,
    model: ModelConfig,
    method: MethodConfig,
    *,
    toolchain,
    trivial: TrivialNgramSet,
    reference_tokens: TokenSequence,
    index: Optional[RetrievalIndex] = None,
    settings: Optional[RunSettings] = None,
    repeat_index: int = 1,
    provider=None,
    transport=None,
) -> rec.RunRecord:
    """One compiler-in-the-loop run; halts on compile success or budget."""
    settings = settings or RunSettings()
    provider = provider or build_provider(model, transport)
    run_tag = _run_tag(task.task_id, model.model_id, method.name, repeat_index)
    started = time.monotonic()

    conv = build_first_prompt(task, method, index, settings.embedder)
    prompt_message = conv.messages[-1].text
    failed: list[NormalizedFingerprint] = []
    iterations: list[rec.IterationRecord] = []
    terminal = rec.BUDGET_EXHAUSTED
    final_code: Optional[str] = None
    success_report = None

    for iter_index in range(1, settings.max_iterations + 1):
        response, usage = provider.complete(_context_view(conv, settings))
        conv = conv.with_message("assistant", response)
        extraction = extract_code(response)

        repetition_flag = False
        compile_report = None
        next_prompt: Optional[str] = None
        if extraction.is_code:
            code = extraction.code
            final_code = code
            repetition_flag = detect_repetition(failed, code)
            compile_report = toolchain.compile(code, task, run_tag, iter_index)
            if not compile_report.success:
                failed.append(fingerprint(code))
                next_prompt = build_revision_prompt(
                    compile_report=compile_report,
                    error_budget_bytes=settings.error_budget_bytes,
                    max_error_lines=settings.max_error_lines,
                )
        else:
            next_prompt = build_revision_prompt(wrong_format=True)

        iterations.append(
            rec.IterationRecord(
                index=iter_index,
                prompt_message=prompt_message,
                response=response,
                usage=usage,
                extraction_outcome=extraction.outcome,
                block_count=extraction.block_count,
                repetition_flag=repetition_flag,
                compile_report=compile_report,
            )
        )
        if compile_report is not None and compile_report.success:
            terminal = rec.COMPILE_SUCCESS
            success_report = compile_report
            break
        if iter_index < settings.max_iterations:
            conv = conv.with_message("user", next_prompt)
            prompt_message = next_prompt

    func_report = None
    link_report = None
    if terminal == rec.COMPILE_SUCCESS:
        outcome = toolchain.link_and_run(success_report, task, run_tag)
        func_report = outcome.func_report
        link_report = outcome.link_report

    if final_code is not None:
        score = crystal_bleu(
            lex(final_code),
            reference_tokens,
            trivial,
            max_order=settings.crystal_max_order,
        )
    else:
        score = 0.0

    totals = Usage()
    for iteration in iterations:
        totals = totals + iteration.usage

    return rec.RunRecord(
        task_id=task.task_id,
        model_id=model.model_id,
        method=method.name,
        repeat_index=repeat_index,
        iterations=iterations,
        terminal_status=terminal,
        func_report=func_report,
        link_report=link_report,
        final_code=final_code,
        crystal_bleu=score,
        totals=totals,
        wall_time=time.monotonic() - started,
        config_snapshot=_config_snapshot(
            model, method, settings, trivial,
            getattr(getattr(toolchain, "cfg", None), "library_mode", "scripted"),
        ),
    )


class RecordSink:
    """Append-only JSONL sink; the one shared mutable resource of a matrix."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._handle = open(self.path, "a", encoding="utf-8")

    def write(self, obj: dict) -> None:
        line = json.dumps(obj, sort_keys=True)
        with self._lock:
            self._handle.write(line + "\n")
            self._handle.flush()

    def close(self) -> None:
        with self._lock:
            self._handle.close()

    def __enter__(self) -> "RecordSink":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def prepare_references(
    manifests: Sequence[TaskManifest],
    doc_texts: Iterable[str] = (),
    trivial_k: int = 50,
    max_order: int = 4,
) -> tuple[dict[str, TokenSequence], TrivialNgramSet]:
    """Lex ground truths and build the trivial-n-gram background set."""
    ground_truths = {m.task_id: m.ground_truth_code() for m in manifests}
    reference_tokens = {tid: lex(code) for tid, code in ground_truths.items()}
    sequences, corpus_id = background_corpus(ground_truths, doc_texts)
    trivial = trivial_ngrams(sequences, k=trivial_k, max_order=max_order, corpus_id=corpus_id)
    return reference_tokens, trivial


def run_matrix(
    tasks: Sequence[TaskManifest],
    models: Sequence[ModelConfig],
    methods: Sequence[MethodConfig],
    *,
    toolchain,
    trivial: TrivialNgramSet,
    reference_tokens: dict[str, TokenSequence],
    index: Optional[RetrievalIndex] = None,
    settings: Optional[RunSettings] = None,
    repeats: Optional[int] = None,
    parallelism: int = 1,
    sink: Optional[RecordSink] = None,
    transport=None,
) -> tuple[list[rec.RunRecord], list[rec.ErrorRecord]]:
    """Every (task, model, method, repeat) combination, bounded-parallel.

    Partial failures become ErrorRecords and the rest of the matrix keeps
    going; completed records stream to the sink in completion order.
    """
    settings = settings or RunSettings()
    if repeats is not None and repeats != settings.repeats:
        settings = dataclasses.replace(settings, repeats=repeats)
    combos = [
        (task, model, method, repeat)
        for task in tasks
        for model in models
        for method in methods
        for repeat in range(1, settings.repeats + 1)
    ]

    run_records: list[rec.RunRecord] = []
    error_records: list[rec.ErrorRecord] = []

    def execute(combo):
        task, model, method, repeat = combo
        return run_one(
            task,
            model,
            method,
            toolchain=toolchain,
            trivial=trivial,
            reference_tokens=reference_tokens[task.task_id],
            index=index,
            settings=settings,
            repeat_index=repeat,
            transport=transport,
        )

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        futures = {pool.submit(execute, combo): combo for combo in combos}
        for future in as_completed(futures):
            task, model, method, repeat = futures[future]
            try:
                record = future.result()
            except (GatewayError, OrchestratorError) as exc:
                error = rec.ErrorRecord(
                    task_id=task.task_id,
                    model_id=model.model_id,
                    method=method.name,
                    repeat_index=repeat,
                    error=f"{type(exc).__name__}: {exc}",
                )
                log.warning("run failed, excluded from aggregation: %s", error)
                error_records.append(error)
                if sink is not None:
                    sink.write(rec.error_record_to_json(error))
                continue
            run_records.append(record)
            if sink is not None:
                sink.write(rec.run_record_to_json(record))
    return run_records, error_records
