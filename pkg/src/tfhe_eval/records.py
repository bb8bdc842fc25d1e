"""Run records: the persisted unit of one (task, model, method, repeat) run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .gateway import Usage
from .toolchain import CompileReport, Diagnostic, FuncReport

SCHEMA_VERSION = 1

COMPILE_SUCCESS = "CompileSuccess"
BUDGET_EXHAUSTED = "IterationBudgetExhausted"


@dataclass
class IterationRecord:
    index: int
    prompt_message: str
    response: str
    usage: Usage
    extraction_outcome: str  # "code" | "wrong_format"
    block_count: int
    repetition_flag: bool
    compile_report: Optional[CompileReport]

    @property
    def wrong_format(self) -> bool:
        return self.extraction_outcome == "wrong_format"


@dataclass
class RunRecord:
    task_id: str
    model_id: str
    method: str
    repeat_index: int
    iterations: list[IterationRecord]
    terminal_status: str
    func_report: Optional[FuncReport]
    link_report: Optional[CompileReport]
    final_code: Optional[str]
    crystal_bleu: float
    totals: Usage
    wall_time: float
    config_snapshot: dict[str, Any] = field(default_factory=dict)

    @property
    def compiled(self) -> bool:
        return self.terminal_status == COMPILE_SUCCESS

    @property
    def functional_pass(self) -> bool:
        report = self.func_report
        return (
            report is not None
            and not report.timed_out
            and report.total_cases > 0
            and report.passed_cases == report.total_cases
        )


@dataclass
class ErrorRecord:
    """A run that failed for infrastructure reasons; excluded from aggregation."""

    task_id: str
    model_id: str
    method: str
    repeat_index: int
    error: str


def _usage_to_json(usage: Usage) -> dict:
    return {"input_tokens": usage.input_tokens, "output_tokens": usage.output_tokens}


def _usage_from_json(obj: dict) -> Usage:
    return Usage(obj["input_tokens"], obj["output_tokens"])


def _diag_to_json(diag: Diagnostic) -> dict:
    return {
        "file": diag.file,
        "line": diag.line,
        "column": diag.column,
        "severity": diag.severity,
        "message": diag.message,
    }


def _diag_from_json(obj: dict) -> Diagnostic:
    return Diagnostic(obj["file"], obj["line"], obj["column"], obj["severity"], obj["message"])


def _compile_report_to_json(report: Optional[CompileReport]) -> Optional[dict]:
    if report is None:
        return None
    return {
        "success": report.success,
        "diagnostics": [_diag_to_json(d) for d in report.diagnostics],
        "raw_output": report.raw_output,
        "hallucinated_api_candidates": list(report.hallucinated_api_candidates),
        "duration": report.duration,
    }


def _compile_report_from_json(obj: Optional[dict]) -> Optional[CompileReport]:
    if obj is None:
        return None
    return CompileReport(
        success=obj["success"],
        diagnostics=[_diag_from_json(d) for d in obj["diagnostics"]],
        raw_output=obj["raw_output"],
        hallucinated_api_candidates=list(obj["hallucinated_api_candidates"]),
        duration=obj["duration"],
    )


def _func_report_to_json(report: Optional[FuncReport]) -> Optional[dict]:
    if report is None:
        return None
    return {
        "total_cases": report.total_cases,
        "passed_cases": report.passed_cases,
        "per_case": [[index, ok] for index, ok in report.per_case],
        "timed_out": report.timed_out,
        "exit_code": report.exit_code,
    }


def _func_report_from_json(obj: Optional[dict]) -> Optional[FuncReport]:
    if obj is None:
        return None
    return FuncReport(
        total_cases=obj["total_cases"],
        passed_cases=obj["passed_cases"],
        per_case=[(index, ok) for index, ok in obj["per_case"]],
        timed_out=obj["timed_out"],
        exit_code=obj["exit_code"],
    )


def run_record_to_json(record: RunRecord) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "run",
        "task_id": record.task_id,
        "model_id": record.model_id,
        "method": record.method,
        "repeat_index": record.repeat_index,
        "terminal_status": record.terminal_status,
        "iterations": [
            {
                "index": it.index,
                "prompt_message": it.prompt_message,
                "response": it.response,
                "usage": _usage_to_json(it.usage),
                "extraction_outcome": it.extraction_outcome,
                "block_count": it.block_count,
                "repetition_flag": it.repetition_flag,
                "compile_report": _compile_report_to_json(it.compile_report),
            }
            for it in record.iterations
        ],
        "func_report": _func_report_to_json(record.func_report),
        "link_report": _compile_report_to_json(record.link_report),
        "final_code": record.final_code,
        "crystal_bleu": record.crystal_bleu,
        "totals": _usage_to_json(record.totals),
        "wall_time": record.wall_time,
        "config_snapshot": record.config_snapshot,
    }


def run_record_from_json(obj: dict) -> RunRecord:
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"record schema version {obj.get('schema_version')!r} != {SCHEMA_VERSION}"
        )
    return RunRecord(
        task_id=obj["task_id"],
        model_id=obj["model_id"],
        method=obj["method"],
        repeat_index=obj["repeat_index"],
        iterations=[
            IterationRecord(
                index=it["index"],
                prompt_message=it["prompt_message"],
                response=it["response"],
                usage=_usage_from_json(it["usage"]),
                extraction_outcome=it["extraction_outcome"],
                block_count=it["block_count"],
                repetition_flag=it["repetition_flag"],
                compile_report=_compile_report_from_json(it["compile_report"]),
            )
            for it in obj["iterations"]
        ],
        terminal_status=obj["terminal_status"],
        func_report=_func_report_from_json(obj["func_report"]),
        link_report=_compile_report_from_json(obj.get("link_report")),
        final_code=obj["final_code"],
        crystal_bleu=obj["crystal_bleu"],
        totals=_usage_from_json(obj["totals"]),
        wall_time=obj["wall_time"],
        config_snapshot=obj.get("config_snapshot", {}),
    )


def error_record_to_json(record: ErrorRecord) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "error",
        "task_id": record.task_id,
        "model_id": record.model_id,
        "method": record.method,
        "repeat_index": record.repeat_index,
        "error": record.error,
    }


def load_records(path) -> tuple[list[RunRecord], list[ErrorRecord]]:
    """Read a JSONL record stream, separating runs from error records."""
    runs: list[RunRecord] = []
    errors: list[ErrorRecord] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("kind") == "error":
                errors.append(
                    ErrorRecord(
                        task_id=obj["task_id"],
                        model_id=obj["model_id"],
                        method=obj["method"],
                        repeat_index=obj["repeat_index"],
                        error=obj["error"],
                    )
                )
            else:
                runs.append(run_record_from_json(obj))
    return runs, errors
