"""Compile-link-run pipeline for candidate TFHE code.

Writes each candidate into an isolated per-iteration workspace, invokes the
configured compiler, parses `file:line[:col]: severity: message` diagnostics,
classifies hallucinated TFHE API calls, links survivors against the task's
functional driver, and turns the driver's stdout protocol into a FuncReport.
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .corpus import StubApiSurface, TaskManifest

FORMAT_REQUIREMENT = (
    "Reply with the complete C implementation in a single fenced code block "
    "(```c ... ```), and nothing else after it."
)

DEFAULT_COMPILE_TEMPLATE = (
    "cc -std=c11 -Wall -Werror=implicit-function-declaration "
    "-c {src} -o {out} {include_dirs} {lib_dirs} {libs}"
)
DEFAULT_LINK_TEMPLATE = "cc {inputs} -o {out} {include_dirs} {lib_dirs} {libs}"

_COMPILE_PLACEHOLDERS = ("{src}", "{out}", "{include_dirs}", "{lib_dirs}", "{libs}")
_LINK_PLACEHOLDERS = ("{inputs}", "{out}", "{include_dirs}", "{lib_dirs}", "{libs}")


class ToolchainError(Exception):
    """Environment-level toolchain failure (missing binary, workspace I/O)."""


@dataclass(frozen=True)
class ToolchainConfig:
    workspace_root: Path
    include_dirs: tuple[str, ...] = ()
    lib_dirs: tuple[str, ...] = ()
    libs: tuple[str, ...] = ()
    compile_command_template: str = DEFAULT_COMPILE_TEMPLATE
    link_command_template: str = DEFAULT_LINK_TEMPLATE
    library_mode: str = "stub"  # stub | real
    compile_timeout: float = 60.0
    run_timeout: float = 10.0
    error_budget_bytes: int = 4000
    max_error_lines: int = 20

    def __post_init__(self) -> None:
        for placeholder in _COMPILE_PLACEHOLDERS:
            if self.compile_command_template.count(placeholder) != 1:
                raise ValueError(
                    f"compile template must contain {placeholder} exactly once"
                )
        for placeholder in _LINK_PLACEHOLDERS:
            if self.link_command_template.count(placeholder) != 1:
                raise ValueError(
                    f"link template must contain {placeholder} exactly once"
                )
        if self.compile_timeout <= 0 or self.run_timeout <= 0:
            raise ValueError("timeouts must be positive")
        if self.library_mode not in ("stub", "real"):
            raise ValueError("library_mode must be 'stub' or 'real'")


@dataclass(frozen=True)
class Diagnostic:
    file: str
    line: int
    column: Optional[int]
    severity: str  # error | warning | note
    message: str

    def __str__(self) -> str:
        col = f":{self.column}" if self.column is not None else ""
        return f"{self.file}:{self.line}{col}: {self.severity}: {self.message}"


@dataclass
class CompileReport:
    success: bool
    diagnostics: list[Diagnostic]
    raw_output: str
    hallucinated_api_candidates: list[str]
    duration: float
    object_path: Optional[Path] = None

    @property
    def error_diagnostics(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]


@dataclass
class FuncReport:
    total_cases: int
    passed_cases: int
    per_case: list[tuple[int, bool]]
    timed_out: bool
    exit_code: int


@dataclass
class FuncOutcome:
    """Result of link_and_run: a FuncReport, or a link report when linking failed."""

    func_report: Optional[FuncReport]
    link_report: Optional[CompileReport] = None


_DIAG_RE = re.compile(
    r"^(?P<file>[^:\s][^:\n]*):(?P<line>\d+):(?:(?P<col>\d+):)?\s*"
    r"(?P<sev>fatal error|error|warning|note):\s*(?P<msg>.*)$"
)

_UNDECLARED_PATTERNS = (
    re.compile(r"implicit declaration of function '([A-Za-z_]\w*)'"),
    re.compile(r"call to undeclared function '([A-Za-z_]\w*)'"),
    re.compile(r"use of undeclared identifier '([A-Za-z_]\w*)'"),
    re.compile(r"'([A-Za-z_]\w*)' undeclared"),
    re.compile(r"unknown type name '([A-Za-z_]\w*)'"),
    re.compile(r"undefined reference to [`']([A-Za-z_]\w*)'"),
)


def parse_diagnostics(output: str) -> list[Diagnostic]:
    """Extract structured diagnostics; unmatched lines stay in raw output."""
    diagnostics: list[Diagnostic] = []
    for line in output.splitlines():
        match = _DIAG_RE.match(line.strip())
        if not match:
            continue
        severity = match.group("sev")
        if severity == "fatal error":
            severity = "error"
        column = match.group("col")
        diagnostics.append(
            Diagnostic(
                file=match.group("file"),
                line=int(match.group("line")),
                column=int(column) if column else None,
                severity=severity,
                message=match.group("msg"),
            )
        )
    return diagnostics


def undeclared_identifiers(message: str) -> list[str]:
    found: list[str] = []
    for pattern in _UNDECLARED_PATTERNS:
        for name in pattern.findall(message):
            if name not in found:
                found.append(name)
    return found


def _tfhe_patterned(name: str) -> bool:
    lowered = name.lower()
    return name.startswith("boots") or "tfhe" in lowered or "lwe" in lowered


def classify_hallucination(diag: Diagnostic, api: StubApiSurface) -> Optional[str]:
    """Identifier of a hallucinated TFHE API call, if this diagnostic is one.

    An undeclared identifier counts when it follows the TFHE naming pattern
    (boots prefix, or tfhe/lwe in the name) and is absent from the API
    surface; names present in the surface are misuse, not hallucination.
    """
    for name in undeclared_identifiers(diag.message):
        if _tfhe_patterned(name) and name not in api.known_identifiers:
            return name
    return None


def collect_hallucinations(
    diagnostics: Sequence[Diagnostic], api: StubApiSurface
) -> list[str]:
    candidates: list[str] = []
    for diag in diagnostics:
        name = classify_hallucination(diag, api)
        if name is not None and name not in candidates:
            candidates.append(name)
    return candidates


def _expand_command(template: str, single: dict[str, str], multi: dict[str, list[str]]):
    argv: list[str] = []
    for token in shlex.split(template):
        if token in multi:
            argv.extend(multi[token])
            continue
        for placeholder, value in single.items():
            token = token.replace(placeholder, value)
        if token:
            argv.append(token)
    return argv


def _sanitize(tag: str) -> str:
    return re.sub(r"[^\w.=-]+", "_", tag)


class Toolchain:
    """Real subprocess-backed toolchain, confined to per-run workspaces."""

    def __init__(self, cfg: ToolchainConfig, api: StubApiSurface):
        self.cfg = cfg
        self.api = api

    def _workspace(self, run_tag: str, iteration: int) -> Path:
        workspace = (
            Path(self.cfg.workspace_root) / _sanitize(run_tag) / f"iter{iteration:02d}"
        )
        try:
            workspace.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ToolchainError(f"cannot create workspace {workspace}: {exc}") from exc
        return workspace

    def _flag_expansions(self) -> dict[str, list[str]]:
        return {
            "{include_dirs}": [f"-I{d}" for d in self.cfg.include_dirs],
            "{lib_dirs}": [f"-L{d}" for d in self.cfg.lib_dirs],
            "{libs}": [f"-l{name}" for name in self.cfg.libs],
        }

    def _run(self, argv: list[str], timeout: float, cwd: Path) -> tuple[int, str]:
        env = dict(os.environ, LC_ALL="C", LANG="C")
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=timeout,
                cwd=cwd,
                env=env,
            )
        except FileNotFoundError as exc:
            raise ToolchainError(f"toolchain binary not found: {argv[0]}") from exc
        return proc.returncode, (proc.stdout or "") + (proc.stderr or "")

    def compile(
        self, code: str, task: TaskManifest, run_tag: str, iteration: int
    ) -> CompileReport:
        """Compile candidate code; compile failure is a report, not an error."""
        workspace = self._workspace(run_tag, iteration)
        src = workspace / "candidate.c"
        out = workspace / "candidate.o"
        try:
            src.write_text(code if code.endswith("\n") else code + "\n", encoding="utf-8")
        except OSError as exc:
            raise ToolchainError(f"cannot write candidate source: {exc}") from exc

        argv = _expand_command(
            self.cfg.compile_command_template,
            {"{src}": str(src), "{out}": str(out)},
            self._flag_expansions(),
        )
        started = time.monotonic()
        try:
            returncode, output = self._run(argv, self.cfg.compile_timeout, workspace)
        except subprocess.TimeoutExpired as exc:
            duration = time.monotonic() - started
            partial = _timeout_output(exc)
            synthetic = Diagnostic(
                file=str(src),
                line=1,
                column=None,
                severity="error",
                message=f"compilation timed out after {self.cfg.compile_timeout}s",
            )
            return CompileReport(
                success=False,
                diagnostics=[synthetic],
                raw_output=partial,
                hallucinated_api_candidates=[],
                duration=duration,
            )
        duration = time.monotonic() - started
        diagnostics = parse_diagnostics(output)
        success = returncode == 0 and not any(
            d.severity == "error" for d in diagnostics
        )
        return CompileReport(
            success=success,
            diagnostics=diagnostics,
            raw_output=output,
            hallucinated_api_candidates=collect_hallucinations(diagnostics, self.api),
            duration=duration,
            object_path=out if success else None,
        )

    def link_and_run(
        self, compiled: CompileReport, task: TaskManifest, run_tag: str
    ) -> FuncOutcome:
        """Link the compiled candidate with the task driver and execute it."""
        if not compiled.success or compiled.object_path is None:
            raise ValueError("link_and_run requires a successful compile")
        workspace = compiled.object_path.parent
        binary = workspace / "driver_bin"
        argv = _expand_command(
            self.cfg.link_command_template,
            {"{out}": str(binary)},
            {
                "{inputs}": [str(compiled.object_path), str(task.driver)],
                **self._flag_expansions(),
            },
        )
        started = time.monotonic()
        try:
            returncode, output = self._run(argv, self.cfg.compile_timeout, workspace)
        except subprocess.TimeoutExpired as exc:
            link_report = CompileReport(
                success=False,
                diagnostics=[
                    Diagnostic(
                        file=str(task.driver),
                        line=1,
                        column=None,
                        severity="error",
                        message=f"link timed out after {self.cfg.compile_timeout}s",
                    )
                ],
                raw_output=_timeout_output(exc),
                hallucinated_api_candidates=[],
                duration=time.monotonic() - started,
            )
            return FuncOutcome(func_report=None, link_report=link_report)
        if returncode != 0:
            diagnostics = parse_diagnostics(output)
            # ld reports undefined references outside file:line form.
            names = [
                name
                for name in undeclared_identifiers(output)
                if _tfhe_patterned(name) and name not in self.api.known_identifiers
            ]
            link_report = CompileReport(
                success=False,
                diagnostics=diagnostics,
                raw_output=output,
                hallucinated_api_candidates=names,
                duration=time.monotonic() - started,
            )
            return FuncOutcome(func_report=None, link_report=link_report)

        return FuncOutcome(func_report=self._execute_driver(binary, task))

    def _execute_driver(self, binary: Path, task: TaskManifest) -> FuncReport:
        env = dict(os.environ, LC_ALL="C", LANG="C")
        try:
            proc = subprocess.run(
                [str(binary)],
                capture_output=True,
                text=True,
                timeout=self.cfg.run_timeout,
                cwd=binary.parent,
                env=env,
            )
        except subprocess.TimeoutExpired as exc:
            total, passed, per_case = parse_driver_output(
                _timeout_output(exc), task.expected_cases
            )
            return FuncReport(
                total_cases=total,
                passed_cases=passed,
                per_case=per_case,
                timed_out=True,
                exit_code=-1,
            )
        total, passed, per_case = parse_driver_output(
            proc.stdout or "", task.expected_cases
        )
        return FuncReport(
            total_cases=total,
            passed_cases=passed,
            per_case=per_case,
            timed_out=False,
            exit_code=proc.returncode,
        )


def _timeout_output(exc: subprocess.TimeoutExpired) -> str:
    parts = []
    for stream in (exc.stdout, exc.stderr):
        if not stream:
            continue
        parts.append(stream.decode("utf-8", "replace") if isinstance(stream, bytes) else stream)
    return "".join(parts)


_CASE_RE = re.compile(r"^CASE (\d+) (PASS|FAIL)$")
_TOTAL_RE = re.compile(r"^TOTAL (\d+)/(\d+)$")


def parse_driver_output(stdout: str, expected_cases: int):
    """Parse the driver stdout protocol into (total, passed, per_case).

    A missing TOTAL line (crash, timeout) falls back to the per-case lines
    seen so far against the manifest's expected case count.
    """
    per_case: list[tuple[int, bool]] = []
    total_line: tuple[int, int] | None = None
    for line in stdout.splitlines():
        line = line.strip()
        case = _CASE_RE.match(line)
        if case:
            per_case.append((int(case.group(1)), case.group(2) == "PASS"))
            continue
        total = _TOTAL_RE.match(line)
        if total:
            total_line = (int(total.group(1)), int(total.group(2)))
    if total_line is not None:
        passed, total = total_line
    else:
        passed = sum(1 for _, ok in per_case if ok)
        total = max(expected_cases, len(per_case))
    total = max(total, 1)
    passed = min(passed, total)
    return total, passed, per_case


def build_revision_prompt(
    compile_report: Optional[CompileReport] = None,
    func_report: Optional[FuncReport] = None,
    wrong_format: bool = False,
    error_budget_bytes: int = 4000,
    max_error_lines: int = 20,
) -> str:
    """Revision message for the next iteration after a failed one."""
    if wrong_format:
        return (
            "Your previous reply did not contain a usable fenced code block, "
            "so no code could be extracted. "
            + FORMAT_REQUIREMENT
        )
    if compile_report is not None:
        sections = ["The code failed to compile. Compiler diagnostics:", ""]
        sections.append(
            _truncate_diagnostics(compile_report, error_budget_bytes, max_error_lines)
        )
        if compile_report.hallucinated_api_candidates:
            names = ", ".join(compile_report.hallucinated_api_candidates)
            sections.append("")
            sections.append(
                f"The following functions do not exist in the TFHE API: {names}. "
                "Use only the documented TFHE API functions."
            )
        sections.append("")
        sections.append("Revise the implementation. " + FORMAT_REQUIREMENT)
        return "\n".join(sections)
    if func_report is not None:
        failing = [str(index) for index, ok in func_report.per_case if not ok]
        detail = f"failing cases: {', '.join(failing)}" if failing else (
            f"{func_report.passed_cases}/{func_report.total_cases} cases passed"
        )
        return (
            "The code compiled but produced wrong outputs under the functional "
            f"tests ({detail}). Revise the implementation. " + FORMAT_REQUIREMENT
        )
    raise ValueError("revision prompt requires a failure context")


def _truncate_diagnostics(
    report: CompileReport, budget_bytes: int, max_error_lines: int
) -> str:
    """First error lines first, whole lines only, within the byte budget."""
    error_lines = [str(d) for d in report.error_diagnostics]
    other_lines = [
        line for line in report.raw_output.splitlines() if line.strip()
    ]
    chosen: list[str] = []
    used = 0
    truncated = False
    for line in error_lines[:max_error_lines] + other_lines:
        if line in chosen:
            continue
        cost = len(line.encode("utf-8")) + 1
        if used + cost > budget_bytes:
            truncated = True
            break
        chosen.append(line)
        used += cost
    if len(error_lines) > max_error_lines:
        truncated = True
    if truncated:
        chosen.append("... (diagnostics truncated)")
    return "\n".join(chosen)
