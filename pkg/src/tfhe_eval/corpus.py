"""Benchmark-task manifests and the TFHE API surface.

The corpus itself (manifests, C sources, stub library) lives outside this
package; this module consumes its documented interfaces: the flat key-value
manifest format and the public stub header.

Manifest format, one file per task at <root>/<task>/manifest.txt:

    # comment lines and blank lines are ignored
    task_id: and_gate
    title: Encrypted AND gate
    description: one logical value; indented lines
      continue the previous value
    reference_plaintext: plain.c
    ground_truth_tfhe: tfhe.c
    driver: driver.c
    expected_cases: 4

Paths are relative to the manifest's directory.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

MANIFEST_NAME = "manifest.txt"

_REQUIRED_KEYS = (
    "task_id",
    "title",
    "description",
    "reference_plaintext",
    "ground_truth_tfhe",
    "driver",
    "expected_cases",
)

# Truth-table tasks have fixed case counts; ReLU's input set is a corpus choice.
_FIXED_CASES = {"and_gate": 4, "or_gate": 4, "not_gate": 2}


class CorpusError(Exception):
    def __init__(self, message: str, task_id: str | None = None, path=None):
        detail = message
        if task_id:
            detail = f"[{task_id}] {detail}"
        if path is not None:
            detail = f"{detail} ({path})"
        super().__init__(detail)
        self.task_id = task_id
        self.path = path


@dataclass(frozen=True)
class TaskManifest:
    task_id: str
    title: str
    description: str
    reference_plaintext: Path
    ground_truth_tfhe: Path
    driver: Path
    expected_cases: int

    def reference_plaintext_code(self) -> str:
        return self.reference_plaintext.read_text(encoding="utf-8")

    def ground_truth_code(self) -> str:
        return self.ground_truth_tfhe.read_text(encoding="utf-8")


def parse_manifest_text(text: str, path=None) -> dict[str, str]:
    fields: dict[str, str] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        if raw[0] in (" ", "\t"):
            if current is None:
                raise CorpusError(
                    f"continuation line {lineno} before any key", path=path
                )
            fields[current] = f"{fields[current]} {raw.strip()}"
            continue
        if ":" not in raw:
            raise CorpusError(f"malformed line {lineno}: {raw!r}", path=path)
        key, _, value = raw.partition(":")
        key = key.strip()
        if key not in _REQUIRED_KEYS:
            raise CorpusError(f"unknown manifest key {key!r} (line {lineno})", path=path)
        if key in fields:
            raise CorpusError(f"duplicate manifest key {key!r} (line {lineno})", path=path)
        fields[key] = value.strip()
        current = key
    missing = [key for key in _REQUIRED_KEYS if key not in fields]
    if missing:
        raise CorpusError(f"missing manifest keys: {', '.join(missing)}", path=path)
    return fields


def load_manifest(path: Path) -> TaskManifest:
    path = Path(path)
    fields = parse_manifest_text(path.read_text(encoding="utf-8"), path=path)
    task_id = fields["task_id"]
    try:
        expected_cases = int(fields["expected_cases"])
    except ValueError:
        raise CorpusError(
            f"expected_cases is not an integer: {fields['expected_cases']!r}",
            task_id=task_id,
            path=path,
        ) from None

    base = path.parent
    resolved = {}
    for key in ("reference_plaintext", "ground_truth_tfhe", "driver"):
        candidate = (base / fields[key]).resolve()
        if not candidate.is_file():
            raise CorpusError(
                f"{key} file does not exist: {fields[key]}", task_id=task_id, path=candidate
            )
        if candidate.stat().st_size == 0:
            raise CorpusError(
                f"{key} file is empty: {fields[key]}", task_id=task_id, path=candidate
            )
        resolved[key] = candidate

    if expected_cases < 1:
        raise CorpusError("expected_cases must be >= 1", task_id=task_id, path=path)
    fixed = _FIXED_CASES.get(task_id)
    if fixed is not None and expected_cases != fixed:
        raise CorpusError(
            f"expected_cases must be {fixed} for {task_id}, got {expected_cases}",
            task_id=task_id,
            path=path,
        )

    return TaskManifest(
        task_id=task_id,
        title=fields["title"],
        description=fields["description"],
        reference_plaintext=resolved["reference_plaintext"],
        ground_truth_tfhe=resolved["ground_truth_tfhe"],
        driver=resolved["driver"],
        expected_cases=expected_cases,
    )


def load_corpus(root: Path) -> list[TaskManifest]:
    """Load every task manifest under root, sorted by task_id."""
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root is not a directory: {root}")
    manifests = []
    for manifest_path in sorted(root.glob(f"*/{MANIFEST_NAME}")):
        manifest = load_manifest(manifest_path)
        if manifest.task_id != manifest_path.parent.name:
            raise CorpusError(
                f"task_id {manifest.task_id!r} does not match directory "
                f"{manifest_path.parent.name!r}",
                task_id=manifest.task_id,
                path=manifest_path,
            )
        manifests.append(manifest)
    if not manifests:
        raise CorpusError(f"no task manifests found under {root}")
    manifests.sort(key=lambda m: m.task_id)
    return manifests


@dataclass(frozen=True)
class StubApiSurface:
    """Exported identifiers of the TFHE header generated code compiles against."""

    function_names: frozenset[str]
    type_names: frozenset[str]
    header: str

    @property
    def known_identifiers(self) -> frozenset[str]:
        return self.function_names | self.type_names


_TYPEDEF_RE = re.compile(
    r"typedef\s+struct\s*\w*\s*(?:\{.*?\}\s*)?(\w+)\s*;", re.DOTALL
)
_DECL_NAME_RE = re.compile(r"\b([A-Za-z_]\w*)\s*\(")


def api_surface_from_header(header_path: Path) -> StubApiSurface:
    """Parse function and type names from the public TFHE header.

    Relies on the header keeping one declaration per line, which both the
    stub header and the real library's gate-bootstrapping header satisfy.
    """
    header_path = Path(header_path)
    text = header_path.read_text(encoding="utf-8")
    type_names = frozenset(m.group(1) for m in _TYPEDEF_RE.finditer(text))
    functions = set()
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith(("#", "//", "*", "/*")) or "(" not in stripped:
            continue
        if not stripped.endswith(";"):
            continue
        match = _DECL_NAME_RE.search(stripped)
        if match and match.group(1) not in type_names:
            functions.add(match.group(1))
    if not functions:
        raise CorpusError(f"no function declarations found in header {header_path}")
    return StubApiSurface(
        function_names=frozenset(functions),
        type_names=type_names,
        header=str(header_path),
    )


def validate_closure(manifests: Iterable[TaskManifest], toolchain) -> list[str]:
    """Ground-truth closure check: each reference TFHE implementation must
    compile and pass its own driver n/n. Returns human-readable problems.
    """
    problems: list[str] = []
    for manifest in manifests:
        code = manifest.ground_truth_code()
        report = toolchain.compile(code, manifest, run_tag="corpus-validate", iteration=0)
        if not report.success:
            problems.append(
                f"[{manifest.task_id}] ground truth fails to compile: "
                + "; ".join(str(d) for d in report.diagnostics[:3])
            )
            continue
        outcome = toolchain.link_and_run(report, manifest, run_tag="corpus-validate")
        func = outcome.func_report
        if func is None:
            problems.append(f"[{manifest.task_id}] ground truth fails to link")
        elif func.passed_cases != manifest.expected_cases or func.exit_code != 0:
            problems.append(
                f"[{manifest.task_id}] ground truth driver: "
                f"{func.passed_cases}/{func.total_cases} passed, exit {func.exit_code}"
            )
    return problems
