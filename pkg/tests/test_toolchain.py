from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from tfhe_eval.toolchain import (
    CompileReport,
    Diagnostic,
    FuncReport,
    Toolchain,
    ToolchainConfig,
    ToolchainError,
    build_revision_prompt,
    classify_hallucination,
    collect_hallucinations,
    parse_diagnostics,
    parse_driver_output,
    undeclared_identifiers,
)

DATA = Path(__file__).parent / "data" / "diagnostics"

HAVE_CC = shutil.which("cc") is not None

# (fixture, [(line, col, severity) for each expected diagnostic],
#  expected hallucination candidates against the stub surface)
FIXTURES = [
    ("f01.txt", [(9, 5, "error"), (8, 9, "warning"), (10, 1, "warning")], []),
    ("f02.txt", [(5, 5, "error")], ["bootsNAND_typo"]),
    ("f03.txt", [(5, 5, "error")], []),
    (
        "f04.txt",
        [(1, 20, "error"), (1, 45, "error"), (1, 65, "error"), (2, 26, "error")],
        [],
    ),
    ("f05.txt", [(5, 28, "error"), (5, 28, "note")], []),
    ("f06.txt", [(1, 10, "error")], []),
    ("f07.txt", [(7, 5, "error"), (6, 9, "warning"), (8, 1, "warning")], []),
    ("f08.txt", [(2, 9, "warning")], []),
    ("f09.txt", [(5, 5, "error"), (6, 5, "error")], ["bootsXNOR", "tfheMagicEncrypt"]),
    (
        "f10.txt",
        [(6, 5, "error"), (6, 5, "error"), (7, 5, "error"), (7, 5, "note")],
        [],
    ),
]


@pytest.mark.parametrize("fixture,expected,hallucinated", FIXTURES)
def test_captured_fixture_parses_exactly(fixture, expected, hallucinated, api_surface):
    output = (DATA / fixture).read_text()
    diagnostics = parse_diagnostics(output)
    assert [(d.line, d.column, d.severity) for d in diagnostics] == expected
    assert collect_hallucinations(diagnostics, api_surface) == hallucinated


def test_fixture_count_is_ten():
    assert len(FIXTURES) == 10
    assert len({name for name, _, _ in FIXTURES}) == 10


def test_parse_keeps_message_text():
    diags = parse_diagnostics((DATA / "f02.txt").read_text())
    assert diags[0].message.startswith(
        "implicit declaration of function 'bootsNAND_typo'"
    )
    assert diags[0].file == "f02_hallucinated_typo.c"


def test_fatal_error_mapped_to_error():
    diags = parse_diagnostics((DATA / "f06.txt").read_text())
    assert diags[0].severity == "error"
    assert "No such file or directory" in diags[0].message


def test_undeclared_identifier_patterns():
    assert undeclared_identifiers(
        "implicit declaration of function 'bootsFOO' [-Werror]"
    ) == ["bootsFOO"]
    assert undeclared_identifiers("'bk' undeclared (first use in this function)") == ["bk"]
    assert undeclared_identifiers("unknown type name 'LweSample'") == ["LweSample"]
    assert undeclared_identifiers("undefined reference to `bootsBAR'") == ["bootsBAR"]
    assert undeclared_identifiers("something unrelated") == []


def diag(message: str) -> Diagnostic:
    return Diagnostic("candidate.c", 5, 1, "error", message)


def test_classify_hallucination_rules(api_surface):
    # TFHE-patterned and absent from the surface: classified.
    assert (
        classify_hallucination(
            diag("implicit declaration of function 'bootsXNOR2'"), api_surface
        )
        == "bootsXNOR2"
    )
    # Not TFHE-patterned: ignored.
    assert (
        classify_hallucination(
            diag("implicit declaration of function 'my_helper'"), api_surface
        )
        is None
    )
    # Present in the surface: misuse (missing include), not hallucination.
    assert (
        classify_hallucination(
            diag("implicit declaration of function 'bootsAND'"), api_surface
        )
        is None
    )
    # Known type names are not hallucinations either.
    assert (
        classify_hallucination(diag("unknown type name 'LweSample'"), api_surface)
        is None
    )


def test_template_placeholder_validation(tmp_path):
    with pytest.raises(ValueError, match="exactly once"):
        ToolchainConfig(
            workspace_root=tmp_path,
            compile_command_template="cc -c {src} {include_dirs} {lib_dirs} {libs}",
        )
    with pytest.raises(ValueError, match="timeouts"):
        ToolchainConfig(workspace_root=tmp_path, run_timeout=0)


# --- live compiler tests -------------------------------------------------

pytestmark_cc = pytest.mark.skipif(not HAVE_CC, reason="no C compiler on PATH")


@pytest.fixture
def live_toolchain(tmp_path, api_surface):
    cfg = ToolchainConfig(workspace_root=tmp_path / "ws", compile_timeout=30, run_timeout=5)
    return Toolchain(cfg, api_surface)


@pytestmark_cc
def test_compile_success_standalone(live_toolchain, make_task):
    task = make_task()
    report = live_toolchain.compile(
        "int add(int a, int b) { return a + b; }", task, "tag", 1
    )
    assert report.success
    assert report.error_diagnostics == []
    assert report.object_path is not None and report.object_path.exists()
    assert report.duration > 0


@pytestmark_cc
def test_compile_missing_semicolon_line_number(live_toolchain, make_task):
    task = make_task()
    code = (DATA / "src" / "f07_line7_semicolon.c").read_text()
    report = live_toolchain.compile(code, task, "tag", 2)
    assert not report.success
    errors = report.error_diagnostics
    assert errors and errors[0].line == 7


@pytestmark_cc
def test_compile_undeclared_tfhe_identifier_classified(live_toolchain, make_task):
    task = make_task()
    code = (
        "void encrypted_and(void* r, const void* a, const void* b, const void* bk) {\n"
        "    bootsNAND_typo(r, a, b, bk);\n"
        "}\n"
    )
    report = live_toolchain.compile(code, task, "tag", 3)
    assert not report.success
    assert report.hallucinated_api_candidates == ["bootsNAND_typo"]
    assert any("bootsNAND_typo" in d.message for d in report.error_diagnostics)


@pytestmark_cc
def test_workspace_isolation_per_run_and_iteration(live_toolchain, make_task):
    task = make_task()
    first = live_toolchain.compile("int x;", task, "and__m1__baseline__r1", 1)
    second = live_toolchain.compile("int y;", task, "and__m1__baseline__r2", 1)
    third = live_toolchain.compile("int z;", task, "and__m1__baseline__r1", 2)
    paths = {
        first.object_path.parent,
        second.object_path.parent,
        third.object_path.parent,
    }
    assert len(paths) == 3


@pytestmark_cc
def test_compile_timeout_synthetic_diagnostic(tmp_path, api_surface, make_task):
    slow = tmp_path / "slowcc"
    slow.write_text("#!/bin/sh\nsleep 5\n")
    slow.chmod(0o755)
    cfg = ToolchainConfig(
        workspace_root=tmp_path / "ws",
        compile_command_template=f"{slow} {{src}} {{out}} {{include_dirs}} {{lib_dirs}} {{libs}}",
        compile_timeout=0.3,
    )
    chain = Toolchain(cfg, api_surface)
    report = chain.compile("int x;", make_task(), "tag", 1)
    assert not report.success
    assert any("timed out" in d.message for d in report.diagnostics)


def test_missing_toolchain_binary(tmp_path, api_surface, make_task):
    cfg = ToolchainConfig(
        workspace_root=tmp_path / "ws",
        compile_command_template=(
            "definitely-not-a-compiler-x {src} {out} {include_dirs} {lib_dirs} {libs}"
        ),
    )
    chain = Toolchain(cfg, api_surface)
    with pytest.raises(ToolchainError, match="not found"):
        chain.compile("int x;", make_task(), "tag", 1)


@pytestmark_cc
def test_link_and_run_with_real_driver(live_toolchain, make_task, tmp_path):
    driver = (
        "#include <stdio.h>\n"
        "int add(int a, int b);\n"
        "int main(void) {\n"
        "    int pass1 = add(2, 3) == 5;\n"
        "    int pass2 = add(-1, 1) == 0;\n"
        '    printf("CASE 0 %s\\n", pass1 ? "PASS" : "FAIL");\n'
        '    printf("CASE 1 %s\\n", pass2 ? "PASS" : "FAIL");\n'
        '    printf("TOTAL %d/2\\n", pass1 + pass2);\n'
        "    return (pass1 && pass2) ? 0 : 1;\n"
        "}\n"
    )
    task = make_task(task_id="relu", expected_cases=2, driver=driver)
    compiled = live_toolchain.compile(
        "int add(int a, int b) { return a + b; }", task, "tag", 1
    )
    assert compiled.success
    outcome = live_toolchain.link_and_run(compiled, task, "tag")
    assert outcome.link_report is None
    func = outcome.func_report
    assert func.total_cases == 2
    assert func.passed_cases == 2
    assert func.exit_code == 0
    assert func.per_case == [(0, True), (1, True)]


@pytestmark_cc
def test_link_failure_reported_not_raised(live_toolchain, make_task):
    driver = "int missing_function(void);\nint main(void) { return missing_function(); }\n"
    task = make_task(task_id="relu", expected_cases=1, driver=driver)
    compiled = live_toolchain.compile("int unrelated(void) { return 0; }", task, "tag", 1)
    assert compiled.success
    outcome = live_toolchain.link_and_run(compiled, task, "tag")
    assert outcome.func_report is None
    assert outcome.link_report is not None
    assert "missing_function" in outcome.link_report.raw_output


@pytestmark_cc
def test_runtime_timeout_flagged(live_toolchain, make_task):
    driver = (
        "#include <stdio.h>\n"
        "int main(void) {\n"
        '    printf("CASE 0 PASS\\n");\n'
        "    fflush(0);\n"
        "    for (;;) {}\n"
        "}\n"
    )
    task = make_task(task_id="relu", expected_cases=2, driver=driver)
    compiled = live_toolchain.compile("int helper(void) { return 1; }", task, "tag", 1)
    outcome = live_toolchain.link_and_run(compiled, task, "tag")
    func = outcome.func_report
    assert func.timed_out is True
    assert func.passed_cases <= func.total_cases


@pytestmark_cc
def test_crash_counts_cases_seen_before_exit(live_toolchain, make_task):
    driver = (
        "#include <stdio.h>\n"
        "#include <stdlib.h>\n"
        "int main(void) {\n"
        '    printf("CASE 0 PASS\\n");\n'
        "    fflush(0);\n"
        "    abort();\n"
        "}\n"
    )
    task = make_task(task_id="relu", expected_cases=3, driver=driver)
    compiled = live_toolchain.compile("int helper(void) { return 1; }", task, "tag", 1)
    outcome = live_toolchain.link_and_run(compiled, task, "tag")
    func = outcome.func_report
    assert func.timed_out is False
    assert func.exit_code != 0
    assert func.passed_cases == 1
    assert func.total_cases == 3


# --- driver protocol parsing ----------------------------------------------

def test_parse_driver_output_full_protocol():
    stdout = "CASE 0 PASS\nCASE 1 FAIL\nCASE 2 PASS\nTOTAL 2/3\n"
    total, passed, per_case = parse_driver_output(stdout, expected_cases=3)
    assert (total, passed) == (3, 2)
    assert per_case == [(0, True), (1, False), (2, True)]


def test_parse_driver_output_missing_total_falls_back():
    total, passed, per_case = parse_driver_output("CASE 0 PASS\n", expected_cases=4)
    assert (total, passed) == (4, 1)


def test_parse_driver_output_garbage_ignored():
    stdout = "debug noise\nCASE 0 PASS\nmore noise\nTOTAL 1/1\n"
    total, passed, per_case = parse_driver_output(stdout, expected_cases=1)
    assert (total, passed) == (1, 1)


# --- revision prompts -------------------------------------------------------

def report_with(diags, hallucinated=(), raw=""):
    return CompileReport(
        success=False,
        diagnostics=diags,
        raw_output=raw or "\n".join(str(d) for d in diags),
        hallucinated_api_candidates=list(hallucinated),
        duration=0.1,
    )


def test_revision_prompt_contains_diagnostics_verbatim():
    diags = [
        Diagnostic("candidate.c", 5, 5, "error", "expected ';' before 'return'"),
        Diagnostic("candidate.c", 9, 1, "error", "unknown type name 'foo_t'"),
    ]
    prompt = build_revision_prompt(compile_report=report_with(diags))
    assert str(diags[0]) in prompt
    assert str(diags[1]) in prompt
    assert "fenced code block" in prompt


def test_wrong_format_prompt_has_reminder_only():
    prompt = build_revision_prompt(wrong_format=True)
    assert "did not contain a usable fenced code block" in prompt
    assert "error" not in prompt.lower().replace("could be extracted", "")
    assert "```c" in prompt


def test_hallucination_note_lists_identifiers():
    diags = [diag("implicit declaration of function 'bootsXNOR'")]
    prompt = build_revision_prompt(
        compile_report=report_with(diags, hallucinated=["bootsXNOR"])
    )
    assert "bootsXNOR" in prompt
    assert "do not exist in the TFHE API" in prompt
    assert "documented TFHE API" in prompt


def test_revision_prompt_respects_byte_budget():
    diags = [
        Diagnostic("candidate.c", i, 1, "error", "x" * 200) for i in range(1, 60)
    ]
    prompt = build_revision_prompt(
        compile_report=report_with(diags), error_budget_bytes=1000, max_error_lines=50
    )
    assert len(prompt.encode()) < 1600
    assert "truncated" in prompt
    assert str(diags[0]) in prompt  # first errors first


def test_func_context_prompt():
    func = FuncReport(4, 2, [(0, True), (1, False), (2, True), (3, False)], False, 1)
    prompt = build_revision_prompt(func_report=func)
    assert "failing cases: 1, 3" in prompt


def test_revision_prompt_requires_context():
    with pytest.raises(ValueError):
        build_revision_prompt()
