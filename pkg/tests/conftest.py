from __future__ import annotations

import threading

import pytest

from tfhe_eval.corpus import StubApiSurface, TaskManifest
from tfhe_eval.toolchain import CompileReport, Diagnostic, FuncOutcome, FuncReport

# Mirrors the shipped stub header's exports (see corpus/include/tfhe/tfhe.h).
STUB_FUNCTIONS = frozenset(
    {
        "new_default_gate_bootstrapping_parameters",
        "delete_gate_bootstrapping_parameters",
        "new_random_gate_bootstrapping_secret_keyset",
        "delete_gate_bootstrapping_secret_keyset",
        "new_gate_bootstrapping_ciphertext",
        "new_gate_bootstrapping_ciphertext_array",
        "delete_gate_bootstrapping_ciphertext",
        "delete_gate_bootstrapping_ciphertext_array",
        "bootsSymEncrypt",
        "bootsSymDecrypt",
        "bootsCONSTANT",
        "bootsNOT",
        "bootsCOPY",
        "bootsAND",
        "bootsOR",
        "bootsXOR",
        "bootsNAND",
        "bootsNOR",
        "bootsMUX",
    }
)
STUB_TYPES = frozenset(
    {
        "LweSample",
        "TFheGateBootstrappingParameterSet",
        "TFheGateBootstrappingCloudKeySet",
        "TFheGateBootstrappingSecretKeySet",
    }
)

GROUND_TRUTH_AND = """#include <tfhe/tfhe.h>

void encrypted_and(LweSample* result, const LweSample* a, const LweSample* b,
                   const TFheGateBootstrappingCloudKeySet* bk) {
    bootsAND(result, a, b, bk);
}
"""

PLAIN_AND = """int plain_and(int a, int b) {
    return a && b;
}
"""

COMPILE_FAIL_MARKER = "BROKEN_MARKER"


@pytest.fixture
def api_surface() -> StubApiSurface:
    return StubApiSurface(STUB_FUNCTIONS, STUB_TYPES, header="tfhe/tfhe.h")


@pytest.fixture
def make_task(tmp_path):
    """Factory for corpus-shaped tasks backed by real temp files."""

    def factory(
        task_id: str = "and_gate",
        expected_cases: int = 4,
        ground_truth: str = GROUND_TRUTH_AND,
        plain: str = PLAIN_AND,
        driver: str = "int main(void) { return 0; }\n",
        description: str = "Implement encrypted_and over encrypted bits.",
    ) -> TaskManifest:
        root = tmp_path / "tasks" / task_id
        root.mkdir(parents=True, exist_ok=True)
        (root / "plain.c").write_text(plain)
        (root / "tfhe.c").write_text(ground_truth)
        (root / "driver.c").write_text(driver)
        return TaskManifest(
            task_id=task_id,
            title=f"Task {task_id}",
            description=description,
            reference_plaintext=root / "plain.c",
            ground_truth_tfhe=root / "tfhe.c",
            driver=root / "driver.c",
            expected_cases=expected_cases,
        )

    return factory


class ScriptedToolchain:
    """Scripted toolchain stub: no compiler runs, outcomes are dictated.

    With `outcomes`, each compile() pops the next boolean. Without it, any
    candidate containing COMPILE_FAIL_MARKER fails and everything else
    succeeds, which stays deterministic under parallel matrices.
    """

    def __init__(
        self,
        outcomes=None,
        func_passed=None,
        link_fail: bool = False,
        fail_diagnostic: Diagnostic | None = None,
    ):
        self.outcomes = list(outcomes) if outcomes is not None else None
        self.func_passed = func_passed
        self.link_fail = link_fail
        self.fail_diagnostic = fail_diagnostic or Diagnostic(
            "candidate.c", 3, 5, "error", "expected ';' before 'return'"
        )
        self.compiled_codes: list[str] = []
        self.workspaces: list[str] = []
        self._lock = threading.Lock()

    def compile(self, code, task, run_tag, iteration):
        with self._lock:
            self.compiled_codes.append(code)
            self.workspaces.append(f"{run_tag}/iter{iteration:02d}")
            if self.outcomes is not None:
                ok = self.outcomes.pop(0)
            else:
                ok = COMPILE_FAIL_MARKER not in code
        if ok:
            return CompileReport(
                success=True,
                diagnostics=[],
                raw_output="",
                hallucinated_api_candidates=[],
                duration=0.0,
            )
        return CompileReport(
            success=False,
            diagnostics=[self.fail_diagnostic],
            raw_output=str(self.fail_diagnostic),
            hallucinated_api_candidates=[],
            duration=0.0,
        )

    def link_and_run(self, compiled, task, run_tag):
        if self.link_fail:
            return FuncOutcome(
                func_report=None,
                link_report=CompileReport(
                    success=False,
                    diagnostics=[],
                    raw_output="undefined reference to `encrypted_and'",
                    hallucinated_api_candidates=[],
                    duration=0.0,
                ),
            )
        total = task.expected_cases
        passed = total if self.func_passed is None else self.func_passed
        return FuncOutcome(
            func_report=FuncReport(
                total_cases=total,
                passed_cases=passed,
                per_case=[(i, i < passed) for i in range(total)],
                timed_out=False,
                exit_code=0 if passed == total else 1,
            )
        )


@pytest.fixture
def scripted_toolchain():
    return ScriptedToolchain


def fenced(code: str, lang: str = "c") -> str:
    return f"```{lang}\n{code}\n```"


GOOD_RESPONSE = "Here is the implementation:\n\n" + fenced(GROUND_TRUTH_AND.strip())
BROKEN_RESPONSE = (
    "Attempting a fix:\n\n"
    + fenced(f"/* {COMPILE_FAIL_MARKER} */\nvoid encrypted_and(void) {{}}")
)
PROSE_RESPONSE = "I would implement this with bootsAND but cannot share code."
