from __future__ import annotations

import math
import random

import numpy as np
import pytest

from tfhe_eval.gateway import Usage
from tfhe_eval.metrics import (
    PassAtKInput,
    TrivialNgramSet,
    aggregate,
    background_corpus,
    crystal_bleu,
    detokenize,
    extract_doc_code_blocks,
    lex,
    ngram_counts,
    pass_at_k,
    trivial_ngrams,
)
from tfhe_eval.records import BUDGET_EXHAUSTED, COMPILE_SUCCESS, IterationRecord, RunRecord
from tfhe_eval.toolchain import FuncReport


# --- lexer -------------------------------------------------------------

def test_lex_simple_expression():
    assert lex("a+b") == ("a", "+", "b")


def test_lex_tfhe_call():
    assert lex("bootsAND(r, a, b, bk);") == (
        "bootsAND", "(", "r", ",", "a", ",", "b", ",", "bk", ")", ";",
    )


def test_lex_strips_comments():
    tokens = lex("int x; // trailing\n/* block\ncomment */ int y;")
    assert tokens == ("int", "x", ";", "int", "y", ";")


def test_lex_multichar_operators_and_numbers():
    assert lex("x <<= 0x1f; y != 2.5e-3;") == (
        "x", "<<=", "0x1f", ";", "y", "!=", "2.5e-3", ";",
    )


def test_lex_string_literal_single_token():
    assert lex('printf("CASE %d PASS\\n", i);')[1] == "("
    assert '"CASE %d PASS\\n"' in lex('printf("CASE %d PASS\\n", i);')


def test_lex_unknown_bytes_become_single_tokens():
    assert lex("a @ b") == ("a", "@", "b")


def test_lex_detokenize_fixed_point():
    rng = random.Random(7)
    snippets = [
        "void f(LweSample* r) { bootsNOT(r, r, bk); }",
        "#include <tfhe/tfhe.h>\nint x = 42;",
        'char* s = "a b c"; s++;',
        "for (int i = 0; i < 8; ++i) { out[i] = in[i]; }",
    ]
    for code in snippets:
        tokens = lex(code)
        assert lex(detokenize(tokens)) == tokens
    for _ in range(20):
        tokens = tuple(
            rng.choice(["a", "ident", "42", "+", "++", ";", "(", ")", '"s t"'])
            for _ in range(rng.randint(1, 12))
        )
        relexed = lex(detokenize(tokens))
        assert lex(detokenize(relexed)) == relexed


# --- trivial n-grams ---------------------------------------------------

def brute_force_trivial(sequences, k, max_order):
    """Independent oracle: plain-dict counting and explicit tie-break sort."""
    keep = set()
    for order in range(1, max_order + 1):
        counts = {}
        for seq in sequences:
            for i in range(len(seq) - order + 1):
                gram = tuple(seq[i : i + order])
                counts[gram] = counts.get(gram, 0) + 1
        ranked = sorted(counts, key=lambda g: (-counts[g], g))
        keep.update(ranked[:k])
    return keep


def test_trivial_k0_empty():
    result = trivial_ngrams([("a", "b")], k=0, max_order=3)
    assert result.ngrams == frozenset()


def test_trivial_single_sequence_count_beats_tie():
    result = trivial_ngrams([("a", "a", "b")], k=1, max_order=1)
    assert result.ngrams == frozenset({("a",)})


def test_trivial_tie_break_lexicographic():
    # b and c tie at count 1; c loses to b lexicographically.
    result = trivial_ngrams([("c", "b")], k=1, max_order=1)
    assert result.ngrams == frozenset({("b",)})


def test_trivial_matches_brute_force_random():
    rng = random.Random(13)
    for trial in range(30):
        corpus = [
            tuple(rng.choice("abcde") for _ in range(rng.randint(1, 15)))
            for _ in range(rng.randint(1, 20))
        ]
        k = rng.randint(0, 6)
        max_order = rng.randint(1, 4)
        got = trivial_ngrams(corpus, k=k, max_order=max_order).ngrams
        assert got == brute_force_trivial(corpus, k, max_order), (corpus, k, max_order)


def test_trivial_size_bound_and_membership():
    corpus = [lex("int a = 1;"), lex("int b = 2;")]
    result = trivial_ngrams(corpus, k=5, max_order=4)
    assert len(result.ngrams) <= 5 * 4
    all_grams = set()
    for order in range(1, 5):
        for seq in corpus:
            all_grams |= set(ngram_counts(seq, order))
    assert result.ngrams <= all_grams


def test_trivial_shared_include_line_present():
    include = "#include <tfhe/tfhe.h>\n"
    corpus = [lex(include + body) for body in ("int a;", "int b;", "int c;")]
    include_tokens = lex(include)
    result = trivial_ngrams(corpus, k=12, max_order=2)
    assert (include_tokens[0],) in result.ngrams
    assert tuple(include_tokens[0:2]) in result.ngrams


def test_trivial_rejects_empty_corpus():
    with pytest.raises(ValueError):
        trivial_ngrams([], k=1)


# --- CrystalBLEU -------------------------------------------------------

def test_crystal_identity_is_one():
    tokens = lex(GROUND_TRUTH_SNIPPET)
    assert crystal_bleu(tokens, tokens, None, 4) == 1.0


def test_crystal_hand_counted_fixture():
    # p1 = 3/4, p2 = 2/3, equal lengths -> sqrt(1/2).
    score = crystal_bleu(("a", "b", "c", "d"), ("a", "b", "c", "e"), None, 2)
    assert abs(score - math.sqrt(0.5)) < 1e-9


def test_crystal_boilerplate_only_overlap_scores_below_unfiltered():
    header = "#include <tfhe/tfhe.h>\n"
    cand = lex(header + "alpha beta gamma delta")
    ref = lex(header + "omega psi chi phi")
    trivial = trivial_ngrams([lex(header)], k=50, max_order=4)
    unfiltered = crystal_bleu(cand, ref, None, 4)
    filtered = crystal_bleu(cand, ref, trivial, 4)
    assert filtered < unfiltered
    assert unfiltered > 0.1  # header overlap dominates unfiltered score
    assert filtered < 1e-6  # nothing shared survives the filter


def test_crystal_empty_effective_candidate_is_zero():
    tokens = ("a", "b")
    trivial = trivial_ngrams([tokens], k=50, max_order=4)
    assert crystal_bleu(tokens, tokens, trivial, 4) == 0.0
    assert crystal_bleu((), ("a",), None, 4) == 0.0


def test_crystal_brevity_penalty_applies_to_short_candidate():
    cand = ("a", "b")
    ref = ("a", "b", "c", "d")
    score = crystal_bleu(cand, ref, None, 1)
    # p1 = 1, BP = exp(1 - 4/2)
    assert abs(score - math.exp(-1.0)) < 1e-12


def test_crystal_score_one_iff_identical_after_filtering():
    rng = random.Random(3)
    for _ in range(50):
        cand = tuple(rng.choice("abcd") for _ in range(rng.randint(1, 10)))
        ref = tuple(rng.choice("abcd") for _ in range(rng.randint(1, 10)))
        score = crystal_bleu(cand, ref, None, 4)
        if cand == ref:
            assert score == 1.0
        else:
            assert score < 1.0, (cand, ref)


def test_crystal_monotone_filtering_never_gains_matches():
    cand = lex("bootsAND(r, a, b, bk); bootsNOT(r, r, bk);")
    ref = lex("bootsAND(r, a, b, bk); bootsOR(r, a, b, bk);")
    small = trivial_ngrams([cand, ref], k=2, max_order=2)
    large = trivial_ngrams([cand, ref], k=30, max_order=2)
    assert small.ngrams <= large.ngrams
    assert crystal_bleu(cand, ref, large, 2) <= crystal_bleu(cand, ref, small, 2) + 1e-12


GROUND_TRUTH_SNIPPET = """#include <tfhe/tfhe.h>
void encrypted_and(LweSample* result, const LweSample* a, const LweSample* b,
                   const TFheGateBootstrappingCloudKeySet* bk) {
    bootsAND(result, a, b, bk);
}
"""


# --- pass@k ------------------------------------------------------------

def mc_first_pass_estimates(n_t: int, trials: int, rng: np.random.Generator):
    """Monte Carlo oracle: sample k of n_t without replacement via random
    permutations; estimate P(at least one passing sample) for every (n, k).
    """
    perms = np.argsort(rng.random((trials, n_t)), axis=1)
    positions = np.argsort(perms, axis=1)  # positions[r, i] = slot of item i
    first_pass = np.minimum.accumulate(positions, axis=1)
    estimates = np.zeros((n_t + 1, n_t + 1))
    for n in range(1, n_t + 1):
        counts = np.bincount(first_pass[:, n - 1], minlength=n_t)
        cumulative = np.cumsum(counts)
        for k in range(1, n_t + 1):
            estimates[n][k] = cumulative[k - 1] / trials
    return estimates


def test_pass_at_k_trivial_endpoints():
    assert pass_at_k(PassAtKInput(5, 0, 1)) == 0.0
    assert pass_at_k(PassAtKInput(5, 0, 5)) == 0.0
    assert pass_at_k(PassAtKInput(5, 5, 3)) == 1.0
    assert pass_at_k(PassAtKInput(5, 2, 1)) == 0.4


def test_pass_at_1_equals_ratio_exactly():
    for n_t in range(1, 11):
        for n in range(n_t + 1):
            assert pass_at_k(PassAtKInput(n_t, n, 1)) == n / n_t


def test_pass_at_k_matches_monte_carlo_grid():
    rng = np.random.default_rng(20240817)
    trials = 100_000
    for n_t in range(1, 11):
        estimates = mc_first_pass_estimates(n_t, trials, rng)
        for n in range(n_t + 1):
            for k in range(1, n_t + 1):
                exact = pass_at_k(PassAtKInput(n_t, n, k))
                assert abs(exact - estimates[n][k]) < 0.01, (n_t, n, k)


def test_pass_at_k_rejects_bad_inputs():
    with pytest.raises(ValueError):
        PassAtKInput(0, 0, 1)
    with pytest.raises(ValueError):
        PassAtKInput(5, 6, 1)
    with pytest.raises(ValueError):
        PassAtKInput(5, 2, 0)
    with pytest.raises(ValueError):
        PassAtKInput(5, 2, 6)


# --- aggregation -------------------------------------------------------

def make_run(
    task="and_gate",
    model="mock",
    method="baseline",
    repeat=1,
    compiled=True,
    func_passed=None,
    bleu=1.0,
    iteration_usages=((100, 20),),
    wrong_format_iters=0,
    repetition_iters=0,
    repeats_declared=5,
):
    iterations = []
    n_iters = len(iteration_usages)
    for idx, (inp, out) in enumerate(iteration_usages, start=1):
        wrong = idx <= wrong_format_iters
        iterations.append(
            IterationRecord(
                index=idx,
                prompt_message="p",
                response="r",
                usage=Usage(inp, out),
                extraction_outcome="wrong_format" if wrong else "code",
                block_count=0 if wrong else 1,
                repetition_flag=idx <= repetition_iters and not wrong,
                compile_report=None,
            )
        )
    func = None
    if compiled:
        total = 4
        passed = total if func_passed is None else func_passed
        func = FuncReport(total, passed, [(i, i < passed) for i in range(total)], False, 0)
    totals = Usage()
    for it in iterations:
        totals = totals + it.usage
    return RunRecord(
        task_id=task,
        model_id=model,
        method=method,
        repeat_index=repeat,
        iterations=iterations,
        terminal_status=COMPILE_SUCCESS if compiled else BUDGET_EXHAUSTED,
        func_report=func,
        link_report=None,
        final_code="int x;" if not all(it.wrong_format for it in iterations) else None,
        crystal_bleu=bleu,
        totals=totals,
        wall_time=0.0,
        config_snapshot={"repeats": repeats_declared},
    )


def test_aggregate_all_compile_passes_gives_pass1_one():
    runs = [make_run(repeat=i) for i in range(1, 6)]
    report = aggregate(runs)
    assert len(report.cells) == 1
    assert report.cells[0].pass1_comp == 1.0
    assert report.cells[0].pass1_func == 1.0


def test_aggregate_usage_additivity():
    run = make_run(iteration_usages=((100, 20), (50, 10)))
    assert run.totals == Usage(150, 30)
    report = aggregate([run])
    assert report.cells[0].input_tokens == 150
    assert report.cells[0].output_tokens == 30


def test_aggregate_mean_crystal_bleu():
    scores = [1.0, 0.5, 0.5, 0.0, 0.0]
    runs = [make_run(repeat=i + 1, bleu=s) for i, s in enumerate(scores)]
    report = aggregate(runs)
    assert abs(report.cells[0].mean_crystal_bleu - 0.4) < 1e-12


def test_aggregate_rates_per_iteration():
    runs = [
        make_run(repeat=1, iteration_usages=((1, 1),) * 4, wrong_format_iters=1),
        make_run(repeat=2, iteration_usages=((1, 1),) * 4, repetition_iters=2),
    ]
    report = aggregate(runs)
    cell = report.cells[0]
    assert cell.total_iterations == 8
    assert abs(cell.wrong_format_rate - 1 / 8) < 1e-12
    assert abs(cell.repetition_rate - 2 / 8) < 1e-12


def test_aggregate_permutation_invariant():
    runs = [make_run(repeat=i, bleu=i / 10) for i in range(1, 6)]
    forward = aggregate(runs)
    backward = aggregate(list(reversed(runs)))
    assert forward.cells == backward.cells


def test_aggregate_mixed_declared_repeats_rejected():
    runs = [
        make_run(repeat=1, repeats_declared=5),
        make_run(repeat=2, repeats_declared=3),
    ]
    with pytest.raises(ValueError, match="mixed n_t"):
        aggregate(runs)


def test_aggregate_partial_passes():
    runs = [make_run(repeat=i, compiled=i <= 2) for i in range(1, 6)]
    report = aggregate(runs)
    assert report.cells[0].pass1_comp == 2 / 5
    assert report.cells[0].pass1_func == 2 / 5


def test_functional_fail_counts_against_func_rate():
    runs = [make_run(repeat=1, func_passed=2), make_run(repeat=2)]
    report = aggregate(runs)
    assert report.cells[0].pass1_comp == 1.0
    assert report.cells[0].pass1_func == 0.5


# --- background corpus helpers ------------------------------------------

def test_extract_doc_code_blocks():
    doc = "Intro\n```c\nint a;\n```\nmiddle\n```\nint b;\n```\ntail"
    assert extract_doc_code_blocks(doc) == ["int a;\n", "int b;\n"]


def test_background_corpus_composition():
    sequences, corpus_id = background_corpus(
        {"and_gate": "int a;", "or_gate": "int b;"},
        doc_texts=["Docs\n```c\nbootsAND(r, a, b, bk);\n```\n"],
    )
    assert len(sequences) == 3
    assert corpus_id == "ground_truths(2)+doc_blocks(1)"
