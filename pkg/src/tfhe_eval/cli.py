"""Command-line interface.

Subcommands: index-docs, run, report, validate-corpus.
Exit codes: 0 success, 1 partial run failures, 2 configuration/corpus errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import orchestrator, report as report_mod, retrieval
from .config import ConfigError, ExperimentConfig, load_config
from .records import load_records
from .toolchain import Toolchain, ToolchainError

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfhe-eval",
        description="Compiler-in-the-loop evaluation of LLM-generated TFHE code",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    index_p = sub.add_parser("index-docs", help="chunk and embed documentation")
    index_p.add_argument("paths", nargs="+", type=Path)
    index_p.add_argument("--out", required=True, type=Path)
    index_p.add_argument("--config", type=Path)

    run_p = sub.add_parser("run", help="execute the experiment matrix")
    run_p.add_argument("--config", required=True, type=Path)
    run_p.add_argument("--tasks", help="comma-separated task ids (default: all)")
    run_p.add_argument("--models", help="comma-separated model ids (default: all)")
    run_p.add_argument(
        "--methods",
        default="baseline",
        help="comma-separated: baseline,rag,fewshot,rag_fewshot",
    )
    run_p.add_argument("--repeats", type=int)
    run_p.add_argument("--max-iters", type=int)
    run_p.add_argument("--parallelism", type=int, default=1)
    run_p.add_argument("--index", type=Path, help="retrieval index for RAG methods")
    run_p.add_argument("--out", required=True, type=Path)

    report_p = sub.add_parser("report", help="aggregate a run record stream")
    report_p.add_argument("--in", dest="records", required=True, type=Path)
    report_p.add_argument(
        "--format", default="markdown", choices=["jsonl-summary", "csv", "markdown", "md"]
    )
    report_p.add_argument("--out", type=Path, help="write here instead of stdout")
    report_p.add_argument("--plots", type=Path, help="directory for bar charts")

    validate_p = sub.add_parser("validate-corpus", help="check corpus invariants")
    validate_p.add_argument("--config", required=True, type=Path)

    return parser


def _cmd_index_docs(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        params = cfg.retrieval
    else:
        from .config import RetrievalParams

        params = RetrievalParams()
    chunks = retrieval.ingest_paths(
        args.paths,
        max_chunk_chars=params.max_chunk_chars,
        overlap_chars=params.overlap_chars,
    )
    if not chunks:
        print("no documentation content found", file=sys.stderr)
        return EXIT_CONFIG
    index = retrieval.build_index(chunks, params.embedder)
    retrieval.save_index(index, args.out)
    print(f"indexed {len(chunks)} chunks -> {args.out}")
    return EXIT_OK


def _load_experiment(args) -> tuple[ExperimentConfig, list, Toolchain]:
    cfg = load_config(args.config)
    manifests = corpus_mod.load_corpus(cfg.corpus_root)
    api = corpus_mod.api_surface_from_header(cfg.header)
    toolchain = Toolchain(cfg.toolchain, api)
    return cfg, manifests, toolchain


def _cmd_run(args) -> int:
    cfg, manifests, toolchain = _load_experiment(args)
    all_manifests = manifests
    if args.tasks:
        wanted = set(args.tasks.split(","))
        unknown = wanted - {m.task_id for m in manifests}
        if unknown:
            raise ConfigError(f"unknown tasks: {sorted(unknown)}")
        manifests = [m for m in manifests if m.task_id in wanted]
    models = cfg.models
    if args.models:
        wanted = set(args.models.split(","))
        unknown = wanted - {m.model_id for m in models}
        if unknown:
            raise ConfigError(f"unknown models: {sorted(unknown)}")
        models = [m for m in models if m.model_id in wanted]
    if not models:
        raise ConfigError("no models selected; add [[models]] entries to the config")

    method_names = [name.strip() for name in args.methods.split(",") if name.strip()]
    methods = [
        orchestrator.method_config(
            name,
            fewshot_example_ref=cfg.methods.fewshot_example_ref,
            rag_top_k=cfg.retrieval.top_k,
            rag_budget_chars=cfg.retrieval.budget_chars,
            fewshot_exclude_or=cfg.methods.fewshot_exclude_or,
        )
        for name in method_names
    ]

    settings = cfg.settings
    import dataclasses

    if args.repeats:
        settings = dataclasses.replace(settings, repeats=args.repeats)
    if args.max_iters:
        settings = dataclasses.replace(settings, max_iterations=args.max_iters)

    index = None
    index_path = args.index or cfg.retrieval.index_path
    doc_texts: list[str] = []
    if any(m.uses_rag for m in methods):
        if index_path is None:
            raise ConfigError("RAG methods need --index or retrieval.index_path")
        index = retrieval.load_index(index_path)
        doc_texts = [chunk.text for chunk, _ in index.entries]

    # The trivial-n-gram background always covers the full corpus, even when
    # the matrix runs a task subset; otherwise a lone task's own n-grams
    # dominate the frequency ranking and filter its reference to nothing.
    reference_tokens, trivial = orchestrator.prepare_references(
        all_manifests,
        doc_texts,
        trivial_k=settings.trivial_k,
        max_order=settings.crystal_max_order,
    )

    with orchestrator.RecordSink(args.out) as sink:
        runs, errors = orchestrator.run_matrix(
            manifests,
            models,
            methods,
            toolchain=toolchain,
            trivial=trivial,
            reference_tokens=reference_tokens,
            index=index,
            settings=settings,
            parallelism=args.parallelism,
            sink=sink,
        )
    print(f"completed {len(runs)} runs, {len(errors)} errored -> {args.out}")
    return EXIT_PARTIAL if errors else EXIT_OK


def _cmd_report(args) -> int:
    runs, errors = load_records(args.records)
    report = report_mod.build_report(runs, errors)
    rendered = report_mod.render(report, args.format)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
        print(f"wrote {args.format} report -> {args.out}")
    else:
        sys.stdout.write(rendered)
    if args.plots:
        written = report_mod.emit_plots(report, args.plots)
        print(f"wrote {len(written)} plots -> {args.plots}")
    return EXIT_OK


def _cmd_validate_corpus(args) -> int:
    cfg, manifests, toolchain = _load_experiment(args)
    problems = corpus_mod.validate_closure(manifests, toolchain)
    for manifest in manifests:
        print(f"task {manifest.task_id}: {manifest.expected_cases} cases")
    if problems:
        for problem in problems:
            print(f"FAIL {problem}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"corpus OK: {len(manifests)} tasks validated")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "index-docs":
            return _cmd_index_docs(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "validate-corpus":
            return _cmd_validate_corpus(args)
    except (ConfigError, corpus_mod.CorpusError, ToolchainError,
            retrieval.RetrievalError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
