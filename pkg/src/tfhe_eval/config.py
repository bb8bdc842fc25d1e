"""Experiment configuration: a TOML tree of models, toolchain, retrieval
and metric parameters. Secrets stay in environment variables; configs only
name the variable to read.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .gateway import ModelConfig
from .orchestrator import RunSettings
from .retrieval import (
    DEFAULT_EXCERPT_BUDGET,
    DEFAULT_MAX_CHUNK_CHARS,
    DEFAULT_OVERLAP_CHARS,
    DEFAULT_REAL_EMBEDDER,
    DEFAULT_TOP_K,
    EmbedderConfig,
)
from .toolchain import ToolchainConfig


class ConfigError(Exception):
    pass


@dataclass
class RetrievalParams:
    index_path: Optional[Path] = None
    top_k: int = DEFAULT_TOP_K
    budget_chars: int = DEFAULT_EXCERPT_BUDGET
    max_chunk_chars: int = DEFAULT_MAX_CHUNK_CHARS
    overlap_chars: int = DEFAULT_OVERLAP_CHARS
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)


@dataclass
class MethodParams:
    fewshot_example_ref: Optional[Path] = None
    fewshot_exclude_or: bool = False


@dataclass
class ExperimentConfig:
    corpus_root: Path
    header: Path
    toolchain: ToolchainConfig
    settings: RunSettings
    models: list[ModelConfig]
    retrieval: RetrievalParams
    methods: MethodParams
    base_dir: Path


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path).resolve()


def _model_from_table(table: dict[str, Any], base: Path) -> ModelConfig:
    script: tuple[str, ...] = tuple(table.get("script", ()))
    for name in table.get("script_files", ()):
        script = script + (_resolve(base, name).read_text(encoding="utf-8"),)
    known = {
        "model_id",
        "provider_kind",
        "endpoint",
        "credential_ref",
        "temperature",
        "top_p",
        "max_output_tokens",
        "request_timeout",
        "max_retries",
        "retry_backoff",
        "verbose_logging",
    }
    unknown = set(table) - known - {"script", "script_files"}
    if unknown:
        raise ConfigError(f"unknown model keys: {sorted(unknown)}")
    kwargs = {key: table[key] for key in known if key in table}
    if "model_id" not in kwargs:
        raise ConfigError("model entry missing model_id")
    try:
        return ModelConfig(script=script, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid model {kwargs.get('model_id')}: {exc}") from exc


def load_config(path: Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base = path.parent.resolve()

    corpus_table = raw.get("corpus", {})
    corpus_root = _resolve(base, corpus_table.get("root", "corpus/tasks"))
    header = _resolve(base, corpus_table.get("header", "corpus/include/tfhe/tfhe.h"))

    tool_table = dict(raw.get("toolchain", {}))
    workspace_root = _resolve(base, tool_table.pop("workspace_root", "workspaces"))
    include_dirs = tuple(
        str(_resolve(base, d)) for d in tool_table.pop("include_dirs", ())
    )
    lib_dirs = tuple(str(_resolve(base, d)) for d in tool_table.pop("lib_dirs", ()))
    libs = tuple(tool_table.pop("libs", ()))
    try:
        toolchain = ToolchainConfig(
            workspace_root=workspace_root,
            include_dirs=include_dirs,
            lib_dirs=lib_dirs,
            libs=libs,
            **tool_table,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [toolchain] section: {exc}") from exc

    retrieval_table = dict(raw.get("retrieval", {}))
    embedder_table = dict(retrieval_table.pop("embedder", {}))
    if embedder_table.get("kind", "mock") != "mock" and "model_id" not in embedder_table:
        embedder_table["model_id"] = DEFAULT_REAL_EMBEDDER
    try:
        embedder = EmbedderConfig(**embedder_table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [retrieval.embedder] section: {exc}") from exc
    index_path = retrieval_table.pop("index_path", None)
    retrieval = RetrievalParams(
        index_path=_resolve(base, index_path) if index_path else None,
        embedder=embedder,
        **retrieval_table,
    )

    run_table = dict(raw.get("run", {}))
    metrics_table = raw.get("metrics", {})
    try:
        settings = RunSettings(
            embedder=embedder,
            trivial_k=metrics_table.get("trivial_k", 50),
            crystal_max_order=metrics_table.get("max_order", 4),
            **run_table,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [run]/[metrics] section: {exc}") from exc

    methods_table = raw.get("methods", {})
    exemplar = methods_table.get("fewshot_example_ref")
    methods = MethodParams(
        fewshot_example_ref=_resolve(base, exemplar) if exemplar else None,
        fewshot_exclude_or=methods_table.get("fewshot_exclude_or", False),
    )

    models = [_model_from_table(entry, base) for entry in raw.get("models", [])]

    return ExperimentConfig(
        corpus_root=corpus_root,
        header=header,
        toolchain=toolchain,
        settings=settings,
        models=models,
        retrieval=retrieval,
        methods=methods,
        base_dir=base,
    )
