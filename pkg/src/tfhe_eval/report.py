"""Aggregate-report rendering: jsonl-summary, csv, markdown, and bar charts."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from .metrics import AggregateReport, CellAggregate, aggregate
from .records import ErrorRecord, RunRecord

FORMATS = ("jsonl-summary", "csv", "markdown")

_COLUMNS = (
    "task_id",
    "model_id",
    "method",
    "n_runs",
    "mean_crystal_bleu",
    "pass1_comp",
    "pass1_func",
    "wrong_format_rate",
    "repetition_rate",
    "total_iterations",
    "input_tokens",
    "output_tokens",
)


def build_report(
    runs: Sequence[RunRecord], errors: Sequence[ErrorRecord] = ()
) -> AggregateReport:
    report = aggregate(runs)
    report.metadata = {
        "runs": len(runs),
        "errored_runs": len(errors),
        "notes": {
            "wrong_format": "iteration whose response had no extractable fenced code block",
            "repetition": "iteration repeating a normalized, previously failing candidate",
            "crystal_bleu": "final extracted code vs ground truth; 0.0 when nothing extracted",
            "pass1": "pass@k at k=1 with n_t = repeats per cell",
        },
    }
    if runs:
        snapshot = runs[0].config_snapshot
        report.metadata["crystal_bleu_config"] = snapshot.get("crystal_bleu", {})
    if errors:
        report.metadata["errors"] = [
            f"{e.task_id}/{e.model_id}/{e.method}/r{e.repeat_index}: {e.error}"
            for e in errors
        ]
    return report


def _row(cell: CellAggregate) -> dict:
    return {
        "task_id": cell.task_id,
        "model_id": cell.model_id,
        "method": cell.method,
        "n_runs": cell.n_runs,
        "mean_crystal_bleu": round(cell.mean_crystal_bleu, 6),
        "pass1_comp": round(cell.pass1_comp, 6),
        "pass1_func": round(cell.pass1_func, 6),
        "wrong_format_rate": round(cell.wrong_format_rate, 6),
        "repetition_rate": round(cell.repetition_rate, 6),
        "total_iterations": cell.total_iterations,
        "input_tokens": cell.input_tokens,
        "output_tokens": cell.output_tokens,
    }


def render_jsonl_summary(report: AggregateReport) -> str:
    lines = [json.dumps({"kind": "metadata", **report.metadata}, sort_keys=True)]
    for cell in report.cells:
        lines.append(json.dumps({"kind": "cell", **_row(cell)}, sort_keys=True))
    return "\n".join(lines) + "\n"


def render_csv(report: AggregateReport) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=_COLUMNS)
    writer.writeheader()
    for cell in report.cells:
        writer.writerow(_row(cell))
    return buffer.getvalue()


def render_markdown(report: AggregateReport) -> str:
    lines = ["# Evaluation report", ""]
    meta = report.metadata
    lines.append(f"Runs aggregated: {meta.get('runs', 0)}"
                 f" (errored and excluded: {meta.get('errored_runs', 0)})")
    crystal = meta.get("crystal_bleu_config")
    if crystal:
        lines.append(
            f"CrystalBLEU: max_order={crystal.get('max_order')}, "
            f"trivial_k={crystal.get('trivial_k')}, corpus={crystal.get('corpus_id')}, "
            f"smoothing={crystal.get('smoothing')}"
        )
    lines.append("")
    header = "| " + " | ".join(_COLUMNS) + " |"
    divider = "|" + "|".join(" --- " for _ in _COLUMNS) + "|"
    lines += [header, divider]
    for cell in report.cells:
        row = _row(cell)
        lines.append("| " + " | ".join(str(row[c]) for c in _COLUMNS) + " |")
    notes = meta.get("notes", {})
    if notes:
        lines += ["", "## Metric notes", ""]
        lines += [f"- **{key}**: {value}" for key, value in sorted(notes.items())]
    errors = meta.get("errors")
    if errors:
        lines += ["", "## Errored runs (excluded)", ""]
        lines += [f"- {entry}" for entry in errors]
    return "\n".join(lines) + "\n"


def render(report: AggregateReport, fmt: str) -> str:
    if fmt == "jsonl-summary":
        return render_jsonl_summary(report)
    if fmt == "csv":
        return render_csv(report)
    if fmt in ("markdown", "md"):
        return render_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")


def emit_plots(report: AggregateReport, out_dir: Path) -> list[Path]:
    """Grouped bar charts per method: quality panels (CrystalBLEU, pass@1
    comp, pass@1 func) and error panels (wrong format, repetition)."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise RuntimeError(
            "plot emission requires matplotlib (install the 'plots' extra)"
        ) from exc

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    methods = sorted({cell.method for cell in report.cells})
    written: list[Path] = []
    panel_sets = {
        "quality": (
            ("mean_crystal_bleu", "CrystalBLEU"),
            ("pass1_comp", "Pass@1 (comp)"),
            ("pass1_func", "Pass@1 (func)"),
        ),
        "errors": (
            ("wrong_format_rate", "Wrong Format rate"),
            ("repetition_rate", "Repetition rate"),
        ),
    }
    for method in methods:
        cells = [cell for cell in report.cells if cell.method == method]
        tasks = sorted({cell.task_id for cell in cells})
        models = sorted({cell.model_id for cell in cells})
        lookup = {(cell.task_id, cell.model_id): cell for cell in cells}
        for set_name, panels in panel_sets.items():
            fig, axes = plt.subplots(
                1, len(panels), figsize=(4.2 * len(panels), 3.4), squeeze=False
            )
            for ax, (attr, label) in zip(axes[0], panels):
                width = 0.8 / max(1, len(models))
                for offset, model in enumerate(models):
                    values = [
                        getattr(lookup[(task, model)], attr, 0.0)
                        if (task, model) in lookup
                        else 0.0
                        for task in tasks
                    ]
                    positions = [
                        i + offset * width for i in range(len(tasks))
                    ]
                    ax.bar(positions, values, width=width, label=model)
                ax.set_title(label)
                ax.set_ylim(0.0, 1.05)
                ax.set_xticks(
                    [i + 0.4 - width / 2 for i in range(len(tasks))]
                )
                ax.set_xticklabels(tasks, rotation=20, fontsize=8)
            axes[0][-1].legend(fontsize=7)
            fig.suptitle(f"{method}: {set_name}")
            fig.tight_layout()
            path = out_dir / f"{method}_{set_name}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)
    return written
