"""Dispatch by experiment name and write the output bundle."""

from __future__ import annotations

import os
from typing import Optional

from .config import ExperimentConfig
from .hyper import curves_csv, run_example3
from .mf import run_example1, run_example2
from .minimizer import run_minimizer_study
from .regular import run_variance_study
from .summary import SummaryTable

RUNNERS = {
    "example1": run_example1,
    "example2": run_example2,
    "example3": run_example3,
    "variance": run_variance_study,
    "minimizer": run_minimizer_study,
}

SUMMARY_FORMATS = {"csv": "summary.csv", "json": "summary.json", "md": "summary.md"}


def run_experiment(cfg: ExperimentConfig):
    """Run ``cfg.experiment``; returns ``(summary, records)``."""
    return RUNNERS[cfg.experiment](cfg, return_records=True)


def render(table: SummaryTable, fmt: str) -> str:
    if fmt == "csv":
        return table.to_csv()
    if fmt == "json":
        return table.to_json() + "\n"
    if fmt == "md":
        return table.to_markdown()
    raise ValueError(f"unknown format {fmt!r}")


def write_outputs(cfg: ExperimentConfig, table: SummaryTable, records, out: Optional[str] = None,
                  formats=("csv", "json", "md")) -> list[str]:
    """Write records (JSON lines), summaries in ``formats``, the resolved config and, for the
    hyperparameter study, plot-ready curves. Returns the written paths."""
    out = out or cfg.out
    if not out:
        raise ValueError("no output directory")
    os.makedirs(out, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(out, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        written.append(path)

    put("records.jsonl", "".join(r.to_json() + "\n" for r in records))
    for fmt in formats:
        put(SUMMARY_FORMATS[fmt], render(table, fmt))
    put("config.json", cfg.to_json() + "\n")
    if cfg.experiment == "example3":
        put("curves.csv", curves_csv(cfg, records))
    return written
