"""Trial records, Mean/Std/RSE aggregation and report serialization.

Floats are written with ``repr`` (shortest round-trip form), so every value
read back from CSV or JSON equals the computed one exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..core import DomainError

BASELINE = "baseline"
HYPER = "hyper"
PLAIN = "plain"


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    return value


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True)


@dataclass
class TrialRecord:
    index: int
    seed: int
    group: str = ""
    report: dict = field(default_factory=dict)
    chosen: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)
    excluded: Optional[str] = None

    def to_json(self) -> str:
        out = {"index": self.index, "seed": self.seed, "group": self.group, "report": self.report,
               "diagnostics": self.diagnostics}
        if self.chosen is not None:
            out["chosen"] = self.chosen
        if self.excluded is not None:
            out["excluded"] = self.excluded
        return dumps(out)


@dataclass
class SummaryRow:
    group: str
    quantity: str
    mean: float
    std: float
    rse: Optional[float] = None


@dataclass
class SummaryTable:
    experiment: str
    rows: list = field(default_factory=list)
    trials: int = 0
    excluded: int = 0
    stats: dict = field(default_factory=dict)
    runtime: float = 0.0

    def row(self, quantity: str, group: str = "") -> SummaryRow:
        for r in self.rows:
            if r.quantity == quantity and r.group == group:
                return r
        raise KeyError((group, quantity))

    def to_dict(self) -> dict:
        # runtime is deliberately left out: summaries must be byte-identical across runs
        return {
            "experiment": self.experiment,
            "trials": self.trials,
            "excluded": self.excluded,
            "rows": [
                {"group": r.group, "quantity": r.quantity, "mean": r.mean, "std": r.std, "rse": r.rse}
                for r in self.rows
            ],
            "stats": self.stats,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "quantity", "mean", "std", "rse"])
        for r in self.rows:
            w.writerow([r.group, r.quantity, repr(float(r.mean)), repr(float(r.std)),
                        "" if r.rse is None else repr(float(r.rse))])
        for key in sorted(self.stats):
            w.writerow(["stats", key, _fmt_stat(self.stats[key]), "", ""])
        return buf.getvalue()

    def to_markdown(self, digits: int = 3) -> str:
        """Markdown table: one row per quantity, Mean/Std/RSE column triple per group."""
        groups = list(dict.fromkeys(r.group for r in self.rows))
        quantities = list(dict.fromkeys(r.quantity for r in self.rows))
        head = ["quantity"]
        for g in groups:
            label = f"{g} " if g else ""
            head += [f"{label}Mean", f"{label}Std", f"{label}RSE"]
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        fmt = f"{{:.{digits}f}}"
        for q in quantities:
            cells = [q]
            for g in groups:
                try:
                    r = self.row(q, g)
                except KeyError:
                    cells += ["", "", ""]
                    continue
                cells += [fmt.format(r.mean), fmt.format(r.std), "" if r.rse is None else fmt.format(r.rse)]
            lines.append("| " + " | ".join(cells) + " |")
        text = "\n".join(lines) + "\n"
        text += f"\ntrials: {self.trials}, excluded: {self.excluded}\n"
        if self.stats:
            text += "\n" + "\n".join(f"- {k}: {_fmt_stat(v)}" for k, v in sorted(self.stats.items())) + "\n"
        return text


def _fmt_stat(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return json.dumps(_clean(v), sort_keys=True)


def summarize(
    records: Sequence[dict],
    quantities: Optional[Sequence[str]] = None,
    reading: str = PLAIN,
    reference: Optional[float] = None,
    baseline: str = "GE.E.",
    group: str = "",
    experiment: str = "",
) -> SummaryTable:
    """Mean, unbiased Std and RSE of each quantity over trial records.

    ``reading=BASELINE``: ``RSE_X = sqrt(mean((baseline - X)^2))``; the baseline
    itself gets no RSE. ``reading=HYPER``: ``RSE = sqrt(mean((X - reference)^2))``.
    """
    if len(records) < 2:
        raise DomainError("summaries need at least two records")
    if reading not in (BASELINE, HYPER, PLAIN):
        raise DomainError(f"unknown RSE reading {reading!r}")
    if reading == HYPER and reference is None:
        raise DomainError("the hyperparameter reading needs a reference optimum")
    if quantities is None:
        quantities = list(dict.fromkeys(k for r in records for k in r))
    table = SummaryTable(experiment=experiment, trials=len(records))
    for q in quantities:
        x = np.array([r[q] for r in records], dtype=float)
        rse = None
        if reading == BASELINE and q != baseline:
            base = np.array([r[baseline] for r in records], dtype=float)
            rse = float(np.sqrt(np.mean((base - x) ** 2)))
        elif reading == HYPER:
            rse = float(np.sqrt(np.mean((x - reference) ** 2)))
        table.rows.append(SummaryRow(group, q, float(np.mean(x)), float(np.std(x, ddof=1)), rse))
    return table


def merge(experiment: str, tables: Sequence[SummaryTable]) -> SummaryTable:
    out = SummaryTable(experiment=experiment)
    for t in tables:
        out.rows.extend(t.rows)
        out.trials = max(out.trials, t.trials)
        out.excluded += t.excluded
        out.stats.update(t.stats)
        out.runtime += t.runtime
    return out
