"""Prior-hyperparameter selection on a polynomial regression grid.

Every criterion is computed in closed form from the conjugate normal-gamma
posterior. A criterion whose posterior is not normalizable at some ``b``
is treated as ``+inf`` there, so that grid point can never be selected.
"""

from __future__ import annotations

import csv
import io
import time

import numpy as np

from ..core import DomainError
from ..zoo.polyreg import PolyRegression, PolyRegressionExact, polyreg_truth
from .config import ExperimentConfig, trial_seeds
from .summary import HYPER, SummaryTable, TrialRecord, merge, summarize
from .trials import kept, run_trials

CRITERIA = ["LOO.E.", "WAIC.E.", "AC.E.", "HO.E.", "Free E."]
HYPER_GROUP = "hyper"
GEN_GROUP = "gen. err."


def _or_inf(fn):
    try:
        return float(fn())
    except DomainError:
        return float("inf")


def _model(cfg: ExperimentConfig) -> PolyRegression:
    m = cfg.model
    if m.get("model") not in ("polynomial_regression", "polyreg", "polynomial-regression"):
        raise DomainError("this experiment needs the polynomial_regression model")
    return PolyRegression(int(m.get("K", 3)), 1.0, float(m.get("c", 0.01)), float(m.get("d", 0.01)))


def grid_curves(model: PolyRegression, data, n1: int, grid, a0, s0) -> dict:
    """Criterion values (``+inf`` where undefined) and ``G_n - S`` along the grid."""
    first, second = data.split(n1)
    out = {k: [] for k in CRITERIA + ["GE"]}
    for b in grid:
        mb = model.with_b(float(b))
        full = PolyRegressionExact(mb, data)
        out["LOO.E."].append(_or_inf(full.loo))
        out["WAIC.E."].append(_or_inf(full.waic))
        out["Free E."].append(_or_inf(full.free_energy) / data.n if mb.proper_prior else float("inf"))
        out["GE"].append(full.gen_loss_error(a0, s0))
        try:
            part = PolyRegressionExact(mb, first)
        except DomainError:
            out["HO.E."].append(float("inf"))
            out["AC.E."].append(float("inf"))
            continue
        h = _or_inf(lambda: part.holdout(second))
        c1 = _or_inf(part.loo)
        out["HO.E."].append(h)
        out["AC.E."].append((n1 * c1 + second.n * h) / data.n)
    return out


def hyper_trial(cfg: ExperimentConfig, index: int, seed: int, group: str) -> TrialRecord:
    (s_data,) = trial_seeds(cfg.seed, index, 0, 1)
    a0 = np.asarray(cfg.truth["a0"], dtype=float)
    s0 = float(cfg.truth["s0"])
    truth = polyreg_truth(a0, s0)
    data = truth.sample(cfg.n, np.random.default_rng(s_data))
    grid = np.asarray(cfg.grid, dtype=float)
    curves = grid_curves(_model(cfg), data, cfg.split[0], grid, a0, s0)
    chosen, gen = {}, {}
    for k in CRITERIA:
        vals = np.asarray(curves[k])
        if not np.any(np.isfinite(vals)):
            raise DomainError(f"{k} is undefined on the whole grid")
        i = int(np.argmin(vals))
        chosen[k] = float(grid[i])
        gen[k] = curves["GE"][i]
    skipped = [float(b) for b in grid if not model_is_proper(cfg, b)]
    return TrialRecord(index=index, seed=cfg.seed, group=group, report={"gen_error": gen, "curves": curves},
                       chosen=chosen, diagnostics={"free_energy_skipped_b": skipped})


def model_is_proper(cfg: ExperimentConfig, b: float) -> bool:
    return _model(cfg).with_b(float(b)).proper_prior


def run_example3(cfg: ExperimentConfig, return_records: bool = False):
    if not cfg.grid:
        raise DomainError("hyperparameter grid is empty")
    start = time.perf_counter()
    records = run_trials(hyper_trial, [(cfg, i, cfg.seed, "") for i in range(cfg.trials)], cfg.workers)
    ok = kept(records)
    ref = float(cfg.truth.get("reference", 0.5))
    picks = summarize([r.chosen for r in ok], CRITERIA, reading=HYPER, reference=ref, group=HYPER_GROUP,
                      experiment="example3")
    gens = summarize([r.report["gen_error"] for r in ok], CRITERIA, group=GEN_GROUP, experiment="example3")
    table = merge("example3", [picks, gens])
    table.trials = len(ok)
    table.excluded = len(records) - len(ok)
    table.stats["reference_b"] = ref
    table.runtime = time.perf_counter() - start
    return (table, records) if return_records else table


def curves_csv(cfg: ExperimentConfig, records) -> str:
    """Plot-ready means over trials of every criterion along the grid; undefined values are skipped."""
    ok = kept(records)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = CRITERIA + ["GE"]
    w.writerow(["b"] + keys + [f"{k} finite" for k in keys])
    for j, b in enumerate(cfg.grid):
        means, counts = [], []
        for k in keys:
            v = np.array([r.report["curves"][k][j] for r in ok])
            fin = v[np.isfinite(v)]
            means.append(repr(float(fin.mean())) if fin.size else "")
            counts.append(int(fin.size))
        w.writerow([repr(float(b))] + means + counts)
    return buf.getvalue()
