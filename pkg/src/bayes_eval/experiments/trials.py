"""Trial execution: optional process pool, exclusion cap, diagnostics warnings."""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

from ..core import DomainError
from ..diagnostics import rhat
from ..sampler import PosteriorDraws, SamplerError
from .summary import TrialRecord

EXCLUSION_CAP = 0.05
RHAT_LIMIT = 1.05


class ExperimentError(DomainError):
    """Too many trials were excluded for the summary to be trusted."""


class DiagnosticWarning(UserWarning):
    """A posterior run exceeded the potential scale reduction limit."""


def loglik_rhat(draws: PosteriorDraws) -> float:
    """Split R-hat of the total log-likelihood, which is identifiable even when theta is not."""
    if draws.chains < 2:
        return float("nan")
    total = draws.by_chain(draws.loglik.sum(axis=1))[..., None]
    return float(rhat(total)[0])


def draw_diagnostics(draws: PosteriorDraws, prefix: str) -> dict:
    return {
        f"{prefix}_rhat_loglik": loglik_rhat(draws),
        f"{prefix}_acceptance_min": float(np.min(draws.acceptance_rate)),
    }


def _guarded(args):
    fn, payload = args
    try:
        return fn(*payload)
    except (SamplerError, DomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        index, seed, group = payload[-3], payload[-2], payload[-1]
        return TrialRecord(index=index, seed=seed, group=group, excluded=f"{type(exc).__name__}: {exc}")


def run_trials(fn: Callable, payloads: Sequence[tuple], workers: int = 1) -> list[TrialRecord]:
    """Run ``fn(*payload)`` per trial in payload order; each payload ends with ``(index, seed, group)``.

    Failures become excluded records. More than 5% exclusions raises.
    """
    jobs = [(fn, p) for p in payloads]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_guarded, jobs))
    else:
        records = [_guarded(j) for j in jobs]
    excluded = sum(r.excluded is not None for r in records)
    if excluded > EXCLUSION_CAP * len(records):
        first = next(r for r in records if r.excluded is not None)
        raise ExperimentError(
            f"{excluded} of {len(records)} trials excluded (cap {EXCLUSION_CAP:.0%}); first: {first.excluded}"
        )
    for r in records:
        bad = {k: v for k, v in r.diagnostics.items() if k.endswith("rhat_loglik") and v > RHAT_LIMIT}
        if bad:
            warnings.warn(f"trial {r.index}: R-hat above {RHAT_LIMIT} for {sorted(bad)}", DiagnosticWarning,
                          stacklevel=2)
    return records


def kept(records: Sequence[TrialRecord]) -> list[TrialRecord]:
    return [r for r in records if r.excluded is None]
