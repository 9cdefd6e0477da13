"""Command-line entry point.

Exit status: 0 on success, 1 on domain failures, 2 on configuration errors.
Failures print one JSON object ``{"code", "message", "context"}`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
import warnings

import numpy as np

from . import criteria as cr
from .core import Dataset, DomainError
from .experiments import ConfigError, ExperimentError, load_config, run_experiment, write_outputs
from .experiments.config import EXPERIMENTS
from .experiments.runner import render
from .experiments.summary import dumps
from .rlct import rlct_reduced_rank, rlct_regular, rlct_volume_estimate
from .sampler import SamplerConfig, SamplerError, sample_tempered
from .zoo import BernoulliBeta, BernoulliBetaExact, PolyRegression, PolyRegressionExact, model_from_config

log = logging.getLogger("bayes_eval")

# calibration losses for the volume estimator: name -> (loss, dimension)
VOLUME_LOSSES = {
    "square": (lambda t: t[:, 0] ** 2, 1),
    "product": (lambda t: t[:, 0] ** 2 * t[:, 1] ** 2, 2),
    "sum-squares": (lambda t: np.sum(t**2, axis=1), None),
}


class CliError(Exception):
    def __init__(self, code: str, message: str, context: dict | None = None, status: int = 1):
        super().__init__(message)
        self.code, self.message, self.context, self.status = code, message, context or {}, status


class _Parser(argparse.ArgumentParser):
    """Argument errors become configuration errors with a JSON report."""

    def error(self, message):
        raise CliError("config_error", message, {"usage": self.format_usage().strip()}, status=2)


def _read_json(text: str, what: str):
    if text.startswith("@"):
        try:
            with open(text[1:]) as fh:
                text = fh.read()
        except OSError as exc:
            raise CliError("config_error", f"cannot read {what}: {exc.strerror}", {"key": what}, 2) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError("config_error", f"invalid JSON in {what}: {exc.msg}", {"key": what}, 2) from None


def _load_object(path: str | None) -> dict:
    if not path:
        return {}
    obj = _read_json("@" + path, "config")
    if not isinstance(obj, dict):
        raise CliError("config_error", "config must be a JSON object", {"key": "config"}, 2)
    return obj


def _parse_params(pairs) -> dict:
    out = {}
    for p in pairs or []:
        key, sep, value = p.partition("=")
        if not sep:
            raise CliError("config_error", f"expected key=value, got {p!r}", {"key": "param"}, 2)
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _model_and_data(args):
    cfg = _load_object(args.config)
    data = cfg.pop("data", None)
    sampler = cfg.pop("sampler", {})
    if args.model:
        cfg["model"] = args.model
    cfg.update(_parse_params(args.param))
    if args.data is not None:
        data = _read_json(args.data, "data")
    if "model" not in cfg:
        raise CliError("config_error", "missing key 'model'", {"key": "model"}, 2)
    if data is None:
        raise CliError("config_error", "missing key 'data'", {"key": "data"}, 2)
    try:
        model = model_from_config(cfg)
    except TypeError as exc:
        raise CliError("config_error", str(exc), {"key": "model"}, 2) from None
    except DomainError as exc:
        raise CliError("config_error", str(exc), {"key": "model"}, 2) from None
    if not isinstance(sampler, dict):
        raise CliError("config_error", "sampler must be an object", {"key": "sampler"}, 2)
    overrides = {"seed": args.seed} if args.seed is not None else {}
    try:
        scfg = SamplerConfig(**{**sampler, **overrides})
    except TypeError as exc:
        raise CliError("config_error", str(exc), {"key": "sampler"}, 2) from None
    return model, Dataset(np.asarray(data, dtype=float)), scfg


def _evaluate(model, data: Dataset, scfg: SamplerConfig, n1: int | None, ti: bool) -> cr.EvalReport:
    values = {}
    n2 = None if n1 is None else data.n - n1
    if isinstance(model, BernoulliBeta):
        ex = BernoulliBetaExact(data, model.alpha, model.beta0)
        values.update(T_n=ex.training_loss(), W_n=ex.waic(), C_n=ex.loo(), F_n=ex.free_energy(), DIC=ex.dic())
        if n1 is not None:
            first, second = data.split(n1)
            ex1 = BernoulliBetaExact(first, model.alpha, model.beta0)
            values["H_n2"] = ex1.holdout(second.items)
            values["A_n"] = cr.acv(ex1.loo(), values["H_n2"], n1, n2)
    elif isinstance(model, PolyRegression):
        ex = PolyRegressionExact(model, data)
        values.update(T_n=ex.training_loss(), W_n=ex.waic(), C_n=ex.loo(), DIC=ex.dic())
        if model.proper_prior:
            values["F_n"] = ex.free_energy()
        if n1 is not None:
            first, second = data.split(n1)
            ex1 = PolyRegressionExact(model, first)
            values["H_n2"] = ex1.holdout(second)
            values["A_n"] = cr.acv(ex1.loo(), values["H_n2"], n1, n2)
    else:
        draws = sample_tempered(model, data, scfg)
        values.update(T_n=cr.training_loss(draws), W_n=cr.waic(draws), C_n=cr.loo_is(draws),
                      DIC=cr.dic(draws, model, data))
        if data.n >= 3:
            values["WBIC"] = cr.wbic(model, data, scfg)
        if n1 is not None:
            first, second = data.split(n1)
            d1 = sample_tempered(model, first, scfg)
            values["H_n2"] = cr.holdout(d1, second, model)
            values["A_n"] = cr.acv(cr.loo_is(d1), values["H_n2"], n1, n2)
        if ti:
            values["F_TI"] = cr.ti_free_energy(model, data, scfg)
    report = cr.EvalReport(n=data.n, n1=n1, n2=n2)
    for k, v in values.items():
        setattr(report, k, float(v))
    return report


def _emit_mapping(obj: dict, fmt: str) -> str:
    if fmt == "json":
        return dumps(obj) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in obj.items():
            w.writerow([k, repr(v) if isinstance(v, float) else v])
        return buf.getvalue()
    lines = ["| key | value |", "|---|---|"]
    lines += [f"| {k} | {repr(v) if isinstance(v, float) else v} |" for k, v in obj.items()]
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    model, data, scfg = _model_and_data(args)
    report = _evaluate(model, data, scfg, args.n1, args.ti)
    sys.stdout.write(_emit_mapping(report.to_dict(), args.format))
    return 0


def cmd_sample(args) -> int:
    model, data, scfg = _model_and_data(args)
    if not args.out:
        raise CliError("config_error", "missing key 'out'", {"key": "out"}, 2)
    draws = sample_tempered(model, data, scfg.replace(beta=args.beta) if args.beta else scfg)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "draws.csv")
    draws.write_csv(path, os.path.join(args.out, "diagnostics.json"))
    sys.stdout.write(_emit_mapping({"draws": path, "S": draws.S, "max_rhat": float(np.max(draws.rhat)),
                                    "min_acceptance": float(np.min(draws.acceptance_rate))}, args.format))
    return 0


def cmd_rlct(args) -> int:
    if args.model == "regular":
        if args.d is None:
            raise CliError("config_error", "missing key 'd'", {"key": "d"}, 2)
        spec = rlct_regular(args.d)
    elif args.model == "reduced-rank":
        missing = [k for k in ("M", "N", "H", "r") if getattr(args, k) is None]
        if missing:
            raise CliError("config_error", f"missing key {missing[0]!r}", {"key": missing[0]}, 2)
        spec = rlct_reduced_rank(args.M, args.N, args.H, args.r)
    else:
        if args.loss is None:
            raise CliError("config_error", "missing key 'loss'", {"key": "loss"}, 2)
        loss, dim = VOLUME_LOSSES[args.loss]
        dim = dim or (args.d or 2)
        grid = np.geomspace(args.eps_max, args.eps_min, args.eps_points)
        spec = rlct_volume_estimate(loss, lambda rng, m: rng.uniform(-1.0, 1.0, (m, dim)), grid,
                                    samples=args.samples, seed=args.seed or 0)
    sys.stdout.write(dumps(spec.to_dict()) + "\n")
    return 0


def cmd_experiments(args) -> int:
    overrides = {"seed": args.seed, "trials": args.trials, "n": args.n, "out": args.out, "workers": args.workers}
    if args.n is not None:
        # explicit n invalidates file/default split sizes unless they are also given
        overrides.update(n1=args.n // 2, n2=args.n - args.n // 2)
    source = _load_object(args.config) if args.config else {}
    source.setdefault("experiment", args.name)
    if source["experiment"] != args.name:
        raise CliError("config_error", f"config is for {source['experiment']!r}, not {args.name!r}",
                       {"key": "experiment"}, 2)
    cfg = load_config(source, overrides)
    start = time.perf_counter()
    table, records = run_experiment(cfg)
    log.info("experiment %s finished in %.1f s", cfg.experiment, time.perf_counter() - start)
    if cfg.out:
        for path in write_outputs(cfg, table, records):
            log.info("wrote %s", path)
    sys.stdout.write(render(table, args.format))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bayes-eval", description="Bayesian generalization-loss and free-energy estimators.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt_default="json"):
        sp.add_argument("--format", choices=["csv", "json", "md"], default=fmt_default)
        sp.add_argument("--seed", type=int)

    for name, helptext in (("eval", "evaluate every criterion on one dataset"),
                           ("sample", "draw from a (tempered) posterior")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="JSON file with model keys, optional 'data' and 'sampler'")
        sp.add_argument("--model")
        sp.add_argument("--param", action="append", metavar="KEY=VALUE", help="model hyperparameter")
        sp.add_argument("--data", help="JSON array or @file")
        common(sp)
        if name == "eval":
            sp.add_argument("--n1", type=int, help="split point for hold-out and adjusted CV")
            sp.add_argument("--ti", action="store_true", help="add a thermodynamic-integration free energy")
        else:
            sp.add_argument("--out")
            sp.add_argument("--beta", type=float)

    sp = sub.add_parser("rlct", help="real log canonical threshold")
    sp.add_argument("--model", choices=["regular", "reduced-rank", "volume"], required=True)
    for k in ("d", "M", "N", "H", "r"):
        sp.add_argument(f"--{k}", type=int)
    sp.add_argument("--loss", choices=sorted(VOLUME_LOSSES))
    sp.add_argument("--eps-max", type=float, default=1e-2)
    sp.add_argument("--eps-min", type=float, default=1e-4)
    sp.add_argument("--eps-points", type=int, default=8)
    sp.add_argument("--samples", type=int, default=1_000_000)
    common(sp)

    sp = sub.add_parser("experiments", help="simulation studies")
    esub = sp.add_subparsers(dest="action", required=True, parser_class=_Parser)
    run = esub.add_parser("run")
    run.add_argument("name", choices=EXPERIMENTS)
    run.add_argument("--config")
    run.add_argument("--out")
    run.add_argument("--trials", type=int)
    run.add_argument("--n", type=int)
    run.add_argument("--workers", type=int)
    common(run, fmt_default="md")
    return p


COMMANDS = {"eval": cmd_eval, "sample": cmd_sample, "rlct": cmd_rlct, "experiments": cmd_experiments}


def _fail(code: str, message: str, context: dict, status: int) -> int:
    sys.stderr.write(json.dumps({"code": code, "message": message, "context": context}) + "\n")
    return status


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                            format="%(levelname)s %(message)s")
        if not args.verbose:
            warnings.simplefilter("ignore")
        return COMMANDS[args.command](args)
    except CliError as exc:
        return _fail(exc.code, exc.message, exc.context, exc.status)
    except ConfigError as exc:
        return _fail("config_error", str(exc), {"key": exc.key}, 2)
    except SamplerError as exc:
        return _fail("sampler_error", str(exc), {}, 1)
    except ExperimentError as exc:
        return _fail("experiment_error", str(exc), {}, 1)
    except DomainError as exc:
        return _fail("domain_error", str(exc), {}, 1)


if __name__ == "__main__":
    sys.exit(main())
