"""Command-line interface: one executable, one subcommand per operation.

Every run resolves its full configuration (defaults included) into a
manifest; outputs written with --out are accompanied by <out>.manifest.json
so results can be traced back to exact inputs and settings. Exit codes:
0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .errors import DataError, DomainError, NumericalError, PairvarError
from .intervals import (
    ci_diff_bonferroni,
    ci_diff_naive,
    ci_diff_region,
    ci_mu_exact,
    ci_mu_naive,
)
from .macl import macl_fit
from .mixture_em import fit_mixture
from .model import (
    DEFAULT_BOUNDS,
    VarianceForm,
    VarianceModel,
    estimating_equation_bias,
    load_csv,
)
from .pvalues import (
    TestMethod,
    pvalue_berger_boos,
    pvalue_conservative,
    pvalue_naive,
)
from .simulate import (
    RNG_ID,
    EstimatorMethod,
    Scenario,
    ScenarioKind,
    coverage_study,
    estimator_study,
    power_study,
)

DEFAULTS = {
    "a": DEFAULT_BOUNDS[0],
    "b": DEFAULT_BOUNDS[1],
    "d": 0.25,
    "alpha": 0.05,
    "beta": 1e-6,
    "grid_res": 0.005,
}


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one CLI invocation's outputs."""

    subcommand: str
    config: dict
    seed: int | None
    version: str
    input_digests: dict = field(default_factory=dict)
    timestamp: str = ""
    rng: str = RNG_ID

    def identity(self) -> dict:
        """The reproducibility-relevant part (timestamp excluded)."""
        return {"subcommand": self.subcommand, "config": self.config,
                "seed": self.seed, "version": self.version,
                "input_digests": self.input_digests, "rng": self.rng}


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _build_manifest(args, config: dict, inputs: list) -> RunManifest:
    digests = {str(p): _sha256(p) for p in inputs}
    return RunManifest(
        subcommand=args.command,
        config=config,
        seed=getattr(args, "seed", None),
        version=__version__,
        input_digests=digests,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    )


def _emit(args, text: str, manifest: RunManifest) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        manifest_path = Path(str(args.out) + ".manifest.json")
        manifest_path.write_text(json.dumps(asdict(manifest), indent=2,
                                            default=str) + "\n",
                                 encoding="utf-8")
        if not args.quiet:
            print(f"wrote {args.out} (+ manifest)", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _parse_theta(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"theta must be comma-separated reals, got {text!r}") from None


def _model_from_args(args) -> VarianceModel:
    form = VarianceForm.from_name(args.form)
    return VarianceModel(form, args.theta)


def _record_text(records: list[dict], fmt: str) -> str:
    if fmt == "jsonl":
        return "".join(json.dumps(r) + "\n" for r in records)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(records[0].keys()))
    writer.writeheader()
    writer.writerows(records)
    return buf.getvalue()


def _parallel_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- fit-macl


def _cmd_fit_macl(args) -> int:
    data = load_csv(args.input, raw=args.raw)
    result = macl_fit(data, VarianceForm.from_name(args.form),
                      init=args.init, tol=args.tol, max_iter=args.max_iter)
    record = {
        "theta_hat": list(result.theta_hat),
        "iterations": result.iterations,
        "residual_norm": result.residual_norm,
        "converged": result.converged,
        "n": data.n,
    }
    config = {"input": str(args.input), "form": args.form, "init": args.init,
              "tol": args.tol, "max_iter": args.max_iter, "raw": args.raw}
    flat = dict(record, theta_hat=",".join(repr(t) for t in result.theta_hat))
    text = _record_text([record if args.format == "jsonl" else flat],
                        args.format)
    _emit(args, text, _build_manifest(args, config, [args.input]))
    return 0


# ------------------------------------------------------------- fit-mixture


def _cmd_fit_mixture(args) -> int:
    data = load_csv(args.input, bounds=(args.a, args.b), raw=args.raw)
    est, grid = fit_mixture(data, VarianceForm.from_name(args.form),
                            d=args.d, init=args.init, tol=args.tol,
                            max_iter=args.max_iter)
    record = {
        "theta_hat": list(est.theta_hat),
        "J": grid.J,
        "log_lik": est.log_lik,
        "iterations": est.iterations,
        "converged": est.converged,
        "n": data.n,
    }
    if not args.no_weights:
        record["pi_hat"] = list(est.pi_hat)
    config = {"input": str(args.input), "form": args.form, "d": args.d,
              "a": args.a, "b": args.b, "tol": args.tol,
              "max_iter": args.max_iter, "raw": args.raw,
              "init": args.init, "no_weights": args.no_weights}
    if args.format == "csv":
        flat = {k: v for k, v in record.items() if k != "pi_hat"}
        flat["theta_hat"] = ",".join(repr(t) for t in est.theta_hat)
        text = _record_text([flat], "csv")
    else:
        text = _record_text([record], "jsonl")
    _emit(args, text, _build_manifest(args, config, [args.input]))
    return 0


# --------------------------------------------------------------------- ci


def _ci_single(args, model, y1, y2, bounds):
    method = args.method
    if method == "exact":
        cs = ci_mu_exact(y1, model, args.alpha, bounds)
        lo, hi = cs.hull
        disconnected = cs.disconnected
    elif method == "region":
        if y2 is None:
            raise DataError("method region needs --y2")
        cs = ci_diff_region(y1, y2, model, args.alpha, bounds, args.grid_res,
                            refine_boundaries=not args.no_refine)
        lo, hi = cs.hull
        disconnected = cs.disconnected
    elif method == "bonferroni":
        if y2 is None:
            raise DataError("method bonferroni needs --y2")
        lo, hi = ci_diff_bonferroni(y1, y2, model, args.alpha, bounds)
        disconnected = False
    else:  # naive: single-mean without --y2, difference with it
        if y2 is None:
            lo, hi = ci_mu_naive(y1, model, args.alpha)
        else:
            lo, hi = ci_diff_naive(y1, y2, model, args.alpha)
        disconnected = False
    if args.scale == "ratio":
        import math
        lo, hi = math.exp(lo), math.exp(hi)
    return lo, hi, disconnected


def _cmd_ci(args) -> int:
    model = _model_from_args(args)
    bounds = (args.a, args.b)
    config = {"theta": list(args.theta), "form": args.form,
              "method": args.method, "alpha": args.alpha, "a": args.a,
              "b": args.b, "grid_res": args.grid_res,
              "refine": not args.no_refine, "scale": args.scale}
    if args.input is None:
        if args.y1 is None:
            raise DataError("provide --y1 (and optionally --y2) or --input")
        lo, hi, disc = _ci_single(args, model, args.y1, args.y2, bounds)
        record = {"method": args.method, "level": 1 - args.alpha,
                  "lo": lo, "hi": hi, "disconnected": disc,
                  "scale": args.scale}
        _emit(args, _record_text([record], args.format),
              _build_manifest(args, config, []))
        return 0

    data = load_csv(args.input, bounds=bounds, raw=args.raw,
                    drop_ties=False)
    config["input"] = str(args.input)

    def one(pair):
        y2 = None if args.method == "exact" else pair.y2
        lo, hi, disc = _ci_single(args, model, pair.y1, y2, bounds)
        return {"id": pair.id, "y1": pair.y1, "y2": pair.y2,
                "lo": lo, "hi": hi, "disconnected": disc,
                "method": args.method}

    rows = _parallel_map(one, data.pairs, args.threads)
    _emit(args, _record_text(rows, "csv"),
          _build_manifest(args, config, [args.input]))
    return 0


# ------------------------------------------------------------------ pvalue


def _pvalue_one(args, model, bounds, y1, y2):
    if args.method == "naive":
        return pvalue_naive(y1, y2, model)
    if args.method == "conservative":
        return pvalue_conservative(y1, y2, model, bounds)
    return pvalue_berger_boos(y1, y2, model, bounds, args.beta,
                              cbeta_pivot=args.cbeta_pivot)


def _cmd_pvalue(args) -> int:
    model = _model_from_args(args)
    bounds = (args.a, args.b)
    config = {"theta": list(args.theta), "form": args.form,
              "method": args.method, "beta": args.beta, "a": args.a,
              "b": args.b, "cbeta_pivot": args.cbeta_pivot,
              "bonferroni": args.bonferroni}
    if args.input is None:
        if args.y1 is None or args.y2 is None:
            raise DataError("provide --y1 and --y2, or --input")
        r = _pvalue_one(args, model, bounds, args.y1, args.y2)
        record = {"method": args.method, "statistic": r.statistic,
                  "p_value": r.p_value, "mu_sup": r.mu_sup}
        _emit(args, _record_text([record], args.format),
              _build_manifest(args, config, []))
        return 0

    data = load_csv(args.input, bounds=bounds, raw=args.raw,
                    drop_ties=False)
    config["input"] = str(args.input)
    results = _parallel_map(
        lambda p: _pvalue_one(args, model, bounds, p.y1, p.y2),
        data.pairs, args.threads)
    cutoff = 0.05 / data.n
    rows = []
    for pair, r in zip(data.pairs, results):
        row = {"id": pair.id, "y1": pair.y1, "y2": pair.y2,
               "statistic": "" if r.statistic is None else r.statistic,
               "p_value": r.p_value,
               "mu_sup": "" if r.mu_sup is None else r.mu_sup}
        if args.bonferroni:
            row["significant_bonferroni"] = r.p_value <= cutoff
        rows.append(row)
    if args.bonferroni and not args.quiet:
        count = sum(1 for r in results if r.p_value <= cutoff)
        print(f"{count} of {data.n} p-values below 0.05/N = {cutoff:.3g}",
              file=sys.stderr)
    _emit(args, _record_text(rows, "csv"),
          _build_manifest(args, config, [args.input]))
    return 0


# ---------------------------------------------------------------- simulate


def _read_config_file(path) -> dict:
    cfg = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from None
    for i, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"expected key=value in config", row=i)
        key, _, value = line.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


def _scenario_from_config(cfg: dict, n: int, seed: int) -> Scenario:
    text = cfg.get("scenario", "uniform:8,12")
    kind_name, _, rest = text.partition(":")
    try:
        kind = ScenarioKind(kind_name)
    except ValueError:
        raise DataError(f"unknown scenario kind {kind_name!r}") from None
    if kind in (ScenarioKind.UNIFORM_CONTINUOUS, ScenarioKind.UNIFORM_DISCRETE):
        lo, hi = (float(v) for v in rest.split(","))
        return Scenario(kind=kind, n=n, seed=seed, lo=lo, hi=hi)
    means = _read_means_file(rest)
    return Scenario(kind=kind, n=n, seed=seed, source_means=means)


def _read_means_file(path) -> tuple[float, ...]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if text and text[0].strip().lower().startswith("id,"):
        data = load_csv(path)
        return tuple(float(v) for v in data.ybar)
    means = []
    for i, line in enumerate(text, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            means.append(float(line))
        except ValueError:
            raise DataError("unparseable mean value", row=i) from None
    if not means:
        raise DataError(f"means file {path} is empty")
    return tuple(means)


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v != ""]


def _cmd_simulate(args) -> int:
    cfg = _read_config_file(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    theta = tuple(_floats(cfg.get("theta", "5,-1")))
    form = VarianceForm.from_name(cfg.get("form", "exp-linear"))
    model = VarianceModel(form, theta)
    alpha = float(cfg.get("alpha", DEFAULTS["alpha"]))
    bounds = (float(cfg.get("a", DEFAULTS["a"])),
              float(cfg.get("b", DEFAULTS["b"])))

    if args.study == "estimator":
        n = int(cfg.get("n", 2000))
        method = EstimatorMethod(cfg.get("method", "macl"))
        reps = int(cfg.get("reps", 1000 if method is EstimatorMethod.MACL
                           else 200))
        scenario = _scenario_from_config(cfg, n, seed)
        report = estimator_study(scenario, model, reps, method,
                                 d=float(cfg.get("d", DEFAULTS["d"])),
                                 bounds=bounds)
    elif args.study == "coverage":
        reps = int(cfg.get("reps", 100_000))
        mu_values = _floats(cfg.get("mu_grid", "7.5,9,11,13"))
        methods = [m.strip() for m in cfg.get("methods", "exact,naive").split(",")]
        mode = cfg.get("mode", "single")
        theta_fit = tuple(_floats(cfg.get("theta_fit", cfg.get("theta", "5,-1"))))
        report = coverage_study(model, VarianceModel(form, theta_fit),
                                mu_values, alpha, reps, methods, mode=mode,
                                seed=seed, bounds=bounds)
    elif args.study == "power":
        reps = int(cfg.get("reps", 10_000))
        report = power_study(model, _floats(cfg.get("mu_grid", "8,10,12")),
                             _floats(cfg.get("k_grid", "0,1,2,3")), reps,
                             beta=float(cfg.get("beta", 1e-3)),
                             alpha=alpha, bounds=bounds, seed=seed)
    else:
        raise DataError(f"unknown study {args.study!r}")

    config = dict(cfg, study=args.study, seed=seed)
    _emit(args, report.to_csv(), _build_manifest(args, config, [args.config]))
    if not args.quiet:
        print(f"{args.study} study: {report.replicates} replicates, "
              f"{report.failures} failures, {report.wall_clock:.1f}s",
              file=sys.stderr)
    return 0


# ------------------------------------------------------------- bias-oracle


def _cmd_bias_oracle(args) -> int:
    first, second = estimating_equation_bias(args.theta, args.mus)
    record = {"theta": list(args.theta), "mus": list(args.mus),
              "first": first, "second": second}
    if args.mc_reps:
        import numpy as np

        rng = np.random.default_rng(args.seed or 0)
        t1, t2 = args.theta
        mus = np.asarray(args.mus)
        h = np.exp(t1 + t2 * mus)
        y1 = rng.normal(mus, np.sqrt(h), size=(args.mc_reps, mus.size))
        y2 = rng.normal(mus, np.sqrt(h), size=(args.mc_reps, mus.size))
        ybar = (y1 + y2) / 2
        w = (y1 - y2) ** 2 / 2 * np.exp(-t1 - t2 * ybar)
        eq1 = 1.0 - np.mean(w, axis=1)
        eq2 = np.mean(ybar, axis=1) - np.mean(ybar * w, axis=1)
        record.update(
            mc_first=float(eq1.mean()), mc_second=float(eq2.mean()),
            mc_se_first=float(eq1.std(ddof=1) / np.sqrt(args.mc_reps)),
            mc_se_second=float(eq2.std(ddof=1) / np.sqrt(args.mc_reps)),
        )
    config = {"theta": list(args.theta), "mus": list(args.mus),
              "mc_reps": args.mc_reps}
    _emit(args, _record_text([record], args.format),
          _build_manifest(args, config, []))
    return 0


# ---------------------------------------------------------------- pipeline


def _cmd_pipeline(args) -> int:
    form = VarianceForm.from_name(args.form)
    bounds = (args.a, args.b)
    control = load_csv(args.control, bounds=bounds, raw=args.raw)
    experiment = load_csv(args.experiment, bounds=bounds, raw=args.raw,
                          drop_ties=False)
    if experiment.n == 0:
        raise DataError(f"experiment file {args.experiment} has no usable pairs")
    est, grid = fit_mixture(control, form, d=args.d)
    model = VarianceModel(form, est.theta_hat)

    def one(pair):
        region = ci_diff_region(pair.y1, pair.y2, model, args.alpha, bounds,
                                args.grid_res)
        naive = ci_diff_naive(pair.y1, pair.y2, model, args.alpha)
        import math
        return {
            "id": pair.id, "y1": pair.y1, "y2": pair.y2,
            "ratio_lo": math.exp(region.hull[0]),
            "ratio_hi": math.exp(region.hull[1]),
            "ci_disconnected": region.disconnected,
            "ratio_naive_lo": math.exp(naive[0]),
            "ratio_naive_hi": math.exp(naive[1]),
            "p_naive": pvalue_naive(pair.y1, pair.y2, model).p_value,
            "p_conservative": pvalue_conservative(pair.y1, pair.y2, model,
                                                  bounds).p_value,
            "p_berger_boos": pvalue_berger_boos(pair.y1, pair.y2, model,
                                                bounds, args.beta).p_value,
        }

    rows = _parallel_map(one, experiment.pairs, args.threads)
    cutoff = 0.05 / experiment.n
    counts = {m: sum(1 for r in rows if r[m] <= cutoff)
              for m in ("p_naive", "p_berger_boos", "p_conservative")}
    config = {"control": str(args.control), "experiment": str(args.experiment),
              "form": args.form, "alpha": args.alpha, "beta": args.beta,
              "a": args.a, "b": args.b, "d": args.d,
              "grid_res": args.grid_res,
              "theta_hat": list(est.theta_hat), "J": grid.J,
              "bonferroni_cutoff": cutoff,
              "significant_counts": counts}
    _emit(args, _record_text(rows, "csv"),
          _build_manifest(args, config, [args.control, args.experiment]))
    if not args.quiet:
        print(f"fitted theta_hat = {tuple(round(t, 4) for t in est.theta_hat)} "
              f"on {control.n} control pairs", file=sys.stderr)
        print(f"significant at 0.05/N={cutoff:.3g}: "
              f"naive {counts['p_naive']}, "
              f"berger-boos {counts['p_berger_boos']}, "
              f"conservative {counts['p_conservative']}", file=sys.stderr)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairvar",
        description="Variance-function estimation and inference for "
                    "paired-replicate log intensities.")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="root seed for any randomized work")
    common.add_argument("--out", default=None,
                        help="output path (stdout if omitted); a manifest "
                             "JSON is written alongside")
    common.add_argument("--format", choices=["jsonl", "csv"], default="jsonl",
                        help="record output format where applicable")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for batch operations")
    common.add_argument("--quiet", action="store_true",
                        help="suppress informational messages")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-macl", parents=[common],
                       help="fit the variance function by approximate "
                            "conditional likelihood")
    p.add_argument("--input", required=True)
    p.add_argument("--form", default="exp-linear",
                   choices=[f.value for f in VarianceForm])
    p.add_argument("--init", type=_parse_theta, default=None)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--raw", action="store_true",
                   help="input intensities are raw; take natural logs")
    p.set_defaults(func=_cmd_fit_macl)

    p = sub.add_parser("fit-mixture", parents=[common],
                       help="fit the latent-mean mixture model by EM")
    p.add_argument("--input", required=True)
    p.add_argument("--form", default="exp-linear",
                   choices=[f.value for f in VarianceForm])
    p.add_argument("--d", type=float, default=DEFAULTS["d"],
                   help="support spacing in estimated standard deviations")
    p.add_argument("--a", type=float, default=DEFAULTS["a"])
    p.add_argument("--b", type=float, default=DEFAULTS["b"])
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--init", type=_parse_theta, default=None)
    p.add_argument("--no-weights", action="store_true",
                   help="omit the fitted mixing weights from the output")
    p.add_argument("--raw", action="store_true")
    p.set_defaults(func=_cmd_fit_mixture)

    p = sub.add_parser("ci", parents=[common],
                       help="confidence sets for a mean or a difference")
    p.add_argument("--theta", type=_parse_theta, required=True)
    p.add_argument("--form", default="exp-linear",
                   choices=[f.value for f in VarianceForm])
    p.add_argument("--y1", type=float, default=None)
    p.add_argument("--y2", type=float, default=None)
    p.add_argument("--input", default=None,
                   help="batch mode over a pairs CSV (exact uses y1)")
    p.add_argument("--alpha", type=float, default=DEFAULTS["alpha"])
    p.add_argument("--method", required=True,
                   choices=["exact", "naive", "region", "bonferroni"])
    p.add_argument("--a", type=float, default=DEFAULTS["a"])
    p.add_argument("--b", type=float, default=DEFAULTS["b"])
    p.add_argument("--grid-res", type=float, default=DEFAULTS["grid_res"])
    p.add_argument("--no-refine", action="store_true",
                   help="report region endpoints at the accepted grid "
                        "extremes instead of the refined boundary")
    p.add_argument("--scale", choices=["log", "ratio"], default="log")
    p.add_argument("--raw", action="store_true")
    p.set_defaults(func=_cmd_ci)

    p = sub.add_parser("pvalue", parents=[common],
                       help="equal-means p-values for measurement pairs")
    p.add_argument("--theta", type=_parse_theta, required=True)
    p.add_argument("--form", default="exp-linear",
                   choices=[f.value for f in VarianceForm])
    p.add_argument("--input", default=None)
    p.add_argument("--y1", type=float, default=None)
    p.add_argument("--y2", type=float, default=None)
    p.add_argument("--method", required=True,
                   choices=[m.value for m in TestMethod])
    p.add_argument("--beta", type=float, default=DEFAULTS["beta"])
    p.add_argument("--a", type=float, default=DEFAULTS["a"])
    p.add_argument("--b", type=float, default=DEFAULTS["b"])
    p.add_argument("--cbeta-pivot", choices=["mean", "pair"], default="mean",
                   help="nuisance-set pivot for the Berger-Boos method")
    p.add_argument("--bonferroni", action="store_true",
                   help="also report significance against 0.05/N")
    p.add_argument("--raw", action="store_true")
    p.set_defaults(func=_cmd_pvalue)

    p = sub.add_parser("simulate", parents=[common],
                       help="seeded Monte Carlo studies")
    p.add_argument("--study", required=True,
                   choices=["estimator", "coverage", "power"])
    p.add_argument("--config", required=True,
                   help="flat key=value configuration file")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bias-oracle", parents=[common],
                       help="analytic bias of the exp-linear estimating "
                            "equations at the true coefficients")
    p.add_argument("--theta", type=_parse_theta, required=True)
    p.add_argument("--mus", type=_parse_theta, required=True)
    p.add_argument("--mc-reps", type=int, default=0,
                   help="optionally cross-check by Monte Carlo")
    p.set_defaults(func=_cmd_bias_oracle)

    p = sub.add_parser("pipeline", parents=[common],
                       help="fit on control data, then per-peptide intervals "
                            "and p-values on experiment data")
    p.add_argument("--control", required=True)
    p.add_argument("--experiment", required=True)
    p.add_argument("--form", default="exp-linear",
                   choices=[f.value for f in VarianceForm])
    p.add_argument("--alpha", type=float, default=DEFAULTS["alpha"])
    p.add_argument("--beta", type=float, default=DEFAULTS["beta"])
    p.add_argument("--a", type=float, default=DEFAULTS["a"])
    p.add_argument("--b", type=float, default=DEFAULTS["b"])
    p.add_argument("--d", type=float, default=DEFAULTS["d"])
    p.add_argument("--grid-res", type=float, default=DEFAULTS["grid_res"])
    p.add_argument("--raw", action="store_true")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.quiet:
        logging.basicConfig(level=logging.ERROR)
    else:
        logging.basicConfig(level=logging.INFO)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"pairvar: data error: {exc}", file=sys.stderr)
        return 3
    except (DomainError, NumericalError) as exc:
        print(f"pairvar: numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"pairvar: data error: {exc}", file=sys.stderr)
        return 3
    except PairvarError as exc:
        print(f"pairvar: error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"pairvar: data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
