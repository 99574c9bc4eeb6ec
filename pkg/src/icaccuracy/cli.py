"""Command-line interface: ``simulate``, ``evaluate`` and ``compare``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
The default number of worker processes for ``compare`` comes from the
``ICACCURACY_THREADS`` environment variable (1 when unset).
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import EvaluationWindow
from .errors import ConfigError, ICAccuracyError, MissingTruth
from .io import load_dataset, write_dataset, write_json
from .metrics import APPROACHES, evaluate
from .predictor import APPENDIX_PARAMETERS, ConstantHazardPredictor, JointModelPredictor, ModelParameters
from .simulator import BiopsySchedule, SimulationConfig, SimulationDiagnostics, generate_dataset

THREADS_ENV = "ICACCURACY_THREADS"
EXIT_USAGE, EXIT_DATA = 2, 3


@dataclass(frozen=True)
class PredictorSpec:
    """How to build the risk predictor for a dataset.

    ``kind`` is ``"joint"`` or ``"constant"``.  For the joint model,
    ``profiles`` is ``"true"`` (hidden random effects from the truth file),
    ``"population"`` (random effects at zero) or ``"auto"`` (true when
    available).  ``gamma_zero`` drops the baseline-covariate effect and
    ``hazard_scale`` multiplies both hazards, emulating misspecification.
    """

    kind: str = "joint"
    params: ModelParameters = APPENDIX_PARAMETERS
    profiles: str = "auto"
    gamma_zero: bool = False
    hazard_scale: float = 1.0
    rates: tuple = (0.2, 0.1)

    def build(self, dataset):
        if self.kind == "constant":
            return ConstantHazardPredictor(*self.rates), None
        params = self.params
        if self.gamma_zero:
            params = params.replace(gamma=[0.0, 0.0])
        use_true = self.profiles == "true" or (self.profiles == "auto" and dataset.random_effects is not None)
        if use_true and dataset.random_effects is None:
            raise ConfigError("true-profile predictor needs the random effects of the truth file")
        predictor = JointModelPredictor(params, hazard_scale=self.hazard_scale)
        return predictor, dataset.profiles(use_random_effects=use_true)


@dataclass(frozen=True)
class RunConfig:
    t: float = 1.0
    dt: float = 3.0
    approaches: tuple = ("model", "ipcw", "naive")
    predictor: PredictorSpec = field(default_factory=PredictorSpec)

    @property
    def window(self) -> EvaluationWindow:
        return EvaluationWindow(self.t, self.dt)


# -- argument parsing ------------------------------------------------------------------

def _schedule(text: str) -> BiopsySchedule:
    try:
        return BiopsySchedule.parse(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _approaches(text: str) -> tuple:
    names = tuple(a.strip() for a in text.split(",") if a.strip())
    bad = [a for a in names if a not in APPROACHES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"approaches must be drawn from {','.join(APPROACHES)}")
    return names


def _rates(text: str) -> tuple:
    try:
        lam = tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected LAM_PRG,LAM_TRT") from exc
    if len(lam) != 2 or min(lam) <= 0:
        raise argparse.ArgumentTypeError("expected two positive rates LAM_PRG,LAM_TRT")
    return lam


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t", type=float, default=1.0, help="window start (years)")
    p.add_argument("--dt", type=float, default=3.0, help="window length (years)")
    p.add_argument("--approaches", type=_approaches, default=None,
                   help=f"comma-separated subset of {','.join(APPROACHES)}")
    p.add_argument("--params", type=Path, help="model parameters JSON (default: built-in values)")
    p.add_argument("--profiles", choices=("auto", "true", "population"), default="auto",
                   help="random effects used by the joint-model predictor")
    p.add_argument("--gamma-zero", action="store_true", help="drop the density effect at prediction time")
    p.add_argument("--hazard-scale", type=float, default=1.0, help="multiply both predicted hazards")
    p.add_argument("--constant-hazard", type=_rates, metavar="LAM_PRG,LAM_TRT",
                   help="use a constant-hazard predictor instead of the joint model")
    p.add_argument("--out", type=Path, help="output directory (default: JSON on stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icaccuracy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate cohorts from the joint model")
    sim.add_argument("--n", type=int, default=300, help="subjects per replicate")
    sim.add_argument("--replicates", type=int, default=1)
    sim.add_argument("--schedule", type=_schedule, default=BiopsySchedule(),
                     help="'pass' or 'u<lo>-<hi>' (uniform biopsy gaps), e.g. u0.3-4")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--censoring-rate", type=float, default=None, help="dropout hazard per year")
    sim.add_argument("--params", type=Path, help="model parameters JSON (default: built-in values)")
    sim.add_argument("--out", type=Path, required=True)

    ev = sub.add_parser("evaluate", help="accuracy metrics of one dataset")
    ev.add_argument("dataset", help="dataset prefix, e.g. out/rep000, or its _events.csv file")
    _add_run_options(ev)

    cmp_ = sub.add_parser("compare", help="RMSE of each approach against the reference over replicates")
    cmp_.add_argument("datasets", help="glob of dataset prefixes or events files, e.g. 'out/*_events.csv'")
    cmp_.add_argument("--jobs", type=int, default=None, help=f"worker processes (default ${THREADS_ENV} or 1)")
    _add_run_options(cmp_)
    return parser


def _load_params(path: Optional[Path]) -> ModelParameters:
    if path is None:
        return APPENDIX_PARAMETERS
    try:
        return ModelParameters.from_json(path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read parameters from {path}: {exc}") from exc


def run_config_from_args(args, default_approaches) -> RunConfig:
    spec = PredictorSpec(
        kind="constant" if args.constant_hazard else "joint",
        params=_load_params(args.params),
        profiles=args.profiles,
        gamma_zero=args.gamma_zero,
        hazard_scale=args.hazard_scale,
        rates=args.constant_hazard or (0.2, 0.1),
    )
    return RunConfig(args.t, args.dt, tuple(args.approaches or default_approaches), spec)


# -- commands --------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    params = _load_params(args.params)
    extra = {} if args.censoring_rate is None else {"censoring_rate": args.censoring_rate}
    config = SimulationConfig(n_subjects=args.n, n_replicates=args.replicates, seed=args.seed,
                              schedule=args.schedule, params=params, **extra)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    files = []
    diagnostics = SimulationDiagnostics()
    for rep in range(config.n_replicates):
        subjects = generate_dataset(config, rep, diagnostics)
        paths = write_dataset(out / f"rep{rep:03d}", subjects)
        files.extend(p.name for p in paths.values())
    write_json(out / "manifest.json", {
        "version": __version__,
        "seed": config.seed,
        "replicates": config.n_replicates,
        "n_subjects": config.n_subjects,
        "schedule": config.schedule.name,
        "censoring_rate": config.censoring_rate,
        "admin_horizon": config.admin_horizon,
        "params_hash": params.digest(),
        "params": params.to_dict(),
        "capped_event_times": diagnostics.capped_event_times,
        "files": files,
    })
    return 0


def evaluate_dataset(prefix, config: RunConfig, require_truth: bool = False) -> dict:
    """Reports keyed by approach for one dataset."""
    needs_truth = require_truth or "reference" in config.approaches
    dataset = load_dataset(prefix, truth=None)
    if needs_truth and dataset.truths is None:
        if require_truth:
            raise MissingTruth(f"dataset {prefix} has no truth file")
        raise ConfigError("reference metrics need the truth CSV of the dataset")
    predictor, profiles = config.predictor.build(dataset)
    return evaluate(dataset.records, config.window, predictor, profiles, dataset.truths,
                    config.approaches, all_profiles=profiles)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_evaluate(args) -> int:
    config = run_config_from_args(args, ("model", "ipcw", "naive"))
    reports = evaluate_dataset(args.dataset, config)
    doc = {"reports": [r.to_dict() for r in reports.values()]}
    if args.out is None:
        sys.stdout.write(_dump(doc))
        return 0
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "metrics.json").write_text(_dump(doc))
    for name, report in reports.items():
        if report.roc is not None:
            with open(args.out / f"roc_{name}.csv", "w", newline="") as fh:
                report.roc.to_csv(fh)
    return 0


def _replicate_metrics(prefix: str, config: RunConfig) -> dict:
    reports = evaluate_dataset(prefix, config, require_truth=True)
    return {name: {"auc": r.auc, "brier": r.brier, "epce": r.epce} for name, r in reports.items()}


def summarize(per_replicate: list, approaches) -> dict:
    """Mean, SD and RMSE against the reference of each approach and metric."""
    summary = {}
    for name in approaches:
        summary[name] = {}
        for metric in ("auc", "brier", "epce"):
            vals = [rep[name][metric] for rep in per_replicate if name in rep]
            pairs = [(rep[name][metric], rep["reference"][metric]) for rep in per_replicate
                     if name in rep and rep[name][metric] is not None
                     and rep["reference"][metric] is not None]
            finite = np.array([v for v in vals if v is not None], float)
            if finite.size == 0:
                continue
            entry = {
                "n": int(finite.size),
                "mean": float(np.mean(finite)),
                "sd": float(np.std(finite, ddof=1)) if finite.size > 1 else 0.0,
            }
            if name != "reference" and pairs:
                diff = np.array([a - b for a, b in pairs])
                entry["rmse"] = float(math.sqrt(np.mean(diff ** 2)))
            summary[name][metric] = entry
    return summary


def run_compare(prefixes, config: RunConfig, jobs: int = 1):
    if len(prefixes) < 2:
        raise ConfigError("compare needs at least two replicates")
    approaches = tuple(dict.fromkeys(tuple(config.approaches) + ("reference",)))
    config = RunConfig(config.t, config.dt, approaches, config.predictor)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_rep = list(pool.map(_replicate_metrics, prefixes, [config] * len(prefixes)))
    else:
        per_rep = [_replicate_metrics(p, config) for p in prefixes]
    return per_rep, summarize(per_rep, [a for a in approaches if a != "epce"])


def _dataset_prefixes(pattern: str) -> list:
    prefixes = []
    for path in sorted(glob.glob(pattern)):
        if path.endswith("_events.csv"):
            prefixes.append(path[: -len("_events.csv")])
        elif not path.endswith(("_longitudinal.csv", "_truth.csv", ".json")):
            prefixes.append(path)
    return list(dict.fromkeys(prefixes))


def cmd_compare(args) -> int:
    config = run_config_from_args(args, ("model", "ipcw", "naive"))
    prefixes = _dataset_prefixes(args.datasets)
    jobs = args.jobs if args.jobs is not None else int(os.environ.get(THREADS_ENV, "1") or 1)
    per_rep, summary = run_compare(prefixes, config, max(1, jobs))
    doc = {
        "window": {"t": config.t, "dt": config.dt},
        "replicates": [{"dataset": Path(p).name, **m} for p, m in zip(prefixes, per_rep)],
        "summary": summary,
    }
    if args.out is None:
        sys.stdout.write(_dump(doc))
        return 0
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "compare.json").write_text(_dump(doc))
    with open(args.out / "compare_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["approach", "metric", "n", "mean", "sd", "rmse"])
        for name, metrics in summary.items():
            for metric, e in metrics.items():
                w.writerow([name, metric, e["n"], repr(e["mean"]), repr(e["sd"]),
                            repr(e["rmse"]) if "rmse" in e else ""])
    return 0


COMMANDS = {"simulate": cmd_simulate, "evaluate": cmd_evaluate, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"icaccuracy: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ICAccuracyError, OSError) as exc:
        print(f"icaccuracy: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
