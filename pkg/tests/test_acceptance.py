"""Acceptance suite: one pass/fail line per criterion (see the terminal summary)."""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from icaccuracy.core import EvaluationWindow, EventKind, Scenario, SubjectRecord, build_risk_set
from icaccuracy.metrics import (
    epce_model,
    epce_reference,
    evaluate,
    roc_and_auc,
    weighted_sensitivity,
    weighted_specificity,
)
from icaccuracy.predictor import (
    ConstantHazardPredictor,
    ConstantHazards,
    JointModelPredictor,
    ProfileBatch,
    SubjectProfile,
    cif_progression,
    overall_survival,
)
from icaccuracy.simulator import BiopsySchedule, SimulationConfig, TrueOutcome, event_proportions, generate_dataset
from icaccuracy.weights import model_weight_pair, model_weights

from conftest import ACCEPTANCE, closed_cif, closed_surv
from oracles import mann_whitney_auc

W = EvaluationWindow(1.0, 3.0)
SEED = 20240
N_REPLICATES = 50
SCHEDULES = ("u0.3-1", "u1-2", "pass", "u0.3-4")
APPROACHES = ("model", "ipcw", "naive", "reference")


def report(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    assert ok, detail


def _fields(kind):
    return {EventKind.PROGRESSION: "t_pos", EventKind.TREATMENT: "t_trt", EventKind.CENSORED: "t_cen"}[kind]


# -- 1. weight identities ----------------------------------------------------------

def test_criterion_01_weight_identities():
    rng = np.random.default_rng(1)
    bad = []
    start = time.perf_counter()
    for _ in range(10_000):
        kind = EventKind(int(rng.integers(0, 3)))
        last_neg = rng.uniform(0, 8)
        rec = SubjectRecord("x", last_neg, kind, **{_fields(kind): last_neg + rng.uniform(0.01, 6)})
        window = EvaluationWindow(rng.uniform(0, 4), rng.uniform(0.25, 5))
        pred = ConstantHazardPredictor(rng.uniform(0.01, 1), rng.uniform(0.01, 1))
        p = model_weight_pair(rec, window, pred)
        ok = 0 <= p.case_w <= 1 and 0 <= p.control_w <= 1
        if p.scenario in (Scenario.S2A, Scenario.S2B):
            ok &= abs(p.case_w + p.control_w - 1) <= 1e-10
        if p.scenario is Scenario.S3A:
            ok &= p.case_w == 1.0
        if p.scenario.group == 4:
            ok &= p.control_w == 1.0
        if not ok:
            bad.append(p)
    elapsed = time.perf_counter() - start
    report(1, not bad and elapsed < 5, f"{len(bad)} violations in 10^4 triples, {elapsed:.2f} s (< 5 s)")


# -- 2. quadrature oracle ----------------------------------------------------------

def test_criterion_02_quadrature_oracle():
    rng = np.random.default_rng(2)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(1000):
        lp, lt = rng.uniform(0.01, 1.5, 2)
        r = rng.uniform(0, 10)
        s = r + rng.uniform(0, 10)
        model = ConstantHazards(lp, lt)
        worst = max(worst, abs(cif_progression(None, model, s, r) - closed_cif(lp, lt, s, r)),
                    abs(overall_survival(None, model, s, r) - closed_surv(lp, lt, s, r)))
    elapsed = time.perf_counter() - start
    example = float(cif_progression(None, ConstantHazards(0.2, 0.1), 4.0, 1.0))
    ok = worst < 1e-8 and elapsed < 5 and abs(example - 2 / 3 * (1 - math.exp(-0.9))) < 1e-12
    report(2, ok, f"max |error| {worst:.1e} (< 1e-8) over 10^3 cases, {elapsed:.2f} s (< 5 s); "
                  f"cif(4|1; 0.2, 0.1) = {example:.6f}")


# -- 3. degenerate equivalence ---------------------------------------------------------

def test_criterion_03_degenerate_equivalence():
    rng = np.random.default_rng(3)
    recs, truths, profiles = [], {}, {}
    for i in range(60):
        sid = str(i)
        profiles[sid] = SubjectProfile(rng.uniform(50, 75), rng.uniform(0.03, 0.5), tuple(rng.normal(0, 0.6, 4)))
        kind = i % 3
        if kind == 0:  # absolute case
            last_neg = rng.uniform(1.0, 3.0)
            t_pos = rng.uniform(last_neg + 0.01, 4.0)
            recs.append(SubjectRecord(sid, last_neg, EventKind.PROGRESSION, t_pos=t_pos))
            truths[sid] = TrueOutcome(rng.uniform(last_neg, t_pos), t_pos + 5.0)
        elif kind == 1:  # absolute control, progression seen later
            last_neg = rng.uniform(4.0, 8.0)
            t_pos = last_neg + rng.uniform(0.1, 2.0)
            recs.append(SubjectRecord(sid, last_neg, EventKind.PROGRESSION, t_pos=t_pos))
            truths[sid] = TrueOutcome(rng.uniform(last_neg, t_pos), t_pos + 5.0)
        else:  # absolute control, treated later
            last_neg = rng.uniform(4.0, 8.0)
            t_trt = last_neg + rng.uniform(0.1, 2.0)
            recs.append(SubjectRecord(sid, last_neg, EventKind.TREATMENT, t_trt=t_trt))
            truths[sid] = TrueOutcome(t_trt + 3.0, t_trt)
    reps = evaluate(recs, W, JointModelPredictor(), profiles, truths, APPROACHES, all_profiles=profiles)
    aucs = {k: reps[k].auc for k in APPROACHES}
    briers = {k: reps[k].brier for k in APPROACHES}
    auc_equal = len(set(aucs.values())) == 1
    spread = max(briers.values()) - min(briers.values())
    report(3, auc_equal and spread <= 1e-12,
           f"AUC model/ipcw/naive/reference = {sorted(set(aucs.values()))}, Brier spread {spread:.1e} (<= 1e-12)")


# -- 4. AUC oracle ---------------------------------------------------------------------

def test_criterion_04_auc_mann_whitney():
    rng = np.random.default_rng(4)
    worst, checked = 0.0, 0
    for _ in range(100):
        n = int(rng.integers(4, 51))
        recs = []
        for i in range(n):
            kind = EventKind(int(rng.integers(0, 3)))
            last_neg = rng.uniform(0, 6)
            recs.append(SubjectRecord(str(i), last_neg, kind, **{_fields(kind): last_neg + rng.uniform(0.1, 4)}))
        try:
            rs = build_risk_set(recs, W)
        except Exception:
            continue
        pred = ConstantHazardPredictor(*rng.uniform(0.05, 0.8, 2))
        pairs = model_weights(rs, pred)
        case = np.array([p.case_w for p in pairs])
        control = np.array([p.control_w for p in pairs])
        if case.sum() == 0 or control.sum() == 0:
            continue
        pi = np.round(rng.uniform(0, 1, rs.n_t), 1)  # plenty of ties
        _, auc = roc_and_auc(lambda c: weighted_sensitivity(pi, case, c),
                             lambda c: weighted_specificity(pi, control, c), pi)
        worst = max(worst, abs(auc - mann_whitney_auc(pi, case, control)))
        checked += 1
    report(4, checked == 100 and worst <= 1e-10, f"{checked} cohorts, max |trapezoid - Mann-Whitney| {worst:.1e}")


# -- simulation sweep shared by 5, 6, 7 and 9 ---------------------------------------------

def _run_schedule(name):
    config = SimulationConfig(n_subjects=300, seed=SEED, schedule=BiopsySchedule.parse(name))
    pred = JointModelPredictor()
    out = {"sim_seconds": 0.0, "seconds": 0.0, "proportions": [], "reports": []}
    start = time.perf_counter()
    for rep in range(N_REPLICATES):
        t0 = time.perf_counter()
        subjects = generate_dataset(config, rep)
        out["sim_seconds"] += time.perf_counter() - t0
        out["proportions"].append(event_proportions(subjects))
        recs = [s.record for s in subjects]
        profiles = {s.record.id: s.profile for s in subjects}
        truths = {s.record.id: s.truth for s in subjects}
        out["reports"].append(evaluate(recs, W, pred, profiles, truths, APPROACHES, all_profiles=profiles))
    out["seconds"] = time.perf_counter() - start
    return out


@pytest.fixture(scope="module")
def sweep():
    return {}


def _schedule(sweep, name):
    if name not in sweep:
        sweep[name] = _run_schedule(name)
    return sweep[name]


def _rmse(results, approach, metric):
    diffs = []
    for rep in results["reports"]:
        value, ref = getattr(rep[approach], metric), getattr(rep["reference"], metric)
        if value is not None and ref is not None:
            diffs.append(value - ref)
    return math.sqrt(np.mean(np.square(diffs))), len(diffs)


@pytest.mark.slow
def test_criterion_05_event_proportions(sweep):
    res = _schedule(sweep, "pass")
    mean = {k: 100 * np.mean([p[k] for p in res["proportions"]]) for k in ("progression", "treatment", "censored")}
    target = {"progression": 22.35, "treatment": 9.18, "censored": 68.47}
    ok = all(abs(mean[k] - target[k]) <= 5 for k in target) and res["sim_seconds"] < 120
    detail = ", ".join(f"{k} {mean[k]:.2f}% (target {target[k]})" for k in target)
    report(5, ok, f"{detail}; simulation {res['sim_seconds']:.1f} s (< 120 s)")


@pytest.mark.slow
def test_criterion_06_model_brier_beats_ipcw(sweep):
    res = _schedule(sweep, "pass")
    model, _ = _rmse(res, "model", "brier")
    ipcw, _ = _rmse(res, "ipcw", "brier")
    ok = model < 0.5 * ipcw and res["seconds"] < 600
    report(6, ok, f"RMSE Brier model {model:.4f} vs IPCW {ipcw:.4f} (ratio {model / ipcw:.2f} < 0.5); "
                  f"{res['seconds']:.0f} s (< 600 s)")


@pytest.mark.slow
def test_criterion_07_schedule_sweep(sweep):
    results = {name: _schedule(sweep, name) for name in SCHEDULES}
    ipcw = {name: _rmse(results[name], "ipcw", "auc") for name in SCHEDULES}
    model = {name: _rmse(results[name], "model", "auc")[0] for name in SCHEDULES}
    seconds = sum(r["seconds"] for r in results.values())
    ratio = ipcw["u0.3-4"][0] / ipcw["u0.3-1"][0]
    spread = (max(model.values()) - min(model.values())) / min(model.values())
    ok = ratio >= 1.5 and spread < 0.5 and seconds < 2400
    table = ", ".join(f"{n}: ipcw {ipcw[n][0]:.3f} (n={ipcw[n][1]}) model {model[n]:.3f}" for n in SCHEDULES)
    report(7, ok, f"RMSE AUC {table}; ipcw ratio {ratio:.2f} (>= 1.5), model spread {spread:.0%} (< 50%); "
                  f"{seconds:.0f} s (< 2400 s)")


@pytest.mark.slow
def test_criterion_09_monotonicity(sweep):
    results = {name: _schedule(sweep, name) for name in SCHEDULES}
    problems, curves = [], 0
    for name, res in results.items():
        for i, rep in enumerate(res["reports"]):
            for approach, r in rep.items():
                if r.auc is not None:
                    curves += 1
                    # thresholds decrease along the curve
                    if np.any(np.diff(r.roc.thresholds) >= 0) or np.any(np.diff(r.roc.sens) < 0) \
                            or np.any(np.diff(r.roc.one_minus_spec) < 0) or not 0 <= r.auc <= 1:
                        problems.append((name, i, approach, "roc"))
                if r.brier is not None and not 0 <= r.brier <= 1:
                    problems.append((name, i, approach, "brier"))
    report(9, not problems and curves > 0, f"{curves} ROC curves over {len(SCHEDULES) * N_REPLICATES} replicates, "
                                            f"{len(problems)} violations")


# -- 8. EPCE ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_08_epce():
    config = SimulationConfig(n_subjects=300, seed=SEED)
    preds = {scale: JointModelPredictor(hazard_scale=scale) for scale in (0.5, 1.0, 1.5)}
    close, proper, rows = 0, 0, []
    for rep in range(10):
        subjects = generate_dataset(config, rep)
        rs = build_risk_set([s.record for s in subjects], W)
        profiles = {s.record.id: s.profile for s in subjects}
        batch = ProfileBatch.from_profiles([s.profile for s in subjects])
        truths = [s.truth for s in subjects]
        model = {k: epce_model(rs, p, profiles).value for k, p in preds.items()}
        ref = epce_reference(truths, preds[1.0], batch, W).value
        close += abs(model[1.0] - ref) < 0.1
        proper += model[0.5] > model[1.0] and model[1.5] > model[1.0]
        rows.append(f"{model[1.0]:.3f}/{ref:.3f}")
    ok = close == 10 and proper >= 9
    report(8, ok, f"|model - reference| < 0.1 in {close}/10 replicates (model/ref: {', '.join(rows)}); "
                  f"+-50% hazard scale raises model EPCE in {proper}/10 (>= 9)")


# -- 10. determinism -------------------------------------------------------------------------

def _cli(args, env_threads, cwd):
    env = dict(os.environ, ICACCURACY_THREADS=str(env_threads))
    res = subprocess.run([sys.executable, "-m", "icaccuracy", *args], cwd=cwd, env=env,
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return res.stdout


def test_criterion_10_determinism(tmp_path):
    outputs = []
    for run, threads in enumerate((1, 2)):
        base = tmp_path / f"run{run}"
        base.mkdir()
        _cli(["simulate", "--n", "300", "--replicates", "2", "--seed", "11", "--out", "sim"], threads, base)
        _cli(["evaluate", "sim/rep000", "--approaches", "model,ipcw,naive,reference,epce", "--out", "eval"],
             threads, base)
        _cli(["compare", "sim/*_events.csv", "--out", "cmp"], threads, base)
        files = sorted(p for p in base.rglob("*") if p.is_file())
        outputs.append({str(p.relative_to(base)): p.read_bytes() for p in files})
    same = outputs[0] == outputs[1]
    report(10, same, f"{len(outputs[0])} output files byte-identical across runs with 1 and 2 workers")
