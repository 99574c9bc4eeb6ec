"""Time-dependent AUC, Brier score and EPCE over a prediction window.

Every approach reduces to per-subject case and control weights over the
same predicted window risks ``pi_i = P(progression in [t, t + dt) | event
free at t)``:

* model-based: weights from the prediction model itself (all of the risk set),
* IPCW: absolute cases weighted by the inverse censoring survival, absolute
  controls uniformly,
* naive: observed progression time taken at face value, unit weights,
* reference: true event times (simulation only), unit weights.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .core import EvaluationWindow, EventKind, RiskSet, build_risk_set
from .errors import (
    AllContributionsDegenerate,
    EmptyRiskSet,
    MissingTruth,
    NoAbsoluteCases,
    NoAbsoluteControls,
    NoCaseMass,
    NoControlMass,
)
from .predictor import ProfileBatch
from .quadrature import GK15, QuadratureRule
from .weights import (
    CensoringSurvival,
    WeightDiagnostics,
    align_profiles,
    km_censoring_survival,
    model_weights,
)

THRESHOLD_SENTINEL = 1.0 + 1e-9


@dataclass(frozen=True)
class PredictedRisk:
    id: str
    pi: float


@dataclass(frozen=True, eq=False)
class RocCurve:
    """ROC points ordered by decreasing threshold (increasing 1 - spec)."""

    thresholds: np.ndarray
    sens: np.ndarray
    one_minus_spec: np.ndarray

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["one_minus_spec", "sens"])
        for x, y in zip(self.one_minus_spec, self.sens):
            writer.writerow([repr(float(x)), repr(float(y))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


@dataclass
class MetricsReport:
    window: EvaluationWindow
    approach: str
    auc: Optional[float]
    brier: Optional[float]
    n_t: int
    case_mass: float
    control_mass: float
    epce: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)
    roc: Optional[RocCurve] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "approach": self.approach,
            "window": {"t": self.window.t, "dt": self.window.dt},
            "auc": num(self.auc),
            "brier": num(self.brier),
            "epce": num(self.epce),
            "n_t": int(self.n_t),
            "case_mass": float(self.case_mass),
            "control_mass": float(self.control_mass),
            "diagnostics": dict(self.diagnostics),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


# -- helpers ------------------------------------------------------------------

def risk_array(riskset: RiskSet, risks) -> np.ndarray:
    """Window risks aligned with ``riskset`` members.

    ``risks`` may be an array already in member order, a mapping from
    subject id to risk, or a sequence of :class:`PredictedRisk`.
    """
    if isinstance(risks, Mapping):
        return np.array([float(risks[rec.id]) for rec in riskset.records])
    risks = list(risks) if not isinstance(risks, np.ndarray) else risks
    if len(risks) and isinstance(risks[0], PredictedRisk):
        by_id = {r.id: r.pi for r in risks}
        return np.array([float(by_id[rec.id]) for rec in riskset.records])
    arr = np.asarray(risks, float)
    if arr.shape != (riskset.n_t,):
        raise ValueError(f"expected {riskset.n_t} risks, got shape {arr.shape}")
    return arr


def window_risks(riskset: RiskSet, predictor, profiles=None) -> np.ndarray:
    """Predicted window risk of every risk-set member."""
    w = riskset.window
    batch = align_profiles(riskset, profiles)
    n = riskset.n_t
    return np.asarray(predictor.cif(batch, np.full(n, w.end), np.full(n, w.t)), float)


def weighted_sensitivity(pi, case_w, c) -> float:
    pi, case_w = np.asarray(pi, float), np.asarray(case_w, float)
    total = np.sum(case_w)
    if not total > 0:
        raise NoCaseMass("total case weight is zero")
    return float(np.sum(case_w[pi >= c]) / total)


def weighted_specificity(pi, control_w, c) -> float:
    pi, control_w = np.asarray(pi, float), np.asarray(control_w, float)
    total = np.sum(control_w)
    if not total > 0:
        raise NoControlMass("total control weight is zero")
    return float(np.sum(control_w[pi < c]) / total)


def threshold_grid(pi) -> np.ndarray:
    """Decreasing thresholds: sentinel above 1, every distinct risk, 0."""
    grid = np.unique(np.concatenate([[0.0], np.asarray(pi, float)]))
    return np.concatenate([[THRESHOLD_SENTINEL], grid[::-1]])


def roc_and_auc(sens_fn: Callable[[float], float], spec_fn: Callable[[float], float], risks):
    """ROC curve from sensitivity/specificity callables, AUC by trapezoids."""
    thresholds = threshold_grid(risks)
    sens = np.array([sens_fn(c) for c in thresholds])
    fpr = np.array([1.0 - spec_fn(c) for c in thresholds])
    if fpr[0] != 0.0 or sens[0] != 0.0:
        thresholds = np.concatenate([[np.inf], thresholds])
        sens, fpr = np.concatenate([[0.0], sens]), np.concatenate([[0.0], fpr])
    if fpr[-1] != 1.0 or sens[-1] != 1.0:
        thresholds = np.concatenate([thresholds, [-np.inf]])
        sens, fpr = np.concatenate([sens, [1.0]]), np.concatenate([fpr, [1.0]])
    auc = float(np.sum(np.diff(fpr) * (sens[1:] + sens[:-1]) / 2.0))
    return RocCurve(thresholds, sens, fpr), auc


def weighted_roc(pi, case_w, control_w):
    """ROC/AUC for per-subject case and control weights (vectorised)."""
    pi = np.asarray(pi, float)
    case_w, control_w = np.asarray(case_w, float), np.asarray(control_w, float)
    case_total, control_total = np.sum(case_w), np.sum(control_w)
    if not case_total > 0:
        raise NoCaseMass("total case weight is zero")
    if not control_total > 0:
        raise NoControlMass("total control weight is zero")
    thresholds = threshold_grid(pi)
    # mass with pi >= c for each threshold c in the decreasing grid
    order = np.argsort(-pi, kind="stable")
    sorted_pi = pi[order]
    cum_case = np.concatenate([[0.0], np.cumsum(case_w[order])])
    cum_control = np.concatenate([[0.0], np.cumsum(control_w[order])])
    n_ge = np.searchsorted(-sorted_pi, -thresholds, side="right")
    sens = cum_case[n_ge] / case_total
    fpr = cum_control[n_ge] / control_total
    auc = float(np.sum(np.diff(fpr) * (sens[1:] + sens[:-1]) / 2.0))
    return RocCurve(thresholds, sens, fpr), auc


# -- model-based --------------------------------------------------------------

def _weight_arrays(weights):
    return (np.array([w.case_w for w in weights], float),
            np.array([w.control_w for w in weights], float))


def sensitivity_model(riskset: RiskSet, risks, weights, c: float) -> float:
    case_w, _ = _weight_arrays(weights)
    return weighted_sensitivity(risk_array(riskset, risks), case_w, c)


def specificity_model(riskset: RiskSet, risks, weights, c: float) -> float:
    _, control_w = _weight_arrays(weights)
    return weighted_specificity(risk_array(riskset, risks), control_w, c)


def brier_model(riskset: RiskSet, risks, weights) -> float:
    """Weighted squared error summed over the risk set, divided by ``n_t``."""
    if riskset.n_t < 1:
        raise EmptyRiskSet("empty risk set")
    pi = risk_array(riskset, risks)
    case_w, control_w = _weight_arrays(weights)
    return float(np.sum((1.0 - pi) ** 2 * case_w + pi ** 2 * control_w) / riskset.n_t)


# -- IPCW -------------------------------------------------------------------------

def ipcw_weights(riskset: RiskSet, censoring: CensoringSurvival,
                 diagnostics: Optional[WeightDiagnostics] = None):
    """Per-member IPCW case and control weights (zero outside the absolute groups).

    Absolute cases whose censoring survival is zero are dropped and counted.
    """
    window = riskset.window
    case_w = np.zeros(riskset.n_t)
    control_w = np.zeros(riskset.n_t)
    g_end = censoring(window.end)
    for i, (rec, scenario) in enumerate(riskset.members):
        if scenario.is_absolute_case:
            g = censoring(rec.t_pos)
            if g > 0:
                case_w[i] = 1.0 / g
            elif diagnostics is not None:
                diagnostics.zero_survival += 1
        elif scenario.is_absolute_control:
            if g_end > 0:
                control_w[i] = 1.0 / g_end
            elif diagnostics is not None:
                diagnostics.zero_survival += 1
    return case_w, control_w


def sensitivity_ipcw(riskset: RiskSet, risks, censoring: CensoringSurvival,
                     window: Optional[EvaluationWindow] = None, c: float = 0.5) -> float:
    if window is not None and window != riskset.window:
        riskset = build_risk_set(riskset.records, window)
    case_w, _ = ipcw_weights(riskset, censoring)
    if not np.any(case_w > 0):
        raise NoAbsoluteCases(f"no absolute case in [{riskset.window.t}, {riskset.window.end})")
    return weighted_sensitivity(risk_array(riskset, risks), case_w, c)


def specificity_ipcw(riskset: RiskSet, risks, window: Optional[EvaluationWindow] = None,
                     c: float = 0.5) -> float:
    """Share of absolute controls predicted below ``c``.

    The inverse censoring weights of absolute controls are all equal, so
    they cancel and the estimate is an unweighted fraction.
    """
    if window is not None and window != riskset.window:
        riskset = build_risk_set(riskset.records, window)
    pi = risk_array(riskset, risks)
    controls = np.array([sc.is_absolute_control for sc in riskset.scenarios])
    if not controls.any():
        raise NoAbsoluteControls(f"no absolute control after {riskset.window.end}")
    return float(np.mean(pi[controls] < c))


def brier_ipcw(riskset: RiskSet, risks, censoring: CensoringSurvival,
               window: Optional[EvaluationWindow] = None,
               diagnostics: Optional[WeightDiagnostics] = None) -> float:
    if window is not None and window != riskset.window:
        riskset = build_risk_set(riskset.records, window)
    if riskset.n_t < 1:
        raise EmptyRiskSet("empty risk set")
    pi = risk_array(riskset, risks)
    case_w, control_w = ipcw_weights(riskset, censoring, diagnostics)
    return float(np.sum((1.0 - pi) ** 2 * case_w + pi ** 2 * control_w) / riskset.n_t)


# -- naive ------------------------------------------------------------------------

def naive_labels(riskset: RiskSet):
    """Unit case/control indicators taking the observed progression time at face value."""
    w = riskset.window
    case = np.array([rec.delta == EventKind.PROGRESSION and w.t <= rec.t_pos < w.end
                     for rec in riskset.records], float)
    control = np.array([rec.endpoint >= w.end for rec in riskset.records], float) * (1.0 - case)
    return case, control


def naive_metrics(riskset: RiskSet, risks, window: Optional[EvaluationWindow] = None):
    """``(auc, brier)`` ignoring interval censoring."""
    if window is not None and window != riskset.window:
        riskset = build_risk_set(riskset.records, window)
    pi = risk_array(riskset, risks)
    case, control = naive_labels(riskset)
    _, auc = weighted_roc(pi, case, control)
    included = case + control
    brier = float(np.sum((1.0 - pi) ** 2 * case + pi ** 2 * control) / np.sum(included))
    return auc, brier


# -- reference (true event times) ---------------------------------------------------

def reference_labels(true_outcomes, window: EvaluationWindow):
    """``(at_risk, case, control)`` boolean arrays from true event times."""
    t_prg = np.array([o.t_prg_star for o in true_outcomes], float)
    t_trt = np.array([o.t_trt_star for o in true_outcomes], float)
    first = np.minimum(t_prg, t_trt)
    at_risk = first >= window.t
    case = at_risk & (t_prg >= window.t) & (t_prg < window.end) & (t_prg < t_trt)
    control = at_risk & (first >= window.end)
    return at_risk, case, control


def reference_metrics(true_outcomes: Sequence, risks, window: EvaluationWindow):
    """``(auc, brier)`` with known outcomes; ``risks`` aligned with ``true_outcomes``.

    The Brier score averages over everyone event-free at ``t``; subjects
    treated inside the window are neither case nor control and add zero.
    """
    pi = np.asarray(risks, float)
    at_risk, case, control = reference_labels(true_outcomes, window)
    if not at_risk.any():
        raise EmptyRiskSet(f"no subject event-free at t={window.t}")
    _, auc = weighted_roc(pi[at_risk], case[at_risk].astype(float), control[at_risk].astype(float))
    brier = float(np.sum(((1.0 - pi) ** 2)[case]) + np.sum((pi ** 2)[control])) / int(at_risk.sum())
    return auc, brier


# -- EPCE -------------------------------------------------------------------------

@dataclass
class EpceResult:
    value: float
    n_t: int
    n_contributing: int
    n_excluded: int
    contributions: np.ndarray = field(repr=False)
    # members with neither indicator set (e.g. treated after the window end)
    n_no_indicator: int = 0


def _epce_summary(p, n_t):
    p = np.asarray(p, float)
    ok = p > 0
    if not ok.any():
        raise AllContributionsDegenerate("no subject has a positive predictive probability")
    contrib = -np.log(p[ok])
    return EpceResult(float(np.mean(contrib)), n_t, int(ok.sum()), int((~ok).sum()), contrib)


def epce_terms(riskset: RiskSet):
    """Per-member ``(T1, T2, d1, d2)`` of the interval-censored EPCE."""
    w = riskset.window
    recs = riskset.records
    last_neg = np.array([r.t_last_neg for r in recs])
    end = np.array([r.endpoint for r in recs])
    delta = np.array([int(r.delta) for r in recs])
    t1 = np.maximum(last_neg, w.t)
    t2 = np.where(delta == EventKind.CENSORED, w.end, np.minimum(end, w.end))
    d1 = (last_neg <= w.end) & (end >= w.t)
    d2 = (last_neg >= w.end) & (delta == EventKind.CENSORED)
    return t1, t2, d1, d2


def epce_model(riskset: RiskSet, predictor, profiles=None,
               window: Optional[EvaluationWindow] = None, rule: QuadratureRule = GK15) -> EpceResult:
    """Expected predictive cross-entropy from interval-censored observations.

    The progression factor integrates, over ``s`` in ``[T1, T2]``, the
    probability of progressing in ``[T1, s)`` given event-free at ``t``; the
    survival factor is the all-cause survival to the window end.  Members
    whose predictive probability is zero are excluded and counted.
    """
    if window is not None and window != riskset.window:
        riskset = build_risk_set(riskset.records, window)
    w = riskset.window
    batch = align_profiles(riskset, profiles)
    t1, t2, d1, d2 = epce_terms(riskset)
    n = riskset.n_t
    f1 = np.zeros(n)
    idx = np.flatnonzero(d1 & (t2 > t1))
    if idx.size:
        sub = batch[idx] if isinstance(batch, ProfileBatch) else batch
        s, wts = rule.points(t1[idx], t2[idx])
        cif_s = predictor.cif(sub, s, np.full(s.shape, w.t))
        cif_1 = predictor.cif(sub, t1[idx], np.full(idx.size, w.t))
        f1[idx] = np.sum(wts * (cif_s - cif_1[:, None]), -1)
    f2 = np.zeros(n)
    if d2.any():
        idx2 = np.flatnonzero(d2)
        sub = batch[idx2] if isinstance(batch, ProfileBatch) else batch
        f2[idx2] = predictor.surv(sub, np.full(idx2.size, w.end), np.full(idx2.size, w.t))
    p = d1 * f1 + d2 * f2
    res = _epce_summary(p, n)
    res.n_no_indicator = int(np.sum(~d1 & ~d2))
    return res


def epce_reference(true_outcomes: Sequence, predictor, profiles=None,
                   window: EvaluationWindow = EvaluationWindow()) -> EpceResult:
    """EPCE computed from the true event times (no censoring)."""
    t_prg = np.array([o.t_prg_star for o in true_outcomes], float)
    t_trt = np.array([o.t_trt_star for o in true_outcomes], float)
    at_risk = np.minimum(t_prg, t_trt) >= window.t
    if not at_risk.any():
        raise EmptyRiskSet(f"no subject event-free at t={window.t}")
    idx = np.flatnonzero(at_risk)
    if profiles is not None and not isinstance(profiles, ProfileBatch):
        profiles = ProfileBatch.from_profiles(list(profiles))
    sub = profiles[idx] if isinstance(profiles, ProfileBatch) else profiles
    tp, tt = t_prg[idx], t_trt[idx]
    t_tilde = np.minimum(tp, window.end)
    d1 = (tp >= window.t) & (tp < window.end) & (tp < tt)
    d2 = tp >= np.minimum(tt, window.end)
    start = np.full(idx.size, window.t)
    f1 = predictor.cif(sub, t_tilde, start)
    f2 = predictor.surv(sub, t_tilde, start)
    p = d1 * f1 + d2 * f2
    return _epce_summary(p, int(idx.size))


# -- orchestration -------------------------------------------------------------------

APPROACHES = ("model", "ipcw", "naive", "reference", "epce")


def evaluate(records, window: EvaluationWindow, predictor, profiles=None, truths=None,
             approaches: Sequence[str] = ("model", "ipcw", "naive"),
             all_profiles=None) -> dict:
    """Metrics reports keyed by approach.

    ``profiles`` maps subject ids to profiles (or is ``None`` for
    profile-free predictors).  ``truths`` maps subject ids to true outcomes
    and is required for ``reference``.  Requesting ``epce`` adds the EPCE to
    the model (and reference) report.  Missing absolute cases/controls for
    IPCW leave the AUC empty with a diagnostic instead of failing.
    """
    approaches = list(approaches)
    unknown = set(approaches) - set(APPROACHES)
    if unknown:
        raise ValueError(f"unknown approaches {sorted(unknown)}")
    if "reference" in approaches and truths is None:
        raise MissingTruth("reference metrics need true event times")
    records = list(records)
    riskset = build_risk_set(records, window)
    want_epce = "epce" in approaches
    pi = window_risks(riskset, predictor, profiles)
    reports = {}

    if "model" in approaches or want_epce:
        diag = WeightDiagnostics()
        weights = model_weights(riskset, predictor, profiles, diag)
        case_w, control_w = _weight_arrays(weights)
        roc, auc = _safe_roc(pi, case_w, control_w)
        report = MetricsReport(
            window, "model", auc, brier_model(riskset, pi, weights), riskset.n_t,
            float(case_w.sum()), float(control_w.sum()), roc=roc,
            diagnostics={"degenerate_denominators": diag.degenerate_denominators},
        )
        if want_epce:
            res = epce_model(riskset, predictor, profiles)
            report.epce = res.value
            report.diagnostics["epce_excluded"] = res.n_excluded
            report.diagnostics["epce_no_indicator"] = res.n_no_indicator
        reports["model"] = report

    if "ipcw" in approaches:
        diag = WeightDiagnostics()
        censoring = km_censoring_survival(riskset, window.t)
        case_w, control_w = ipcw_weights(riskset, censoring, diag)
        roc, auc = _safe_roc(pi, case_w, control_w)
        d = {
            "zero_survival_dropped": diag.zero_survival,
            "n_absolute_cases": int(np.sum(case_w > 0)),
            "n_absolute_controls": int(np.sum(control_w > 0)),
            "censoring_survival_at_end": float(censoring(window.end)),
        }
        if auc is None:
            d["auc_unavailable"] = "no absolute cases" if not np.any(case_w > 0) else "no absolute controls"
        reports["ipcw"] = MetricsReport(
            window, "ipcw", auc, brier_ipcw(riskset, pi, censoring, diagnostics=None), riskset.n_t,
            float(case_w.sum()), float(control_w.sum()), diagnostics=d, roc=roc,
        )

    if "naive" in approaches:
        case, control = naive_labels(riskset)
        roc, auc = _safe_roc(pi, case, control)
        included = case.sum() + control.sum()
        brier = float(np.sum((1 - pi) ** 2 * case + pi ** 2 * control) / included) if included else None
        reports["naive"] = MetricsReport(
            window, "naive", auc, brier, riskset.n_t, float(case.sum()), float(control.sum()),
            diagnostics={"n_included": int(included)}, roc=roc,
        )

    if "reference" in approaches:
        outcomes = [truths[rec.id] for rec in records]
        full = ProfileBatch.from_profiles([all_profiles[rec.id] for rec in records]) \
            if all_profiles is not None else None
        pi_all = np.asarray(predictor.cif(full, np.full(len(records), window.end),
                                          np.full(len(records), window.t)), float)
        at_risk, case, control = reference_labels(outcomes, window)
        roc, auc = _safe_roc(pi_all[at_risk], case[at_risk].astype(float), control[at_risk].astype(float))
        brier = float(np.sum(((1 - pi_all) ** 2)[case]) + np.sum((pi_all ** 2)[control])) / int(at_risk.sum())
        report = MetricsReport(
            window, "reference", auc, brier, int(at_risk.sum()), float(case.sum()),
            float(control.sum()), roc=roc,
        )
        if want_epce:
            res = epce_reference(outcomes, predictor, full, window)
            report.epce = res.value
            report.diagnostics["epce_excluded"] = res.n_excluded
        reports["reference"] = report
    return reports


def _safe_roc(pi, case_w, control_w):
    try:
        return weighted_roc(pi, case_w, control_w)
    except (NoCaseMass, NoControlMass):
        return None, None
