"""Case/control weights for the model-based and IPCW estimators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .core import EvaluationWindow, EventKind, RiskSet, Scenario, SubjectRecord, classify_scenario
from .errors import EmptyRiskSet, NotAbsoluteCase, ZeroSurvival
from .predictor import ProfileBatch, SubjectProfile

DENOMINATOR_EPS = 1e-12


@dataclass(frozen=True)
class WeightPair:
    case_w: float
    control_w: float
    scenario: Scenario
    degenerate: bool = False


@dataclass
class WeightDiagnostics:
    degenerate_denominators: int = 0
    zero_survival: int = 0


def _table(scenario: Scenario, pi_t, pi_b, pi_e, surv_b):
    """Model-based (case, control, degenerate) weights of one subject.

    All risks are conditional on the last negative biopsy: ``pi_t`` at the
    window start, ``pi_b`` at the window end, ``pi_e`` at the observed
    endpoint; ``surv_b`` is the all-cause survival to the window end.
    """
    code = scenario.value
    ratio = code in ("1a", "2a", "5a")
    if ratio and pi_e < DENOMINATOR_EPS:
        return 0.0, 0.0, True
    case = {
        "1a": lambda: (pi_e - pi_t) / pi_e,
        "1b": lambda: pi_e - pi_t,
        "1c": lambda: pi_b - pi_t,
        "2a": lambda: pi_b / pi_e,
        "2b": lambda: pi_b,
        "2c": lambda: pi_b,
        "3a": lambda: 1.0,
        "3b": lambda: pi_e,
        "3c": lambda: pi_b,
        "5a": lambda: (pi_b - pi_t) / pi_e,
        "5b": lambda: pi_b - pi_t,
        "5c": lambda: pi_b - pi_t,
    }.get(code, lambda: 0.0)()
    if code in ("1c", "3c"):
        control = surv_b
    elif code in ("2a", "5a"):
        control = (pi_e - pi_b) / pi_e
    elif code in ("2b", "2c", "5b", "5c"):
        control = 1.0 - pi_b
    elif scenario.group == 4:
        control = 1.0
    else:
        control = 0.0
    return min(max(case, 0.0), 1.0), min(max(control, 0.0), 1.0), False


def _risk_inputs(predictor, profile, record: SubjectRecord, window: EvaluationWindow):
    last_neg = record.t_last_neg
    end = record.endpoint
    pi_t = float(predictor.cif(profile, window.t, last_neg)) if last_neg < window.t else 0.0
    pi_b = float(predictor.cif(profile, window.end, last_neg))
    pi_e = float(predictor.cif(profile, end, last_neg))
    surv_b = float(predictor.surv(profile, window.end, last_neg))
    return pi_t, pi_b, pi_e, surv_b


def model_weight_pair(record: SubjectRecord, window: EvaluationWindow, predictor,
                      profile: Optional[SubjectProfile] = None,
                      diagnostics: Optional[WeightDiagnostics] = None) -> WeightPair:
    scenario = classify_scenario(record, window)
    if scenario is Scenario.EXCLUDED:
        return WeightPair(0.0, 0.0, scenario)
    case, control, degenerate = _table(scenario, *_risk_inputs(predictor, profile, record, window))
    if degenerate and diagnostics is not None:
        diagnostics.degenerate_denominators += 1
    return WeightPair(case, control, scenario, degenerate)


def model_case_weight(record, window, predictor, profile=None, diagnostics=None) -> float:
    """Model-based weight of ``record`` being a case in ``window``."""
    return model_weight_pair(record, window, predictor, profile, diagnostics).case_w


def model_control_weight(record, window, predictor, profile=None, diagnostics=None) -> float:
    """Model-based weight of ``record`` being a control in ``window``."""
    return model_weight_pair(record, window, predictor, profile, diagnostics).control_w


def align_profiles(riskset: RiskSet, profiles) -> Optional[ProfileBatch]:
    """Profiles in risk-set order.

    ``profiles`` may be ``None`` (profile-free predictors), a mapping from
    subject id to :class:`SubjectProfile`, or a :class:`ProfileBatch` already
    in risk-set order.
    """
    if profiles is None or isinstance(profiles, ProfileBatch):
        return profiles
    if isinstance(profiles, Mapping):
        return ProfileBatch.from_profiles([profiles[rec.id] for rec in riskset.records])
    return ProfileBatch.from_profiles(list(profiles))


def model_weights(riskset: RiskSet, predictor, profiles=None,
                  diagnostics: Optional[WeightDiagnostics] = None) -> list:
    """Model-based weight pairs for every risk-set member (vectorised risks)."""
    window = riskset.window
    batch = align_profiles(riskset, profiles)
    recs = riskset.records
    last_neg = np.array([r.t_last_neg for r in recs])
    end = np.array([r.endpoint for r in recs])
    t = np.full_like(last_neg, window.t)
    b = np.full_like(last_neg, window.end)
    pi_t = np.where(last_neg < window.t, predictor.cif(batch, np.maximum(t, last_neg), last_neg), 0.0)
    pi_b = predictor.cif(batch, b, last_neg)
    pi_e = predictor.cif(batch, end, last_neg)
    surv_b = predictor.surv(batch, b, last_neg)
    out = []
    for i, (_, scenario) in enumerate(riskset.members):
        case, control, degenerate = _table(scenario, pi_t[i], pi_b[i], pi_e[i], surv_b[i])
        if degenerate and diagnostics is not None:
            diagnostics.degenerate_denominators += 1
        out.append(WeightPair(float(case), float(control), scenario, degenerate))
    return out


# -- IPCW -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CensoringSurvival:
    """Reverse Kaplan-Meier estimate of being censoring-free, given ``landmark``.

    ``times`` are the censoring jump times after the landmark, ``values``
    the estimate just after each jump and ``at_risk`` the risk-set size at
    each jump.
    """

    landmark: float
    times: np.ndarray
    values: np.ndarray
    at_risk: np.ndarray

    def __call__(self, s):
        s = np.asarray(s, float)
        idx = np.searchsorted(self.times, s, side="right")
        vals = np.concatenate([[1.0], self.values])
        out = vals[idx]
        return float(out) if out.ndim == 0 else out


def km_censoring_survival(records, landmark: float) -> CensoringSurvival:
    """Landmarked reverse Kaplan-Meier over subjects followed up to ``landmark``.

    Censorings are the events; progression and treatment endpoints are
    censored observations.  At tied times censorings are counted before the
    other endpoints leave the risk set.
    """
    if isinstance(records, RiskSet):
        records = records.records
    ends = np.array([r.endpoint for r in records], float)
    cens = np.array([EventKind(r.delta) == EventKind.CENSORED for r in records])
    keep = ends >= landmark
    if not keep.any():
        raise EmptyRiskSet(f"no subject under follow-up at t={landmark}")
    ends, cens = ends[keep], cens[keep]
    jump_times = np.unique(ends[cens & (ends > landmark)])
    sorted_ends = np.sort(ends)
    at_risk = len(ends) - np.searchsorted(sorted_ends, jump_times, side="left")
    events = np.array([np.sum(cens & (ends == x)) for x in jump_times], float)
    values = np.cumprod(1.0 - events / at_risk) if len(jump_times) else np.array([])
    return CensoringSurvival(float(landmark), jump_times, values, at_risk)


def ipcw_case_weight(record: SubjectRecord, censoring: CensoringSurvival, window: EvaluationWindow) -> float:
    """Inverse probability of remaining uncensored up to the positive biopsy."""
    if classify_scenario(record, window) is not Scenario.S3A:
        raise NotAbsoluteCase(f"subject {record.id} is not an absolute case in [{window.t}, {window.end})")
    g = censoring(record.t_pos)
    if g <= 0:
        raise ZeroSurvival(f"censoring survival is 0 at {record.t_pos} (subject {record.id})")
    return 1.0 / g


def ipcw_control_weight(censoring: CensoringSurvival, window: EvaluationWindow) -> float:
    g = censoring(window.end)
    if g <= 0:
        raise ZeroSurvival(f"censoring survival is 0 at {window.end}")
    return 1.0 / g
