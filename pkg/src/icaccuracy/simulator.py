"""Synthetic active-surveillance cohorts drawn from the joint model.

Each subject gets a covariate/random-effect profile, latent progression and
treatment times (independent unit-exponential inversions of the two
cause-specific cumulative hazards), a biopsy schedule, a censoring time and a
PSA series on a 3-month grid.  Observation is perfect-sensitivity biopsy
detection: progression is seen at the first biopsy after it occurs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import stats

from .core import EventKind, SubjectRecord
from .errors import ConfigError
from .predictor import (
    APPENDIX_PARAMETERS,
    JointModel,
    ModelParameters,
    ProfileBatch,
    SubjectProfile,
)
from .quadrature import GK15_NODES, GK15_WEIGHTS

# Constant dropout hazard (1/years) that brings the PASS-schedule cohort to
# roughly 22% progression / 9% treatment / 68% censored; see
# demos/calibrate_censoring.py.
DEFAULT_DROPOUT_RATE = 0.285
ADMIN_HORIZON = 12.0
TIME_CAP = 100.0


@dataclass(frozen=True)
class BiopsySchedule:
    """``kind`` is ``"pass"`` or ``"uniform"`` (random gaps in [lo, hi])."""

    kind: str = "pass"
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("pass", "uniform"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "uniform" and not (0 < self.lo < self.hi):
            raise ConfigError(f"uniform schedule needs 0 < lo < hi, got {self.lo}, {self.hi}")

    @classmethod
    def parse(cls, name: str) -> "BiopsySchedule":
        """``"pass"`` or ``"u<lo>-<hi>"``, e.g. ``"u0.3-4"``."""
        name = name.strip().lower()
        if name == "pass":
            return cls("pass")
        if name.startswith("u") and "-" in name:
            lo, _, hi = name[1:].partition("-")
            try:
                return cls("uniform", float(lo), float(hi))
            except ValueError:
                pass
        raise ConfigError(f"unknown biopsy schedule {name!r}")

    @property
    def name(self) -> str:
        if self.kind == "pass":
            return "pass"
        return f"u{self.lo:g}-{self.hi:g}"


@dataclass(frozen=True)
class SimulationConfig:
    n_subjects: int = 300
    n_replicates: int = 1
    seed: int = 0
    schedule: BiopsySchedule = BiopsySchedule()
    params: ModelParameters = APPENDIX_PARAMETERS
    censoring_rate: float = DEFAULT_DROPOUT_RATE
    admin_horizon: float = ADMIN_HORIZON
    psa_interval: float = 0.25

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ConfigError("n_subjects must be >= 1")
        if self.n_replicates < 1:
            raise ConfigError("n_replicates must be >= 1")
        if not self.psa_interval > 0:
            raise ConfigError("psa_interval must be > 0")
        if self.censoring_rate < 0 or not self.admin_horizon > 0:
            raise ConfigError("censoring rate must be >= 0 and horizon > 0")


@dataclass(frozen=True)
class TrueOutcome:
    t_prg_star: float
    t_trt_star: float


@dataclass(frozen=True)
class SimulatedSubject:
    record: SubjectRecord
    truth: TrueOutcome
    profile: SubjectProfile


def replicate_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replicate)]))


# -- profiles ---------------------------------------------------------------

def _truncnorm(rng, mean, sd, lo, hi, size):
    a, b = (lo - mean) / sd, (hi - mean) / sd
    return stats.truncnorm.rvs(a, b, loc=mean, scale=sd, size=size, random_state=rng)


def draw_profiles(rng: np.random.Generator, n: int, params: ModelParameters = APPENDIX_PARAMETERS) -> ProfileBatch:
    """Age ~ N(62, 7^2) on [45, 80]; density log-normal around 0.1 on [0.01, 1]."""
    age = _truncnorm(rng, 62.0, 7.0, 45.0, 80.0, n)
    log_density = _truncnorm(rng, math.log(0.1), 0.5, math.log(0.01), 0.0, n)
    u = rng.multivariate_normal(np.zeros(4), params.omega, size=n)
    return ProfileBatch(np.asarray(age, float), np.exp(log_density), u)


def draw_subject_profile(rng: np.random.Generator, params: ModelParameters = APPENDIX_PARAMETERS) -> SubjectProfile:
    return draw_profiles(rng, 1, params)[0]


# -- event times --------------------------------------------------------------

def _panel_integral(model, profile, lo, hi, k):
    half = 0.5 * (hi - lo)
    x = (0.5 * (hi + lo))[..., None] + half[..., None] * GK15_NODES
    h = model.hazards(profile, x)[k]
    return half * np.sum(GK15_WEIGHTS * h, -1)


def solve_cumulative_hazard(model, profile, targets, k, cap=TIME_CAP, tol=1e-8):
    """Times ``T`` with ``H_k(0, T) = targets`` for a batch of subjects.

    ``H`` is tabulated on a one-year grid, the bracketing year is located and
    the root refined by bisection to ``tol``.  Returns ``(times, capped)``;
    subjects whose target exceeds ``H_k(0, cap)`` get ``cap``.
    """
    targets = np.asarray(targets, float)
    n = targets.shape[0]
    grid = np.arange(0.0, cap + 1.0)
    lo = np.broadcast_to(grid[:-1], (n, len(grid) - 1))
    panel = _panel_integral(model, profile, lo, lo + 1.0, k)
    cum = np.concatenate([np.zeros((n, 1)), np.cumsum(panel, -1)], axis=1)
    idx = np.array([np.searchsorted(cum[i], targets[i], side="left") for i in range(n)])
    capped = idx >= len(grid)
    idx = np.clip(idx, 1, len(grid) - 1)
    rows = np.arange(n)
    base = cum[rows, idx - 1]
    left = grid[idx - 1].astype(float)
    a, b = left.copy(), left + 1.0
    need = targets - base
    n_iter = int(math.ceil(math.log2(1.0 / tol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (a + b)
        val = _panel_integral(model, profile, left, mid, k)
        below = val < need
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    times = 0.5 * (a + b)
    times[capped] = cap
    return times, capped


def sample_event_times_batch(profiles, model, rng: np.random.Generator):
    """Latent (progression, treatment) times and the count of capped draws."""
    n = len(profiles)
    e = rng.exponential(1.0, size=(n, 2))
    t_prg, c1 = solve_cumulative_hazard(model, profiles, e[:, 0], 0)
    t_trt, c2 = solve_cumulative_hazard(model, profiles, e[:, 1], 1)
    return t_prg, t_trt, int(c1.sum() + c2.sum())


def sample_event_times(profile: SubjectProfile, params: Union[ModelParameters, object],
                       rng: np.random.Generator) -> TrueOutcome:
    model = JointModel(params) if isinstance(params, ModelParameters) else params
    batch = ProfileBatch.from_profiles([profile])
    t_prg, t_trt, _ = sample_event_times_batch(batch, model, rng)
    return TrueOutcome(float(t_prg[0]), float(t_trt[0]))


# -- observation ----------------------------------------------------------------

def generate_biopsy_times(schedule: BiopsySchedule, rng: np.random.Generator, horizon: float) -> list:
    if not horizon > 0:
        raise ConfigError("horizon must be positive")
    if schedule.kind == "pass":
        times = [1.0, 2.0] + [float(y) for y in range(4, int(math.floor(horizon)) + 1, 2)]
        return [x for x in times if x <= horizon]
    out = []
    now = 0.0
    while True:
        now += rng.uniform(schedule.lo, schedule.hi)
        if now > horizon:
            return out
        out.append(now)


def observe_subject(truth: TrueOutcome, biopsies, t_cen: float, subject_id="0",
                    age=62.0, density=0.1) -> SubjectRecord:
    """Apply the biopsy/treatment/censoring observation rule."""
    biopsies = np.asarray(biopsies, float)
    t_prg, t_trt = truth.t_prg_star, truth.t_trt_star
    after = biopsies[biopsies >= t_prg]
    detect = after[0] if after.size else math.inf

    def last_before(x):
        prior = biopsies[biopsies < x]
        return float(prior[-1]) if prior.size else 0.0

    common = dict(id=str(subject_id), age=float(age), density=float(density))
    if t_trt < min(detect, t_cen):
        return SubjectRecord(t_last_neg=last_before(t_trt), delta=EventKind.TREATMENT,
                             t_trt=float(t_trt), **common)
    if detect < t_cen:
        return SubjectRecord(t_last_neg=last_before(detect), delta=EventKind.PROGRESSION,
                             t_pos=float(detect), **common)
    return SubjectRecord(t_last_neg=last_before(t_cen), delta=EventKind.CENSORED,
                         t_cen=float(t_cen), **common)


def simulate_psa_series(profile, params: ModelParameters, times, rng: Optional[np.random.Generator],
                        noise: bool = True):
    """``(time, value)`` pairs of ``log2(PSA + 1)``.

    Residuals are Student-t with 3 degrees of freedom and scale
    ``tau_eps ** -0.5``.
    """
    times = np.asarray(times, float)
    mean = JointModel(params).longitudinal_mean(profile, times)
    if noise:
        mean = mean + params.tau_eps ** -0.5 * rng.standard_t(3, size=times.shape)
    return list(zip(times.tolist(), mean.tolist()))


# -- cohorts ----------------------------------------------------------------

@dataclass
class SimulationDiagnostics:
    capped_event_times: int = 0


def generate_dataset(config: SimulationConfig, replicate: int = 0,
                     diagnostics: Optional[SimulationDiagnostics] = None,
                     hazard_model=None) -> list:
    """One replicate cohort; deterministic in ``(config.seed, replicate)``.

    ``hazard_model`` overrides the joint-model hazards used for the event
    times (the PSA series always follows ``config.params``).
    """
    rng = replicate_rng(config.seed, replicate)
    params = config.params
    n = config.n_subjects
    profiles = draw_profiles(rng, n, params)
    model = hazard_model if hazard_model is not None else JointModel(params)
    t_prg, t_trt, capped = sample_event_times_batch(profiles, model, rng)
    if diagnostics is not None:
        diagnostics.capped_event_times += capped
    if config.censoring_rate > 0:
        dropout = rng.exponential(1.0 / config.censoring_rate, size=n)
    else:
        dropout = np.full(n, math.inf)
    t_cen = np.minimum(dropout, config.admin_horizon)

    jm = JointModel(params)
    scale = params.tau_eps ** -0.5
    subjects = []
    for i in range(n):
        biopsies = generate_biopsy_times(config.schedule, rng, config.admin_horizon)
        truth = TrueOutcome(float(t_prg[i]), float(t_trt[i]))
        rec = observe_subject(truth, biopsies, float(t_cen[i]), subject_id=f"{i + 1}",
                              age=profiles.age[i], density=profiles.density[i])
        grid = np.arange(0.0, rec.endpoint + 1e-12, config.psa_interval)
        profile = profiles[i]
        values = jm.longitudinal_mean(profile, grid) + scale * rng.standard_t(3, size=grid.shape)
        rec = SubjectRecord(**{**rec.__dict__, "psa": tuple(zip(grid.tolist(), values.tolist()))})
        subjects.append(SimulatedSubject(record=rec, truth=truth, profile=profile))
    return subjects


def event_proportions(subjects) -> dict:
    deltas = np.array([int(s.record.delta) for s in subjects])
    return {
        "progression": float(np.mean(deltas == EventKind.PROGRESSION)),
        "treatment": float(np.mean(deltas == EventKind.TREATMENT)),
        "censored": float(np.mean(deltas == EventKind.CENSORED)),
    }
