"""Joint-model hazards and conditional risk predictions.

The joint model links a subject's expected ``log2(PSA + 1)`` trajectory to
two cause-specific hazards (progression and early treatment).  Risks are
computed by nested GK15 quadrature:

    cif_k(s | r) = int_r^s h_k(v) exp(-H(r, v)) dv,   surv(s | r) = exp(-H(r, s))

with ``H`` the all-cause cumulative hazard started at the conditioning time,
which cancels the survival denominator analytically.

Profiles may be a single :class:`SubjectProfile` or a :class:`ProfileBatch`;
with a batch, the first axis of every time argument indexes subjects.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Protocol, Sequence, Union

import numpy as np

from .core import EventKind
from .errors import ConfigError, OutOfSupport
from .quadrature import GK15, GK15_NODES, GK15_WEIGHTS, QuadratureRule
from .splines import bspline_basis, bspline_curve, ns_basis

PRG, TRT = 0, 1


def _event_index(event) -> int:
    if isinstance(event, str):
        return {"prg": PRG, "progression": PRG, "trt": TRT, "treatment": TRT}[event.lower()]
    if event in (EventKind.PROGRESSION, EventKind.TREATMENT):
        return int(event) - 1
    raise ValueError(f"unknown event {event!r}")


@dataclass(frozen=True, eq=False)
class ModelParameters:
    """Parameters of the joint model.

    ``gamma_h0`` has one row per baseline-hazard basis function and one
    column per event (progression, treatment).  ``alpha[0]`` holds the
    coefficients of the current expected PSA value and ``alpha[1]`` those of
    its change over the previous year.  Knot lists are sorted and include
    the boundary knots; the B-spline degree follows from
    ``len(gamma_h0) - len(bs_knots) + 1``.
    """

    beta: np.ndarray
    omega: np.ndarray
    tau_eps: float
    gamma_h0: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    ns_knots: tuple = (0.0, 1.0, 3.0, 10.0)
    bs_knots: tuple = tuple(float(k) for k in range(11))

    def __post_init__(self):
        conv = {
            "beta": (5,), "omega": (4, 4), "gamma": (2,), "alpha": (2, 2),
        }
        for name, shape in conv.items():
            arr = np.array(getattr(self, name), float)
            if arr.shape != shape:
                raise ConfigError(f"{name} must have shape {shape}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        gh0 = np.array(self.gamma_h0, float)
        if gh0.ndim != 2 or gh0.shape[1] != 2:
            raise ConfigError(f"gamma_h0 must be (n_basis, 2), got {gh0.shape}")
        gh0.setflags(write=False)
        object.__setattr__(self, "gamma_h0", gh0)
        object.__setattr__(self, "ns_knots", tuple(float(k) for k in self.ns_knots))
        object.__setattr__(self, "bs_knots", tuple(float(k) for k in self.bs_knots))
        object.__setattr__(self, "tau_eps", float(self.tau_eps))
        if not self.tau_eps > 0:
            raise ConfigError("tau_eps must be positive")
        if not np.allclose(self.omega, self.omega.T):
            raise ConfigError("omega must be symmetric")
        if np.linalg.eigvalsh(self.omega).min() <= 0:
            raise ConfigError("omega must be positive definite")
        if self.bs_degree < 1:
            raise ConfigError("gamma_h0 has too few rows for the B-spline knots")
        if list(self.ns_knots) != sorted(self.ns_knots) or list(self.bs_knots) != sorted(self.bs_knots):
            raise ConfigError("knots must be sorted")

    @property
    def bs_degree(self) -> int:
        return self.gamma_h0.shape[0] - len(self.bs_knots) + 1

    def replace(self, **changes) -> "ModelParameters":
        d = self.to_dict()
        d.update(changes)
        return ModelParameters(**d)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "omega": self.omega.tolist(),
            "tau_eps": self.tau_eps,
            "gamma_h0": self.gamma_h0.tolist(),
            "gamma": self.gamma.tolist(),
            "alpha": self.alpha.tolist(),
            "ns_knots": list(self.ns_knots),
            "bs_knots": list(self.bs_knots),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParameters":
        missing = {"beta", "omega", "tau_eps", "gamma_h0", "gamma", "alpha"} - set(d)
        if missing:
            raise ConfigError(f"model parameters missing {sorted(missing)}")
        keys = ("beta", "omega", "tau_eps", "gamma_h0", "gamma", "alpha", "ns_knots", "bs_knots")
        return cls(**{k: d[k] for k in keys if k in d})

    @classmethod
    def from_json(cls, text: str) -> "ModelParameters":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        """Short content hash, stable across runs."""
        return hashlib.sha256(self.to_json(sort_keys=True).encode()).hexdigest()[:16]


APPENDIX_PARAMETERS = ModelParameters(
    beta=[2.34, 0.28, 0.61, 0.95, 0.02],
    omega=[
        [0.48, -0.04, -0.07, 0.02],
        [-0.04, 0.77, 0.46, -0.04],
        [-0.07, 0.46, 1.37, 1.36],
        [0.02, -0.04, 1.36, 2.54],
    ],
    tau_eps=47.40,
    gamma_h0=[
        [-6.78, -5.76],
        [-4.72, -4.99],
        [-2.84, -4.43],
        [-1.65, -4.26],
        [-1.54, -4.36],
        [-1.79, -4.47],
        [-1.85, -4.60],
        [-1.75, -4.69],
        [-1.85, -4.78],
        [-2.04, -4.92],
        [-2.18, -5.08],
        [-2.32, -5.21],
    ],
    gamma=[0.50, 0.23],
    alpha=[[0.13, 0.42], [3.01, 2.62]],
)


@dataclass(frozen=True)
class SubjectProfile:
    age: float = 62.0
    density: float = 0.1
    u: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        if len(self.u) != 4:
            raise ValueError("u must have 4 random effects")


@dataclass(frozen=True, eq=False)
class ProfileBatch:
    """Profiles of several subjects stored column-wise."""

    age: np.ndarray
    density: np.ndarray
    u: np.ndarray

    @classmethod
    def from_profiles(cls, profiles: Sequence[SubjectProfile]) -> "ProfileBatch":
        return cls(
            age=np.array([p.age for p in profiles], float),
            density=np.array([p.density for p in profiles], float),
            u=np.array([p.u for p in profiles], float).reshape(-1, 4),
        )

    def __len__(self):
        return len(self.age)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return SubjectProfile(self.age[idx], self.density[idx], tuple(self.u[idx]))
        return ProfileBatch(self.age[idx], self.density[idx], self.u[idx])

    def profiles(self) -> list:
        return [self[i] for i in range(len(self))]


Profile = Union[SubjectProfile, ProfileBatch, None]


def _profile_arrays(profile):
    if profile is None:
        profile = SubjectProfile()
    if isinstance(profile, SubjectProfile):
        return np.float64(profile.age), np.float64(profile.density), np.asarray(profile.u, float)
    return profile.age, profile.density, profile.u


def _expand(a, ndim):
    a = np.asarray(a)
    return a.reshape(a.shape + (1,) * (ndim - a.ndim))


class HazardModel(Protocol):
    def hazards(self, profile, time) -> tuple: ...


class JointModel:
    """Cause-specific hazards of the joint model.

    ``hazard_scale`` multiplies both hazards; 1 reproduces the model.
    """

    def __init__(self, params: ModelParameters = APPENDIX_PARAMETERS, hazard_scale: float = 1.0):
        self.params = params
        self.hazard_scale = float(hazard_scale)
        self._baseline = bspline_curve(params.bs_knots, params.gamma_h0, params.bs_degree)
        self._support = (params.bs_knots[0], params.bs_knots[-1])

    def longitudinal_mean(self, profile, time) -> np.ndarray:
        p = self.params
        age, _, u = _profile_arrays(profile)
        time = np.asarray(time, float)
        basis = ns_basis(time, p.ns_knots)
        slopes = p.beta[1:4] + u[..., 1:4]
        slopes = slopes.reshape(slopes.shape[:-1] + (1,) * (time.ndim - age.ndim) + (3,))
        level = _expand(p.beta[0] + u[..., 0] + p.beta[4] * (age - 62.0), time.ndim)
        return level + np.sum(basis * slopes, axis=-1)

    def log_baseline(self, time) -> np.ndarray:
        """Log baseline hazards, shape ``time.shape + (2,)``.

        Held constant beyond the right boundary knot.
        """
        time = np.asarray(time, float)
        if np.any(time < self._support[0]):
            raise OutOfSupport(f"hazard requested before time {self._support[0]}")
        return self._baseline(np.minimum(time, self._support[1]))

    def hazards(self, profile, time):
        p = self.params
        time = np.asarray(time, float)
        _, density, _ = _profile_arrays(profile)
        m_now = self.longitudinal_mean(profile, time)
        m_prev = self.longitudinal_mean(profile, time - 1.0)
        logh0 = self.log_baseline(time)
        dens = _expand(density, time.ndim)
        out = []
        for k in (PRG, TRT):
            eta = logh0[..., k] + p.gamma[k] * dens + p.alpha[0, k] * m_now + p.alpha[1, k] * (m_now - m_prev)
            out.append(self.hazard_scale * np.exp(eta))
        return tuple(out)


class ConstantHazards:
    """Profile-free constant cause-specific hazards, for oracle tests."""

    def __init__(self, lam_prg: float, lam_trt: float):
        self.lam_prg = float(lam_prg)
        self.lam_trt = float(lam_trt)

    def hazards(self, profile, time):
        time = np.asarray(time, float)
        return np.full(time.shape, self.lam_prg), np.full(time.shape, self.lam_trt)


class RiskPredictor(Protocol):
    def cif(self, profile, s, r, event=EventKind.PROGRESSION): ...

    def surv(self, profile, s, r): ...


# points per chunk in the nested quadrature; bounds peak memory
_CHUNK_POINTS = 1_500_000


class QuadraturePredictor:
    """Risks of any :class:`HazardModel` by nested GK15 quadrature."""

    def __init__(self, model: HazardModel, rule: QuadratureRule = GK15):
        self.model = model
        self.rule = rule

    def cumulative_hazards(self, profile, r, s):
        """``(H_prg(r, s), H_trt(r, s))`` with ``ceil(s - r)`` panels each."""
        r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
        s = np.maximum(s, r)
        x, w = self.rule.points(r, s)
        hp, ht = self.model.hazards(profile, x)
        return np.sum(w * hp, -1), np.sum(w * ht, -1)

    def surv(self, profile, s, r):
        hp, ht = self.cumulative_hazards(profile, r, s)
        return np.exp(-(hp + ht))

    def cif(self, profile, s, r, event=EventKind.PROGRESSION):
        k = _event_index(event)
        r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
        s = np.maximum(s, r)
        if r.ndim == 0 or not isinstance(profile, ProfileBatch):
            return self._cif(profile, r, s, k)
        per_row = max(1, r[0].size) * 15 * 16 * int(self.rule.n_panels(r, s).max())
        step = max(1, _CHUNK_POINTS // per_row)
        if step >= len(r):
            return self._cif(profile, r, s, k)
        parts = [self._cif(profile[i:i + step], r[i:i + step], s[i:i + step], k)
                 for i in range(0, len(r), step)]
        return np.concatenate(parts)

    def _cif(self, profile, r, s, k):
        edges = self.rule.panel_edges(r, s)
        lo, hi = edges[..., :-1], edges[..., 1:]
        half = 0.5 * (hi - lo)
        # outer nodes double as the nodes of the per-panel hazard integrals
        x = 0.5 * (hi + lo)[..., None] + half[..., None] * GK15_NODES
        hx = self.model.hazards(profile, x)
        htot = hx[0] + hx[1]
        panel_h = np.sum(half[..., None] * GK15_WEIGHTS * htot, -1)
        start_h = np.cumsum(panel_h, -1) - panel_h
        # H(lo_p, x) for every outer node, one sub-panel of length <= 1
        sub = 0.5 * (x - lo[..., None])
        y = lo[..., None, None] + sub[..., None] * (1.0 + GK15_NODES)
        hy = self.model.hazards(profile, y)
        inner = np.sum(sub[..., None] * GK15_WEIGHTS * (hy[0] + hy[1]), -1)
        cum = start_h[..., None] + inner
        integrand = hx[k] * np.exp(-cum)
        return np.sum(half[..., None] * GK15_WEIGHTS * integrand, axis=(-2, -1))


class JointModelPredictor(QuadraturePredictor):
    def __init__(self, params: ModelParameters = APPENDIX_PARAMETERS, rule: QuadratureRule = GK15,
                 hazard_scale: float = 1.0):
        super().__init__(JointModel(params, hazard_scale), rule)

    @property
    def params(self) -> ModelParameters:
        return self.model.params


class ConstantHazardPredictor:
    """Closed-form competing exponentials; ignores the profile."""

    def __init__(self, lam_prg: float, lam_trt: float):
        self.lam_prg = float(lam_prg)
        self.lam_trt = float(lam_trt)

    @property
    def lam_total(self) -> float:
        return self.lam_prg + self.lam_trt

    def surv(self, profile, s, r):
        s, r = np.asarray(s, float), np.asarray(r, float)
        return np.exp(-self.lam_total * np.maximum(s - r, 0.0))

    def cif(self, profile, s, r, event=EventKind.PROGRESSION):
        lam = (self.lam_prg, self.lam_trt)[_event_index(event)]
        return lam / self.lam_total * (1.0 - self.surv(profile, s, r))


# -- functional interface -------------------------------------------------

def _as_model(params) -> HazardModel:
    if isinstance(params, ModelParameters):
        return JointModel(params)
    return params


def longitudinal_mean(profile, params: ModelParameters, time):
    return JointModel(params).longitudinal_mean(profile, time)


def bs_log_baseline(time, params: ModelParameters, event) -> np.ndarray:
    """Log baseline hazard of ``event`` (strict: raises outside the knots)."""
    k = _event_index(event)
    basis = bspline_basis(time, params.bs_knots, params.bs_degree)
    return basis @ params.gamma_h0[:, k]


def hazard(profile, params, time, event) -> np.ndarray:
    return _as_model(params).hazards(profile, time)[_event_index(event)]


def cumulative_hazard(profile, params, event, r, s, rule: QuadratureRule = GK15) -> np.ndarray:
    hp, ht = QuadraturePredictor(_as_model(params), rule).cumulative_hazards(profile, r, s)
    return (hp, ht)[_event_index(event)]


def cif_progression(profile, params, s, r, rule: QuadratureRule = GK15) -> np.ndarray:
    return QuadraturePredictor(_as_model(params), rule).cif(profile, s, r)


def cif_treatment(profile, params, s, r, rule: QuadratureRule = GK15) -> np.ndarray:
    return QuadraturePredictor(_as_model(params), rule).cif(profile, s, r, EventKind.TREATMENT)


def overall_survival(profile, params, s, r, rule: QuadratureRule = GK15) -> np.ndarray:
    return QuadraturePredictor(_as_model(params), rule).surv(profile, s, r)
