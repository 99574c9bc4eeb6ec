"""Spline bases for the longitudinal mean and the log baseline hazard."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.interpolate import BSpline

from .errors import OutOfSupport


def _clamped(knots, degree):
    knots = np.asarray(knots, float)
    return np.concatenate([[knots[0]] * degree, knots, [knots[-1]] * degree])


@lru_cache(maxsize=16)
def _ns_spline(knots: tuple) -> BSpline:
    # Cubic B-splines on the augmented knots, first column dropped (no
    # intercept), then projected on the null space of the second-derivative
    # constraints at both boundary knots.
    t = _clamped(knots, 3)
    nbasis = len(t) - 4
    eye = np.eye(nbasis)
    bounds = np.array([knots[0], knots[-1]])
    const = np.stack([BSpline(t, eye[j], 3).derivative(2)(bounds) for j in range(nbasis)], axis=1)
    const = const[:, 1:]
    q, _ = np.linalg.qr(const.T, mode="complete")
    proj = np.zeros((nbasis, nbasis - 3))
    proj[1:, :] = q[:, 2:]
    return BSpline(t, proj, 3, extrapolate=False)


def ns_basis(time, knots=(0.0, 1.0, 3.0, 10.0)) -> np.ndarray:
    """Natural cubic spline basis without intercept.

    ``knots`` lists the boundary knots first and last with the internal
    knots in between; two internal knots give three columns.  Outside the
    boundary knots the basis continues linearly.  Returns an array of shape
    ``time.shape + (n_internal + 1,)``.
    """
    knots = tuple(float(k) for k in knots)
    spl = _ns_spline(knots)
    lo, hi = knots[0], knots[-1]
    time = np.asarray(time, float)
    flat = time.reshape(-1)
    out = spl(np.clip(flat, lo, hi))
    below, above = flat < lo, flat > hi
    if below.any():
        out[below] = spl(lo) + (flat[below] - lo)[:, None] * spl.derivative(1)(lo)
    if above.any():
        out[above] = spl(hi) + (flat[above] - hi)[:, None] * spl.derivative(1)(hi)
    return out.reshape(time.shape + (out.shape[-1],))


@lru_cache(maxsize=16)
def _bs_tck(knots: tuple, degree: int):
    return _clamped(knots, degree)


def bspline_basis(time, knots, degree: int = 2) -> np.ndarray:
    """Clamped B-spline basis values, shape ``time.shape + (n_basis,)``.

    With ``len(knots)`` distinct knots there are ``len(knots) + degree - 1``
    basis functions.  ``time`` must lie within the knot range.
    """
    knots = tuple(float(k) for k in knots)
    time = np.asarray(time, float)
    if np.any(time < knots[0]) or np.any(time > knots[-1]):
        raise OutOfSupport(f"time outside B-spline support [{knots[0]}, {knots[-1]}]")
    t = _bs_tck(knots, degree)
    flat = time.reshape(-1)
    dm = BSpline.design_matrix(flat, t, degree).toarray()
    return dm.reshape(time.shape + (dm.shape[1],))


def bspline_curve(knots, coef, degree: int = 2) -> BSpline:
    """Spline with the given coefficient rows (callers clamp to the support)."""
    return BSpline(_bs_tck(tuple(float(k) for k in knots), degree), np.asarray(coef, float), degree)
