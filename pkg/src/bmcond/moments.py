"""Closed-form conditional moments of Brownian motion and its meander.

The meander moments feed three ladders of conditional mean/variance
curves: given (close, argmax, high), given (argmax, high), and given
argmax alone.  Scalar entry points validate their domain; the vectorised
``curve_*`` helpers evaluate a whole time grid at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import erf as _erf

from .analytic import ExtremaTriple, _check_theta
from .errors import DomainError

__all__ = [
    "MomentPair",
    "MomentCurve",
    "meander_m1",
    "meander_m2",
    "meander_var",
    "g11",
    "cond_moments_given_c_theta_h",
    "cond_moments_given_theta_h",
    "cond_moments_given_theta",
    "b1_moments_given_theta",
    "appendix_integral",
    "curve_given_c_theta_h",
    "curve_given_theta_h",
    "curve_given_theta",
]

_VAR_CLAMP = -1e-12
_SQRT_PI_OVER_2 = math.sqrt(math.pi / 2.0)


class MomentPair(NamedTuple):
    mean: float
    variance: float


@dataclass(frozen=True)
class MomentCurve:
    """Mean and variance sampled on a caller-supplied time grid."""

    times: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        if not (len(t) == len(self.means) == len(self.variances)):
            raise DomainError("times, means and variances must have equal length")
        if len(t) and (t[0] < 0.0 or t[-1] > 1.0 or np.any(np.diff(t) <= 0.0)):
            raise DomainError("times must be strictly increasing within [0, 1]")


def _m1(s, t, c):
    """First meander moment, vectorised; exact endpoint handling at s in {0, t}."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    s, t, c = np.broadcast_arrays(s, t, c)
    tau = t - s
    out = np.empty_like(tau)
    end = tau <= 0.0
    out[end] = c[end]
    mid = ~end
    if np.any(mid):
        sm, tm, cm, taum = s[mid], t[mid], c[mid], tau[mid]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.sqrt(sm / (2.0 * tm * taum))
            thr = 1e-4 * np.sqrt(tm * taum / np.maximum(sm, 1e-300))
            small = np.abs(cm) < thr
            c_safe = np.where(small, 1.0, cm)
            erf_ratio = np.where(
                small,
                2.0 / math.sqrt(math.pi) * (k - k**3 * cm**2 / 3.0 + k**5 * cm**4 / 10.0),
                _erf(k * cm) / c_safe,
            )
        out[mid] = (taum + sm * cm**2 / tm) * erf_ratio + np.sqrt(
            2.0 * sm * taum / (math.pi * tm)
        ) * np.exp(-sm * cm**2 / (2.0 * tm * taum))
    return out


def _m2(s, t, c):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    return 3.0 * s * (t - s) / t + c**2 * s**2 / t**2


def _vr(s, c):
    """Variance of the meander at time s in [0,1] pinned to end at c."""
    v = _m2(s, 1.0, c) - _m1(s, 1.0, c) ** 2
    return np.maximum(v, 0.0)


def _check_meander_args(s: float, t: float, c: float) -> None:
    if t <= 0.0 or not (0.0 <= s <= t):
        raise DomainError(f"need 0 <= s <= t with t > 0, got s={s}, t={t}")
    if c < 0.0:
        raise DomainError(f"endpoint {c} must be nonnegative")


def meander_m1(s: float, t: float, c: float) -> float:
    """E[B^me(s) | B^me(t) = c]."""
    _check_meander_args(s, t, c)
    return float(_m1(s, t, c))


def meander_m2(s: float, t: float, c: float) -> float:
    """E[B^me(s)^2 | B^me(t) = c]; purely polynomial in (s, t, c)."""
    _check_meander_args(s, t, c)
    return float(_m2(s, t, c))


def meander_var(s: float, c: float) -> float:
    """Var[B^me(s) | B^me(1) = c], zero at both pinned endpoints."""
    if not (0.0 <= s <= 1.0):
        raise DomainError(f"time {s} outside [0, 1]")
    if c < 0.0:
        raise DomainError(f"endpoint {c} must be nonnegative")
    v = float(_m2(s, 1.0, c) - _m1(s, 1.0, c) ** 2)
    if v < _VAR_CLAMP * max(1.0, c * c):
        # genuine negativity would mean a formula bug, not roundoff
        if v < -1e-9:
            raise DomainError(f"variance formula produced {v}")
    return max(v, 0.0)


def g11(s):
    """The Gaussian-weighted first-moment integral sqrt(2/pi)[atan(sqrt(s/(1-s))) + sqrt(s(1-s))].

    Monotone increasing from 0 at s=0 to sqrt(pi/2) at s=1; the arctangent
    is formed with atan2 so s = 1 needs no special-casing.
    """
    s = np.asarray(s, dtype=float)
    if np.any((s < 0.0) | (s > 1.0)):
        raise DomainError("g11 argument outside [0, 1]")
    rs = np.sqrt(s)
    rc = np.sqrt(1.0 - s)
    val = math.sqrt(2.0 / math.pi) * (np.arctan2(rs, rc) + rs * rc)
    return float(val) if val.ndim == 0 else val


def _mean_var_cthc(t, theta: float, h: float, c: float):
    t = np.asarray(t, dtype=float)
    left = t <= theta
    s_l = np.where(left, 1.0 - t / theta, 0.0)
    s_r = np.where(left, 0.0, (t - theta) / (1.0 - theta))
    r = h / math.sqrt(theta)
    q = (h - c) / math.sqrt(1.0 - theta)
    mean = np.where(
        left,
        h - math.sqrt(theta) * _m1(s_l, 1.0, r),
        h - math.sqrt(1.0 - theta) * _m1(s_r, 1.0, q),
    )
    var = np.where(left, theta * _vr(s_l, r), (1.0 - theta) * _vr(s_r, q))
    return mean, np.maximum(var, 0.0)


def cond_moments_given_c_theta_h(t: float, cond: ExtremaTriple) -> MomentPair:
    """Mean and variance of B(t) given (close, argmax, high)."""
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"time {t} outside [0, 1]")
    mean, var = _mean_var_cthc(t, cond.theta, cond.h, cond.c)
    return MomentPair(float(mean), float(var))


def _mean_var_th(t, theta: float, h: float):
    t = np.asarray(t, dtype=float)
    left = t <= theta
    s_l = np.where(left, 1.0 - t / theta, 0.0)
    s_r = np.where(left, 0.0, (t - theta) / (1.0 - theta))
    r = h / math.sqrt(theta)
    g = g11(s_r)
    mean = np.where(
        left,
        h - math.sqrt(theta) * _m1(s_l, 1.0, r),
        h - math.sqrt(1.0 - theta) * g,
    )
    var = np.where(
        left,
        theta * _vr(s_l, r),
        (1.0 - theta) * (3.0 * s_r - s_r**2 - g**2),
    )
    return mean, np.maximum(var, 0.0)


def cond_moments_given_theta_h(t: float, theta: float, h: float) -> MomentPair:
    """Mean and variance of B(t) given (argmax, high); close integrated out.

    For t <= argmax this coincides with the (close, argmax, high) ladder,
    whose left branch does not involve the close at all.
    """
    _check_theta(theta)
    if h <= 0.0:
        raise DomainError(f"maximum {h} must be positive")
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"time {t} outside [0, 1]")
    mean, var = _mean_var_th(t, theta, h)
    return MomentPair(float(mean), float(var))


def _mean_var_theta(t, theta: float):
    t = np.asarray(t, dtype=float)
    left = t <= theta
    s_l = np.where(left, 1.0 - t / theta, 0.0)
    s_r = np.where(left, 0.0, (t - theta) / (1.0 - theta))
    eh = _SQRT_PI_OVER_2 * math.sqrt(theta)
    g_l = g11(s_l)
    g_r = g11(s_r)
    mean = np.where(
        left,
        eh - math.sqrt(theta) * g_l,
        eh - math.sqrt(1.0 - theta) * g_r,
    )
    m2_left = 2.0 * theta - 4.0 * theta * np.sqrt(s_l) + theta * (3.0 * s_l - s_l**2)
    var = np.where(
        left,
        m2_left - mean**2,
        (2.0 - math.pi / 2.0) * theta + (1.0 - theta) * (3.0 * s_r - s_r**2 - g_r**2),
    )
    return mean, np.maximum(var, 0.0)


def cond_moments_given_theta(t: float, theta: float) -> MomentPair:
    """Mean and variance of B(t) given the argmax location only."""
    _check_theta(theta)
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"time {t} outside [0, 1]")
    mean, var = _mean_var_theta(t, theta)
    return MomentPair(float(mean), float(var))


def b1_moments_given_theta(theta: float) -> MomentPair:
    """Moments of the final value given the argmax location.

    The variance 2 - pi/2 is independent of the location.  The mean
    constant is sqrt(pi/2): it is what the t >= argmax expectation formula
    gives at its right endpoint, and what the exact (argmax, max, close)
    sampler reproduces empirically.
    """
    _check_theta(theta)
    mean = _SQRT_PI_OVER_2 * (math.sqrt(theta) - math.sqrt(1.0 - theta))
    return MomentPair(mean, 2.0 - math.pi / 2.0)


def appendix_integral(kind: str, **params) -> float:
    """Closed forms of the Gaussian-sinh and Gaussian-weighted moment integrals.

    kind: one of ``xk_sinh_1``, ``xk_sinh_2``, ``xk_sinh_3`` (integrals of
    x^k exp(-a x^2) sinh(bx) over x > 0, needing a, b), ``G11_integral``,
    ``M2_weighted``, ``G12_integral`` (needing s in [0, 1]).
    """
    if kind in ("xk_sinh_1", "xk_sinh_2", "xk_sinh_3"):
        a = params["a"]
        b = params["b"]
        if a <= 0.0:
            raise DomainError(f"need a > 0, got {a}")
        e = math.exp(b * b / (4.0 * a))
        if kind == "xk_sinh_1":
            return math.sqrt(math.pi) * b * e / (4.0 * a**1.5)
        if kind == "xk_sinh_2":
            return (
                math.sqrt(math.pi) * (2.0 * a + b * b) * e * math.erf(b / (2.0 * math.sqrt(a)))
                / (8.0 * a**2.5)
                + b / (4.0 * a * a)
            )
        return math.sqrt(math.pi) * b * (6.0 * a + b * b) * e / (16.0 * a**3.5)
    s = params["s"]
    if not (0.0 <= s <= 1.0):
        raise DomainError(f"need s in [0, 1], got {s}")
    if kind == "G11_integral":
        return float(g11(s))
    if kind == "M2_weighted":
        return 3.0 * s - s * s
    if kind == "G12_integral":
        return 2.0 * math.sqrt(s)
    raise DomainError(f"unknown integral kind {kind!r}")


def curve_given_c_theta_h(times, cond: ExtremaTriple, label: str = "") -> MomentCurve:
    mean, var = _mean_var_cthc(np.asarray(times, dtype=float), cond.theta, cond.h, cond.c)
    return MomentCurve(np.asarray(times, dtype=float), mean, var, label)


def curve_given_theta_h(times, theta: float, h: float, label: str = "") -> MomentCurve:
    _check_theta(theta)
    if h <= 0.0:
        raise DomainError(f"maximum {h} must be positive")
    mean, var = _mean_var_th(np.asarray(times, dtype=float), theta, h)
    return MomentCurve(np.asarray(times, dtype=float), mean, var, label)


def curve_given_theta(times, theta: float, label: str = "") -> MomentCurve:
    _check_theta(theta)
    mean, var = _mean_var_theta(np.asarray(times, dtype=float), theta)
    return MomentCurve(np.asarray(times, dtype=float), mean, var, label)
