"""Closed-form densities for the extrema of Brownian motion on [0,1].

Covers the joint and marginal laws of (argmax, high, close), the
transition density of the Brownian meander, and the spliced conditional
densities of a path given (argmax, high) or (close, argmax, high).
All functions are pure and scalar; they raise :class:`DomainError`
outside their supported parameter ranges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "ExtremaTriple",
    "MeanderKernelParams",
    "PointMass",
    "THETA_EDGE",
    "g_kernel",
    "joint_density_theta_h_c",
    "density_theta_h_given_c",
    "density_theta_h",
    "density_h_given_theta",
    "density_h_c",
    "marginal_density_h",
    "marginal_density_theta",
    "density_theta_c",
    "meander_transition",
    "meander_reverse_transition",
    "spliced_density_given_thc",
    "joint_density_x_thc",
    "density_x_given_th",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)

# argmax values closer than this to 0 or 1 are rejected: the densities
# blow up as theta^{-3/2} and no quantile bin ever reaches there.
THETA_EDGE = 1e-9


def _check_theta(theta: float) -> None:
    if not (THETA_EDGE < theta < 1.0 - THETA_EDGE):
        raise DomainError(f"argmax location {theta} outside ({THETA_EDGE}, {1 - THETA_EDGE})")


@dataclass(frozen=True)
class ExtremaTriple:
    """The conditioning statistics (argmax location, maximum, final value)."""

    theta: float
    h: float
    c: float

    def __post_init__(self) -> None:
        _check_theta(self.theta)
        if self.h < 0.0:
            raise DomainError(f"maximum {self.h} must be nonnegative")
        if self.h < self.c:
            raise DomainError(f"maximum {self.h} below final value {self.c}")


@dataclass(frozen=True)
class MeanderKernelParams:
    """Intermediate symbols shared by the meander-moment integrals."""

    s: float
    t: float
    c: float

    @property
    def tau(self) -> float:
        return self.t - self.s

    @property
    def a(self) -> float:
        return self.t / (2.0 * self.s * self.tau)

    @property
    def b(self) -> float:
        return self.c / self.tau

    @property
    def kappa(self) -> float:
        return self.s / (1.0 - self.s)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.s * (1.0 - self.s))

    @property
    def mu(self) -> float:
        return math.sqrt(self.s / self.t)


@dataclass(frozen=True)
class PointMass:
    """Degenerate conditional law concentrated at a single value.

    Returned where a conditional density collapses (e.g. the path value at
    the argmax itself); callers needing moments read ``location`` directly.
    """

    location: float


def _phi(s: float, x: float) -> float:
    """Centered Gaussian density with variance s."""
    return math.exp(-x * x / (2.0 * s)) / math.sqrt(2.0 * math.pi * s)


def _normal_mass(s: float, a: float, b: float) -> float:
    """Mass of N(0, s) on the interval (a, b); s = 0 degenerates to a point at 0."""
    if s < 0.0:
        raise DomainError("variance must be nonnegative")
    if s == 0.0:
        lo = 0.5 * (1.0 + math.copysign(1.0, a)) if a != 0.0 else 0.5
        hi = 0.5 * (1.0 + math.copysign(1.0, b)) if b != 0.0 else 0.5
        return hi - lo
    r = math.sqrt(2.0 * s)
    return 0.5 * (math.erf(b / r) - math.erf(a / r))


def g_kernel(t: float, x: float, y: float) -> float:
    """Reflected heat kernel g_t(x, y) = phi_t(y - x) - phi_t(y + x)."""
    if t <= 0.0:
        raise DomainError(f"time increment {t} must be positive")
    return _phi(t, y - x) - _phi(t, y + x)


def _g_over_y(tau: float, x: float, y: float, extra: float) -> float:
    """Evaluate g_tau(x, y) / y * exp(extra), stable as y -> 0.

    Uses the identity g_tau(x, y) = 2 phi_tau(x) exp(-y^2/2tau) sinh(x y / tau),
    switching to the sinh series when the argument is small.
    """
    z = x * y / tau
    if abs(z) < 1e-4:
        # sinh(z)/z = 1 + z^2/6 + O(z^4)
        return (
            2.0 * x / tau * (1.0 + z * z / 6.0)
            * math.exp(-(x * x + y * y) / (2.0 * tau) + extra)
            / math.sqrt(2.0 * math.pi * tau)
        )
    d = math.exp(-(x - y) ** 2 / (2.0 * tau) + extra) - math.exp(-(x + y) ** 2 / (2.0 * tau) + extra)
    return d / (y * math.sqrt(2.0 * math.pi * tau))


def joint_density_theta_h_c(p: ExtremaTriple) -> float:
    """Joint density of (argmax, maximum, final value) for standard BM on [0,1]."""
    theta, h, c = p.theta, p.h, p.c
    return (
        h * (h - c) / (math.pi * theta**1.5 * (1.0 - theta) ** 1.5)
        * math.exp(-h * h / (2.0 * theta) - (h - c) ** 2 / (2.0 * (1.0 - theta)))
    )


def density_theta_h_given_c(theta: float, h: float, c: float) -> float:
    """Density of (argmax, maximum) conditional on the final value."""
    joint = joint_density_theta_h_c(ExtremaTriple(theta, h, c))
    return joint * SQRT_2PI * math.exp(c * c / 2.0)


def density_theta_h(theta: float, h: float) -> float:
    """Unconditional joint density of (argmax, maximum)."""
    _check_theta(theta)
    if h <= 0.0:
        raise DomainError(f"maximum {h} must be positive")
    return h * math.exp(-h * h / (2.0 * theta)) / (math.pi * theta**1.5 * math.sqrt(1.0 - theta))


def density_h_given_theta(h: float, theta: float) -> float:
    """Density of the maximum given its location: Rayleigh with scale sqrt(theta)."""
    _check_theta(theta)
    if h <= 0.0:
        raise DomainError(f"maximum {h} must be positive")
    return h / theta * math.exp(-h * h / (2.0 * theta))


def density_h_c(h: float, c: float) -> float:
    """Joint density of (maximum, final value)."""
    if h < 0.0 or h < c:
        raise DomainError(f"(h={h}, c={c}) violates h >= max(0, c)")
    z = 2.0 * h - c
    return math.sqrt(2.0 / math.pi) * z * math.exp(-z * z / 2.0)


def marginal_density_h(h: float) -> float:
    """Half-normal density of the maximum."""
    if h < 0.0:
        raise DomainError(f"maximum {h} must be nonnegative")
    return math.sqrt(2.0 / math.pi) * math.exp(-h * h / 2.0)


def marginal_density_theta(theta: float) -> float:
    """Arcsine density of the argmax location."""
    _check_theta(theta)
    return 1.0 / (math.pi * math.sqrt(theta * (1.0 - theta)))


def density_theta_c(theta: float, c: float) -> float:
    """Joint density of (argmax, final value).

    Obtained by integrating the three-variable joint density over the
    maximum; a single expression covers both signs of c via the lower
    integration limit max(0, c).
    """
    _check_theta(theta)
    sigma2 = theta * (1.0 - theta)
    sigma = math.sqrt(sigma2)
    lo = max(0.0, c)
    # after centering the Gaussian in h at theta*c, the shifted lower limit:
    l = lo - theta * c
    first = (l + (2.0 * theta - 1.0) * c) * math.exp(-c * c / 2.0 - l * l / (2.0 * sigma2)) / (math.pi * sigma)
    second = (1.0 - c * c) * math.exp(-c * c / 2.0) * math.erfc(l / (sigma * math.sqrt(2.0))) / SQRT_2PI
    return first + second


def meander_transition(s: float, x: float, t: float, y: float) -> float:
    """Transition density of the Brownian meander from (s, x) to (t, y).

    With s = 0 the one-point marginal at time t is returned and x is ignored.
    """
    if not (0.0 <= s < t <= 1.0):
        raise DomainError(f"need 0 <= s < t <= 1, got s={s}, t={t}")
    if y <= 0.0:
        return 0.0
    if s == 0.0:
        return 2.0 * y * t**-1.5 * math.exp(-y * y / (2.0 * t)) * _normal_mass(1.0 - t, 0.0, y)
    if x <= 0.0:
        raise DomainError(f"meander value {x} must be positive")
    return g_kernel(t - s, x, y) * _normal_mass(1.0 - t, 0.0, y) / _normal_mass(1.0 - s, 0.0, x)


def meander_reverse_transition(s: float, x: float, t: float, c: float) -> float:
    """Density of the meander at (s, x) given its later value c at time t."""
    if not (0.0 < s < t <= 1.0):
        raise DomainError(f"need 0 < s < t <= 1, got s={s}, t={t}")
    if c <= 0.0:
        raise DomainError(f"endpoint {c} must be positive")
    if x <= 0.0:
        return 0.0
    tau = t - s
    extra = c * c / (2.0 * t) - x * x / (2.0 * s)
    return _g_over_y(tau, x, c, extra) * x * (t / s) ** 1.5


def spliced_density_given_thc(x: float, t: float, cond: ExtremaTriple) -> float | PointMass:
    """Conditional density of B(t) given (argmax, maximum, final value).

    The path is two scaled meanders glued back to back at the argmax; the
    density is the corresponding reverse meander transition on each side.
    At the pinned times t in {0, argmax, 1} the law is a point mass and a
    :class:`PointMass` is returned instead of a number.
    """
    theta, h, c = cond.theta, cond.h, cond.c
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"time {t} outside [0, 1]")
    if t == theta:
        return PointMass(h)
    if t == 0.0:
        return PointMass(0.0)
    if t == 1.0:
        return PointMass(c)
    if h <= 0.0:
        raise DomainError("spliced density requires a strictly positive maximum")
    if x > h:
        return 0.0
    u = h - x
    if t < theta:
        extra = h * h / (2.0 * theta) - u * u / (2.0 * (theta - t))
        # g_t(u, h)/h * exp(extra), times the meander scaling prefactor
        return _g_over_y(t, u, h, extra) * u * (theta / (theta - t)) ** 1.5
    extra = (h - c) ** 2 / (2.0 * (1.0 - theta)) - u * u / (2.0 * (t - theta))
    return _g_over_y(1.0 - t, u, h - c, extra) * u * ((1.0 - theta) / (t - theta)) ** 1.5


def joint_density_x_thc(x: float, t: float, cond: ExtremaTriple) -> float | PointMass:
    """Joint density of (B(t), argmax, maximum, final value)."""
    theta, h, c = cond.theta, cond.h, cond.c
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"time {t} outside [0, 1]")
    if t == theta:
        return PointMass(h)
    if t == 0.0:
        return PointMass(0.0)
    if t == 1.0:
        return PointMass(c)
    if x > h:
        return 0.0
    u = h - x
    if t < theta:
        return (
            (h - c) * u / (math.pi * (1.0 - theta) ** 1.5 * (theta - t) ** 1.5)
            * g_kernel(t, u, h)
            * math.exp(-u * u / (2.0 * (theta - t)) - (h - c) ** 2 / (2.0 * (1.0 - theta)))
        )
    return (
        h * u / (math.pi * theta**1.5 * (t - theta) ** 1.5)
        * g_kernel(1.0 - t, u, h - c)
        * math.exp(-u * u / (2.0 * (t - theta)) - h * h / (2.0 * theta))
    )


def density_x_given_th(x: float, t: float, theta: float, h: float) -> float | PointMass:
    """Conditional density of B(t) given (argmax, maximum), close integrated out."""
    _check_theta(theta)
    if h <= 0.0:
        raise DomainError(f"maximum {h} must be positive")
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"time {t} outside [0, 1]")
    if t == theta:
        return PointMass(h)
    if t == 0.0:
        return PointMass(0.0)
    if x > h:
        return 0.0
    u = h - x
    norm = density_theta_h(theta, h)
    if t < theta:
        joint = (
            u / (math.pi * math.sqrt(1.0 - theta) * (theta - t) ** 1.5)
            * g_kernel(t, u, h)
            * math.exp(-u * u / (2.0 * (theta - t)))
        )
        return joint / norm
    if t == 1.0:
        erf_term = 1.0 if u > 0.0 else 0.0
    else:
        erf_term = math.erf(u / math.sqrt(2.0 * (1.0 - t)))
    joint = (
        h * u / (math.pi * theta**1.5 * (t - theta) ** 1.5)
        * erf_term
        * math.exp(-u * u / (2.0 * (t - theta)) - h * h / (2.0 * theta))
    )
    return joint / norm
