"""Discrete Brownian path generation and exact one-shot samplers.

Paths are driven by counter-based Philox streams keyed on
(seed, stream_index), so any stream can be regenerated independently of
worker count or generation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError

__all__ = [
    "RandomSource",
    "Path",
    "PathSummary",
    "SimulationConfig",
    "sample_standard_path",
    "sample_path_block",
    "shift_to_close",
    "shift_block",
    "summarize",
    "summarize_block",
    "sample_bridge_max",
    "sample_theta_m_b1",
    "sample_meander_marginal",
]


@dataclass(frozen=True)
class RandomSource:
    """A reproducible, independently addressable random stream."""

    seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def stream(self, index: int) -> "RandomSource":
        return RandomSource(self.seed, index)


@dataclass
class Path:
    """A discrete Brownian realization on [0, 1], values[0] = 0."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) < 2:
            raise DomainError("a path needs at least two grid values")
        if self.values[0] != 0.0:
            raise DomainError("paths start at the origin")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("path contains non-finite values")

    @property
    def n_steps(self) -> int:
        return len(self.values) - 1

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps


@dataclass(frozen=True)
class PathSummary:
    close: float
    high: float
    low: float
    argmax: float
    argmax_grid_index: int


@dataclass(frozen=True)
class SimulationConfig:
    n_sim: int
    n_steps: int
    seed: int
    n_bins: int
    dimensions: tuple[str, ...]
    close_targets: Optional[tuple[float, ...]] = None
    n_groups: int = 1

    def __post_init__(self) -> None:
        if self.n_sim < 1 or self.n_steps < 2 or self.n_bins < 2:
            raise DomainError("need n_sim >= 1, n_steps >= 2, n_bins >= 2")
        bad = set(self.dimensions) - {"close", "argmax", "high", "low"}
        if bad:
            raise DomainError(f"unknown conditioning dimensions {sorted(bad)}")


def _as_generator(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RandomSource) else rng


def sample_path_block(n_paths: int, n_steps: int, rng) -> np.ndarray:
    """Generate n_paths independent paths as a (n_paths, n_steps+1) array."""
    gen = _as_generator(rng)
    dt = 1.0 / n_steps
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = 0.0
    np.cumsum(gen.standard_normal((n_paths, n_steps)) * math.sqrt(dt), axis=1, out=out[:, 1:])
    return out


def sample_standard_path(n_steps: int, rng) -> Path:
    """One standard Brownian path with exact N(0, dt) increments."""
    if n_steps < 1:
        raise DomainError("need n_steps >= 1")
    return Path(sample_path_block(1, n_steps, rng)[0])


def shift_block(values: np.ndarray, c: float) -> np.ndarray:
    """Tilt each row linearly in t so its final value is exactly c."""
    n = values.shape[1] - 1
    tgrid = np.arange(n + 1) / n
    shifted = values - np.outer(values[:, -1] - c, tgrid)
    shifted[:, -1] = c
    return shifted


def shift_to_close(path: Path, c: float) -> Path:
    return Path(shift_block(path.values[None, :], c)[0])


def summarize_block(values: np.ndarray, gen: np.random.Generator) -> dict[str, np.ndarray]:
    """Extract (close, high, low, argmax) for each row.

    The argmax is refined off the grid with the vertex of the parabola
    through the three points around the grid maximum, clamped to one grid
    step; a maximum on either boundary gets a uniform draw inside the
    boundary interval.  One uniform per row is always consumed so the
    stream position does not depend on the data.
    """
    n_paths, width = values.shape
    n = width - 1
    dt = 1.0 / n
    rows = np.arange(n_paths)
    idx = values.argmax(axis=1)
    high = values[rows, idx]
    low = values.min(axis=1)
    close = values[:, -1]
    u = gen.random(n_paths)

    im = np.clip(idx - 1, 0, n)
    ip = np.clip(idx + 1, 0, n)
    ym = values[rows, im]
    yp = values[rows, ip]
    denom = ym - 2.0 * high + yp
    interior = (idx > 0) & (idx < n) & (denom != 0.0)
    offset = np.where(
        interior, dt * (ym - yp) / (2.0 * np.where(denom == 0.0, 1.0, denom)), 0.0
    )
    argmax = idx * dt + np.clip(offset, -dt, dt)
    argmax = np.where(idx == 0, u * dt, argmax)
    argmax = np.where(idx == n, 1.0 - u * dt, argmax)
    return {
        "close": close,
        "high": high,
        "low": low,
        "argmax": argmax,
        "argmax_grid_index": idx,
    }


def summarize(path: Path, rng) -> PathSummary:
    s = summarize_block(path.values[None, :], _as_generator(rng))
    return PathSummary(
        close=float(s["close"][0]),
        high=float(s["high"][0]),
        low=float(s["low"][0]),
        argmax=float(s["argmax"][0]),
        argmax_grid_index=int(s["argmax_grid_index"][0]),
    )


def sample_bridge_max(c: float, rng, size: Optional[int] = None):
    """Maximum of a Brownian bridge pinned at c, via the exponential mixture."""
    gen = _as_generator(rng)
    e = gen.exponential(size=size)
    return c / 2.0 + np.sqrt(c * c + 2.0 * e) / 2.0


def sample_theta_m_b1(rng, size: Optional[int] = None):
    """Exact joint sample of (argmax, maximum, final value).

    The argmax is an arcsine draw; the maximum and final value follow from
    two independent exponentials scaled by the two leg lengths.
    """
    gen = _as_generator(rng)
    u = gen.random(size)
    e1 = gen.exponential(size=size)
    e2 = gen.exponential(size=size)
    theta = (1.0 + np.cos(2.0 * math.pi * u)) / 2.0
    m = np.sqrt(2.0 * theta * e1)
    b1 = m - np.sqrt(2.0 * (1.0 - theta) * e2)
    return theta, m, b1


def sample_meander_marginal(t: float, c: float, rng, size: Optional[int] = None):
    """Marginal of the meander at time t, pinned to end at c at time 1.

    Uses the Bessel(3)-bridge representation sqrt((ct + sigma N)^2 + 2 E sigma^2)
    with sigma^2 = t(1-t); the squared linear term is required for the
    moments to match the transition-density integrals.
    """
    if not (0.0 < t <= 1.0):
        raise DomainError(f"time {t} outside (0, 1]")
    if c < 0.0:
        raise DomainError(f"endpoint {c} must be nonnegative")
    gen = _as_generator(rng)
    s2 = t * (1.0 - t)
    nrm = gen.standard_normal(size)
    e = gen.exponential(size=size)
    return np.sqrt((c * t + math.sqrt(s2) * nrm) ** 2 + 2.0 * e * s2)
