"""Quantile binning, streaming per-bin moment accumulation, and ranking.

The pipeline bins path summaries into equal-probability buckets, keeps a
one-pass mean / squared-deviation accumulator per (bin, time) cell, and
compares the resulting empirical curves with the closed-form ones.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtri

from . import analytic
from .errors import CapacityError, DomainError, InsufficientDataError
from .moments import MomentCurve
from .sampler import (
    RandomSource,
    SimulationConfig,
    sample_path_block,
    shift_block,
    summarize_block,
)

__all__ = [
    "BinGrid",
    "BinAccumulator",
    "CurveStore",
    "WorstFitReport",
    "BinRecord",
    "SimulationResult",
    "build_quantile_edges",
    "conditional_edges_given_close",
    "accumulate",
    "empirical_curve",
    "mse_rank",
    "time_avg_variance",
    "run_simulation",
]

CHUNK_SIZE = 8192
DEFAULT_MIN_COUNT = 50


# ---------------------------------------------------------------------------
# quantile edges

def build_quantile_edges(
    dimension: str,
    n_bins: int,
    source: str = "analytic",
    sample: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Equal-probability bin edges for one conditioning dimension.

    Returns n_bins + 1 edges with infinite outer bounds.  Analytic mode
    inverts the known marginal CDFs (arcsine for argmax, half-normal for
    high and low, standard normal for close); empirical mode uses order
    statistics of ``sample``.
    """
    if n_bins < 2:
        raise DomainError("need n_bins >= 2")
    q = np.arange(1, n_bins) / n_bins
    if source == "empirical":
        if sample is None or len(sample) < 10 * n_bins:
            raise DomainError(f"empirical edges need at least {10 * n_bins} samples")
        interior = np.quantile(np.asarray(sample, dtype=float), q, method="inverted_cdf")
    elif source == "analytic":
        if dimension == "argmax":
            interior = np.sin(math.pi * q / 2.0) ** 2
        elif dimension == "high":
            interior = ndtri((1.0 + q) / 2.0)
        elif dimension == "close":
            interior = ndtri(q)
        elif dimension == "low":
            interior = -ndtri((2.0 - q) / 2.0)
        else:
            raise DomainError(f"no analytic marginal for dimension {dimension!r}")
    else:
        raise DomainError(f"unknown edge source {source!r}")
    return np.concatenate(([-np.inf], interior, [np.inf]))


def conditional_edges_given_close(dimension: str, n_bins: int, c: float) -> np.ndarray:
    """Quantile edges for a summary statistic of paths pinned to close c.

    The bridge maximum has CDF 1 - exp(-2h(h-c)), invertible in closed
    form; the minimum follows by reflection; the argmax CDF is inverted
    numerically from the (argmax, close) joint density.
    """
    if n_bins < 2:
        raise DomainError("need n_bins >= 2")
    q = np.arange(1, n_bins) / n_bins
    if dimension == "high":
        interior = (c + np.sqrt(c * c - 2.0 * np.log1p(-q))) / 2.0
    elif dimension == "low":
        # -min of a bridge to c is the max of a bridge to -c
        qr = q[::-1]
        interior = -(-c + np.sqrt(c * c - 2.0 * np.log1p(-qr))) / 2.0
    elif dimension == "argmax":
        grid = np.linspace(1e-7, 1.0 - 1e-7, 4001)
        dens = np.array([analytic.density_theta_c(g, c) for g in grid])
        cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0 * np.diff(grid))))
        cdf /= cdf[-1]
        interior = np.interp(q, cdf, grid)
    else:
        raise DomainError(f"no conditional edges for dimension {dimension!r}")
    return np.concatenate(([-np.inf], interior, [np.inf]))


@dataclass(frozen=True)
class BinGrid:
    """Per-dimension quantile edges with flat bin addressing."""

    dimensions: tuple[str, ...]
    edges: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.dimensions) != len(self.edges):
            raise DomainError("one edge vector per dimension required")
        for e in self.edges:
            if np.any(np.diff(e) <= 0.0):
                raise DomainError("edges must be strictly increasing")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(e) - 1 for e in self.edges)

    @property
    def n_bins(self) -> int:
        return int(np.prod(self.shape)) if self.dimensions else 1

    def locate(self, summaries: dict[str, np.ndarray]) -> np.ndarray:
        """Flat bin index for each summarised path (C order over dimensions)."""
        if not self.dimensions:
            n = len(next(iter(summaries.values())))
            return np.zeros(n, dtype=np.int64)
        flat = np.zeros(len(summaries[self.dimensions[0]]), dtype=np.int64)
        for dim, edges in zip(self.dimensions, self.edges):
            k = np.searchsorted(edges[1:-1], summaries[dim], side="right")
            flat = flat * (len(edges) - 1) + k
        return flat

    def unravel(self, bin_id: int) -> tuple[int, ...]:
        return tuple(np.unravel_index(bin_id, self.shape)) if self.dimensions else ()


# ---------------------------------------------------------------------------
# streaming accumulation

_trapz = getattr(np, "trapezoid", np.trapz)


@dataclass
class BinAccumulator:
    """One-pass mean/variance accumulator for a single bin's time vectors."""

    n_times: int
    count: int = 0
    mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    m2: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.mean is None:
            self.mean = np.zeros(self.n_times)
        if self.m2 is None:
            self.m2 = np.zeros(self.n_times)

    def update(self, values: np.ndarray) -> None:
        self.count += 1
        delta = values - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (values - self.mean)

    def merge(self, other: "BinAccumulator") -> None:
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean.copy(), other.m2.copy()
            return
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / n)
        self.m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / n)
        self.count = n

    def variance(self) -> np.ndarray:
        if self.count < 2:
            raise InsufficientDataError(f"variance needs count >= 2, have {self.count}")
        return self.m2 / (self.count - 1)


def _block_stats(keys: np.ndarray, values: np.ndarray):
    """Per-key (count, mean, m2) for one chunk, via sort + reduceat."""
    order = np.argsort(keys, kind="stable")
    ks = keys[order]
    sorted_vals = values[order]
    starts = np.flatnonzero(np.concatenate(([True], ks[1:] != ks[:-1])))
    uniq = ks[starts]
    counts = np.diff(np.concatenate((starts, [len(ks)])))
    sums = np.add.reduceat(sorted_vals, starts, axis=0)
    sumsq = np.add.reduceat(sorted_vals * sorted_vals, starts, axis=0)
    means = sums / counts[:, None]
    m2 = np.maximum(sumsq - counts[:, None] * means * means, 0.0)
    return uniq, counts, means, m2


class CurveStore:
    """Array-backed per-(group, bin, time) accumulator with a memory cap.

    Groups shard the paths by global index modulo n_groups; the final
    curves merge the groups in fixed index order, and the group spread
    gives a cheap Monte Carlo error estimate.
    """

    def __init__(
        self,
        grid: BinGrid,
        n_times: int,
        n_groups: int = 1,
        max_cells: int = 50_000_000,
    ):
        cells = 2 * grid.n_bins * n_times * n_groups
        if cells > max_cells:
            raise CapacityError(
                f"store would need {cells} cells "
                f"({grid.n_bins} bins x {n_times} times x {n_groups} groups x 2); "
                f"cap is {max_cells}"
            )
        self.grid = grid
        self.n_times = n_times
        self.n_groups = n_groups
        self.counts = np.zeros((n_groups, grid.n_bins), dtype=np.int64)
        self.mean = np.zeros((n_groups, grid.n_bins, n_times))
        self.m2 = np.zeros((n_groups, grid.n_bins, n_times))
        # count-weighted sums of (close, argmax, high, low) per bin
        self.param_sums = np.zeros((grid.n_bins, 4))
        self._merged = None

    def chunk_stats(self, bin_ids: np.ndarray, values: np.ndarray, start_index: int):
        groups = (start_index + np.arange(len(bin_ids))) % self.n_groups
        keys = bin_ids * self.n_groups + groups
        return _block_stats(keys, values)

    def apply_stats(self, stats, param_sums: np.ndarray) -> None:
        uniq, counts, means, m2 = stats
        b = uniq // self.n_groups
        g = uniq % self.n_groups
        n_a = self.counts[g, b].astype(float)
        mean_a = self.mean[g, b]
        m2_a = self.m2[g, b]
        n = n_a + counts
        delta = means - mean_a
        w = (counts / n)[:, None]
        self.mean[g, b] = mean_a + delta * w
        self.m2[g, b] = m2_a + m2 + delta**2 * (n_a[:, None] * w)
        self.counts[g, b] += counts
        self.param_sums += param_sums
        self._merged = None

    def add_block(
        self,
        bin_ids: np.ndarray,
        values: np.ndarray,
        params: np.ndarray,
        start_index: int = 0,
    ) -> None:
        stats = self.chunk_stats(bin_ids, values, start_index)
        psums = np.zeros_like(self.param_sums)
        np.add.at(psums, bin_ids, params)
        self.apply_stats(stats, psums)

    def add_path(self, bin_id: int, values: np.ndarray, params: np.ndarray, index: int = 0) -> None:
        self.add_block(
            np.array([bin_id], dtype=np.int64), values[None, :], params[None, :], index
        )

    def merged(self):
        """(counts, mean, m2) per bin after folding groups in index order."""
        if self._merged is None:
            n = self.counts[0].astype(float)
            mean = self.mean[0].copy()
            m2 = self.m2[0].copy()
            for g in range(1, self.n_groups):
                n_b = self.counts[g].astype(float)
                delta = self.mean[g] - mean
                tot = np.maximum(n + n_b, 1.0)
                w = (n_b / tot)[:, None]
                mean = mean + delta * w
                m2 = m2 + self.m2[g] + delta**2 * (n[:, None] * w)
                n = n + n_b
            self._merged = (n.astype(np.int64), mean, m2)
        return self._merged

    def bin_curve(self, bin_id: int, times: np.ndarray, label: str = "") -> MomentCurve:
        counts, mean, m2 = self.merged()
        n = counts[bin_id]
        if n < 2:
            raise InsufficientDataError(f"bin {bin_id} has {n} paths")
        return MomentCurve(times, mean[bin_id], m2[bin_id] / (n - 1), label)

    def group_error_floor(self, bin_id: int):
        """Per-time variance of the overall mean and variance estimates.

        Estimated from the spread of the group-wise curves; requires at
        least two populated groups.
        """
        counts = self.counts[:, bin_id]
        live = counts >= 2
        g = int(live.sum())
        if g < 2:
            raise InsufficientDataError("error floor needs >= 2 populated groups")
        means = self.mean[live, bin_id]
        variances = self.m2[live, bin_id] / (counts[live, None] - 1)
        floor_mean = means.var(axis=0, ddof=1) / g
        floor_var = variances.var(axis=0, ddof=1) / g
        return floor_mean, floor_var

    def representatives(self) -> np.ndarray:
        counts = self.counts.sum(axis=0)
        with np.errstate(invalid="ignore"):
            reps = self.param_sums / np.maximum(counts, 1)[:, None]
        return reps


def accumulate(summary, path, grid: BinGrid, store: CurveStore, index: int = 0) -> CurveStore:
    """Route one summarised path into its bin of ``store``."""
    vals = {
        "close": np.array([summary.close]),
        "argmax": np.array([summary.argmax]),
        "high": np.array([summary.high]),
        "low": np.array([summary.low]),
    }
    bin_id = int(grid.locate(vals)[0])
    params = np.array([summary.close, summary.argmax, summary.high, summary.low])
    store.add_path(bin_id, np.asarray(path.values, dtype=float), params, index)
    return store


def empirical_curve(acc: BinAccumulator, times: np.ndarray, label: str = "") -> MomentCurve:
    """Sample mean and unbiased sample variance per time for one bin."""
    return MomentCurve(times, acc.mean.copy(), acc.variance(), label)


# ---------------------------------------------------------------------------
# ranking and the variance table

@dataclass(frozen=True)
class BinRecord:
    """One populated bin: identity, representative parameters, curves."""

    key: str
    count: int
    params: dict[str, float]
    curve: MomentCurve
    floor_mean: Optional[np.ndarray] = None
    floor_var: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RankedBin:
    key: str
    params: dict[str, float]
    mse_mean: float
    mse_var: float


@dataclass(frozen=True)
class WorstFitReport:
    marks: tuple[float, ...]
    ranked_by_mean: tuple[RankedBin, ...]
    ranked_by_var: tuple[RankedBin, ...]
    selected_mean: dict[float, RankedBin]
    selected_var: dict[float, RankedBin]


def _time_avg(values: np.ndarray, times: np.ndarray) -> float:
    return float(_trapz(values, times))


def mse_rank(
    records: Sequence[BinRecord],
    analytic_curve_fn: Callable[[dict[str, float], np.ndarray], tuple[np.ndarray, np.ndarray]],
    quantile_marks: Sequence[float] = (5.0, 2.0, 1.0, 0.2),
    min_count: int = DEFAULT_MIN_COUNT,
) -> WorstFitReport:
    """Rank bins by time-averaged squared gap to the analytic curves.

    Mean and variance are ranked separately; the report carries the bin
    sitting at each requested worst-quantile mark.
    """
    ranked = []
    for rec in records:
        if rec.count < min_count:
            continue
        am, av = analytic_curve_fn(rec.params, rec.curve.times)
        mse_m = _time_avg((rec.curve.means - am) ** 2, rec.curve.times)
        mse_v = _time_avg((rec.curve.variances - av) ** 2, rec.curve.times)
        ranked.append(RankedBin(rec.key, rec.params, mse_m, mse_v))
    if not ranked:
        raise InsufficientDataError("no bins meet the minimum count")
    by_mean = tuple(sorted(ranked, key=lambda r: -r.mse_mean))
    by_var = tuple(sorted(ranked, key=lambda r: -r.mse_var))
    n = len(ranked)
    sel_m = {}
    sel_v = {}
    for mark in quantile_marks:
        idx = min(n - 1, int(round(mark / 100.0 * n)))
        sel_m[mark] = by_mean[idx]
        sel_v[mark] = by_var[idx]
    return WorstFitReport(tuple(quantile_marks), by_mean, by_var, sel_m, sel_v)


# ---------------------------------------------------------------------------
# simulation pipeline

@dataclass
class SimulationResult:
    config: SimulationConfig
    times: np.ndarray
    grids: dict[str, BinGrid]
    stores: dict[str, CurveStore]
    targets: Optional[tuple[float, ...]]

    def records(self, min_count: int = 2) -> list[BinRecord]:
        out = []
        for key, store in self.stores.items():
            counts, mean, m2 = store.merged()
            reps = store.representatives()
            for b in range(store.grid.n_bins):
                if counts[b] < min_count:
                    continue
                params = {
                    "close": reps[b, 0],
                    "argmax": reps[b, 1],
                    "high": reps[b, 2],
                    "low": reps[b, 3],
                }
                if self.targets is not None:
                    params["close"] = float(key)
                curve = MomentCurve(self.times, mean[b], m2[b] / (counts[b] - 1))
                fm = fv = None
                if store.n_groups >= 2:
                    try:
                        fm, fv = store.group_error_floor(b)
                    except InsufficientDataError:
                        pass
                out.append(BinRecord(f"{key}/{b}", int(counts[b]), params, curve, fm, fv))
        return out

    def total_count(self) -> int:
        return int(sum(s.counts.sum() for s in self.stores.values()))


def time_avg_variance(result: SimulationResult, min_count: int = DEFAULT_MIN_COUNT) -> float:
    """Count-weighted average over bins of the time-averaged bin variance.

    With close targets each shifted sub-ensemble carries equal weight
    (targets sit at equal-probability quantiles of the close).
    """
    per_store = []
    for store in result.stores.values():
        counts, _, m2 = store.merged()
        live = counts >= max(min_count, 2)
        if not np.any(live):
            raise InsufficientDataError("no bins meet the minimum count")
        variances = m2[live] / (counts[live, None] - 1)
        avg_t = _trapz(variances, result.times, axis=1)
        per_store.append(float(np.sum(avg_t * counts[live]) / np.sum(counts[live])))
    return float(np.mean(per_store))


def _target_grid(dims: tuple[str, ...], n_bins: int, c: float) -> BinGrid:
    return BinGrid(dims, tuple(conditional_edges_given_close(d, n_bins, c) for d in dims))


def _plain_grid(dims: tuple[str, ...], n_bins: int) -> BinGrid:
    return BinGrid(dims, tuple(build_quantile_edges(d, n_bins) for d in dims))


def default_close_targets(n: int) -> tuple[float, ...]:
    """Midpoint quantiles of the standard normal close distribution."""
    return tuple(float(ndtri((i + 0.5) / n)) for i in range(n))


_PARAM_ORDER = ("close", "argmax", "high", "low")


def _chunk_layout(n_sim: int) -> list[tuple[int, int, int]]:
    out = []
    start = 0
    chunk = 0
    while start < n_sim:
        count = min(CHUNK_SIZE, n_sim - start)
        out.append((chunk, start, count))
        start += count
        chunk += 1
    return out


def run_simulation(
    config: SimulationConfig,
    threads: int = 1,
    max_cells: int = 50_000_000,
) -> SimulationResult:
    """Simulate, summarise and bin paths according to ``config``.

    With close targets the whole ensemble is tilted to each target in
    turn and binned in the remaining dimensions; otherwise the raw paths
    are binned directly.  Chunks are keyed by (seed, chunk index) and the
    merge order is fixed, so the result is independent of thread count.
    """
    n_steps = config.n_steps
    times = np.arange(n_steps + 1) / n_steps
    use_targets = config.close_targets is not None and "close" in config.dimensions
    if use_targets:
        rem = tuple(d for d in config.dimensions if d != "close")
        targets = tuple(config.close_targets)
        grids = {f"{c:g}": _target_grid(rem, config.n_bins, c) for c in targets}
    else:
        targets = None
        grids = {"all": _plain_grid(config.dimensions, config.n_bins)}
    stores = {
        key: CurveStore(grid, n_steps + 1, config.n_groups, max_cells)
        for key, grid in grids.items()
    }
    source = RandomSource(config.seed)

    def _payload(store, summ, values, start):
        ids = store.grid.locate(summ)
        params = np.column_stack([summ[d] for d in _PARAM_ORDER])
        psums = np.zeros_like(store.param_sums)
        np.add.at(psums, ids, params)
        return store.chunk_stats(ids, values, start), psums

    def compute_chunk(chunk_idx: int, start: int, count: int):
        # pure per-chunk work; the (small) grouped stats are merged by the
        # caller in chunk order, so thread count never changes the result
        gen = source.stream(chunk_idx).generator()
        block = sample_path_block(count, n_steps, gen)
        payloads = {}
        if targets is None:
            summ = summarize_block(block, gen)
            payloads["all"] = _payload(stores["all"], summ, block, start)
        else:
            for c in targets:
                shifted = shift_block(block, c)
                summ = summarize_block(shifted, gen)
                payloads[f"{c:g}"] = _payload(stores[f"{c:g}"], summ, shifted, start)
        return payloads

    def _apply(payloads):
        for key, (stats, psums) in payloads.items():
            stores[key].apply_stats(stats, psums)

    layout = _chunk_layout(config.n_sim)
    if threads <= 1:
        for chunk_idx, start, count in layout:
            _apply(compute_chunk(chunk_idx, start, count))
    else:
        from collections import deque

        with ThreadPoolExecutor(max_workers=threads) as pool:
            pending: deque = deque()
            it = iter(layout)
            done = False
            while pending or not done:
                while not done and len(pending) < threads + 2:
                    try:
                        chunk_idx, start, count = next(it)
                    except StopIteration:
                        done = True
                        break
                    pending.append(pool.submit(compute_chunk, chunk_idx, start, count))
                if pending:
                    _apply(pending.popleft().result())
    return SimulationResult(config, times, grids, stores, targets)
