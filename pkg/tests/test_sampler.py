import math

import numpy as np
import pytest
from scipy.stats import chi2, norm

from bmcond import sampler
from bmcond.errors import DomainError
from bmcond.sampler import Path, RandomSource, SimulationConfig

import oracles

# grid maxima understate the continuous maximum by beta1*sqrt(dt) on
# average (Euler-scheme extremum deficit); distributional tests against
# the continuous law shift the sample mean back by this amount
BETA1 = 0.5826


def test_random_source_determinism_and_streams():
    a = RandomSource(7, 3).generator().standard_normal(8)
    b = RandomSource(7, 3).generator().standard_normal(8)
    assert np.array_equal(a, b)
    c = RandomSource(7, 4).generator().standard_normal(8)
    assert not np.array_equal(a, c)
    assert RandomSource(7).stream(4) == RandomSource(7, 4)


def test_path_validation():
    Path(np.array([0.0, 0.5, -0.2]))
    with pytest.raises(DomainError):
        Path(np.array([0.1, 0.5]))
    with pytest.raises(DomainError):
        Path(np.array([0.0, np.nan]))
    with pytest.raises(DomainError):
        Path(np.array([0.0]))
    p = Path(np.zeros(11))
    assert p.n_steps == 10
    assert p.dt == pytest.approx(0.1)


def test_simulation_config_validation():
    SimulationConfig(10, 8, 1, 4, ("close", "high"))
    with pytest.raises(DomainError):
        SimulationConfig(0, 8, 1, 4, ())
    with pytest.raises(DomainError):
        SimulationConfig(10, 8, 1, 1, ())
    with pytest.raises(DomainError):
        SimulationConfig(10, 8, 1, 4, ("volume",))


def test_sample_standard_path_repeatable_and_calibrated():
    p1 = sampler.sample_standard_path(64, RandomSource(3, 1))
    p2 = sampler.sample_standard_path(64, RandomSource(3, 1))
    assert np.array_equal(p1.values, p2.values)
    assert p1.values[0] == 0.0

    n, steps = 100_000, 256
    block = sampler.sample_path_block(n, steps, RandomSource(3, 2))
    close = block[:, -1]
    assert close.var() == pytest.approx(1.0, abs=0.02)
    high = block.max(axis=1) + BETA1 / math.sqrt(steps)
    assert high.mean() == pytest.approx(math.sqrt(2.0 / math.pi), abs=0.01)


def test_shift_to_close():
    path = sampler.sample_standard_path(32, RandomSource(11))
    c = 0.5
    shifted = sampler.shift_to_close(path, c)
    assert shifted.values[-1] == c
    assert shifted.values[0] == 0.0
    # the tilt is linear in t
    t = np.arange(33) / 32
    diff = path.values - shifted.values
    expected = (path.values[-1] - c) * t
    assert np.allclose(diff, expected, atol=1e-12)
    # already at the target -> unchanged
    again = sampler.shift_to_close(shifted, c)
    assert np.allclose(again.values, shifted.values, atol=1e-12)
    # two-step shift equals the direct shift
    via_zero = sampler.shift_to_close(sampler.shift_to_close(path, 0.0), c)
    assert np.allclose(via_zero.values, shifted.values, atol=1e-12)


def test_summarize_parabola_vertex():
    # three points (0, 0), (0.1, 1), (0.2, 0.5): vertex offset dt*(ym-yp)/(2*(ym-2y+yp))
    values = np.zeros(11)
    values[4], values[5], values[6] = 0.0, 1.0, 0.5
    s = sampler.summarize(Path(values), RandomSource(0))
    offset = 0.1 * (0.0 - 0.5) / (2.0 * (0.0 - 2.0 + 0.5))
    assert s.argmax == pytest.approx(0.5 + offset)
    assert offset == pytest.approx(0.016667, abs=1e-5)
    assert s.high == 1.0
    assert s.argmax_grid_index == 5


def test_summarize_edge_and_symmetric_cases():
    rng = RandomSource(4)
    # strictly increasing path: argmax uniform inside the last interval
    inc = Path(np.linspace(0.0, 1.0, 11))
    draws = [sampler.summarize(inc, rng.stream(i)).argmax for i in range(200)]
    assert all(1.0 - 0.1 <= d <= 1.0 for d in draws)
    assert len(set(np.round(draws, 12))) > 100
    # symmetric tent: vertex at the grid point
    tent = np.concatenate([np.linspace(0.0, 1.0, 6), np.linspace(1.0, 0.0, 6)[1:]])
    s = sampler.summarize(Path(tent), rng)
    assert s.argmax == pytest.approx(0.5)
    # two-way tie at the top: the parabola vertex lands midway between them
    flat = np.zeros(11)
    flat[4:6] = 1.0
    s = sampler.summarize(Path(flat), rng)
    assert s.argmax_grid_index == 4
    assert s.argmax == pytest.approx(0.45)


def test_summarize_consistent_with_shift():
    # summarizing shifted values equals summarizing the tilted array directly
    block = sampler.sample_path_block(50, 128, RandomSource(9))
    shifted = sampler.shift_block(block, 0.7)
    gen_a = RandomSource(9, 1).generator()
    gen_b = RandomSource(9, 1).generator()
    a = sampler.summarize_block(shifted, gen_a)
    row = sampler.summarize(Path(shifted[17]), gen_b)  # stream offset differs only in draws
    assert a["close"][17] == row.close
    assert a["high"][17] == row.high
    assert a["low"][17] == row.low
    assert np.all(a["high"] >= a["close"])
    assert np.all(a["high"] >= 0.0)  # every shifted path starts at 0
    assert np.all(np.abs(a["argmax"] - a["argmax_grid_index"] / 128.0) <= 1.0 / 128.0 + 1e-12)


def test_sample_bridge_max_boundaries_and_ks():
    # support boundary: exponential draw of 0 gives max(c, 0)
    class ZeroGen:
        def exponential(self, size=None):
            return 0.0 if size is None else np.zeros(size)

    assert sampler.sample_bridge_max(0.8, ZeroGen()) == pytest.approx(0.8)
    assert sampler.sample_bridge_max(-0.8, ZeroGen()) == pytest.approx(0.0)

    n = 100_000
    crit = 1.628 / math.sqrt(n)  # 1% Kolmogorov critical value
    for i, c in enumerate((-1.0, 0.0, 1.0)):
        h = sampler.sample_bridge_max(c, RandomSource(21, i), size=n)
        # closed-form CDF of the bridge maximum: 1 - exp(-2h(h-c))
        ks = oracles.ks_statistic(h, lambda x: 1.0 - np.exp(-2.0 * x * (x - c)))
        assert ks < crit
    # c = 0 reduces to a Rayleigh(1/2): h^2 ~ E/2
    h0 = sampler.sample_bridge_max(0.0, RandomSource(22), size=n)
    assert (h0**2).mean() == pytest.approx(0.5, abs=0.01)


def test_sample_theta_m_b1_marginals():
    n = 100_000
    crit = 1.628 / math.sqrt(n)
    theta, m, b1 = sampler.sample_theta_m_b1(RandomSource(31), size=n)
    assert np.all((theta >= 0) & (theta <= 1))
    assert np.all(m >= 0)
    assert np.all(m >= b1)
    assert oracles.ks_statistic(theta, oracles.arcsine_cdf) < crit
    assert oracles.ks_statistic(m, oracles.half_normal_cdf) < crit
    assert oracles.ks_statistic(b1, norm.cdf) < crit


def test_sample_meander_marginal_moments():
    from bmcond import moments

    n = 100_000
    t, c = 0.5, 1.0
    x = sampler.sample_meander_marginal(t, c, RandomSource(41), size=n)
    assert np.all(x >= 0)
    assert x.mean() == pytest.approx(moments.meander_m1(t, 1.0, c), rel=0.01)
    assert (x**2).mean() == pytest.approx(moments.meander_m2(t, 1.0, c), rel=0.01)
    # a second parameter point, against quadrature of the reverse transition
    t2, c2 = 0.3, 0.4
    x2 = sampler.sample_meander_marginal(t2, c2, RandomSource(42), size=n)
    assert x2.mean() == pytest.approx(oracles.reverse_meander_moment(1, t2, 1.0, c2), rel=0.01)
    # endpoint consistency: t = 1 with zeroed noise returns c exactly
    class ZeroGen:
        def standard_normal(self, size=None):
            return 0.0 if size is None else np.zeros(size)

        def exponential(self, size=None):
            return 0.0 if size is None else np.zeros(size)

    assert sampler.sample_meander_marginal(1.0, 0.7, ZeroGen()) == pytest.approx(0.7)
    with pytest.raises(DomainError):
        sampler.sample_meander_marginal(0.0, 1.0, RandomSource(1))
    with pytest.raises(DomainError):
        sampler.sample_meander_marginal(0.5, -1.0, RandomSource(1))


def test_discrete_marginals_chi_square():
    n, steps, nb = 100_000, 1024, 20
    src = RandomSource(123)
    block = sampler.sample_path_block(n, steps, src)
    s = sampler.summarize_block(block, src.stream(1).generator())
    q = np.arange(1, nb) / nb
    crit_1pct = chi2.ppf(0.99, nb - 1)

    def stat(x, edges):
        counts = np.histogram(x, np.concatenate(([-np.inf], edges, [np.inf])))[0]
        return ((counts - n / nb) ** 2 / (n / nb)).sum()

    assert stat(s["close"], norm.ppf(q)) < crit_1pct
    # the high sample is mean-shift corrected for the grid-extremum deficit
    assert stat(s["high"] + BETA1 / math.sqrt(steps), norm.ppf((1 + q) / 2)) < crit_1pct
    # argmax at 5% with the parabolic interpolation
    assert stat(s["argmax"], np.sin(np.pi * q / 2.0) ** 2) < chi2.ppf(0.95, nb - 1)
