import math

import numpy as np
import pytest
from scipy.integrate import quad

from bmcond import analytic, moments
from bmcond.analytic import ExtremaTriple
from bmcond.errors import DomainError

import oracles


MEANDER_GRID = [
    (s, t, c)
    for s in (0.1, 0.3, 0.5, 0.7, 0.9)
    for t in (0.95, 1.0)
    for c in (0.05, 0.4, 1.0, 2.2)
    if s < t
]


def test_meander_moments_match_reverse_transition_quadrature():
    for s, t, c in MEANDER_GRID:
        m1 = oracles.reverse_meander_moment(1, s, t, c)
        m2 = oracles.reverse_meander_moment(2, s, t, c)
        assert moments.meander_m1(s, t, c) == pytest.approx(m1, rel=1e-7)
        assert moments.meander_m2(s, t, c) == pytest.approx(m2, rel=1e-7)


def test_meander_moment_endpoints():
    # the pinned end returns c, the free origin returns 0
    assert moments.meander_m1(1.0, 1.0, 0.7) == 0.7
    assert moments.meander_m1(0.0, 1.0, 0.7) == 0.0
    assert moments.meander_m2(0.0, 1.0, 0.7) == 0.0
    assert moments.meander_var(1.0, 0.7) == 0.0
    assert moments.meander_var(0.0, 0.7) == 0.0


def test_meander_small_c_taylor_branch_is_smooth():
    s, t = 0.4, 1.0
    # straddle the series switch; values must vary smoothly through it
    cs = np.array([1e-9, 1e-6, 1e-4, 5e-4, 1e-2])
    vals = np.array([moments.meander_m1(s, t, c) for c in cs])
    limit = moments.meander_m1(s, t, 0.0)
    assert np.all(np.abs(vals - limit) < 1e-3)
    assert np.all(np.diff(vals) >= -1e-12)


def test_g11_endpoints_and_midpoint():
    assert moments.g11(0.0) == 0.0
    assert moments.g11(1.0) == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-14)
    # direct quadrature of the Gaussian-weighted integral it represents:
    # g11(s) = E[min(|N|*something)] reduces to the closed form below
    s = 0.37
    expected = math.sqrt(2.0 / math.pi) * (math.atan(math.sqrt(s / (1 - s))) + math.sqrt(s * (1 - s)))
    assert moments.g11(s) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(DomainError):
        moments.g11(1.5)


@pytest.mark.parametrize(
    "cond",
    [
        ExtremaTriple(0.4, 1.2, -0.3),
        ExtremaTriple(0.75, 0.6, 0.5),
        ExtremaTriple(0.1, 2.0, 1.9),
    ],
)
def test_cthc_moments_match_spliced_density(cond):
    for t in (0.07, 0.5 * cond.theta, 0.99 * cond.theta, cond.theta + 0.01, 0.95):
        m1 = oracles.spliced_moment(1, t, cond)
        m2 = oracles.spliced_moment(2, t, cond)
        pair = moments.cond_moments_given_c_theta_h(t, cond)
        assert pair.mean == pytest.approx(m1, rel=1e-6, abs=1e-9)
        assert pair.variance == pytest.approx(m2 - m1 * m1, rel=1e-5, abs=1e-9)


def test_th_moments_match_density_quadrature():
    theta, h = 0.45, 1.1
    for t in (0.1, 0.44, 0.46, 0.8, 1.0):
        m1 = oracles.x_given_th_moment(1, t, theta, h)
        m2 = oracles.x_given_th_moment(2, t, theta, h)
        pair = moments.cond_moments_given_theta_h(t, theta, h)
        assert pair.mean == pytest.approx(m1, rel=1e-6, abs=1e-9)
        assert pair.variance == pytest.approx(m2 - m1 * m1, rel=1e-5, abs=1e-9)


def test_theta_only_moments_are_h_averages():
    # integrating the (argmax, high) ladder against the Rayleigh law of the
    # maximum must reproduce the argmax-only ladder
    theta = 0.35
    for t in (0.1, 0.3, 0.6, 0.9):
        m1, _ = quad(
            lambda h: moments.cond_moments_given_theta_h(t, theta, h).mean
            * analytic.density_h_given_theta(h, theta),
            1e-12,
            np.inf,
        )
        m2, _ = quad(
            lambda h: (
                moments.cond_moments_given_theta_h(t, theta, h).variance
                + moments.cond_moments_given_theta_h(t, theta, h).mean ** 2
            )
            * analytic.density_h_given_theta(h, theta),
            1e-12,
            np.inf,
        )
        pair = moments.cond_moments_given_theta(t, theta)
        assert pair.mean == pytest.approx(m1, rel=1e-7, abs=1e-10)
        assert pair.variance == pytest.approx(m2 - m1 * m1, rel=1e-6, abs=1e-10)


def test_pinning_and_branch_continuity():
    rng = np.random.default_rng(5)
    for _ in range(100):
        theta = float(rng.uniform(0.05, 0.95))
        h = float(rng.uniform(0.2, 2.5))
        c = float(rng.uniform(-1.5, min(h, 1.5)))
        cond = ExtremaTriple(theta, h, c)
        for fn in (
            lambda t: moments.cond_moments_given_c_theta_h(t, cond),
            lambda t: moments.cond_moments_given_theta_h(t, theta, h),
            lambda t: moments.cond_moments_given_theta(t, theta),
        ):
            zero = fn(0.0)
            assert zero.mean == pytest.approx(0.0, abs=1e-12)
            assert zero.variance == pytest.approx(0.0, abs=1e-12)
            left = fn(theta - 1e-13)
            right = fn(theta + 1e-13)
            assert left.mean == pytest.approx(right.mean, abs=1e-9)
            assert left.variance == pytest.approx(right.variance, abs=1e-9)
        peak = moments.cond_moments_given_c_theta_h(theta, cond)
        assert peak.mean == pytest.approx(h, abs=1e-12)
        assert peak.variance == pytest.approx(0.0, abs=1e-12)
        end = moments.cond_moments_given_c_theta_h(1.0, cond)
        assert end.mean == pytest.approx(c, abs=1e-12)
        assert end.variance == pytest.approx(0.0, abs=1e-12)


def test_final_value_constant_variance():
    for theta in (0.1, 0.33, 0.5, 0.77, 0.9):
        pair = moments.b1_moments_given_theta(theta)
        assert pair.variance == pytest.approx(2.0 - math.pi / 2.0, rel=1e-14)
        # the ladder's right endpoint agrees with the closed form
        end = moments.cond_moments_given_theta(1.0, theta)
        assert end.mean == pytest.approx(pair.mean, abs=1e-12)
        assert end.variance == pytest.approx(pair.variance, abs=1e-12)
    assert 2.0 - math.pi / 2.0 == pytest.approx(0.4292, abs=5e-5)


def test_final_value_mean_is_antisymmetric():
    for theta in (0.2, 0.4):
        a = moments.b1_moments_given_theta(theta).mean
        b = moments.b1_moments_given_theta(1.0 - theta).mean
        assert a == pytest.approx(-b, abs=1e-14)
    assert moments.b1_moments_given_theta(0.5).mean == pytest.approx(0.0, abs=1e-14)


def test_appendix_gaussian_sinh_integrals():
    for a, b in [(1.0, 0.0), (0.7, 1.3), (2.2, 0.4)]:
        for k, kind in ((1, "xk_sinh_1"), (2, "xk_sinh_2"), (3, "xk_sinh_3")):
            # overflow-free form of exp(-a x^2) sinh(b x)
            val, _ = quad(
                lambda x: x**k
                * 0.5
                * (np.exp(-a * x * x + b * x) - np.exp(-a * x * x - b * x)),
                0,
                60.0 / math.sqrt(a),
                limit=200,
            )
            assert moments.appendix_integral(kind, a=a, b=b) == pytest.approx(val, abs=1e-10)


def test_appendix_weighted_moment_integrals():
    # G11 and M2_weighted are the meander moments averaged over a unit
    # Rayleigh endpoint (the law of the rescaled drop from the maximum)
    def rayleigh(x):
        return x * math.exp(-x * x / 2.0)

    for s in (0.25, 0.6, 0.9):
        g11_val, _ = quad(lambda c: moments.meander_m1(s, 1.0, c) * rayleigh(c), 0, np.inf)
        assert moments.appendix_integral("G11_integral", s=s) == pytest.approx(g11_val, rel=1e-8)
        m2_val, _ = quad(lambda c: moments.meander_m2(s, 1.0, c) * rayleigh(c), 0, np.inf)
        assert moments.appendix_integral("M2_weighted", s=s) == pytest.approx(m2_val, rel=1e-8)
        assert moments.appendix_integral("G12_integral", s=s) == pytest.approx(
            2.0 * math.sqrt(s), rel=1e-12
        )
    assert moments.appendix_integral("xk_sinh_1", a=1.0, b=0.0) == 0.0
    assert moments.appendix_integral("M2_weighted", s=0.5) == pytest.approx(3 * 0.5 - 0.25)
    assert moments.appendix_integral("G12_integral", s=0.25) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        moments.appendix_integral("xk_sinh_1", a=-1.0, b=0.5)
    with pytest.raises(DomainError):
        moments.appendix_integral("nope", s=0.5)


def test_dropping_a_condition_never_reduces_average_variance():
    # integrated form: averaging the finer conditional variance plus the
    # spread of its mean over the dropped variable equals the coarser
    # variance, so the coarser time-integral can never be smaller
    for theta, h in [(0.3, 0.8), (0.5, 1.2), (0.7, 0.5), (0.2, 1.8), (0.9, 1.0)]:
        times = np.linspace(0.0, 1.0, 101)
        coarse = np.trapezoid(moments.curve_given_theta_h(times, theta, h).variances, times)

        def fine_avg(t):
            val, _ = quad(
                lambda c: moments.cond_moments_given_c_theta_h(t, ExtremaTriple(theta, h, c)).variance
                * analytic.joint_density_theta_h_c(ExtremaTriple(theta, h, c)),
                -np.inf,
                h,
            )
            norm = analytic.density_theta_h(theta, h)
            return val / norm

        fine = np.trapezoid([fine_avg(t) for t in times[::10]], times[::10])
        assert fine <= coarse + 1e-6


def test_curves_and_validation():
    times = np.linspace(0.0, 1.0, 21)
    c = moments.curve_given_c_theta_h(times, ExtremaTriple(0.5, 1.0, 0.0))
    assert c.means[10] == pytest.approx(1.0)
    assert np.all(c.variances >= 0.0)
    with pytest.raises(DomainError):
        moments.curve_given_theta_h(times, 0.5, 0.0)
    with pytest.raises(DomainError):
        moments.cond_moments_given_theta(1.5, 0.5)
    with pytest.raises(DomainError):
        moments.meander_m1(0.5, 0.4, 1.0)
    with pytest.raises(DomainError):
        moments.meander_var(0.5, -1.0)
    with pytest.raises(DomainError):
        moments.MomentCurve(times, np.zeros(5), np.zeros(21))
