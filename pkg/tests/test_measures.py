import math

import numpy as np
import pytest
from scipy import special, stats

from bolab.errors import QuadratureError
from bolab.measures import (AmplitudeSequence, RadialLaw, _quad_factor, ball_probability, classify_sigma,
                            dyadic_grid, log_tail_mass_product, sample_ensemble, sample_radial, sample_state,
                            tail_mass_factors, tail_mass_product, tail_mass_profile)

GAUSS = RadialLaw.gaussian()
REXP = RadialLaw.radial_exponential()


def radial_exp_factor(a, c):
    """E exp(-a r^2) for the radius density r/c^2 exp(-r/c), via the erfc closed form."""
    b = 1.0 / c
    u = b / (2.0 * math.sqrt(a))
    integral = 1.0 / (2.0 * a) - b / (2.0 * a) * math.sqrt(math.pi / a) / 2.0 * special.erfcx(u)
    return integral / c ** 2


def test_law_validation_and_units():
    with pytest.raises(ValueError):
        RadialLaw("cauchy")
    with pytest.raises(ValueError):
        RadialLaw.gaussian(0.0)
    assert GAUSS.second_moment == 1.0
    assert REXP.second_moment == pytest.approx(1.0, rel=1e-15)
    assert GAUSS.radius_moment(4) == 2.0
    assert REXP.radius_moment(4) == pytest.approx(120 / 36)
    assert GAUSS.action_variance == pytest.approx(1.0)
    assert GAUSS.fourth_moment == pytest.approx(1.5)


@pytest.mark.parametrize("law", [GAUSS, REXP, RadialLaw.gaussian(0.3)])
def test_density_normalised_and_consistent(law):
    from scipy import integrate
    mass, _ = integrate.quad(lambda r: law.radius_pdf(r), 0, np.inf)
    assert mass == pytest.approx(1.0, abs=1e-10)
    r = 0.7
    assert law.radius_pdf(r) == pytest.approx(2 * np.pi * r * law.density(r, 0.0), rel=1e-12)
    fourth, _ = integrate.dblquad(lambda y, x: (x ** 4 + y ** 4) * law.density(x, y), -12, 12, -12, 12)
    assert fourth == pytest.approx(law.fourth_moment, rel=1e-6)
    assert 0 < law.disk_mass() < 1


@pytest.mark.parametrize("law", [GAUSS, REXP])
def test_sampled_radii_follow_the_cdf(law):
    g = sample_radial(law, 3, size=20_000)
    res = stats.kstest(np.abs(g), law.radius_cdf)
    assert res.pvalue > 1e-3
    angles = np.angle(g)
    assert stats.kstest((angles + np.pi) / (2 * np.pi), "uniform").pvalue > 1e-3


def test_sample_moments():
    g = sample_radial(REXP, 11, size=200_000)
    a2 = np.abs(g) ** 2
    assert a2.mean() == pytest.approx(1.0, abs=5 * a2.std() / np.sqrt(a2.size))
    a4 = a2 ** 2
    assert a4.mean() == pytest.approx(120 / 36, abs=5 * a4.std() / np.sqrt(a4.size))


def test_sampling_is_reproducible_and_offset_aware():
    amps = AmplitudeSequence.power(1.0)
    e = sample_ensemble(amps, GAUSS, 6, 40, 4)
    assert np.array_equal(e, sample_ensemble(amps, GAUSS, 6, 40, 4, workers=3))
    assert np.array_equal(e[10:], sample_ensemble(amps, GAUSS, 6, 30, 4, start=10))
    assert np.array_equal(sample_state(amps, GAUSS, 6, 4, index=7).coeffs, e[7])
    # prefixes of the mode axis do not depend on N
    assert np.array_equal(e[:, :3], sample_ensemble(amps, GAUSS, 3, 40, 4))
    assert isinstance(sample_radial(GAUSS, 1), complex)


def test_amplitude_rules():
    np.testing.assert_allclose(AmplitudeSequence.power(1.0).values(3), [1, 0.5, 1 / 3])
    np.testing.assert_allclose(AmplitudeSequence.power_log(1.0).values(2), [1 / np.log(2), 0.5 / np.log(3)])
    ex = AmplitudeSequence.explicit([2.0, 3.0])
    np.testing.assert_array_equal(ex.values(2), [2.0, 3.0])
    with pytest.raises(ValueError):
        ex.values(3)
    with pytest.raises(ValueError):
        AmplitudeSequence.explicit([1.0, 0.0])
    with pytest.raises(ValueError):
        AmplitudeSequence("power", 1.0, 2.0)


@pytest.mark.parametrize("amps,sigma,expected", [
    (AmplitudeSequence.power(1.0), 0.5, "diverges"),      # harmonic series
    (AmplitudeSequence.power(1.0), 0.4, "converges"),
    (AmplitudeSequence.power_log(1.0), 1.0, "diverges"),
    (AmplitudeSequence.power_log(1.0), 0.5, "converges"),  # sum 1/(n log^2 n)
    (AmplitudeSequence.power_log(1.0, 0.5), 0.5, "diverges"),  # sum 1/(n log n)
    (AmplitudeSequence.explicit([1.0] * 5), 0.0, "undecided"),
])
def test_classify_sigma(amps, sigma, expected):
    out = classify_sigma(amps, sigma, 64)
    assert out.verdict == expected
    assert all(b >= a for a, b in zip(out.partial_sums, out.partial_sums[1:]))


def test_dyadic_grid():
    assert dyadic_grid(1) == [1]
    assert dyadic_grid(10) == [1, 2, 4, 8, 10]
    assert dyadic_grid(16) == [1, 2, 4, 8, 16]


def test_gaussian_factors_closed_form_vs_quadrature():
    amps = AmplitudeSequence.power_log(1.0)
    closed = tail_mass_factors(amps, 1.0, 64, GAUSS, "closed")
    quad = tail_mass_factors(amps, 1.0, 64, GAUSS, "quad")
    assert np.max(np.abs(closed - quad)) <= 1e-9
    coef = amps.values(64) ** 2 * np.arange(1, 65) ** 2.0
    np.testing.assert_allclose(closed, 1 / (1 + coef), rtol=1e-14)


@pytest.mark.parametrize("a", [0.05, 1.0, 30.0, 1e4])
def test_radial_exponential_quadrature_matches_erfc_form(a):
    assert _quad_factor(REXP, a) == pytest.approx(radial_exp_factor(a, REXP.scale), rel=1e-10)


@pytest.mark.parametrize("law", [GAUSS, REXP])
def test_small_weight_factor_matches_moment_expansion(law):
    # the erfc form cancels catastrophically here; use E exp(-a r^2) = 1 - a E r^2 + a^2 E r^4 / 2 - ...
    a = 1e-6
    series = 1 - a * law.radius_moment(2) + a ** 2 * law.radius_moment(4) / 2 - a ** 3 * law.radius_moment(6) / 6
    assert _quad_factor(law, a) == pytest.approx(series, rel=1e-13)


def test_tail_mass_products():
    amps = AmplitudeSequence.power(1.0)
    assert tail_mass_product(amps, 0.0, 0, GAUSS) == 1.0
    # single factor 1/(1 + 1)
    assert tail_mass_product(amps, 0.0, 1, GAUSS) == pytest.approx(0.5)
    prof = tail_mass_profile(amps, 0.5, [0, 1, 8, 64], GAUSS)
    assert prof[0] == 1.0
    assert prof[2] == pytest.approx(tail_mass_product(amps, 0.5, 8, GAUSS), rel=1e-14)
    assert all(b <= a for a, b in zip(prof, prof[1:]))
    lp = log_tail_mass_product(amps, 0.5, 64, REXP)
    assert lp == pytest.approx(np.sum(np.log(tail_mass_factors(amps, 0.5, 64, REXP))))
    with pytest.raises(ValueError):
        tail_mass_factors(amps, 0.5, 4, REXP, "closed")


def test_quadrature_failure_is_reported():
    with pytest.raises(QuadratureError):
        _quad_factor(REXP, 1.0, rtol=1e-30)


def test_ball_probability_against_exact_single_mode():
    amps = AmplitudeSequence.explicit([0.5])
    eps = 0.4
    exact = 1 - math.exp(-eps ** 2 / 0.25)
    est = ball_probability(amps, GAUSS, [0.0], eps, 0.0, 1, 20_000, 8)
    assert est.lower <= exact <= est.upper
    assert est.flag is None
    far = ball_probability(amps, GAUSS, [0.0, 0.0, 5.0], eps, 0.0, 1, 1000, 8)
    assert far.flag == "increase N"
    assert far.hits == 0
    with pytest.raises(ValueError):
        ball_probability(amps, GAUSS, [0.0], 0.0, 0.0, 1, 10, 8)
