import math

import numpy as np
import pytest
import scipy.special

from clusterlasso.mixture import rng_from_key
from clusterlasso.tails import (
    chi_tail_suite,
    concentration_suite,
    gaussian_norm_suite,
    matrix_rademacher_suite,
    psd_sum_suite,
    scalar_deviation_suite,
)
from clusterlasso.theory import BoundParams


def test_gaussian_norm_exceedance_within_bound():
    report = gaussian_norm_suite(rng_from_key(50), trials=4000)
    assert report.bound == pytest.approx(2.0 * math.exp(-4.5))
    assert report.exceed_freq <= report.bound
    assert report.within_bound


def test_gaussian_norm_vacuous_at_zero_threshold_shift():
    report = gaussian_norm_suite(rng_from_key(51), trials=500, u=0.0)
    assert report.bound == 1.0
    assert report.exceed_freq <= 1.0


def test_chi_tail_against_incomplete_gamma():
    report = chi_tail_suite(rng_from_key(52), samples=400_000)
    exact = float(scipy.special.gammainc(5.0, 0.5))
    assert report.exact == pytest.approx(exact, rel=1e-12)
    assert report.exact == pytest.approx(1.72e-4, rel=0.01)
    assert report.empirical == pytest.approx(report.exact, rel=0.35)


def test_chi_tail_half_exponent_fits_tighter():
    # the empirical decay matches exponent df/2, so the fitted constant at
    # the steeper exponent df must be much larger
    report = chi_tail_suite(rng_from_key(53), samples=200_000)
    assert report.fitted_log_half < report.fitted_log_paper
    assert report.fitted_log_paper <= report.analytic_log_paper + 0.5


def test_scalar_deviation_within_default_pair():
    report = scalar_deviation_suite(
        BoundParams(), rng_from_key(54), trials=20_000
    )
    assert report.within_bound


def test_matrix_rademacher_within_bound():
    report = matrix_rademacher_suite(rng_from_key(55), trials=3000)
    assert report.within_bound


def test_psd_sum_within_bound():
    report = psd_sum_suite(rng_from_key(56), trials=2000)
    assert report.within_bound


def test_concentration_suite_bundles_reports():
    report = concentration_suite(
        BoundParams(), rng_from_key(57), trials=500, chi_samples=50_000
    )
    doc = report.to_dict()
    assert set(doc) == {
        "gaussian_norm", "chi_tail", "scalar_deviation",
        "matrix_rademacher", "psd_sum",
    }
    assert report.gaussian_norm.within_bound
    with pytest.raises(ValueError):
        concentration_suite(BoundParams(), rng_from_key(58), trials=50)
