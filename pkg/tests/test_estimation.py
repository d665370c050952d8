import math

import numpy as np
import pytest

from auctionlab.auction import realize_payments
from auctionlab.errors import InvalidInputError
from auctionlab.estimation import (
    WeightingConvention,
    ht_advertiser,
    ht_total,
    summarize,
    true_effects,
)
from auctionlab.experiment import (
    Assignment,
    full_eligibility_instance,
    identical_bidders_instance,
)
from auctionlab.throttling import QuotaConfig

HT = WeightingConvention.HORVITZ_THOMPSON
UNW = WeightingConvention.UNWEIGHTED


def _assignment(z, p=0.5):
    z = np.asarray(z)
    return Assignment(z=z, p=np.full(len(z), p))


def test_ht_total_identical_bidders_all_treated():
    y = np.array([6.0, 0.0, 0.0, 0.0])
    assert ht_total(_assignment([1, 1, 1, 1]), y, HT) == 12.0
    assert ht_total(_assignment([1, 1, 1, 1]), y, UNW) == 6.0


def test_unweighted_all_control_is_negative_total():
    y = np.array([5.0, 0.0, 0.0, 0.0])
    assert ht_total(_assignment([0, 0, 0, 0]), y, UNW) == -5.0


def test_zero_payments_give_zero_estimate():
    y = np.zeros(4)
    for convention in (HT, UNW):
        assert ht_total(_assignment([1, 0, 1, 0]), y, convention) == 0.0


def test_ht_requires_interior_probabilities():
    with pytest.raises(InvalidInputError):
        ht_total(_assignment([1, 0], p=1.0), np.array([1.0, 2.0]), HT)


def test_ht_advertiser_restriction_is_identity_for_single_advertiser():
    y = np.array([3.0, 0.0])
    asg = _assignment([1, 0])
    ids = np.array([7, 7])
    assert ht_advertiser(asg, y, ids, 7, HT) == ht_total(asg, y, HT)


def test_ht_advertiser_loser_pays_nothing(table_instance):
    z = np.array([1, 1, 0])
    y = realize_payments(table_instance, z, np.ones(3, dtype=int))
    asg = Assignment(z=z, p=np.full(3, 0.5))
    assert ht_advertiser(asg, y, table_instance.a, 1, UNW) == 0.0


def test_advertiser_decomposition_sums_to_total():
    rng = np.random.default_rng(0)
    ids = rng.integers(0, 4, size=30)
    y = rng.random(30) * 5
    asg = _assignment(rng.integers(0, 2, size=30), p=0.4)
    total = ht_total(asg, y, HT)
    parts = sum(ht_advertiser(asg, y, ids, adv, HT) for adv in range(4))
    assert math.isclose(total, parts, rel_tol=0, abs_tol=1e-12)


def test_true_effects_identical_bidders():
    inst = identical_bidders_instance(4, 5.0, 6.0)
    report = true_effects(inst, QuotaConfig())
    assert report.tau == 1.0
    assert report.tau_star == 1.0
    assert report.tau_star_se == 0.0


def test_true_effects_dominating(dominating_instance):
    report = true_effects(dominating_instance, QuotaConfig())
    assert report.tau == 1.25


def test_tau_a_decomposition(saturated_instance):
    report = true_effects(saturated_instance, QuotaConfig())
    assert math.isclose(sum(report.tau_a.values()), report.tau, abs_tol=1e-12)


def test_scale_equivariance_power_of_two(saturated_instance, saturated_quota):
    base = true_effects(
        saturated_instance, saturated_quota, n_mc=100, rng=np.random.default_rng(1)
    )
    scaled = true_effects(
        saturated_instance.scaled(2.0),
        saturated_quota,
        n_mc=100,
        rng=np.random.default_rng(1),
    )
    assert scaled.tau == 2.0 * base.tau
    assert scaled.tau_star == 2.0 * base.tau_star


def test_two_point_expectation_recovers_tau():
    from auctionlab.experiment import RandomizationScheme, SchemeKind
    from auctionlab.oracle import exact_expected_estimate

    inst = identical_bidders_instance(4, 5.0, 6.0)
    for p in (0.3, 0.5, 0.7):
        scheme = RandomizationScheme(SchemeKind.QUERY_BERNOULLI, p=p)
        result = exact_expected_estimate(inst, scheme, convention=HT)
        assert abs(float(result.e_tau_hat) - float(result.tau)) < 1e-12


def test_tau_star_mc_error_shrinks_with_replicates(saturated_instance, saturated_quota):
    small = true_effects(
        saturated_instance, saturated_quota, n_mc=1000, rng=np.random.default_rng(2)
    )
    large = true_effects(
        saturated_instance, saturated_quota, n_mc=4000, rng=np.random.default_rng(3)
    )
    ratio = large.tau_star_se / small.tau_star_se
    assert 0.35 < ratio < 0.65


def test_summarize_exact_cases():
    stats = summarize([1.0, 1.0, 1.0, 1.0], tau_star=1.0)
    assert stats.bias == 0.0
    assert stats.relative_bias == 0.0
    assert stats.variance == 0.0

    stats = summarize([0.0, 2.0], tau_star=1.0)
    assert stats.bias == 0.0
    assert stats.variance == 2.0
    assert stats.se_of_mean == 1.0

    stats = summarize([0.0, 0.0, 0.0], tau_star=1.0)
    assert stats.relative_bias == -1.0


def test_summarize_undefined_relative_bias():
    stats = summarize([1.0, 3.0], tau_star=0.0)
    assert stats.relative_bias is None
    assert stats.bias == 2.0


def test_summarize_needs_two_estimates():
    with pytest.raises(InvalidInputError):
        summarize([1.0], tau_star=1.0)
