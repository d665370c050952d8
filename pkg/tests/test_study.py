import math
from fractions import Fraction

import numpy as np
import pytest

from auctionlab.auction import Mechanism, realize_payments
from auctionlab.errors import InvalidConfigError
from auctionlab.estimation import WeightingConvention, ht_total
from auctionlab.experiment import (
    Assignment,
    RandomizationScheme,
    SchemeKind,
    full_eligibility_instance,
    identical_bidders_instance,
)
from auctionlab.oracle import exact_expected_estimate
from auctionlab.study import (
    StudyConfig,
    _draw_assignments,
    _joint_masks,
    _split_masks,
    _tau_hats,
    _topk_rows,
    mc_expected_estimate,
    rows_to_csv,
    run_study,
    scenario_grid,
    variance_ratio_study,
)
from auctionlab.throttling import QuotaConfig

HT = WeightingConvention.HORVITZ_THOMPSON


def small_bid_config(**overrides):
    defaults = dict(
        treatment_type="bid",
        n_queries=(12,),
        quota_fractions=(Fraction(1, 3),),
        mu1=(1.1,),
        schemes=("query_balanced", "pair_balanced"),
        n_bid_draws=4,
        n_assignments_per_draw=6,
        n_mc_tau_star=50,
        master_seed=123,
    )
    defaults.update(overrides)
    return StudyConfig(**defaults)


def test_config_json_round_trip_is_identity():
    config = small_bid_config()
    assert StudyConfig.from_json(config.to_json()) == config
    text = config.to_json()
    assert StudyConfig.from_json(text).to_json() == text


def test_non_integral_quota_rejected():
    with pytest.raises(InvalidConfigError, match="not integral"):
        small_bid_config(n_queries=(10,))


def test_scenario_grid_covers_product():
    config = small_bid_config(
        n_queries=(12, 24), quota_fractions=(Fraction(1, 3), Fraction(2, 3)), mu1=(1.1, 2.0)
    )
    grid = scenario_grid(config)
    assert len(grid) == 8
    assert [s.index for s in grid] == list(range(8))


def test_run_study_is_deterministic_and_worker_invariant():
    config = small_bid_config()
    rows_serial = run_study(config, workers=1)
    rows_parallel = run_study(config, workers=4)
    assert rows_to_csv(rows_serial) == rows_to_csv(rows_parallel)
    again = run_study(config, workers=2)
    assert rows_to_csv(again) == rows_to_csv(rows_serial)


def test_rerun_with_single_replicate_reproduces_estimate():
    config = small_bid_config(n_bid_draws=1, n_assignments_per_draw=2)
    a = run_study(config, workers=1)
    b = run_study(config, workers=1)
    assert rows_to_csv(a) == rows_to_csv(b)


def test_csv_schema_header():
    rows = run_study(small_bid_config(), workers=1)
    header = rows_to_csv(rows).splitlines()[0]
    assert header == (
        "scenario_id,n_queries,n_advertisers,quota_frac,mu0,mu1,v,p_x,"
        "treatment_type,scheme,throttle_mode,convention,n_outer,n_inner,"
        "tau_star,tau_star_se,mean_est,bias,rel_bias,rel_bias_se,variance,"
        "var_ratio,seed"
    )


def test_topk_rows_exact_counts():
    rng = np.random.default_rng(0)
    z = _topk_rows(rng, 100, 9, 4)
    assert z.shape == (100, 9)
    assert np.all(z.sum(axis=1) == 4)


def test_joint_mask_kernel_saturates_exactly():
    rng = np.random.default_rng(1)
    w = _joint_masks(rng, 200, 9, 3, 3)
    assert np.all(w.sum(axis=1) == 3)
    assert abs(w.mean() - 1 / 3) < 0.02


def test_split_mask_kernel_respects_arm_budgets():
    rng = np.random.default_rng(2)
    zq = _topk_rows(rng, 150, 8, 4)
    w = _split_masks(rng, zq, 2, 3, 1)
    z_pairs = np.repeat(zq[:, :, None], 2, axis=2)
    treated_kept = (w & z_pairs).sum(axis=1)
    control_kept = (w & ~z_pairs).sum(axis=1)
    assert np.all(treated_kept == 3)
    assert np.all(control_kept == 1)


def test_balanced_assignment_kernel_counts():
    rng = np.random.default_rng(3)
    z, p = _draw_assignments(
        rng, RandomizationScheme(SchemeKind.PAIR_BALANCED), 50, 6, 3
    )
    assert p == 0.5
    assert np.all(z.reshape(50, -1).sum(axis=1) == 9)


@pytest.mark.parametrize("mech", list(Mechanism))
@pytest.mark.parametrize(
    "kind", [SchemeKind.QUERY_BALANCED, SchemeKind.PAIR_BALANCED, SchemeKind.PAIR_BERNOULLI]
)
@pytest.mark.parametrize("convention", list(WeightingConvention))
def test_vectorized_estimates_match_scalar_reference(mech, kind, convention):
    rng = np.random.default_rng(4)
    n_q, n_adv = 6, 3
    inst = full_eligibility_instance(
        n_q,
        n_adv,
        rng.lognormal(1.0, 0.4, (n_q, n_adv)),
        rng.lognormal(1.2, 0.4, (n_q, n_adv)),
    )
    b0 = inst.b0.reshape(n_q, n_adv)
    b1 = inst.b1.reshape(n_q, n_adv)
    z_pairs, p = _draw_assignments(rng, RandomizationScheme(kind), 40, n_q, n_adv)
    w = _joint_masks(rng, 40, n_q, n_adv, 2)
    taus = _tau_hats(b1, b0, z_pairs, w, p, mech, convention)
    for r in range(40):
        z = z_pairs[r].reshape(-1).astype(np.int8)
        mask = w[r].reshape(-1).astype(np.int8)
        y = realize_payments(inst, z, mask, mech)
        expected = ht_total(Assignment(z=z, p=np.full(len(z), p)), y, convention)
        assert math.isclose(taus[r], expected, rel_tol=0, abs_tol=1e-10)


def test_mc_engine_matches_exact_oracle_identical_bidders():
    inst = identical_bidders_instance(4, 5.0, 6.0)
    scheme = RandomizationScheme(SchemeKind.PAIR_BERNOULLI, p=0.5)
    exact = exact_expected_estimate(
        inst, scheme, convention=WeightingConvention.UNWEIGHTED
    )
    mean, se = mc_expected_estimate(
        inst,
        scheme,
        convention=WeightingConvention.UNWEIGHTED,
        n_draws=200_000,
        rng=np.random.default_rng(5),
    )
    assert abs(mean - float(exact.e_tau_hat)) < 4 * se


def test_mc_engine_matches_oracle_under_joint_throttling(
    saturated_instance, saturated_quota
):
    scheme = RandomizationScheme(SchemeKind.QUERY_BALANCED)
    exact = exact_expected_estimate(
        saturated_instance, scheme, saturated_quota, convention=HT
    )
    mean, se = mc_expected_estimate(
        saturated_instance,
        scheme,
        saturated_quota,
        convention=HT,
        n_draws=200_000,
        rng=np.random.default_rng(6),
    )
    assert abs(mean - float(exact.e_tau_hat)) < 4 * se


def test_variance_ratio_requires_both_schemes():
    with pytest.raises(InvalidConfigError):
        variance_ratio_study(small_bid_config(schemes=("query_balanced",)))


def test_variance_ratio_self_ratio_is_exactly_one():
    first = run_study(small_bid_config(), workers=1)
    second = run_study(small_bid_config(), workers=1)
    for a, b in zip(first, second):
        assert b.variance == a.variance
        assert b.variance / a.variance == 1.0
    pair = next(r for r in first if r.scheme == "pair_balanced")
    query = next(r for r in first if r.scheme == "query_balanced")
    assert pair.var_ratio == pair.variance / query.variance


def test_quota_study_joint_centers_on_minus_one_small_scale():
    config = StudyConfig(
        treatment_type="quota",
        n_queries=(30,),
        quota_fractions=(Fraction(1, 3),),
        p_x=(0.5,),
        throttle_modes=("joint", "split"),
        n_bid_draws=40,
        n_assignments_per_draw=30,
        n_mc_tau_star=400,
        master_seed=11,
    )
    rows = run_study(config, workers=1)
    joint = next(r for r in rows if r.throttle_mode == "joint")
    split = next(r for r in rows if r.throttle_mode == "split")
    assert joint.tau_star < 0
    assert abs(joint.rel_bias + 1.0) < 0.25
    assert abs(split.rel_bias) < 0.25


def test_relative_bias_roughly_constant_in_query_count():
    config = StudyConfig(
        treatment_type="bid",
        n_queries=(30, 60, 90),
        quota_fractions=(Fraction(1, 3),),
        mu1=(1.1,),
        schemes=("pair_balanced",),
        n_bid_draws=60,
        n_assignments_per_draw=10,
        n_mc_tau_star=300,
        master_seed=17,
    )
    rows = run_study(config, workers=3)
    rels = [r.rel_bias for r in rows]
    ses = [r.rel_bias_se for r in rows]
    for i in range(len(rows) - 1):
        combined = math.sqrt(ses[i] ** 2 + ses[i + 1] ** 2)
        assert abs(rels[i] - rels[i + 1]) < 2 * combined


def test_quota_study_rejects_unsupported_schemes():
    with pytest.raises(InvalidConfigError):
        StudyConfig(
            treatment_type="quota",
            n_queries=(12,),
            quota_fractions=(Fraction(1, 3),),
            schemes=("pair_balanced",),
        )
