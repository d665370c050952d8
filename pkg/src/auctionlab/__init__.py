"""Simulation lab for auction A/B experiments under quota throttling."""

from .auction import AuctionOutcome, Mechanism, TieRule, realize_payments, run_auction
from .errors import EnumerationBudgetError, InvalidConfigError, InvalidInputError
from .estimation import (
    EffectReport,
    SummaryStats,
    WeightingConvention,
    ht_advertiser,
    ht_total,
    summarize,
    true_effects,
)
from .experiment import (
    Assignment,
    BidDistributionConfig,
    ExperimentInstance,
    RandomizationScheme,
    SchemeKind,
    build_toy_instance,
    dominating_treatment_instance,
    draw_assignment,
    draw_potential_bids,
    full_eligibility_instance,
    identical_bidders_instance,
)
from .oracle import (
    EnumerationBudget,
    OracleExpectation,
    SplitConditionReport,
    UnbiasednessCheck,
    check_split_proportionality,
    closed_form_bias_identical,
    exact_expected_estimate,
    exact_true_effects,
    verify_joint_quota_unbiasedness,
    verify_split_quota_unbiasedness,
)
from .streams import derive_rng
from .study import (
    StudyConfig,
    StudyRow,
    mc_expected_estimate,
    run_study,
    rows_to_csv,
    scenario_grid,
    variance_ratio_study,
    write_csv,
)
from .throttling import (
    QuotaConfig,
    QuotaTreatmentConfig,
    ThrottleMask,
    covariate_veto,
    draw_throttle,
    throttle_joint,
    throttle_quota_treatment,
    throttle_split,
)

__all__ = [name for name in dir() if not name.startswith("_")]
