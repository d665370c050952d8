"""Exact expectations by exhaustive enumeration on small instances.

Assignment probabilities, throttle probabilities, and payments are all
carried as exact rationals, so dyadic cases (fair coins, uniform subsets)
reproduce closed-form numbers bit for bit. Enumeration is bounded by an
explicit budget and fails loudly instead of sampling.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .auction import Mechanism
from .errors import EnumerationBudgetError, InvalidConfigError, InvalidInputError
from .estimation import WeightingConvention
from .experiment import ExperimentInstance, RandomizationScheme, SchemeKind
from .throttling import QuotaConfig, QuotaTreatmentConfig, covariate_veto


@dataclass(frozen=True)
class EnumerationBudget:
    max_assignments: int = 2**20
    max_masks_per_assignment: int = 10**6


@dataclass
class OracleExpectation:
    e_tau_hat: Fraction
    tau: Fraction
    tau_star: Fraction
    bias: Fraction
    bias_vs_tau_star: Fraction
    n_states: int


@dataclass
class UnbiasednessCheck:
    e_tau_hat: Fraction
    tau_star: Fraction
    gap: Fraction
    n_states: int


@dataclass
class AdvertiserConditionRecord:
    advertiser: int
    n_pairs: int
    n_x1: int
    bid_zero_when_x0: bool
    offending_pairs: list[int]
    control_proportional: bool
    treated_proportional: bool
    first_violation_z: tuple | None


@dataclass
class SplitConditionReport:
    interpretation: str
    advertisers: list[AdvertiserConditionRecord]
    all_hold: bool
    first_counterexample: tuple | None


def _count_assignments(instance: ExperimentInstance, scheme: RandomizationScheme) -> int:
    pool = instance.n_queries if scheme.kind.is_query_level else instance.n_pairs
    if scheme.kind.is_balanced:
        return math.comb(pool, pool // 2)
    return 2**pool


def _enumerate_assignments(instance: ExperimentInstance, scheme: RandomizationScheme):
    """Yield (pair-level z tuple, probability) over the scheme's support."""
    query_level = scheme.kind.is_query_level
    pool = instance.n_queries if query_level else instance.n_pairs

    def to_pairs(flags: np.ndarray) -> tuple[int, ...]:
        if query_level:
            return tuple(int(v) for v in flags[instance.q])
        return tuple(int(v) for v in flags)

    if scheme.kind.is_balanced:
        k = pool // 2
        prob = Fraction(1, math.comb(pool, k))
        for chosen in itertools.combinations(range(pool), k):
            flags = np.zeros(pool, dtype=np.int8)
            flags[list(chosen)] = 1
            yield to_pairs(flags), prob
    else:
        p = Fraction(scheme.p)
        for bits in itertools.product((0, 1), repeat=pool):
            flags = np.asarray(bits, dtype=np.int8)
            t = int(flags.sum())
            yield to_pairs(flags), p**t * (1 - p) ** (pool - t)


def _marginal_p(instance: ExperimentInstance, scheme: RandomizationScheme) -> Fraction:
    pool = instance.n_queries if scheme.kind.is_query_level else instance.n_pairs
    if scheme.kind.is_balanced:
        return Fraction(pool // 2, pool)
    return Fraction(scheme.p)


def _subset_family(pool: tuple[int, ...], size: int):
    combos = list(itertools.combinations(pool, min(size, len(pool))))
    prob = Fraction(1, len(combos))
    return [(c, prob) for c in combos]


def _mask_families(
    instance: ExperimentInstance,
    zv: tuple[int, ...],
    quota: QuotaConfig,
    treatment: QuotaTreatmentConfig | None,
):
    """Per-advertiser families of (kept indices, probability)."""
    allowed = None
    if treatment is not None:
        allowed = covariate_veto(instance, np.asarray(zv), treatment.veto_scope)
    refill = treatment is not None and treatment.composition == "refill"
    families = []
    for adv in instance.advertisers:
        pairs = [int(i) for i in instance.pairs_by_advertiser[adv]]
        if quota.mode == "joint":
            pool = [i for i in pairs if allowed is None or not refill or allowed[i]]
            fam = _subset_family(tuple(pool), quota.q_total[adv])
        elif quota.mode == "split":
            t_pool = [i for i in pairs if zv[i] == 1]
            c_pool = [i for i in pairs if zv[i] == 0]
            if refill:
                t_pool = [i for i in t_pool if allowed[i]]
                c_pool = [i for i in c_pool if allowed[i]]
            fam = [
                (kt + kc, pt * pc)
                for kt, pt in _subset_family(tuple(t_pool), quota.q1[adv])
                for kc, pc in _subset_family(tuple(c_pool), quota.q0[adv])
            ]
        else:
            fam = [(tuple(pairs), Fraction(1))]
        if treatment is not None and treatment.composition == "independent":
            fam = [
                (tuple(i for i in kept if allowed[i]), prob) for kept, prob in fam
            ]
        families.append(fam)
    return families


def _settlements(
    bids: list[float],
    members_by_query: list[list[int]],
    alive: bytearray,
    mechanism: Mechanism,
) -> list[tuple[int, float]]:
    """(winner pair, price) per settled query; ties go to the lowest index."""
    first_price = mechanism is Mechanism.FIRST_PRICE
    out = []
    for members in members_by_query:
        best = -1.0
        second = -1.0
        winner = -1
        for i in members:
            if not alive[i]:
                continue
            b = bids[i]
            if b > best:
                second = best
                best = b
                winner = i
            elif b > second:
                second = b
        if winner >= 0:
            price = best if first_price or second < 0.0 else second
            out.append((winner, price))
    return out


def _state_space(
    instance: ExperimentInstance,
    scheme: RandomizationScheme,
    quota: QuotaConfig,
    treatment: QuotaTreatmentConfig | None,
    budget: EnumerationBudget,
):
    """Yield (zv, bids, mask-product iterator) guarding the budget."""
    n_assignments = _count_assignments(instance, scheme)
    if n_assignments > budget.max_assignments:
        raise EnumerationBudgetError(
            f"{n_assignments} assignments exceed the budget of "
            f"{budget.max_assignments}; instance too large for exact enumeration"
        )
    b0 = instance.b0.tolist()
    b1 = instance.b1.tolist()
    for zv, pz in _enumerate_assignments(instance, scheme):
        bids = [b1[i] if zv[i] else b0[i] for i in range(len(zv))]
        families = _mask_families(instance, zv, quota, treatment)
        n_masks = math.prod(len(f) for f in families)
        if n_masks > budget.max_masks_per_assignment:
            raise EnumerationBudgetError(
                f"{n_masks} throttle masks for one assignment exceed the "
                f"budget of {budget.max_masks_per_assignment}"
            )
        yield zv, pz, bids, families


def _expected_tau_hat(
    instance: ExperimentInstance,
    scheme: RandomizationScheme,
    quota: QuotaConfig,
    mechanism: Mechanism,
    convention: WeightingConvention,
    treatment: QuotaTreatmentConfig | None,
    budget: EnumerationBudget,
) -> tuple[Fraction, int]:
    members_by_query = [[int(i) for i in m] for m in instance.pairs_by_query]
    p = _marginal_p(instance, scheme)
    if convention is WeightingConvention.HORVITZ_THOMPSON:
        if not 0 < p < 1:
            raise InvalidInputError("inclusion probability must lie in (0, 1)")
        wt1, wt0 = 1 / p, -1 / (1 - p)
    else:
        wt1, wt0 = Fraction(1), Fraction(-1)

    n = instance.n_pairs
    expectation = Fraction(0)
    total_prob = Fraction(0)
    n_states = 0
    for zv, pz, bids, families in _state_space(instance, scheme, quota, treatment, budget):
        for combo in itertools.product(*families):
            alive = bytearray(n)
            prob_w = Fraction(1)
            for kept, pw in combo:
                prob_w *= pw
                for i in kept:
                    alive[i] = 1
            tau_hat = Fraction(0)
            for winner, price in _settlements(bids, members_by_query, alive, mechanism):
                tau_hat += Fraction(price) * (wt1 if zv[winner] else wt0)
            prob = pz * prob_w
            expectation += prob * tau_hat
            total_prob += prob
            n_states += 1
    if total_prob != 1:
        raise RuntimeError(f"enumerated probabilities sum to {total_prob}, not 1")
    return expectation, n_states


def _expected_revenue(
    instance: ExperimentInstance,
    zv: tuple[int, ...],
    quota: QuotaConfig,
    mechanism: Mechanism,
    treatment: QuotaTreatmentConfig | None,
    budget: EnumerationBudget,
) -> Fraction:
    """Exact expected total revenue at a fixed assignment, over masks."""
    members_by_query = [[int(i) for i in m] for m in instance.pairs_by_query]
    bids = [
        float(instance.b1[i]) if zv[i] else float(instance.b0[i])
        for i in range(instance.n_pairs)
    ]
    families = _mask_families(instance, zv, quota, treatment)
    n_masks = math.prod(len(f) for f in families)
    if n_masks > budget.max_masks_per_assignment:
        raise EnumerationBudgetError(
            f"{n_masks} throttle masks exceed the per-assignment budget"
        )
    total = Fraction(0)
    total_prob = Fraction(0)
    n = instance.n_pairs
    for combo in itertools.product(*families):
        alive = bytearray(n)
        prob = Fraction(1)
        for kept, pw in combo:
            prob *= pw
            for i in kept:
                alive[i] = 1
        revenue = Fraction(0)
        for _, price in _settlements(bids, members_by_query, alive, mechanism):
            revenue += Fraction(price)
        total += prob * revenue
        total_prob += prob
    if total_prob != 1:
        raise RuntimeError(f"mask probabilities sum to {total_prob}, not 1")
    return total


def exact_true_effects(
    instance: ExperimentInstance,
    quota: QuotaConfig,
    mechanism: Mechanism = Mechanism.FIRST_PRICE,
    treatment: QuotaTreatmentConfig | None = None,
    budget: EnumerationBudget | None = None,
) -> tuple[Fraction, Fraction]:
    """Exact (tau, tau_star); tau_star enumerates masks in both pure worlds."""
    budget = budget or EnumerationBudget()
    ones = tuple([1] * instance.n_pairs)
    zeros = tuple([0] * instance.n_pairs)
    no_quota = QuotaConfig()
    rev1 = _expected_revenue(instance, ones, no_quota, mechanism, None, budget)
    rev0 = _expected_revenue(instance, zeros, no_quota, mechanism, None, budget)
    tau = rev1 - rev0
    if quota.mode == "none":
        return tau, tau
    star1 = _expected_revenue(instance, ones, quota, mechanism, treatment, budget)
    star0 = _expected_revenue(instance, zeros, quota, mechanism, treatment, budget)
    return tau, star1 - star0


def exact_expected_estimate(
    instance: ExperimentInstance,
    scheme: RandomizationScheme,
    quota: QuotaConfig = QuotaConfig(),
    mechanism: Mechanism = Mechanism.FIRST_PRICE,
    convention: WeightingConvention = WeightingConvention.HORVITZ_THOMPSON,
    treatment: QuotaTreatmentConfig | None = None,
    budget: EnumerationBudget | None = None,
) -> OracleExpectation:
    """Exact E[estimate] over every assignment and throttle mask."""
    budget = budget or EnumerationBudget()
    expectation, n_states = _expected_tau_hat(
        instance, scheme, quota, mechanism, convention, treatment, budget
    )
    tau, tau_star = exact_true_effects(instance, quota, mechanism, treatment, budget)
    return OracleExpectation(
        e_tau_hat=expectation,
        tau=tau,
        tau_star=tau_star,
        bias=expectation - tau,
        bias_vs_tau_star=expectation - tau_star,
        n_states=n_states,
    )


def closed_form_bias_identical(k: int, r0: float, r1: float) -> Fraction:
    """Bias of the unweighted estimator for k identical independent bidders.

    Closed form: (2^-k - 1) * effect + (1 - 2^-(k-1)) * treatment_bid, where
    the effect is the treatment bid minus the control bid. Grows toward the
    control bid as k increases.
    """
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if not r1 > r0 > 0:
        raise InvalidInputError("identical-bidder bias needs r1 > r0 > 0")
    tau = Fraction(r1) - Fraction(r0)
    return (Fraction(1, 2**k) - 1) * tau + (1 - Fraction(1, 2 ** (k - 1))) * Fraction(r1)


def verify_joint_quota_unbiasedness(
    instance: ExperimentInstance,
    quota: QuotaConfig,
    mechanism: Mechanism = Mechanism.FIRST_PRICE,
    scheme: RandomizationScheme | None = None,
    budget: EnumerationBudget | None = None,
) -> UnbiasednessCheck:
    """Gap between E[estimate] and the throttled true effect, joint quotas.

    Requires a uniform regime: either every advertiser saturated (more
    eligible queries than budget) or every advertiser unconstrained. Mixed
    regimes are refused since the unbiasedness guarantee covers neither.
    """
    if quota.mode != "joint":
        raise InvalidConfigError("joint-quota verification needs a joint quota")
    scheme = scheme or RandomizationScheme(SchemeKind.QUERY_BALANCED)
    saturated = []
    unconstrained = []
    for adv in instance.advertisers:
        n_a = instance.eligible_query_count(adv)
        (saturated if n_a > quota.q_total[adv] else unconstrained).append(adv)
    if saturated and unconstrained:
        raise InvalidConfigError(
            "mixed quota regime: advertisers "
            f"{saturated} are saturated while {unconstrained} are not; "
            "the unbiasedness guarantee needs one uniform regime"
        )
    result = exact_expected_estimate(
        instance,
        scheme,
        quota,
        mechanism,
        WeightingConvention.HORVITZ_THOMPSON,
        budget=budget,
    )
    return UnbiasednessCheck(
        e_tau_hat=result.e_tau_hat,
        tau_star=result.tau_star,
        gap=result.bias_vs_tau_star,
        n_states=result.n_states,
    )


_INTERPRETATION = (
    "control and treated proportionality checked for every advertiser; no "
    "advertiser-class partition is assumed"
)


def check_split_proportionality(
    instance: ExperimentInstance,
    quota: QuotaConfig,
    scheme: RandomizationScheme | None = None,
) -> SplitConditionReport:
    """Evaluate the split-quota unbiasedness conditions on every assignment.

    Condition 1: covariate-0 pairs bid 0 in both arms. Condition 2: each
    advertiser's control budget stays proportional to its realized control
    pool. Condition 3: its treated budget stays proportional to its realized
    covariate-1 treated pool. Ratios compare exactly via cross-multiplication.
    """
    if quota.mode != "split":
        raise InvalidConfigError("proportionality check needs a split quota")
    scheme = scheme or RandomizationScheme(SchemeKind.QUERY_BALANCED)
    if not scheme.kind.is_query_level:
        raise InvalidConfigError("conditions are defined over query-level assignments")

    records = []
    first_counterexample = None
    for adv in instance.advertisers:
        pairs = instance.pairs_by_advertiser[adv]
        n_a = len(pairs)
        x = instance.x[pairs]
        n_x1 = int(x.sum())
        offending = [
            int(i)
            for i in pairs
            if instance.x[i] == 0 and (instance.b0[i] != 0 or instance.b1[i] != 0)
        ]
        q1, q0 = quota.q1[adv], quota.q0[adv]
        q_tot = q1 + q0
        control_ok = True
        treated_ok = True
        first_bad = None
        for zv, _ in _enumerate_assignments(instance, scheme):
            z_adv = np.asarray([zv[i] for i in pairs])
            n0 = int((z_adv == 0).sum())
            n1x1 = int(((z_adv == 1) & (x == 1)).sum())
            c_ok = q0 * n_a == q_tot * n0
            t_ok = q1 * n_x1 == q_tot * n1x1
            if not (c_ok and t_ok) and first_bad is None:
                first_bad = zv
                if first_counterexample is None:
                    cond = "control_proportionality" if not c_ok else "treated_proportionality"
                    first_counterexample = (adv, cond, zv)
            control_ok &= c_ok
            treated_ok &= t_ok
        bid_zero_ok = not offending
        if not bid_zero_ok and first_counterexample is None:
            first_counterexample = (adv, "bid_zero_when_x0", None)
        records.append(
            AdvertiserConditionRecord(
                advertiser=adv,
                n_pairs=n_a,
                n_x1=n_x1,
                bid_zero_when_x0=bid_zero_ok,
                offending_pairs=offending,
                control_proportional=control_ok,
                treated_proportional=treated_ok,
                first_violation_z=first_bad,
            )
        )
    all_hold = all(
        r.bid_zero_when_x0 and r.control_proportional and r.treated_proportional
        for r in records
    )
    return SplitConditionReport(
        interpretation=_INTERPRETATION,
        advertisers=records,
        all_hold=all_hold,
        first_counterexample=None if all_hold else first_counterexample,
    )


def verify_split_quota_unbiasedness(
    instance: ExperimentInstance,
    quota: QuotaConfig,
    mechanism: Mechanism = Mechanism.FIRST_PRICE,
    scheme: RandomizationScheme | None = None,
    treatment: QuotaTreatmentConfig | None = None,
    budget: EnumerationBudget | None = None,
) -> UnbiasednessCheck:
    """Gap between E[estimate] and the true effect under split throttling."""
    if quota.mode != "split":
        raise InvalidConfigError("split-quota verification needs a split quota")
    scheme = scheme or RandomizationScheme(SchemeKind.QUERY_BALANCED)
    treatment = treatment or QuotaTreatmentConfig()
    result = exact_expected_estimate(
        instance,
        scheme,
        quota,
        mechanism,
        WeightingConvention.HORVITZ_THOMPSON,
        treatment=treatment,
        budget=budget,
    )
    return UnbiasednessCheck(
        e_tau_hat=result.e_tau_hat,
        tau_star=result.tau_star,
        gap=result.bias_vs_tau_star,
        n_states=result.n_states,
    )
