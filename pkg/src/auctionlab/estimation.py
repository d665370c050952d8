"""Treatment-effect targets and design-based estimates.

The inverse-probability estimator weights each observed payment by the
inclusion probability of its arm; the unweighted variant sums raw arm
payments. True effects compare the all-treated and all-control worlds,
averaging over throttle randomness when a quota is active.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .auction import Mechanism, realize_payments, total_revenue
from .errors import InvalidInputError
from .experiment import Assignment, ExperimentInstance
from .throttling import QuotaConfig, QuotaTreatmentConfig, draw_throttle


class WeightingConvention(Enum):
    HORVITZ_THOMPSON = "horvitz_thompson"
    UNWEIGHTED = "unweighted"


@dataclass
class EffectReport:
    """True effects for one instance; estimate fields are optional extras."""

    tau: float
    tau_a: dict[int, float]
    tau_star: float
    tau_star_a: dict[int, float]
    tau_star_se: float
    tau_hat: float | None = None
    tau_hat_a: dict[int, float] = field(default_factory=dict)


@dataclass
class SummaryStats:
    mean_est: float
    bias: float
    relative_bias: float | None
    variance: float
    se_of_mean: float
    variance_ratio: float | None = None


def _weighted_terms(
    z: Assignment, y: np.ndarray, convention: WeightingConvention
) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != z.z.shape:
        raise InvalidInputError("payment vector length does not match assignment")
    if convention is WeightingConvention.HORVITZ_THOMPSON:
        if np.any(z.p <= 0) or np.any(z.p >= 1):
            raise InvalidInputError(
                "inverse-probability weighting needs p in (0, 1) for every pair"
            )
        return np.where(z.z == 1, y / z.p, -y / (1.0 - z.p))
    return np.where(z.z == 1, y, -y)


def ht_total(
    z: Assignment,
    y: np.ndarray,
    convention: WeightingConvention = WeightingConvention.HORVITZ_THOMPSON,
) -> float:
    """Signed weighted total: treated-arm total minus control-arm total."""
    return float(math.fsum(_weighted_terms(z, y, convention).tolist()))


def ht_advertiser(
    z: Assignment,
    y: np.ndarray,
    advertiser_ids: np.ndarray,
    advertiser: int,
    convention: WeightingConvention = WeightingConvention.HORVITZ_THOMPSON,
) -> float:
    """As ht_total, restricted to one advertiser's pairs."""
    terms = _weighted_terms(z, y, convention)
    keep = np.asarray(advertiser_ids) == advertiser
    return float(math.fsum(terms[keep].tolist()))


def true_effects(
    instance: ExperimentInstance,
    quota: QuotaConfig,
    mechanism: Mechanism = Mechanism.FIRST_PRICE,
    n_mc: int = 1000,
    rng: np.random.Generator | None = None,
    treatment: QuotaTreatmentConfig | None = None,
    coupled_masks: bool = False,
) -> EffectReport:
    """True total and per-advertiser effects, with throttle expectations.

    Without a quota the all-treated versus all-control comparison is exact
    and carries zero standard error. With one, the expectation over the
    throttle distribution is estimated from ``n_mc`` replicates; each
    replicate draws one mask in the all-treated world and one in the
    all-control world (independently unless ``coupled_masks``, which reuses
    a common child stream as a variance-reduction device).
    """
    ones = np.ones(instance.n_pairs, dtype=np.int8)
    zeros = np.zeros(instance.n_pairs, dtype=np.int8)
    y1 = realize_payments(instance, ones, ones, mechanism)
    y0 = realize_payments(instance, zeros, ones, mechanism)
    tau = float(math.fsum((y1 - y0).tolist()))
    tau_a = {
        adv: float(math.fsum((y1 - y0)[instance.pairs_by_advertiser[adv]].tolist()))
        for adv in instance.advertisers
    }

    if quota.mode == "none":
        return EffectReport(
            tau=tau, tau_a=tau_a, tau_star=tau, tau_star_a=dict(tau_a), tau_star_se=0.0
        )

    if n_mc < 1:
        raise InvalidInputError("n_mc must be >= 1 when throttling is active")
    if rng is None:
        raise InvalidInputError("throttled effects need an rng")

    diffs = np.empty(n_mc)
    per_adv = {adv: np.empty(n_mc) for adv in instance.advertisers}
    for r in range(n_mc):
        if coupled_masks:
            child = rng.spawn(1)[0]
            rng1, rng0 = child, np.random.default_rng(child.bit_generator.seed_seq)
        else:
            rng1 = rng0 = rng
        w1 = draw_throttle(instance, ones, quota, rng1, treatment).w
        w0 = draw_throttle(instance, zeros, quota, rng0, treatment).w
        y1r = realize_payments(instance, ones, w1, mechanism)
        y0r = realize_payments(instance, zeros, w0, mechanism)
        delta = y1r - y0r
        diffs[r] = math.fsum(delta.tolist())
        for adv in instance.advertisers:
            per_adv[adv][r] = math.fsum(delta[instance.pairs_by_advertiser[adv]].tolist())

    tau_star = float(diffs.mean())
    se = float(diffs.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else float("inf")
    tau_star_a = {adv: float(v.mean()) for adv, v in per_adv.items()}
    return EffectReport(
        tau=tau, tau_a=tau_a, tau_star=tau_star, tau_star_a=tau_star_a, tau_star_se=se
    )


def summarize(
    estimates: list[float] | np.ndarray,
    tau_star: float,
    tau_star_se: float = 0.0,
) -> SummaryStats:
    """Mean, bias against the target, and spread of a batch of estimates."""
    values = np.asarray(estimates, dtype=float)
    if values.size < 2:
        raise InvalidInputError("summarize needs at least two estimates")
    mean_est = float(values.mean())
    bias = mean_est - tau_star
    relative = bias / tau_star if tau_star != 0.0 else None
    variance = float(values.var(ddof=1))
    se_of_mean = float(math.sqrt(variance / values.size + tau_star_se**2))
    return SummaryStats(
        mean_est=mean_est,
        bias=bias,
        relative_bias=relative,
        variance=variance,
        se_of_mean=se_of_mean,
    )
