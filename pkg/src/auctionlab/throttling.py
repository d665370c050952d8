"""Quota throttling: which eligible pairs actually reach their auctions.

Joint throttling gives each advertiser one budget shared by both arms;
split throttling gives separate per-arm budgets. The covariate-filter
treatment drops assigned pairs whose covariate is 0 before the standard
throttle runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .experiment import Assignment, ExperimentInstance


@dataclass(frozen=True)
class QuotaConfig:
    """Per-advertiser quotas.

    ``mode`` is one of none / joint / split. Quotas are query counts; in
    split mode the per-arm budgets must add up to the total budget.
    """

    mode: str = "none"
    q_total: dict[int, int] = field(default_factory=dict)
    q1: dict[int, int] = field(default_factory=dict)
    q0: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("none", "joint", "split"):
            raise InvalidConfigError(f"unknown quota mode {self.mode!r}")
        for name, quotas in (("q_total", self.q_total), ("q1", self.q1), ("q0", self.q0)):
            for adv, value in quotas.items():
                if int(value) != value or value < 0:
                    raise InvalidConfigError(
                        f"{name}[{adv}] must be a nonnegative integer, got {value!r}"
                    )
        if self.mode == "split":
            if set(self.q1) != set(self.q_total) or set(self.q0) != set(self.q_total):
                raise InvalidConfigError("split quotas must cover the same advertisers")
            for adv in self.q_total:
                if self.q1[adv] + self.q0[adv] != self.q_total[adv]:
                    raise InvalidConfigError(
                        f"split quotas for advertiser {adv} must sum to the total"
                    )

    @classmethod
    def joint(cls, quotas: dict[int, int]) -> "QuotaConfig":
        return cls(mode="joint", q_total=dict(quotas))

    @classmethod
    def split(
        cls,
        q1: dict[int, int],
        q0: dict[int, int],
    ) -> "QuotaConfig":
        total = {adv: q1[adv] + q0[adv] for adv in q1}
        return cls(mode="split", q_total=total, q1=dict(q1), q0=dict(q0))

    @classmethod
    def split_even(cls, quotas: dict[int, int]) -> "QuotaConfig":
        """Split each total budget evenly between the arms (totals must be even)."""
        for adv, value in quotas.items():
            if value % 2:
                raise InvalidConfigError(
                    f"even split needs an even total quota, got {value} for {adv}"
                )
        half = {adv: value // 2 for adv, value in quotas.items()}
        return cls.split(half, dict(half))

    def to_doc(self) -> dict:
        return {
            "mode": self.mode,
            "q_total": {str(k): v for k, v in self.q_total.items()},
            "q1": {str(k): v for k, v in self.q1.items()},
            "q0": {str(k): v for k, v in self.q0.items()},
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "QuotaConfig":
        return cls(
            mode=doc.get("mode", "none"),
            q_total={int(k): int(v) for k, v in doc.get("q_total", {}).items()},
            q1={int(k): int(v) for k, v in doc.get("q1", {}).items()},
            q0={int(k): int(v) for k, v in doc.get("q0", {}).items()},
        )


@dataclass(frozen=True)
class QuotaTreatmentConfig:
    """Covariate filter settings for throttling treatments.

    ``p_x`` is the Bernoulli rate used when generating covariates.
    ``veto_scope`` controls which pairs the filter can drop: "assigned"
    drops only pairs assigned to the new algorithm, "all" drops every
    covariate-0 pair (one shared algorithm, as with a joint budget).
    ``composition`` controls how the filter meets the standard throttle:
    "refill" runs the standard throttle on the filter's survivors, while
    "independent" intersects an unrestricted standard throttle draw with
    the filter, leaving freed budget unused.
    """

    p_x: float = 0.5
    veto_scope: str = "assigned"
    composition: str = "refill"

    def __post_init__(self):
        if not 0.0 <= self.p_x <= 1.0:
            raise InvalidConfigError("p_x must lie in [0, 1]")
        if self.veto_scope not in ("assigned", "all"):
            raise InvalidConfigError(f"unknown veto_scope {self.veto_scope!r}")
        if self.composition not in ("refill", "independent"):
            raise InvalidConfigError(f"unknown composition {self.composition!r}")


@dataclass(frozen=True)
class ThrottleMask:
    w: np.ndarray

    @property
    def n(self) -> int:
        return len(self.w)


def _as_z(instance: ExperimentInstance, z) -> np.ndarray:
    zv = z.z if isinstance(z, Assignment) else np.asarray(z)
    if zv.shape != (instance.n_pairs,):
        raise InvalidInputError("assignment length does not match the instance")
    return zv


def _uniform_subset(
    rng: np.random.Generator, pool: np.ndarray, size: int
) -> np.ndarray:
    """Uniformly random subset of ``pool`` of the given size (as indices)."""
    if size >= len(pool):
        return pool
    return pool[rng.choice(len(pool), size=size, replace=False)]


def throttle_joint(
    instance: ExperimentInstance,
    z,
    quota: QuotaConfig,
    rng: np.random.Generator,
    eligible: np.ndarray | None = None,
) -> ThrottleMask:
    """One shared budget per advertiser: keep a uniform subset of its pairs.

    The survivor distribution does not depend on the assignment, so this
    throttle is compatible with any bid treatment. When a pool is smaller
    than its quota everything in it is kept.
    """
    if quota.mode != "joint":
        raise InvalidConfigError("throttle_joint needs a joint-mode quota")
    _as_z(instance, z)
    w = np.zeros(instance.n_pairs, dtype=np.int8)
    for adv in instance.advertisers:
        pool = instance.pairs_by_advertiser[adv]
        if eligible is not None:
            pool = pool[eligible[pool] == 1]
        keep = _uniform_subset(rng, pool, min(quota.q_total[adv], len(pool)))
        w[keep] = 1
    return ThrottleMask(w=w)


def throttle_split(
    instance: ExperimentInstance,
    z,
    quota: QuotaConfig,
    rng: np.random.Generator,
    eligible: np.ndarray | None = None,
) -> ThrottleMask:
    """Separate per-arm budgets: uniform subsets within each arm's pool."""
    if quota.mode != "split":
        raise InvalidConfigError("throttle_split needs a split-mode quota")
    zv = _as_z(instance, z)
    w = np.zeros(instance.n_pairs, dtype=np.int8)
    for adv in instance.advertisers:
        pairs = instance.pairs_by_advertiser[adv]
        if eligible is not None:
            pairs = pairs[eligible[pairs] == 1]
        for arm, budget in ((1, quota.q1[adv]), (0, quota.q0[adv])):
            pool = pairs[zv[pairs] == arm]
            keep = _uniform_subset(rng, pool, min(budget, len(pool)))
            w[keep] = 1
    return ThrottleMask(w=w)


def covariate_veto(
    instance: ExperimentInstance, z, scope: str = "assigned"
) -> np.ndarray:
    """Pairs the covariate filter allows through (1 = kept)."""
    zv = _as_z(instance, z)
    if scope == "assigned":
        dropped = (zv == 1) & (instance.x == 0)
    else:
        dropped = instance.x == 0
    return np.where(dropped, 0, 1).astype(np.int8)


def throttle_quota_treatment(
    instance: ExperimentInstance,
    z,
    quota: QuotaConfig,
    rng: np.random.Generator,
    treatment: QuotaTreatmentConfig | None = None,
) -> ThrottleMask:
    """Covariate filter followed by the configured standard throttle.

    Stage 1 forces w = 0 wherever the filter applies (assigned pairs with
    covariate 0 by default). Stage 2 runs the standard joint or split
    throttle; under "refill" composition it draws from stage-1 survivors
    only, under "independent" it draws from the full pools and the filter
    is intersected afterwards.
    """
    treatment = treatment or QuotaTreatmentConfig()
    allowed = covariate_veto(instance, z, treatment.veto_scope)
    throttler = throttle_joint if quota.mode == "joint" else throttle_split
    if treatment.composition == "refill":
        return throttler(instance, z, quota, rng, eligible=allowed)
    base = throttler(instance, z, quota, rng)
    return ThrottleMask(w=(base.w & allowed).astype(np.int8))


def draw_throttle(
    instance: ExperimentInstance,
    z,
    quota: QuotaConfig,
    rng: np.random.Generator,
    treatment: QuotaTreatmentConfig | None = None,
) -> ThrottleMask:
    """Dispatch on quota mode; ``treatment`` adds the covariate filter."""
    if quota.mode == "none":
        return ThrottleMask(w=np.ones(instance.n_pairs, dtype=np.int8))
    if treatment is not None:
        return throttle_quota_treatment(instance, z, quota, rng, treatment)
    if quota.mode == "joint":
        return throttle_joint(instance, z, quota, rng)
    return throttle_split(instance, z, quota, rng)


def check_quota_feasible(mask: ThrottleMask, instance, z, quota: QuotaConfig) -> None:
    """Assert the budget inequalities hold for a realized mask."""
    zv = _as_z(instance, z)
    for adv in instance.advertisers:
        pairs = instance.pairs_by_advertiser[adv]
        kept = mask.w[pairs]
        if quota.mode == "joint":
            if kept.sum() > quota.q_total[adv]:
                raise InvalidInputError(f"joint quota exceeded for advertiser {adv}")
        elif quota.mode == "split":
            if (kept * (zv[pairs] == 1)).sum() > quota.q1[adv]:
                raise InvalidInputError(f"treated quota exceeded for advertiser {adv}")
            if (kept * (zv[pairs] == 0)).sum() > quota.q0[adv]:
                raise InvalidInputError(f"control quota exceeded for advertiser {adv}")
