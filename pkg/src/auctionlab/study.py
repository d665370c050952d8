"""Seeded, parallel Monte Carlo replication of the simulation study grid.

Each scenario runs an outer loop over bid-distribution draws and an inner
loop over assignment draws. The engine is vectorized over replicates;
its auction arithmetic is cross-checked against the scalar reference
implementation in the test suite.

Throttling-treatment semantics used by the study: the tested algorithm
composes the standard uniform-subset throttle (drawn on the full pool,
blind to arms and covariates) with the covariate veto, and freed budget is
not redistributed. Under a joint budget the advertiser runs one algorithm
for all its traffic, so the veto applies to both arms and the experiment
carries no signal; under split budgets the treated arm runs the new
algorithm and the control arm the old one. The true effect compares the
new algorithm against the old one at the full budget in both cases.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .auction import Mechanism
from .errors import InvalidConfigError, InvalidInputError
from .estimation import WeightingConvention
from .experiment import ExperimentInstance, RandomizationScheme, SchemeKind
from .streams import TAG_BIDS, TAG_CELL, TAG_TAU_STAR, derive_rng
from .throttling import QuotaConfig

WORKERS_ENV = "AUCTIONLAB_WORKERS"

CSV_COLUMNS = [
    "scenario_id",
    "n_queries",
    "n_advertisers",
    "quota_frac",
    "mu0",
    "mu1",
    "v",
    "p_x",
    "treatment_type",
    "scheme",
    "throttle_mode",
    "convention",
    "n_outer",
    "n_inner",
    "tau_star",
    "tau_star_se",
    "mean_est",
    "bias",
    "rel_bias",
    "rel_bias_se",
    "variance",
    "var_ratio",
    "seed",
]


@dataclass(frozen=True)
class StudyConfig:
    """Grid and replication settings for one study run."""

    treatment_type: str = "bid"
    n_queries: tuple[int, ...] = (90, 120, 150)
    n_advertisers: int = 3
    quota_fractions: tuple[Fraction, ...] = (Fraction(1, 3), Fraction(2, 3))
    mu0: float = 1.0
    mu1: tuple[float, ...] = (1.05, 1.1, 2.0)
    v: float = 0.1
    p_x: tuple[float, ...] = (0.1, 0.5, 0.9)
    schemes: tuple[str, ...] = ("query_balanced", "pair_balanced")
    throttle_modes: tuple[str, ...] = ("joint", "split")
    n_bid_draws: int = 200
    n_assignments_per_draw: int = 100
    n_mc_tau_star: int = 2000
    master_seed: int = 0
    mechanism: str = "first_price"
    convention: str = "horvitz_thompson"
    coupling: str = "common_draw"

    def __post_init__(self):
        if self.treatment_type not in ("bid", "quota"):
            raise InvalidConfigError(f"unknown treatment_type {self.treatment_type!r}")
        if self.n_bid_draws < 1 or self.n_assignments_per_draw < 1:
            raise InvalidConfigError("replication counts must be >= 1")
        if self.n_mc_tau_star < 2:
            raise InvalidConfigError("n_mc_tau_star must be >= 2")
        for nq in self.n_queries:
            for frac in self.quota_fractions:
                quota = Fraction(frac) * nq
                if quota.denominator != 1:
                    raise InvalidConfigError(
                        f"quota fraction {frac} times {nq} queries is not integral"
                    )
        if self.treatment_type == "quota":
            bad = [s for s in self.schemes if not s.startswith("query")]
            if bad and self.schemes != ("query_balanced", "pair_balanced"):
                raise InvalidConfigError(
                    "throttling-treatment studies support query-level schemes only"
                )

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "treatment_type": self.treatment_type,
            "n_queries": list(self.n_queries),
            "n_advertisers": self.n_advertisers,
            "quota_fractions": [str(f) for f in self.quota_fractions],
            "mu0": self.mu0,
            "mu1": list(self.mu1),
            "v": self.v,
            "p_x": list(self.p_x),
            "schemes": list(self.schemes),
            "throttle_modes": list(self.throttle_modes),
            "n_bid_draws": self.n_bid_draws,
            "n_assignments_per_draw": self.n_assignments_per_draw,
            "n_mc_tau_star": self.n_mc_tau_star,
            "master_seed": self.master_seed,
            "mechanism": self.mechanism,
            "convention": self.convention,
            "coupling": self.coupling,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StudyConfig":
        doc = json.loads(text)
        if doc.get("schema_version") != 1:
            raise InvalidConfigError("unsupported study config schema version")
        kwargs = dict(doc)
        kwargs.pop("schema_version")
        kwargs["n_queries"] = tuple(kwargs["n_queries"])
        kwargs["quota_fractions"] = tuple(
            Fraction(f) for f in kwargs["quota_fractions"]
        )
        kwargs["mu1"] = tuple(kwargs["mu1"])
        kwargs["p_x"] = tuple(kwargs["p_x"])
        kwargs["schemes"] = tuple(kwargs["schemes"])
        kwargs["throttle_modes"] = tuple(kwargs["throttle_modes"])
        return cls(**kwargs)


@dataclass
class Scenario:
    index: int
    scenario_id: str
    n_queries: int
    quota_frac: Fraction
    quota: int
    mu1: float | None
    p_x: float | None


@dataclass
class StudyRow:
    scenario_id: str
    n_queries: int
    n_advertisers: int
    quota_frac: str
    mu0: float
    mu1: float | None
    v: float
    p_x: float | None
    treatment_type: str
    scheme: str
    throttle_mode: str
    convention: str
    n_outer: int
    n_inner: int
    tau_star: float
    tau_star_se: float
    mean_est: float
    bias: float
    rel_bias: float | None
    rel_bias_se: float | None
    variance: float
    var_ratio: float | None
    seed: int
    runtime: float = 0.0


def scenario_grid(config: StudyConfig) -> list[Scenario]:
    scenarios = []
    third_axis = config.mu1 if config.treatment_type == "bid" else config.p_x
    idx = 0
    for nq in config.n_queries:
        for frac in config.quota_fractions:
            for value in third_axis:
                quota = int(Fraction(frac) * nq)
                scenarios.append(
                    Scenario(
                        index=idx,
                        scenario_id=f"{config.treatment_type}-{idx:03d}",
                        n_queries=nq,
                        quota_frac=frac,
                        quota=quota,
                        mu1=value if config.treatment_type == "bid" else None,
                        p_x=value if config.treatment_type == "quota" else None,
                    )
                )
                idx += 1
    return scenarios


# ---------------------------------------------------------------------------
# Vectorized kernels. Shapes follow (replicates, queries, advertisers).
# ---------------------------------------------------------------------------


def _topk_rows(rng: np.random.Generator, n_rows: int, n: int, k: int) -> np.ndarray:
    """Boolean (n_rows, n): a uniformly random size-k subset per row."""
    if k <= 0:
        return np.zeros((n_rows, n), dtype=bool)
    if k >= n:
        return np.ones((n_rows, n), dtype=bool)
    u = rng.random((n_rows, n))
    idx = np.argpartition(u, k - 1, axis=1)[:, :k]
    out = np.zeros((n_rows, n), dtype=bool)
    np.put_along_axis(out, idx, True, axis=1)
    return out


def _joint_masks(
    rng: np.random.Generator, n_rep: int, n_q: int, n_adv: int, quota: int
) -> np.ndarray:
    """Independent uniform quota-subsets per advertiser, blind to arms."""
    if quota >= n_q:
        return np.ones((n_rep, n_q, n_adv), dtype=bool)
    u = rng.random((n_rep, n_q, n_adv))
    if quota <= 0:
        return np.zeros((n_rep, n_q, n_adv), dtype=bool)
    idx = np.argpartition(u, quota - 1, axis=1)[:, :quota, :]
    out = np.zeros((n_rep, n_q, n_adv), dtype=bool)
    np.put_along_axis(out, idx, True, axis=1)
    return out


def _split_masks(
    rng: np.random.Generator,
    zq: np.ndarray,
    n_adv: int,
    q1: int,
    q0: int,
) -> np.ndarray:
    """Per-arm uniform subsets for query-level assignments with fixed arm sizes."""
    n_rep, n_q = zq.shape
    counts = zq[0].sum(), n_q - zq[0].sum()
    if __debug__:
        assert np.all(zq.sum(axis=1) == counts[0]), "arm sizes must be constant"
    u = rng.random((n_rep, n_q, n_adv))
    w = np.zeros((n_rep, n_q, n_adv), dtype=bool)
    for arm, budget, count in ((1, q1, int(counts[0])), (0, q0, int(counts[1]))):
        k = min(budget, count)
        if k <= 0:
            continue
        arm_rows = (zq == arm)[:, :, None]
        u_arm = np.where(arm_rows, u, np.inf)
        idx = np.argpartition(u_arm, k - 1, axis=1)[:, :k, :]
        sel = np.zeros_like(w)
        np.put_along_axis(sel, idx, True, axis=1)
        w |= sel & arm_rows
    return w


def _prices(bids: np.ndarray, w: np.ndarray, mechanism: Mechanism):
    """Winner position and settled price per query; 0-price when nobody bids."""
    scores = np.where(w, bids, -1.0)
    winner = scores.argmax(axis=-1)
    top = np.take_along_axis(scores, winner[..., None], axis=-1)[..., 0]
    valid = top >= 0.0
    if mechanism is Mechanism.FIRST_PRICE or bids.shape[-1] < 2:
        price = np.where(valid, top, 0.0)
    else:
        second = np.partition(scores, bids.shape[-1] - 2, axis=-1)[..., -2]
        price = np.where(valid, np.where(second >= 0.0, second, top), 0.0)
    return winner, price, valid


def _revenues(bids: np.ndarray, w: np.ndarray, mechanism: Mechanism) -> np.ndarray:
    _, price, _ = _prices(np.broadcast_to(bids, w.shape), w, mechanism)
    return price.sum(axis=-1)


def _tau_hats(
    bids_treat: np.ndarray,
    bids_control: np.ndarray,
    z_pairs: np.ndarray,
    w: np.ndarray,
    p: float,
    mechanism: Mechanism,
    convention: WeightingConvention,
) -> np.ndarray:
    z_pairs = np.broadcast_to(z_pairs, w.shape)
    bids = np.where(z_pairs, bids_treat, bids_control)
    winner, price, valid = _prices(bids, w, mechanism)
    winner_treated = np.take_along_axis(z_pairs, winner[..., None], axis=-1)[..., 0]
    if convention is WeightingConvention.HORVITZ_THOMPSON:
        weight = np.where(winner_treated, 1.0 / p, -1.0 / (1.0 - p))
    else:
        weight = np.where(winner_treated, 1.0, -1.0)
    return np.where(valid, price * weight, 0.0).sum(axis=-1)


def _draw_assignments(
    rng: np.random.Generator,
    scheme: RandomizationScheme,
    n_rep: int,
    n_q: int,
    n_adv: int,
) -> tuple[np.ndarray, float]:
    """Pair-level boolean assignments (n_rep, n_q, n_adv) plus the marginal p."""
    n = n_q * n_adv
    if scheme.kind is SchemeKind.QUERY_BALANCED:
        zq = _topk_rows(rng, n_rep, n_q, n_q // 2)
        return zq[:, :, None] & np.ones(n_adv, dtype=bool), (n_q // 2) / n_q
    if scheme.kind is SchemeKind.QUERY_BERNOULLI:
        zq = rng.random((n_rep, n_q)) < scheme.p
        return zq[:, :, None] & np.ones(n_adv, dtype=bool), scheme.p
    if scheme.kind is SchemeKind.PAIR_BALANCED:
        z = _topk_rows(rng, n_rep, n, n // 2)
        return z.reshape(n_rep, n_q, n_adv), (n // 2) / n
    z = rng.random((n_rep, n)) < scheme.p
    return z.reshape(n_rep, n_q, n_adv), scheme.p


# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------


def _mechanism(config: StudyConfig) -> Mechanism:
    return Mechanism(config.mechanism)


def _convention(config: StudyConfig) -> WeightingConvention:
    return WeightingConvention(config.convention)


def _draw_bid_matrices(rng, config: StudyConfig, scenario: Scenario):
    n = scenario.n_queries * config.n_advertisers
    sd = math.sqrt(config.v)
    base = rng.standard_normal(n)
    if config.coupling == "common_draw":
        other = base
    else:
        other = rng.standard_normal(n)
    mu1 = scenario.mu1 if scenario.mu1 is not None else config.mu0
    b0 = np.exp(config.mu0 + sd * base).reshape(scenario.n_queries, config.n_advertisers)
    b1 = np.exp(mu1 + sd * other).reshape(scenario.n_queries, config.n_advertisers)
    return b0, b1


def _summary_from_draws(
    tau_star_b: np.ndarray,
    tau_star_se_b: np.ndarray,
    mean_b: np.ndarray,
    var_b: np.ndarray,
) -> dict:
    n_outer = len(mean_b)
    tau_star = float(tau_star_b.mean())
    tau_star_se = float(math.sqrt(float((tau_star_se_b**2).sum())) / n_outer)
    mean_est = float(mean_b.mean())
    bias_b = mean_b - tau_star_b
    bias = float(bias_b.mean())
    if n_outer > 1:
        bias_se = math.sqrt(bias_b.var(ddof=1) / n_outer + tau_star_se**2)
    else:
        bias_se = float("nan")
    rel_bias = bias / tau_star if tau_star != 0.0 else None
    rel_bias_se = bias_se / abs(tau_star) if tau_star != 0.0 else None
    return {
        "tau_star": tau_star,
        "tau_star_se": tau_star_se,
        "mean_est": mean_est,
        "bias": bias,
        "rel_bias": rel_bias,
        "rel_bias_se": rel_bias_se,
        "variance": float(var_b.mean()),
    }


def _run_bid_scenario(config: StudyConfig, scenario: Scenario) -> list[StudyRow]:
    start = time.perf_counter()
    n_q, n_adv, quota = scenario.n_queries, config.n_advertisers, scenario.quota
    mech, conv = _mechanism(config), _convention(config)
    n_outer, n_inner, n_mc = (
        config.n_bid_draws,
        config.n_assignments_per_draw,
        config.n_mc_tau_star,
    )
    schemes = [RandomizationScheme(SchemeKind(s)) for s in config.schemes]

    tau_star_b = np.empty(n_outer)
    tau_star_se_b = np.empty(n_outer)
    mean_b = {s.tag: np.empty(n_outer) for s in schemes}
    var_b = {s.tag: np.empty(n_outer) for s in schemes}

    for b in range(n_outer):
        bid_rng = derive_rng(config.master_seed, TAG_BIDS, scenario.index, b)
        b0, b1 = _draw_bid_matrices(bid_rng, config, scenario)

        tau_rng = derive_rng(config.master_seed, TAG_TAU_STAR, scenario.index, b)
        s1 = _joint_masks(tau_rng, n_mc, n_q, n_adv, quota)
        s0 = _joint_masks(tau_rng, n_mc, n_q, n_adv, quota)
        diffs = _revenues(b1, s1, mech) - _revenues(b0, s0, mech)
        tau_star_b[b] = diffs.mean()
        tau_star_se_b[b] = diffs.std(ddof=1) / math.sqrt(n_mc)

        for cell_idx, scheme in enumerate(schemes):
            cell_rng = derive_rng(
                config.master_seed, TAG_CELL, scenario.index, cell_idx, b
            )
            z_pairs, p = _draw_assignments(cell_rng, scheme, n_inner, n_q, n_adv)
            w = _joint_masks(cell_rng, n_inner, n_q, n_adv, quota)
            taus = _tau_hats(b1, b0, z_pairs, w, p, mech, conv)
            mean_b[scheme.tag][b] = taus.mean()
            var_b[scheme.tag][b] = taus.var(ddof=1) if n_inner > 1 else float("nan")

    runtime = time.perf_counter() - start
    rows = []
    for scheme in schemes:
        stats = _summary_from_draws(
            tau_star_b, tau_star_se_b, mean_b[scheme.tag], var_b[scheme.tag]
        )
        rows.append(
            StudyRow(
                scenario_id=scenario.scenario_id,
                n_queries=n_q,
                n_advertisers=n_adv,
                quota_frac=str(scenario.quota_frac),
                mu0=config.mu0,
                mu1=scenario.mu1,
                v=config.v,
                p_x=None,
                treatment_type="bid",
                scheme=scheme.tag,
                throttle_mode="joint",
                convention=config.convention,
                n_outer=n_outer,
                n_inner=n_inner,
                seed=config.master_seed,
                var_ratio=None,
                runtime=runtime,
                **stats,
            )
        )
    _fill_variance_ratio(rows)
    return rows


def _fill_variance_ratio(rows: list[StudyRow]) -> None:
    """Pair-vs-query variance ratio on the pair-randomized row of a scenario."""
    by_scheme = {r.scheme: r for r in rows}
    query = by_scheme.get("query_balanced")
    pair = by_scheme.get("pair_balanced")
    if query is None or pair is None:
        return
    if not query.variance or math.isnan(query.variance):
        pair.var_ratio = None
        return
    pair.var_ratio = pair.variance / query.variance


def _run_quota_scenario(config: StudyConfig, scenario: Scenario) -> list[StudyRow]:
    start = time.perf_counter()
    n_q, n_adv, quota = scenario.n_queries, config.n_advertisers, scenario.quota
    mech, conv = _mechanism(config), _convention(config)
    n_outer, n_inner, n_mc = (
        config.n_bid_draws,
        config.n_assignments_per_draw,
        config.n_mc_tau_star,
    )
    if quota % 2:
        raise InvalidConfigError(
            f"split throttling needs an even quota, got {quota} for "
            f"{scenario.n_queries} queries at fraction {scenario.quota_frac}"
        )
    q_half = quota // 2
    modes = list(config.throttle_modes)

    tau_star_b = np.empty(n_outer)
    tau_star_se_b = np.empty(n_outer)
    mean_b = {m: np.empty(n_outer) for m in modes}
    var_b = {m: np.empty(n_outer) for m in modes}
    p = (n_q // 2) / n_q

    for b in range(n_outer):
        bid_rng = derive_rng(config.master_seed, TAG_BIDS, scenario.index, b)
        bids, _ = _draw_bid_matrices(bid_rng, config, scenario)
        x = bid_rng.random((n_q, n_adv)) < scenario.p_x

        tau_rng = derive_rng(config.master_seed, TAG_TAU_STAR, scenario.index, b)
        s1 = _joint_masks(tau_rng, n_mc, n_q, n_adv, quota) & x
        s0 = _joint_masks(tau_rng, n_mc, n_q, n_adv, quota)
        diffs = _revenues(bids, s1, mech) - _revenues(bids, s0, mech)
        tau_star_b[b] = diffs.mean()
        tau_star_se_b[b] = diffs.std(ddof=1) / math.sqrt(n_mc)

        for cell_idx, mode in enumerate(modes):
            cell_rng = derive_rng(
                config.master_seed, TAG_CELL, scenario.index, cell_idx, b
            )
            zq = _topk_rows(cell_rng, n_inner, n_q, n_q // 2)
            z_pairs = zq[:, :, None] & np.ones(n_adv, dtype=bool)
            if mode == "joint":
                # one shared budget, one algorithm: the veto hits both arms
                w = _joint_masks(cell_rng, n_inner, n_q, n_adv, quota) & x
            elif mode == "split":
                w = _split_masks(cell_rng, zq, n_adv, q_half, q_half)
                w &= x | ~z_pairs
            else:
                raise InvalidConfigError(f"unknown throttle mode {mode!r}")
            taus = _tau_hats(bids, bids, z_pairs, w, p, mech, conv)
            mean_b[mode][b] = taus.mean()
            var_b[mode][b] = taus.var(ddof=1) if n_inner > 1 else float("nan")

    runtime = time.perf_counter() - start
    rows = []
    for mode in modes:
        stats = _summary_from_draws(tau_star_b, tau_star_se_b, mean_b[mode], var_b[mode])
        rows.append(
            StudyRow(
                scenario_id=scenario.scenario_id,
                n_queries=n_q,
                n_advertisers=n_adv,
                quota_frac=str(scenario.quota_frac),
                mu0=config.mu0,
                mu1=None,
                v=config.v,
                p_x=scenario.p_x,
                treatment_type="quota",
                scheme="query_balanced",
                throttle_mode=mode,
                convention=config.convention,
                n_outer=n_outer,
                n_inner=n_inner,
                seed=config.master_seed,
                var_ratio=None,
                runtime=runtime,
                **stats,
            )
        )
    return rows


def _scenario_worker(args: tuple[StudyConfig, int]) -> list[StudyRow]:
    config, index = args
    scenario = scenario_grid(config)[index]
    if config.treatment_type == "bid":
        return _run_bid_scenario(config, scenario)
    return _run_quota_scenario(config, scenario)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def run_study(config: StudyConfig, workers: int | None = None) -> list[StudyRow]:
    """Run the full grid; results do not depend on the worker count."""
    scenarios = scenario_grid(config)
    workers = workers if workers is not None else default_workers()
    tasks = [(config, s.index) for s in scenarios]
    if workers <= 1 or len(tasks) <= 1:
        batches = [_scenario_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_scenario_worker, tasks))
    return [row for batch in batches for row in batch]


def variance_ratio_study(config: StudyConfig, workers: int | None = None) -> list[StudyRow]:
    """Bid study with both randomization schemes, ratio filled on pair rows."""
    if config.treatment_type != "bid":
        raise InvalidConfigError("variance ratios compare bid-treatment schemes")
    needed = {"query_balanced", "pair_balanced"}
    if not needed.issubset(set(config.schemes)):
        raise InvalidConfigError(
            "variance ratios need both query_balanced and pair_balanced schemes"
        )
    return run_study(config, workers)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[StudyRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_format_field(getattr(row, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(rows: list[StudyRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


# ---------------------------------------------------------------------------
# Monte Carlo cross-check against the exact oracle
# ---------------------------------------------------------------------------


def _rectangular_layout(instance: ExperimentInstance) -> tuple[int, int]:
    n_q = instance.n_queries
    n_adv = len(instance.advertisers)
    if instance.n_pairs != n_q * n_adv:
        raise InvalidInputError("Monte Carlo engine needs full-eligibility instances")
    expected_q = np.repeat(np.arange(n_q), n_adv)
    expected_a = np.tile(np.sort(instance.advertisers), n_q)
    if not (
        np.array_equal(instance.q, expected_q)
        and np.array_equal(instance.a, expected_a)
    ):
        raise InvalidInputError("Monte Carlo engine needs full-eligibility instances")
    return n_q, n_adv


def mc_expected_estimate(
    instance: ExperimentInstance,
    scheme: RandomizationScheme,
    quota: QuotaConfig = QuotaConfig(),
    mechanism: Mechanism = Mechanism.FIRST_PRICE,
    convention: WeightingConvention = WeightingConvention.HORVITZ_THOMPSON,
    n_draws: int = 10**6,
    rng: np.random.Generator | None = None,
    chunk: int = 200_000,
) -> tuple[float, float]:
    """Sampled E[estimate] and its standard error, via the vectorized engine."""
    if rng is None:
        raise InvalidInputError("mc_expected_estimate needs an rng")
    n_q, n_adv = _rectangular_layout(instance)
    if quota.mode == "split":
        raise InvalidConfigError("Monte Carlo cross-check supports none/joint quotas")
    if quota.mode == "joint":
        quotas = {adv: quota.q_total[adv] for adv in instance.advertisers}
        if len(set(quotas.values())) != 1:
            raise InvalidConfigError("Monte Carlo cross-check needs a uniform quota")
        q_value = next(iter(quotas.values()))
    else:
        q_value = n_q
    bids_c = instance.b0.reshape(n_q, n_adv)
    bids_t = instance.b1.reshape(n_q, n_adv)

    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_draws:
        size = min(chunk, n_draws - done)
        z_pairs, p = _draw_assignments(rng, scheme, size, n_q, n_adv)
        w = _joint_masks(rng, size, n_q, n_adv, q_value)
        taus = _tau_hats(bids_t, bids_c, z_pairs, w, p, mechanism, convention)
        total += float(taus.sum())
        total_sq += float((taus**2).sum())
        done += size
    mean = total / n_draws
    variance = max(total_sq / n_draws - mean**2, 0.0) * n_draws / (n_draws - 1)
    return mean, math.sqrt(variance / n_draws)
