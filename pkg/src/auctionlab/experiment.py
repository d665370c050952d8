"""Experiment world: instances, randomization schemes, potential-bid draws.

An instance fixes the set of queries, the eligible (query, advertiser)
pairs, both potential bids per pair, and a binary covariate per pair.
Randomization schemes produce assignment vectors together with the exact
per-pair marginal inclusion probability they induce.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import InvalidConfigError, InvalidInputError


class SchemeKind(Enum):
    QUERY_BALANCED = "query_balanced"
    QUERY_BERNOULLI = "query_bernoulli"
    PAIR_BALANCED = "pair_balanced"
    PAIR_BERNOULLI = "pair_bernoulli"

    @property
    def is_query_level(self) -> bool:
        return self in (SchemeKind.QUERY_BALANCED, SchemeKind.QUERY_BERNOULLI)

    @property
    def is_balanced(self) -> bool:
        return self in (SchemeKind.QUERY_BALANCED, SchemeKind.PAIR_BALANCED)


@dataclass(frozen=True)
class RandomizationScheme:
    kind: SchemeKind
    p: float = 0.5

    def __post_init__(self):
        if not self.kind.is_balanced and not 0.0 < self.p < 1.0:
            raise InvalidConfigError("Bernoulli schemes need p in (0, 1)")

    @property
    def tag(self) -> str:
        return self.kind.value


@dataclass(eq=False)
class ExperimentInstance:
    """The fixed world one experiment runs on.

    Pairs are kept sorted by (query, advertiser); tie-breaking by lowest
    pair index therefore prefers the lowest advertiser id within a query.
    """

    n_queries: int
    q: np.ndarray
    a: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.int64)
        self.a = np.asarray(self.a, dtype=np.int64)
        self.b0 = np.asarray(self.b0, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.x = np.asarray(self.x, dtype=np.int8)
        n = len(self.q)
        if not (len(self.a) == len(self.b0) == len(self.b1) == len(self.x) == n):
            raise InvalidInputError("instance arrays must share one length")
        if n == 0:
            raise InvalidInputError("instance needs at least one pair")
        if np.any(self.q < 0) or np.any(self.q >= self.n_queries):
            raise InvalidInputError("query ids must lie in [0, n_queries)")
        if len(np.unique(self.q)) != self.n_queries:
            raise InvalidInputError("every query needs at least one eligible pair")
        if len({(int(qi), int(ai)) for qi, ai in zip(self.q, self.a)}) != n:
            raise InvalidInputError("(query, advertiser) pairs must be unique")
        if not np.all(np.isfinite(self.b0)) or not np.all(np.isfinite(self.b1)):
            raise InvalidInputError("potential bids must be finite")
        if np.any(self.b0 < 0) or np.any(self.b1 < 0):
            raise InvalidInputError("potential bids must be >= 0")
        if not np.all(np.isin(self.x, (0, 1))):
            raise InvalidInputError("covariate x must be binary")
        order = np.lexsort((self.a, self.q))
        if not np.array_equal(order, np.arange(n)):
            self.q, self.a = self.q[order], self.a[order]
            self.b0, self.b1 = self.b0[order], self.b1[order]
            self.x = self.x[order]

    @property
    def n_pairs(self) -> int:
        return len(self.q)

    @cached_property
    def advertisers(self) -> list[int]:
        return sorted(int(v) for v in np.unique(self.a))

    @cached_property
    def pairs_by_query(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.q == qi) for qi in range(self.n_queries)]

    @cached_property
    def pairs_by_advertiser(self) -> dict[int, np.ndarray]:
        return {adv: np.flatnonzero(self.a == adv) for adv in self.advertisers}

    def eligible_query_count(self, advertiser: int) -> int:
        return int(len(self.pairs_by_advertiser[advertiser]))

    def scaled(self, factor: float) -> "ExperimentInstance":
        return ExperimentInstance(
            self.n_queries, self.q, self.a, self.b0 * factor, self.b1 * factor, self.x
        )

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "n_queries": self.n_queries,
            "pairs": [
                {
                    "q": int(qi),
                    "a": int(ai),
                    "b0": float(v0),
                    "b1": float(v1),
                    "x": int(xi),
                }
                for qi, ai, v0, v1, xi in zip(self.q, self.a, self.b0, self.b1, self.x)
            ],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentInstance":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise InvalidConfigError("unsupported instance document version")
        pairs = doc["pairs"]
        return cls(
            n_queries=int(doc["n_queries"]),
            q=[p["q"] for p in pairs],
            a=[p["a"] for p in pairs],
            b0=[p["b0"] for p in pairs],
            b1=[p["b1"] for p in pairs],
            x=[p.get("x", 1) for p in pairs],
        )


@dataclass(frozen=True)
class Assignment:
    """An assignment vector plus the inclusion probability of each pair."""

    z: np.ndarray
    p: np.ndarray
    scheme_tag: str = ""

    @property
    def n(self) -> int:
        return len(self.z)


@dataclass(frozen=True)
class BidDistributionConfig:
    """Lognormal potential-bid generator on the log scale.

    ``v`` is the log-scale variance. With ``common_draw`` coupling the two
    potential bids of a pair share one underlying normal draw, giving
    perfectly correlated log bids; ``independent`` draws them separately.
    """

    mu0: float = 1.0
    mu1: float = 1.1
    v: float = 0.1
    coupling: str = "common_draw"

    def __post_init__(self):
        if self.v <= 0:
            raise InvalidConfigError("log-scale variance v must be > 0")
        if self.coupling not in ("common_draw", "independent"):
            raise InvalidConfigError(f"unknown coupling {self.coupling!r}")


def _balanced_pick(rng: np.random.Generator, pool: int) -> tuple[np.ndarray, float]:
    if pool < 2:
        raise InvalidConfigError("balanced randomization needs a pool of >= 2")
    k = pool // 2
    chosen = rng.choice(pool, size=k, replace=False)
    flags = np.zeros(pool, dtype=np.int8)
    flags[chosen] = 1
    return flags, k / pool


def draw_assignment(
    scheme: RandomizationScheme,
    instance: ExperimentInstance,
    rng: np.random.Generator,
) -> Assignment:
    """Draw one assignment.

    Query-level schemes assign whole queries, so z is constant within each
    query. Balanced schemes treat exactly floor(pool / 2) units; their
    marginal inclusion probability is floor(pool / 2) / pool.
    """
    n = instance.n_pairs
    if scheme.kind is SchemeKind.QUERY_BALANCED:
        zq, p = _balanced_pick(rng, instance.n_queries)
        z = zq[instance.q]
    elif scheme.kind is SchemeKind.QUERY_BERNOULLI:
        zq = (rng.random(instance.n_queries) < scheme.p).astype(np.int8)
        z, p = zq[instance.q], scheme.p
    elif scheme.kind is SchemeKind.PAIR_BALANCED:
        z, p = _balanced_pick(rng, n)
    else:
        z, p = (rng.random(n) < scheme.p).astype(np.int8), scheme.p
    if __debug__ and scheme.kind.is_balanced:
        pool = instance.n_queries if scheme.kind.is_query_level else n
        treated = int(zq.sum()) if scheme.kind.is_query_level else int(z.sum())
        assert treated == pool // 2
    return Assignment(z=z, p=np.full(n, p), scheme_tag=scheme.tag)


def draw_potential_bids(
    config: BidDistributionConfig,
    n_pairs: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (control, treatment) potential bid vectors for ``n_pairs`` pairs."""
    if n_pairs < 1:
        raise InvalidInputError("n_pairs must be >= 1")
    sd = np.sqrt(config.v)
    base = rng.standard_normal(n_pairs)
    other = base if config.coupling == "common_draw" else rng.standard_normal(n_pairs)
    b0 = np.exp(config.mu0 + sd * base)
    b1 = np.exp(config.mu1 + sd * other)
    return b0, b1


def identical_bidders_instance(k: int, r0: float, r1: float) -> ExperimentInstance:
    """Single query, k bidders, all sharing control bid r0 and treatment bid r1."""
    if k < 1:
        raise InvalidConfigError("need at least one bidder")
    if not r1 > r0 > 0:
        raise InvalidConfigError("identical bidders require r1 > r0 > 0")
    return ExperimentInstance(
        n_queries=1,
        q=np.zeros(k, dtype=int),
        a=np.arange(k),
        b0=np.full(k, float(r0)),
        b1=np.full(k, float(r1)),
        x=np.ones(k, dtype=int),
    )


def dominating_treatment_instance(b0, b1) -> ExperimentInstance:
    """Single query where every treatment bid beats every control bid.

    Treatment bids must be strictly decreasing in the bidder index so the
    lowest-index treated bidder always wins a mixed auction.
    """
    b0 = np.asarray(b0, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    if b0.shape != b1.shape or b0.ndim != 1 or len(b0) < 1:
        raise InvalidConfigError("b0 and b1 must be 1-d vectors of equal length")
    if not b1.min() > b0.max():
        raise InvalidConfigError(
            "dominance violated: min treatment bid must exceed max control bid"
        )
    if len(b1) > 1 and not np.all(np.diff(b1) < 0):
        raise InvalidConfigError(
            'ordering "B_i(1) > B_j(1) if i < j" violated: treatment bids '
            "must be strictly decreasing"
        )
    k = len(b0)
    return ExperimentInstance(
        n_queries=1,
        q=np.zeros(k, dtype=int),
        a=np.arange(k),
        b0=b0,
        b1=b1,
        x=np.ones(k, dtype=int),
    )


def build_toy_instance(kind: str, **params) -> ExperimentInstance:
    """Construct one of the worked single-auction examples by name."""
    if kind == "identical_bidders":
        return identical_bidders_instance(params["k"], params["r0"], params["r1"])
    if kind == "dominating_treatment":
        return dominating_treatment_instance(params["b0"], params["b1"])
    raise InvalidConfigError(f"unknown toy instance kind {kind!r}")


def full_eligibility_instance(
    n_queries: int,
    n_advertisers: int,
    b0: np.ndarray,
    b1: np.ndarray,
    x: np.ndarray | None = None,
) -> ExperimentInstance:
    """Instance where every advertiser is eligible for every query.

    Pair order is (query-major, advertiser-minor); bid matrices of shape
    (n_queries, n_advertisers) flatten in the same order.
    """
    q = np.repeat(np.arange(n_queries), n_advertisers)
    a = np.tile(np.arange(n_advertisers), n_queries)
    n = n_queries * n_advertisers
    xs = np.ones(n, dtype=int) if x is None else np.asarray(x).reshape(n)
    return ExperimentInstance(
        n_queries=n_queries,
        q=q,
        a=a,
        b0=np.asarray(b0, dtype=float).reshape(n),
        b1=np.asarray(b1, dtype=float).reshape(n),
        x=xs,
    )
