"""Single-auction mechanics: winner selection and payment realization.

Every function here is a pure function of its inputs; payments for one
query never depend on bids submitted for another query.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidInputError


class Mechanism(Enum):
    FIRST_PRICE = "first_price"
    SECOND_PRICE = "second_price"


class TieRule(Enum):
    LOWEST_ID = "lowest_id"
    SEEDED_RANDOM = "seeded_random"


@dataclass(frozen=True)
class AuctionOutcome:
    """Result of one auction.

    ``payments`` is aligned with the input bid list; at most one entry is
    nonzero and it equals ``price`` at the winner's position. A second-price
    auction with a single bidder charges that bidder its own bid (no reserve
    price is modeled).
    """

    winner: int | None
    price: float
    payments: np.ndarray


def run_auction(
    bids: list[tuple[int, float]],
    mechanism: Mechanism = Mechanism.FIRST_PRICE,
    tie: TieRule = TieRule.LOWEST_ID,
    rng: np.random.Generator | None = None,
) -> AuctionOutcome:
    """Run one auction over ``(pair_index, amount)`` bids.

    The winner has the maximal amount. First price charges the winner its
    own bid; second price charges the highest competing bid, or the winner's
    own bid if it is alone. An amount of exactly 0 participates and can win
    at price 0.
    """
    amounts = np.asarray([amt for _, amt in bids], dtype=float)
    if amounts.size and (not np.all(np.isfinite(amounts)) or np.any(amounts < 0)):
        raise InvalidInputError("bids must be finite and >= 0")
    if amounts.size == 0:
        return AuctionOutcome(winner=None, price=0.0, payments=np.zeros(0))

    top = float(amounts.max())
    tied = np.flatnonzero(amounts == top)
    if len(tied) == 1 or tie is TieRule.LOWEST_ID:
        # bids carry pair indices; break ties on the smallest one
        win_pos = min(tied, key=lambda j: bids[j][0])
    else:
        if rng is None:
            raise InvalidInputError("seeded_random tie rule requires an rng")
        win_pos = int(rng.choice(tied))

    if mechanism is Mechanism.FIRST_PRICE:
        price = top
    else:
        others = np.delete(amounts, win_pos)
        price = float(others.max()) if others.size else top

    payments = np.zeros(len(bids))
    payments[win_pos] = price
    return AuctionOutcome(winner=bids[win_pos][0], price=price, payments=payments)


def realize_payments(
    instance,
    z: np.ndarray,
    w: np.ndarray,
    mechanism: Mechanism = Mechanism.FIRST_PRICE,
    tie: TieRule = TieRule.LOWEST_ID,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-pair payments given an assignment vector and a throttle mask.

    Surviving pairs (``w == 1``) bid their treatment amount when assigned
    to treatment and their control amount otherwise; throttled pairs do not
    participate and pay 0. Queries are settled independently.
    """
    z = np.asarray(z)
    w = np.asarray(w)
    n = instance.n_pairs
    if z.shape != (n,) or w.shape != (n,):
        raise InvalidInputError(
            f"assignment/mask length mismatch: expected {n}, "
            f"got {z.shape} and {w.shape}"
        )
    bids = np.where(z == 1, instance.b1, instance.b0)
    payments = np.zeros(n)
    for members in instance.pairs_by_query:
        alive = [int(i) for i in members if w[i] == 1]
        if not alive:
            continue
        outcome = run_auction(
            [(i, float(bids[i])) for i in alive], mechanism, tie, rng
        )
        for pos, i in enumerate(alive):
            payments[i] = outcome.payments[pos]
    return payments


def total_revenue(payments: np.ndarray) -> float:
    return float(math.fsum(payments.tolist()))
