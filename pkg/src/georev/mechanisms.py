"""Selling procedures on sampled value profiles.

Three formats: a single posted price, a second-price auction with one anonymous
reserve, and a second-price auction over an original block of buyers plus an
identically distributed replica block.  Ties go to the lowest index and a value
equal to the price or reserve sells.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import _mc
from .analytics import MONTE_CARLO, FunctionalResult
from .distributions import JointValuationModel, MaxValueDistribution, Replicated, max_distribution

Z95 = 1.959963984540054


@dataclass(frozen=True)
class AuctionOutcome:
    winner: Optional[int]
    payment: float
    welfare: float

    def __post_init__(self):
        if self.winner is None and (self.payment != 0.0 or self.welfare != 0.0):
            raise ValueError("no sale must mean zero payment and zero welfare")
        if self.payment > self.welfare:
            raise ValueError("winner cannot pay more than their value")

    @property
    def sold(self) -> bool:
        return self.winner is not None


# ---------------------------------------------------------------------------
# price / reserve sources and mechanism specs


@dataclass(frozen=True)
class Fixed:
    price: float

    def __post_init__(self):
        if not self.price > 0.0:
            raise ValueError("fixed price must be positive")


@dataclass(frozen=True)
class RandomFromMax:
    """Fresh price drawn from the max-value law on every run."""


PriceSource = Union[Fixed, RandomFromMax]


@dataclass(frozen=True)
class PostedPrice:
    source: PriceSource


@dataclass(frozen=True)
class SecondPriceReserve:
    source: PriceSource


@dataclass(frozen=True)
class SecondPriceReplicated:
    pass


MechanismSpec = Union[PostedPrice, SecondPriceReserve, SecondPriceReplicated]


def describe_mechanism(mech: MechanismSpec) -> str:
    if isinstance(mech, SecondPriceReplicated):
        return "second_price_replicated"
    src = "random_from_max" if isinstance(mech.source, RandomFromMax) else f"fixed({mech.source.price:g})"
    kind = "posted_price" if isinstance(mech, PostedPrice) else "second_price_reserve"
    return f"{kind}[{src}]"


# ---------------------------------------------------------------------------
# batch kernels: profiles (runs, n), prices (runs,)


def posted_price_batch(profiles: np.ndarray, prices: np.ndarray):
    """Returns (winner, payment, welfare); winner is -1 on no sale."""
    profiles = np.atleast_2d(profiles)
    prices = np.broadcast_to(np.asarray(prices, dtype=float), profiles.shape[:1])
    clears = profiles >= prices[:, None]
    sold = clears.any(axis=1)
    winner = np.where(sold, clears.argmax(axis=1), -1)
    rows = np.arange(profiles.shape[0])
    welfare = np.where(sold, profiles[rows, np.maximum(winner, 0)], 0.0)
    payment = np.where(sold, prices, 0.0)
    return winner, payment, welfare


def second_price_batch(profiles: np.ndarray, reserves):
    profiles = np.atleast_2d(profiles)
    reserves = np.broadcast_to(np.asarray(reserves, dtype=float), profiles.shape[:1])
    top_idx = profiles.argmax(axis=1)
    rows = np.arange(profiles.shape[0])
    top = profiles[rows, top_idx]
    if profiles.shape[1] > 1:
        second = np.partition(profiles, -2, axis=1)[:, -2]
    else:
        second = np.zeros(profiles.shape[0])
    sold = top >= reserves
    winner = np.where(sold, top_idx, -1)
    payment = np.where(sold, np.maximum(second, reserves), 0.0)
    welfare = np.where(sold, top, 0.0)
    return winner, payment, welfare


def _outcome(winner, payment, welfare) -> AuctionOutcome:
    w = int(winner[0])
    return AuctionOutcome(None, 0.0, 0.0) if w < 0 else AuctionOutcome(w, float(payment[0]), float(welfare[0]))


def run_posted_price(profile: Sequence[float], p: float) -> AuctionOutcome:
    """Lowest-index buyer with value >= p buys at p."""
    if not p > 0.0:
        raise ValueError("posted price must be positive")
    return _outcome(*posted_price_batch(np.asarray(profile, dtype=float)[None, :], p))


def run_second_price_reserve(profile: Sequence[float], r: float) -> AuctionOutcome:
    if r < 0.0:
        raise ValueError("reserve must be nonnegative")
    return _outcome(*second_price_batch(np.asarray(profile, dtype=float)[None, :], r))


def run_second_price_replicated(profile: Sequence[float]) -> AuctionOutcome:
    """Reserve-free second price auction over an original block and its replica."""
    if len(profile) < 2 or len(profile) % 2:
        raise ValueError("replicated auction needs an even number (>= 2) of bids")
    return run_second_price_reserve(profile, 0.0)


# ---------------------------------------------------------------------------
# revenue estimation


@dataclass(frozen=True)
class RevenueEstimate:
    mechanism: str
    mean: float
    std_err: float
    ci_low: float
    ci_high: float
    samples: int
    seed: int
    welfare: float
    welfare_std_err: float
    # replicated format only: revenue won from the original / replica block
    original_block: Optional[Tuple[float, float]] = None
    replica_block: Optional[Tuple[float, float]] = None
    block_gap_std_err: Optional[float] = None
    method: str = MONTE_CARLO

    def result(self) -> FunctionalResult:
        return FunctionalResult(self.mean, MONTE_CARLO, self.std_err, self.samples)

    def welfare_result(self) -> FunctionalResult:
        return FunctionalResult(self.welfare, MONTE_CARLO, self.welfare_std_err, self.samples)


def estimate_revenue(
    mech: MechanismSpec,
    model: JointValuationModel,
    budget: int,
    seed: int,
    workers: int = 1,
    maxdist: Optional[MaxValueDistribution] = None,
) -> RevenueEstimate:
    """Mean payment over ``budget`` independent runs, with standard error and 95% CI.

    Deterministic given ``seed``; random prices come from ``maxdist`` (default:
    the exact max-value law of ``model``).
    """
    if budget < 1000:
        raise ValueError("revenue estimation needs a budget of at least 1000 runs")
    replicated = isinstance(mech, SecondPriceReplicated)
    if replicated and not isinstance(model, Replicated):
        raise ValueError("SecondPriceReplicated requires a Replicated valuation model")
    source = None if replicated else mech.source
    if isinstance(source, RandomFromMax) and maxdist is None:
        maxdist = max_distribution(model)

    def chunk(rng: np.random.Generator, k: int):
        profiles = model.sample(rng, k)
        if replicated:
            prices = np.zeros(k)
        elif isinstance(source, RandomFromMax):
            prices = maxdist.sample(rng, k)
        else:
            prices = np.full(k, source.price)
        if isinstance(mech, PostedPrice):
            winner, pay, wel = posted_price_batch(profiles, prices)
        else:
            winner, pay, wel = second_price_batch(profiles, prices)
        if np.any(pay > wel) or np.any((winner < 0) & ((pay != 0) | (wel != 0))):
            raise AssertionError("auction outcome invariant broken")
        out = [_mc.Summary.of(pay), _mc.Summary.of(wel)]
        if replicated:
            # ties at the top are split evenly between tied bidders, so the
            # attribution matches a symmetric tie-break (winner stays lowest index)
            at_top = profiles == profiles.max(axis=1, keepdims=True)
            share = at_top[:, : model.n_inner].sum(axis=1) / at_top.sum(axis=1)
            orig = np.where(winner >= 0, pay * share, 0.0)
            rep = pay - orig
            out += [_mc.Summary.of(orig), _mc.Summary.of(rep), _mc.Summary.of(orig - rep)]
        return out

    parts = _mc.map_chunks(chunk, budget, seed, "revenue:" + describe_mechanism(mech), workers)
    sums = [_mc.reduce_summaries([p[i] for p in parts]) for i in range(len(parts[0]))]
    pay, wel = sums[0], sums[1]
    half = Z95 * pay.std_err
    extra = {}
    if replicated:
        extra = dict(
            original_block=(sums[2].mean, sums[2].std_err),
            replica_block=(sums[3].mean, sums[3].std_err),
            block_gap_std_err=sums[4].std_err,
        )
    return RevenueEstimate(
        describe_mechanism(mech),
        pay.mean,
        pay.std_err,
        pay.mean - half,
        pay.mean + half,
        pay.count,
        seed,
        wel.mean,
        wel.std_err,
        **extra,
    )
