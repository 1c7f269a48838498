import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from georev.analytics import posted_price_revenue, random_reserve_revenue
from georev.distributions import (
    CommonValueMixture,
    Empirical,
    Exponential,
    Independent,
    LogNormal,
    PointMass,
    PowerLaw,
    Replicated,
    Uniform,
    max_distribution,
)
from georev.mechanisms import (
    AuctionOutcome,
    Fixed,
    PostedPrice,
    RandomFromMax,
    SecondPriceReplicated,
    SecondPriceReserve,
    estimate_revenue,
    posted_price_batch,
    run_posted_price,
    run_second_price_replicated,
    run_second_price_reserve,
    second_price_batch,
)
from georev.verification import default_zoo

import oracles


def outcome(o):
    return (o.winner, o.payment)


def test_posted_price_examples():
    assert outcome(run_posted_price([3, 5], 4)) == (1, 4)
    assert outcome(run_posted_price([5, 5], 5)) == (0, 5)
    o = run_posted_price([1, 2], 3)
    assert (o.winner, o.payment, o.welfare) == (None, 0.0, 0.0)


@pytest.mark.parametrize("p", [0.0, -2.0])
def test_posted_price_rejects_nonpositive(p):
    with pytest.raises(ValueError):
        run_posted_price([1.0], p)


def test_second_price_reserve_examples():
    assert outcome(run_second_price_reserve([3, 7], 4)) == (1, 4)
    assert outcome(run_second_price_reserve([3, 7], 2)) == (1, 3)
    assert outcome(run_second_price_reserve([6], 5)) == (0, 5)
    assert outcome(run_second_price_reserve([3, 4], 5)) == (None, 0.0)


def test_second_price_replicated_examples():
    assert outcome(run_second_price_replicated([1, 4, 2, 3])) == (1, 3)
    assert outcome(run_second_price_replicated([5, 5, 1, 1])) == (0, 5)


@pytest.mark.parametrize("profile", [[1.0, 2.0, 3.0], [], [2.0]])
def test_second_price_replicated_rejects_odd(profile):
    with pytest.raises(ValueError):
        run_second_price_replicated(profile)


def test_auction_outcome_invariants():
    with pytest.raises(ValueError):
        AuctionOutcome(0, 5.0, 4.0)
    with pytest.raises(ValueError):
        AuctionOutcome(None, 1.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(0.01, 100.0), min_size=1, max_size=8),
    st.floats(0.01, 120.0),
)
def test_reserve_dominance_per_run(profile, p):
    posted = run_posted_price(profile, p)
    auction = run_second_price_reserve(profile, p)
    assert posted.sold == auction.sold
    assert auction.payment >= posted.payment
    for o in (posted, auction):
        assert o.payment <= o.welfare


def test_batch_kernels_match_single_runs():
    rng = np.random.default_rng(3)
    profiles = np.round(rng.exponential(1.0, (500, 4)), 1) + 0.1
    prices = np.round(rng.exponential(1.0, 500), 1) + 0.1
    w1, p1, v1 = posted_price_batch(profiles, prices)
    w2, p2, v2 = second_price_batch(profiles, prices)
    for i in range(500):
        a, b = run_posted_price(profiles[i], prices[i]), run_second_price_reserve(profiles[i], prices[i])
        assert (a.winner if a.sold else -1, a.payment, a.welfare) == (w1[i], p1[i], v1[i])
        assert (b.winner if b.sold else -1, b.payment, b.welfare) == (w2[i], p2[i], v2[i])


def test_estimate_examples():
    u1 = Independent((Uniform(0.0, 1.0),))
    a = estimate_revenue(PostedPrice(Fixed(0.5)), u1, 200_000, seed=1)
    assert abs(a.mean - 0.25) <= 4 * a.std_err
    b = estimate_revenue(SecondPriceReserve(RandomFromMax()), u1, 200_000, seed=2)
    assert abs(b.mean - oracles.single_uniform_random_reserve()) <= 4 * b.std_err
    c = estimate_revenue(SecondPriceReplicated(), Replicated(u1), 200_000, seed=3)
    closed = 1 / 3
    mc, se = oracles.mc_second_highest_two_uniforms(200_000)
    assert abs(c.mean - closed) <= 4 * c.std_err
    assert abs(mc - closed) <= 4 * se
    assert c.ci_low < c.mean < c.ci_high


def test_estimate_is_deterministic_and_worker_free():
    model = CommonValueMixture(0.5, PowerLaw(2.0), 3)
    mech = SecondPriceReserve(RandomFromMax())
    a = estimate_revenue(mech, model, 300_000, seed=9, workers=1)
    b = estimate_revenue(mech, model, 300_000, seed=9, workers=4)
    c = estimate_revenue(mech, model, 300_000, seed=10)
    assert a == b
    assert a.mean != c.mean


def test_estimate_rejects_small_budget_and_mismatch():
    u1 = Independent((Uniform(0.0, 1.0),))
    with pytest.raises(ValueError):
        estimate_revenue(PostedPrice(Fixed(0.5)), u1, 999, seed=0)
    with pytest.raises(ValueError, match="Replicated"):
        estimate_revenue(SecondPriceReplicated(), u1, 10_000, seed=0)


BRIDGE_MODELS = default_zoo()[::3]


@pytest.mark.parametrize("model", BRIDGE_MODELS, ids=lambda m: m.describe())
def test_posted_price_bridge(model):
    md = max_distribution(model)
    probes = np.quantile(md.sample(np.random.default_rng(1), 20_000), np.linspace(0.02, 0.98, 20))
    probes = np.unique(probes)
    for i, p in enumerate(probes):
        est = estimate_revenue(PostedPrice(Fixed(float(p))), model, 20_000, seed=i)
        exact = posted_price_revenue(md, float(p))
        if est.std_err == 0.0:
            assert est.mean == pytest.approx(exact, rel=1e-12)
        else:
            assert abs(est.mean - exact) <= 4 * est.std_err


@pytest.mark.parametrize(
    "inner",
    [
        Independent((Uniform(0.0, 1.0),)),
        Independent.iid(Exponential(1.0), 3),
        CommonValueMixture(0.5, LogNormal(0.0, 1.0), 2),
        Independent.iid(Empirical((0.5, 1.0, 1.0, 2.0, 4.0)), 2),
        CommonValueMixture(1.0, PointMass(3.0), 2),
    ],
    ids=lambda m: m.describe(),
)
def test_replication_decomposition(inner):
    est = estimate_revenue(SecondPriceReplicated(), Replicated(inner), 1_000_000, seed=4)
    (orig, _), (rep, _) = est.original_block, est.replica_block
    assert orig + rep == pytest.approx(est.mean, rel=1e-12)
    gap_se = est.block_gap_std_err
    assert abs(orig - rep) <= 4 * gap_se + 1e-12
    assert abs(orig - est.mean / 2) <= 4 * gap_se / 2 + 1e-12


@pytest.mark.parametrize(
    "inner",
    [
        Independent((Uniform(0.0, 1.0),)),
        Independent((Exponential(1.0),)),
        Independent.iid(Uniform(0.0, 1.0), 3),
        CommonValueMixture(0.5, PowerLaw(2.0), 3),
    ],
    ids=lambda m: m.describe(),
)
def test_replication_beats_random_reserve(inner):
    rep = estimate_revenue(SecondPriceReplicated(), Replicated(inner), 500_000, seed=6)
    res = estimate_revenue(SecondPriceReserve(RandomFromMax()), inner, 500_000, seed=7)
    joint = math.hypot(rep.std_err, 2 * res.std_err)
    assert rep.mean >= 2 * res.mean - 4 * joint
    if inner.n == 1:
        # single buyer: the replica acts exactly as a random reserve from F
        assert abs(rep.mean - 2 * res.mean) <= 4 * joint
        assert rep.mean == pytest.approx(2 * random_reserve_revenue(max_distribution(inner)).value, abs=4 * rep.std_err)


def test_no_sale_pays_nothing():
    model = Independent((PointMass(1.0),))
    est = estimate_revenue(PostedPrice(Fixed(2.0)), model, 5000, seed=0)
    assert est.mean == 0.0 and est.welfare == 0.0
