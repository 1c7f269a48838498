import json
import math

import pytest

from georev.analytics import CLOSED_FORM, MONTE_CARLO, QUADRATURE, FunctionalResult
from georev.distributions import (
    CommonValueMixture,
    Exponential,
    Independent,
    LogNormal,
    PointMass,
    PowerLaw,
    Replicated,
    Uniform,
    max_distribution,
)
from georev.mechanisms import PostedPrice, RandomFromMax, estimate_revenue
from georev.verification import (
    ALL_CHECKS,
    HOLDS,
    REJECTED,
    VACUOUS,
    VIOLATED,
    WITHIN,
    Tolerances,
    check_anonymous_reserve_corollary,
    check_efficiency_corollary,
    check_jensen,
    check_log_survival_identity,
    check_main_theorem,
    check_monopoly_corollary,
    check_replication_corollary,
    default_zoo,
    judge,
    run_checks,
)

import oracles

E = math.e
U1 = Independent((Uniform(0.0, 1.0),))
U2 = Independent.iid(Uniform(0.0, 1.0), 2)
BUDGET = 200_000


# ---------------------------------------------------------------------------
# verdict rule


def mc(v, se):
    return FunctionalResult(v, MONTE_CARLO, se, 1000)


def exact(v):
    return FunctionalResult(v, CLOSED_FORM)


@pytest.mark.parametrize(
    "lhs, rhs, verdict",
    [
        (mc(1.0, 0.01), exact(0.95), HOLDS),
        (mc(1.0, 0.01), exact(0.98), WITHIN),
        (mc(1.0, 0.01), exact(1.02), WITHIN),
        (mc(1.0, 0.01), exact(1.04), VIOLATED),
        (exact(1.0), exact(1.0 + 1e-10), WITHIN),
        (exact(1.0), exact(1.0 - 1e-8), HOLDS),
        (exact(1.0), exact(1.0 + 1e-8), VIOLATED),
    ],
)
def test_verdict_rule(lhs, rhs, verdict):
    assert judge(lhs, rhs) == verdict


def test_quadrature_error_widens_band():
    lhs = FunctionalResult(1.0, QUADRATURE, abs_err=1e-6)
    assert judge(lhs, exact(1.0 + 5e-7)) == WITHIN


def test_band_width_is_configurable():
    assert judge(mc(1.0, 0.01), exact(1.04), Tolerances(sigma_band=5.0)) == WITHIN


# ---------------------------------------------------------------------------
# main theorem and tightness


def test_main_theorem_tight_at_equal_revenue():
    r = check_main_theorem(Independent((PowerLaw(1.0),)))
    assert r.lhs.value == pytest.approx(1.0, abs=1e-9)
    assert r.rhs.value == pytest.approx(1.0, abs=1e-12)
    assert abs(r.margin) <= 1e-6
    assert r.verdict == WITHIN


def test_main_theorem_two_uniforms():
    r = check_main_theorem(U2)
    assert r.lhs.value == pytest.approx(oracles.max2_uniform_random_reserve(), abs=1e-10)
    assert r.rhs.value == pytest.approx(math.exp(oracles.max2_uniform_log_mean()) / E, abs=1e-10)
    assert r.verdict == HOLDS


@pytest.mark.parametrize("v", [0.5, 3.0])
def test_point_mass_checks(v):
    pm = Independent((PointMass(v),))
    main = check_main_theorem(pm)
    assert (main.lhs.value, main.rhs.value) == (pytest.approx(v), pytest.approx(v / E))
    mono = check_monopoly_corollary(pm)
    assert (mono.lhs.value, mono.rhs.value) == (pytest.approx(v), pytest.approx(v / E))
    rep = check_replication_corollary(pm, BUDGET, seed=1)
    assert rep.lhs.value == pytest.approx(v) and rep.rhs.value == pytest.approx(2 * v / E)
    jen = check_jensen(pm)
    assert jen.verdict == WITHIN and abs(jen.margin) <= 1e-9
    for r in (main, mono, rep):
        assert r.verdict == HOLDS


def test_main_theorem_sampled_mode():
    r = check_main_theorem(CommonValueMixture(0.5, PowerLaw(2.0), 3), mode="sampled", samples=BUDGET, seed=3)
    assert r.lhs.method == MONTE_CARLO and r.rhs.method == MONTE_CARLO
    assert r.verdict == HOLDS
    assert r.budget == BUDGET


# ---------------------------------------------------------------------------
# corollaries


def test_monopoly_examples():
    u = check_monopoly_corollary(U1)
    assert u.lhs.value == pytest.approx(0.25) and u.rhs.value == pytest.approx(math.exp(-2))
    p = check_monopoly_corollary(Independent((PowerLaw(2.0),)))
    assert p.lhs.value == pytest.approx(1.0) and p.rhs.value == pytest.approx(math.exp(0.5 - 1))
    assert u.verdict == p.verdict == HOLDS


def test_reserve_examples():
    a = check_anonymous_reserve_corollary(CommonValueMixture(0.5, PowerLaw(2.0), 3), 1_000_000, seed=2)
    assert a.verdict == HOLDS
    b = check_anonymous_reserve_corollary(U1, BUDGET, seed=2)
    assert abs(b.lhs.value - 1 / 6) <= 4 * b.lhs.std_err and b.verdict == HOLDS
    c = check_anonymous_reserve_corollary(CommonValueMixture(1.0, PointMass(4.0), 3), BUDGET, seed=2)
    assert c.lhs.value == pytest.approx(4.0) and c.verdict == HOLDS


def test_replication_examples():
    a = check_replication_corollary(U1, BUDGET, seed=5)
    assert abs(a.lhs.value - 1 / 3) <= 4 * a.lhs.std_err
    assert a.rhs.value == pytest.approx(2 / E * math.exp(-1))
    b = check_replication_corollary(Independent((PowerLaw(2.0), PowerLaw(2.0))), 1_000_000, seed=5)
    assert b.rhs.value == pytest.approx(2 / E * math.exp(oracles.max2_power_law_log_mean(2.0)), rel=1e-9)
    assert a.verdict == b.verdict == HOLDS
    assert all(link.verdict != VIOLATED for link in a.links + b.links)


def test_efficiency_chain_power_law_m4():
    r = check_efficiency_corollary(Independent((PowerLaw(4.0),)), BUDGET, seed=8)
    c = math.exp(0.25) * 0.75
    assert float(r.note.split("= ")[1]) == pytest.approx(c, rel=1e-9)
    assert round(float(r.note.split("= ")[1]), 3) == 0.963
    assert r.rhs.value == pytest.approx(c / E * 4 / 3, rel=1e-9)
    assert r.links[-1].verdict in (HOLDS, WITHIN)
    assert r.verdict == HOLDS


def test_efficiency_chain_two_uniforms():
    r = check_efficiency_corollary(U2, BUDGET, seed=8)
    first_best, welfare = r.links[0].lhs, r.links[0].rhs
    revenue, g_e, ce = r.links[1].rhs, r.links[2].rhs, r.links[3].rhs
    assert first_best == pytest.approx(oracles.max2_uniform_mean(), abs=1e-12)
    assert first_best == pytest.approx(2 / 3)
    # lowest-index buyer clearing r ~ F_max: E[V 1{V >= r}] mixed over who clears first
    assert 4 / 15 < welfare < 2 / 5
    assert revenue == pytest.approx(4 / 15, abs=0.005)
    assert g_e == pytest.approx(math.exp(-1.5), abs=1e-10)
    c = math.exp(-0.5) / (2 / 3)
    assert c == pytest.approx(0.9098, abs=1e-4)
    assert ce == pytest.approx(c / E * 2 / 3, abs=1e-10)
    assert all(link.verdict != VIOLATED for link in r.links)


def test_efficiency_point_mass_links_are_equalities():
    r = check_efficiency_corollary(Independent((PointMass(2.0),)), BUDGET, seed=1)
    first_best, welfare, revenue = r.links[0].lhs, r.links[1].lhs, r.links[1].rhs
    assert first_best == welfare == revenue == pytest.approx(2.0)
    assert r.links[3].lhs == pytest.approx(r.links[3].rhs)


def test_efficiency_vacuous_for_infinite_mean():
    r = check_efficiency_corollary(Independent((PowerLaw(1.0),)), BUDGET, seed=1)
    assert r.verdict == VACUOUS
    assert "infinite" in r.note


def test_jensen_examples():
    j = check_jensen(Independent((PowerLaw(1.0),)))
    assert j.lhs.value == math.inf and j.rhs.value == pytest.approx(E)
    assert j.verdict == HOLDS
    ln = check_jensen(Independent((LogNormal(0.0, 1.0),)))
    assert ln.rhs.value == pytest.approx(1.0) and ln.lhs.value == pytest.approx(math.exp(0.5))


@pytest.mark.parametrize("dist", [Uniform(0.0, 1.0), PowerLaw(2.0)])
def test_log_survival_check(dist):
    r = check_log_survival_identity(Independent((dist,)), 1_000_000, seed=4)
    assert abs(r.lhs.value + 1) <= 0.004
    assert r.verdict == WITHIN


def test_log_survival_rejected_for_atoms():
    r = check_log_survival_identity(Independent((PointMass(2.0),)), BUDGET, seed=1)
    assert r.verdict == REJECTED
    assert "atoms" in r.note


# ---------------------------------------------------------------------------
# zoo-wide properties


ZOO = default_zoo()


def test_zoo_size_and_coverage():
    assert len(ZOO) >= 50
    kinds = {type(m).__name__ for m in ZOO}
    assert {"Independent", "CommonValueMixture"} <= kinds
    assert {m.n for m in ZOO} >= {1, 2, 5}


@pytest.mark.parametrize("model", ZOO, ids=lambda m: m.describe())
def test_ordering_chain(model):
    mono = check_monopoly_corollary(model)
    main = check_main_theorem(model)
    assert mono.lhs.value >= main.lhs.value - 1e-9
    md = max_distribution(model)
    reserve = check_anonymous_reserve_corollary(model, 50_000, seed=3)
    posted = estimate_revenue(PostedPrice(RandomFromMax()), model, 50_000, seed=3, maxdist=md)
    joint = math.hypot(reserve.lhs.std_err, posted.std_err)
    assert reserve.lhs.value >= posted.mean - 4 * joint


@pytest.mark.slow
@pytest.mark.parametrize("model", ZOO, ids=lambda m: m.describe())
def test_no_violations_on_zoo(model):
    for r in run_checks(model, budget=100_000, seed=11):
        assert r.verdict != VIOLATED, (r.bound_id, r.to_dict())


# ---------------------------------------------------------------------------
# reports


def test_run_checks_order_and_independence():
    model = CommonValueMixture(0.5, Exponential(1.0), 3)
    full = run_checks(model, budget=50_000, seed=7)
    assert [r.bound_id for r in full] == list(ALL_CHECKS)
    solo = run_checks(model, budget=50_000, seed=7, checks=["ReplicationCorollary"])
    assert solo[0].to_dict() == full[3].to_dict()
    threaded = run_checks(model, budget=50_000, seed=7, workers=4)
    assert [r.to_dict() for r in threaded] == [r.to_dict() for r in full]


def test_run_checks_rejects_unknown_check():
    with pytest.raises(ValueError):
        run_checks(U1, checks=["NoSuchBound"])


def test_report_serializes():
    reports = run_checks(Replicated(U1).inner, budget=20_000, seed=1)
    text = json.dumps([r.to_dict() for r in reports])
    back = json.loads(text)
    assert {"bound_id", "model", "lhs", "rhs", "margin", "verdict", "seed", "budget", "links", "note"} <= set(back[0])
