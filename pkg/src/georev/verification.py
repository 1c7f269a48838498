"""Numerical checks of the geometric-expectation revenue bounds.

Each check compares a left side (revenue or expectation actually achieved) to
a right side (the guaranteed fraction of the geometric expectation of the
maximum value) and issues a verdict:

* ``Holds``            margin exceeds the error band,
* ``HoldsWithinError`` margin lies inside the band,
* ``Violated``         margin is below minus the band,
* ``Vacuous``          the bound says nothing for this model (e.g. G = 0),
* ``Rejected``         the check does not apply (e.g. an atomic law).

The band is 3 combined standard errors when either side is simulated, and an
absolute 1e-9 (plus any quadrature error estimate) when both sides are exact.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import _mc
from .analytics import (
    CLOSED_FORM,
    MONTE_CARLO,
    FunctionalResult,
    concentration_ratio,
    expectation,
    geometric_expectation,
    log_expectation,
    log_survival_expectation,
    monopoly_price,
    random_reserve_revenue,
)
from .distributions import (
    CommonValueMixture,
    Distribution,
    Empirical,
    Exponential,
    Independent,
    JointValuationModel,
    LogNormal,
    Marginal,
    PointMass,
    PowerLaw,
    Replicated,
    SampleBackedMax,
    Uniform,
    max_distribution,
)
from .mechanisms import (
    PostedPrice,
    RandomFromMax,
    SecondPriceReplicated,
    SecondPriceReserve,
    estimate_revenue,
)

HOLDS = "Holds"
WITHIN = "HoldsWithinError"
VIOLATED = "Violated"
VACUOUS = "Vacuous"
REJECTED = "Rejected"

MAIN = "MainTheorem"
MONOPOLY = "MonopolyCorollary"
RESERVE = "AnonymousReserveCorollary"
REPLICATION = "ReplicationCorollary"
EFFICIENCY = "EfficiencyCorollary"
JENSEN = "JensenInequality"
LOG_SURVIVAL = "LogSurvivalIdentity"

ALL_CHECKS = (MAIN, MONOPOLY, RESERVE, REPLICATION, EFFICIENCY, JENSEN, LOG_SURVIVAL)

DEFAULT_BUDGET = 1_000_000


@dataclass(frozen=True)
class Tolerances:
    sigma_band: float = 3.0
    identity_band: float = 4.0
    exact_tol: float = 1e-9


DEFAULT_TOL = Tolerances()


@dataclass
class Link:
    """One inequality inside a chained report."""

    name: str
    lhs: float
    rhs: float
    margin: float
    verdict: str

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "verdict": self.verdict}


@dataclass
class BoundReport:
    bound_id: str
    model: str
    lhs: Optional[FunctionalResult]
    rhs: Optional[FunctionalResult]
    margin: float
    verdict: str
    seed: Optional[int] = None
    budget: Optional[int] = None
    links: List[Link] = field(default_factory=list)
    note: str = ""

    @property
    def violated(self) -> bool:
        return self.verdict == VIOLATED

    def to_dict(self) -> dict:
        return {
            "bound_id": self.bound_id,
            "model": self.model,
            "lhs": self.lhs.to_dict() if self.lhs else None,
            "rhs": self.rhs.to_dict() if self.rhs else None,
            "margin": self.margin,
            "verdict": self.verdict,
            "seed": self.seed,
            "budget": self.budget,
            "links": [link.to_dict() for link in self.links],
            "note": self.note,
        }


def band(lhs: FunctionalResult, rhs: FunctionalResult, k: float, tol: Tolerances = DEFAULT_TOL) -> float:
    sigma = math.hypot(lhs.std_err, rhs.std_err)
    quad = lhs.abs_err + rhs.abs_err
    if sigma > 0.0:
        return k * sigma + quad
    return tol.exact_tol + quad


def judge(lhs: FunctionalResult, rhs: FunctionalResult, tol: Tolerances = DEFAULT_TOL, k: Optional[float] = None) -> str:
    """Verdict for the claim lhs >= rhs."""
    margin = lhs.value - rhs.value
    if math.isnan(margin):
        return VIOLATED
    width = band(lhs, rhs, tol.sigma_band if k is None else k, tol)
    if margin > width:
        return HOLDS
    if margin >= -width:
        return WITHIN
    return VIOLATED


def _link(name: str, lhs: FunctionalResult, rhs: FunctionalResult, tol: Tolerances, k: Optional[float] = None) -> Link:
    return Link(name, lhs.value, rhs.value, lhs.value - rhs.value, judge(lhs, rhs, tol, k))


def check_seed(seed: int, bound_id: str) -> int:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(_mc.stream_id(bound_id),))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _maxdist(model, mode: str, samples: Optional[int], seed: int, workers: int):
    if isinstance(model, Distribution):
        return model
    return max_distribution(model, samples=samples, seed=seed, mode=mode, workers=workers)


def _describe(model) -> str:
    return model.describe()


def geometric_fraction(md: Distribution, factor: float) -> FunctionalResult:
    """``factor * G / e`` computed as ``factor * exp(E[log X] - 1)``."""
    lm = log_expectation(md)
    if lm.value == -math.inf:
        return FunctionalResult(0.0, lm.method, 0.0, lm.sample_count)
    val = factor * math.exp(lm.value - 1.0)
    return FunctionalResult(val, lm.method, val * lm.std_err, lm.sample_count, val * lm.abs_err, lm.converged)


def _report(bound_id, model, lhs, rhs, tol, seed=None, budget=None, links=(), note="") -> BoundReport:
    verdict = judge(lhs, rhs, tol)
    if any(link.verdict == VIOLATED for link in links):
        verdict = VIOLATED
    return BoundReport(bound_id, _describe(model), lhs, rhs, lhs.value - rhs.value, verdict, seed, budget, list(links), note)


def _vacuous(bound_id, model, note, seed=None, budget=None) -> BoundReport:
    return BoundReport(bound_id, _describe(model), None, None, math.nan, VACUOUS, seed, budget, [], note)


def _identity_verdict(lhs: FunctionalResult, rhs: FunctionalResult, tol: Tolerances) -> str:
    return WITHIN if abs(lhs.value - rhs.value) <= band(lhs, rhs, tol.identity_band, tol) else VIOLATED


# ---------------------------------------------------------------------------


def check_main_theorem(
    model,
    mode: str = "auto",
    samples: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
    tol: Tolerances = DEFAULT_TOL,
) -> BoundReport:
    """Random price drawn from F_max earns at least G[V_max] / e."""
    md = _maxdist(model, mode, samples, seed, workers)
    rhs = geometric_fraction(md, 1.0)
    if rhs.value == 0.0:
        return _vacuous(MAIN, model, "geometric expectation is 0; bound is vacuous")
    lhs = random_reserve_revenue(md, workers=workers)
    budget = md.samples if isinstance(md, SampleBackedMax) else None
    return _report(MAIN, model, lhs, rhs, tol, seed if budget else None, budget)


def _monopoly_result(md: Distribution) -> FunctionalResult:
    mono = monopoly_price(md)
    if isinstance(md, SampleBackedMax):
        # binomial error of the sale probability at the chosen price
        p = mono.revenue / mono.price
        n = md.samples
        return FunctionalResult(mono.revenue, MONTE_CARLO, mono.price * math.sqrt(max(p * (1 - p), 1.0 / n) / n), n)
    return FunctionalResult(mono.revenue, CLOSED_FORM)


def check_monopoly_corollary(
    model,
    mode: str = "auto",
    samples: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
    tol: Tolerances = DEFAULT_TOL,
) -> BoundReport:
    """The monopoly price of F_max earns at least G[V_max] / e, and at least a random price."""
    md = _maxdist(model, mode, samples, seed, workers)
    rhs = geometric_fraction(md, 1.0)
    if rhs.value == 0.0:
        return _vacuous(MONOPOLY, model, "geometric expectation is 0; bound is vacuous")
    lhs = _monopoly_result(md)
    random_price = random_reserve_revenue(md, workers=workers)
    links = [_link("monopoly_revenue >= random_price_revenue", lhs, random_price, tol)]
    budget = md.samples if isinstance(md, SampleBackedMax) else None
    return _report(MONOPOLY, model, lhs, rhs, tol, seed if budget else None, budget, links)


def check_anonymous_reserve_corollary(
    model: JointValuationModel,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    workers: int = 1,
    mode: str = "auto",
    tol: Tolerances = DEFAULT_TOL,
) -> BoundReport:
    """Second price auction with a random anonymous reserve earns at least G[V_max] / e."""
    md = _maxdist(model, mode, budget, seed, workers)
    rhs = geometric_fraction(md, 1.0)
    if rhs.value == 0.0:
        return _vacuous(RESERVE, model, "geometric expectation is 0; bound is vacuous", seed, budget)
    est = estimate_revenue(SecondPriceReserve(RandomFromMax()), model, budget, seed, workers, maxdist=md)
    lhs = est.result()
    posted = random_reserve_revenue(md, workers=workers)
    links = [_link("reserve_auction_revenue >= posted_random_price_revenue", lhs, posted, tol, tol.identity_band)]
    return _report(RESERVE, model, lhs, rhs, tol, seed, budget, links)


def check_replication_corollary(
    model: JointValuationModel,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    workers: int = 1,
    mode: str = "auto",
    tol: Tolerances = DEFAULT_TOL,
) -> BoundReport:
    """Second price auction over the buyers plus an i.i.d. replica block earns at least 2 G[V_max] / e."""
    md = _maxdist(model, mode, budget, seed, workers)
    rhs = geometric_fraction(md, 2.0)
    if rhs.value == 0.0:
        return _vacuous(REPLICATION, model, "geometric expectation is 0; bound is vacuous", seed, budget)
    est = estimate_revenue(SecondPriceReplicated(), Replicated(model), budget, seed, workers)
    lhs = est.result()
    (orig, _), (rep, _) = est.original_block, est.replica_block
    gap = FunctionalResult(orig - rep, MONTE_CARLO, est.block_gap_std_err, budget)
    balanced = _identity_verdict(gap, FunctionalResult(0.0, CLOSED_FORM), tol)
    links = [Link("original_block == replica_block", orig, rep, orig - rep, balanced)]
    return _report(REPLICATION, model, lhs, rhs, tol, seed, budget, links)


def check_efficiency_corollary(
    model: JointValuationModel,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    workers: int = 1,
    mode: str = "auto",
    tol: Tolerances = DEFAULT_TOL,
) -> BoundReport:
    """welfare >= revenue >= G/e >= (c/e) E for a price drawn from F_max, with c = G/E.

    Welfare is what the posted random price actually allocates; the first-best
    welfare E[V_max] is reported as an extra link above it.
    """
    md = _maxdist(model, mode, budget, seed, workers)
    e = expectation(md)
    if math.isinf(e.value):
        return _vacuous(EFFICIENCY, model, "E[V_max] is infinite so c = 0 and the bound is vacuous", seed, budget)
    g_e = geometric_fraction(md, 1.0)
    if g_e.value == 0.0:
        return _vacuous(EFFICIENCY, model, "geometric expectation is 0; bound is vacuous", seed, budget)
    c = concentration_ratio(md)
    ce = FunctionalResult(
        c.value * e.value / math.e,
        e.method,
        math.hypot(c.std_err * e.value, c.value * e.std_err) / math.e,
        max(c.sample_count, e.sample_count),
        (c.abs_err * e.value + c.value * e.abs_err) / math.e,
    )
    est = estimate_revenue(PostedPrice(RandomFromMax()), model, budget, seed, workers, maxdist=md)
    rev, wel = est.result(), est.welfare_result()
    links = [
        _link("E[V_max] >= welfare", e, wel, tol),
        _link("welfare >= revenue", wel, rev, tol),
        _link("revenue >= G/e", rev, g_e, tol),
        _link("G/e >= (c/e)E", g_e, ce, tol),
    ]
    return _report(EFFICIENCY, model, rev, ce, tol, seed, budget, links, note=f"c = {c.value:.10g}")


def check_jensen(
    model,
    mode: str = "auto",
    samples: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
    tol: Tolerances = DEFAULT_TOL,
) -> BoundReport:
    """G[V_max] <= E[V_max], equality only for deterministic values."""
    md = _maxdist(model, mode, samples, seed, workers)
    lhs, rhs = expectation(md), geometric_expectation(md)
    if math.isinf(lhs.value):
        return BoundReport(JENSEN, _describe(model), lhs, rhs, math.inf, HOLDS, note="E[V_max] is infinite")
    return _report(JENSEN, model, lhs, rhs, tol)


def check_log_survival_identity(
    model,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    workers: int = 1,
    mode: str = "auto",
    tol: Tolerances = DEFAULT_TOL,
) -> BoundReport:
    """E[log(1 - F(X))] = -1 for atomless F, checked at 4 standard errors."""
    md = _maxdist(model, mode, budget, seed, workers)
    if not md.atomless:
        return BoundReport(
            LOG_SURVIVAL, _describe(model), None, None, math.nan, REJECTED, seed, budget,
            note="law has atoms; the identity only holds for atomless distributions",
        )
    lhs = log_survival_expectation(md, budget, seed, workers)
    rhs = FunctionalResult(-1.0, CLOSED_FORM)
    return BoundReport(
        LOG_SURVIVAL, _describe(model), lhs, rhs, lhs.value - rhs.value, _identity_verdict(lhs, rhs, tol), seed, budget
    )


# ---------------------------------------------------------------------------


def run_checks(
    model: JointValuationModel,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    checks: Sequence[str] = ALL_CHECKS,
    workers: int = 1,
    mode: str = "auto",
    tol: Tolerances = DEFAULT_TOL,
) -> List[BoundReport]:
    """Run the requested checks; report order follows ``checks``.

    Every check draws from its own seed derived from ``(seed, bound_id)``, so
    results do not depend on which checks run or how many run at once.
    """
    samples = budget if mode == "sampled" else None
    for b in checks:
        if b not in ALL_CHECKS:
            raise ValueError(f"unknown check {b!r}")

    def one(bound_id: str) -> BoundReport:
        s = check_seed(seed, bound_id)
        if bound_id == MAIN:
            return check_main_theorem(model, mode, samples, s, tol=tol)
        if bound_id == MONOPOLY:
            return check_monopoly_corollary(model, mode, samples, s, tol=tol)
        if bound_id == RESERVE:
            return check_anonymous_reserve_corollary(model, budget, s, mode=mode, tol=tol)
        if bound_id == REPLICATION:
            return check_replication_corollary(model, budget, s, mode=mode, tol=tol)
        if bound_id == EFFICIENCY:
            return check_efficiency_corollary(model, budget, s, mode=mode, tol=tol)
        if bound_id == JENSEN:
            return check_jensen(model, mode, samples, s, tol=tol)
        return check_log_survival_identity(model, budget, s, mode=mode, tol=tol)

    if workers <= 1:
        return [one(b) for b in checks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, checks))


ZOO_FAMILIES: Dict[str, Marginal] = {
    "uniform(0,1)": Uniform(0.0, 1.0),
    "uniform(1,2)": Uniform(1.0, 2.0),
    "exponential(1)": Exponential(1.0),
    "power_law(1)": PowerLaw(1.0),
    "power_law(2)": PowerLaw(2.0),
    "lognormal(0,1)": LogNormal(0.0, 1.0),
    "point_mass(3)": PointMass(3.0),
    "empirical": Empirical((0.5, 1.0, 1.0, 2.0, 4.0)),
}


def zoo_model(base: Marginal, n: int, rho: float) -> JointValuationModel:
    if n == 1 or rho == 0.0:
        return Independent.iid(base, n)
    return CommonValueMixture(rho, base, n)


def default_zoo(ns: Sequence[int] = (1, 2, 5), rhos: Sequence[float] = (0.0, 0.5, 1.0)) -> List[JointValuationModel]:
    """Families x n x rho (rho only matters for n > 1), plus a few mixed-family models."""
    models: List[JointValuationModel] = []
    for base in ZOO_FAMILIES.values():
        for n in ns:
            for rho in rhos if n > 1 else (0.0,):
                models.append(zoo_model(base, n, rho))
    models += [
        Independent((Uniform(0.0, 1.0), Exponential(2.0))),
        Independent((PowerLaw(1.5), LogNormal(0.0, 0.5), Uniform(0.5, 3.0))),
        Independent((PointMass(0.5), Uniform(0.0, 1.0))),
        Independent((PowerLaw(1.0), PointMass(2.0))),
    ]
    return models
