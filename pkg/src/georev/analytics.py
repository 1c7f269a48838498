"""Scalar functionals of a value distribution.

Expectation, geometric expectation ``exp(E[log X])``, their ratio, posted-price
revenue ``p * P(X >= p)``, the monopoly price, and the revenue of a price drawn
at random from the distribution itself.  Each is computed by closed form when
the family has one, otherwise by quantile-space quadrature, and by Monte Carlo
for sample-backed laws.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
from scipy import integrate

from . import _mc
from ._quad import quantile_integral
from .distributions import Distribution, SampleBackedMax, sample_max_values

CLOSED_FORM = "ClosedForm"
QUADRATURE = "Quadrature"
MONTE_CARLO = "MonteCarlo"

DEFAULT_MC_SAMPLES = 1_000_000


@dataclass(frozen=True)
class FunctionalResult:
    value: float
    method: str
    std_err: float = 0.0
    sample_count: int = 0
    # quadrature error estimate; nonzero only for Quadrature
    abs_err: float = 0.0
    converged: bool = True

    def __post_init__(self):
        if self.method == MONTE_CARLO and self.sample_count < 1:
            raise ValueError("Monte Carlo result needs a positive sample count")
        if self.method == CLOSED_FORM and self.std_err != 0.0:
            raise ValueError("closed-form result cannot carry a standard error")

    def scaled(self, k: float) -> "FunctionalResult":
        return FunctionalResult(
            self.value * k, self.method, self.std_err * abs(k), self.sample_count, self.abs_err * abs(k), self.converged
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MonopolyPriceResult:
    price: float
    revenue: float
    attained: bool = True


def _mc_result(summary: _mc.Summary) -> FunctionalResult:
    return FunctionalResult(summary.mean, MONTE_CARLO, summary.std_err, summary.count)


def _mc_over(dist: Distribution, fn, samples: int, seed: int, label: str, workers: int = 1) -> _mc.Summary:
    parts = _mc.map_chunks(lambda rng, k: _mc.Summary.of(fn(dist.sample(rng, k))), samples, seed, label, workers)
    return _mc.reduce_summaries(parts)


def _quad_result(value: float, err: float, ok: bool) -> FunctionalResult:
    return FunctionalResult(value, QUADRATURE, abs_err=err, converged=ok)


_MEMO: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _memo_quad(dist: Distribution, key: str, cont, atom):
    """Quadrature results are pure functions of the (immutable) law; cache them."""
    try:
        cache = _MEMO.setdefault(dist, {})
    except TypeError:
        cache = {}
    if key not in cache:
        cache[key] = quantile_integral(dist, cont, atom)
    return cache[key]


def _store_summary(dist: SampleBackedMax, fn) -> _mc.Summary:
    return _mc.Summary.of(fn(dist.store))


# ---------------------------------------------------------------------------


def expectation(
    dist: Distribution, method: str = "auto", samples: int = DEFAULT_MC_SAMPLES, seed: int = 0
) -> FunctionalResult:
    """E[X]; +inf when the tail exponent is at most one."""
    if isinstance(dist, SampleBackedMax):
        return _mc_result(_store_summary(dist, lambda x: x))
    if not dist.finite_mean:
        return FunctionalResult(math.inf, CLOSED_FORM)
    if method in ("auto", "closed_form") and dist.mean() is not None:
        return FunctionalResult(dist.mean(), CLOSED_FORM)
    if method == "monte_carlo":
        return _mc_result(_mc_over(dist, lambda x: x, samples, seed, "mean"))
    if method == "closed_form":
        raise ValueError(f"no closed-form mean for {dist.describe()}")
    val, err, ok = _memo_quad(dist, "mean", lambda u, q: q, lambda v, a, b: v * (b - a))
    if not ok and _partial_means_diverge(dist):
        return FunctionalResult(math.inf, QUADRATURE, abs_err=math.inf, converged=False)
    return _quad_result(val, err, ok)


def _partial_means_diverge(dist: Distribution) -> bool:
    # partial integrals over (0, 1 - delta) growing without bound
    vals = []
    for delta in (1e-4, 1e-6, 1e-8):
        v, _ = integrate.quad(lambda u: float(dist._quantile(np.asarray(u))), 0.0, 1.0 - delta, limit=500)
        vals.append(v)
    return vals[2] - vals[1] > 0.5 * (vals[1] - vals[0]) > 0.0


def log_expectation(
    dist: Distribution, method: str = "auto", samples: int = DEFAULT_MC_SAMPLES, seed: int = 0
) -> FunctionalResult:
    """E[log X] (may be negative, so the value is not restricted to be >= 0)."""
    if isinstance(dist, SampleBackedMax):
        return _mc_result(_store_summary(dist, np.log))
    if method in ("auto", "closed_form") and dist.log_mean() is not None:
        return FunctionalResult(dist.log_mean(), CLOSED_FORM)
    if method == "monte_carlo":
        return _mc_result(_mc_over(dist, np.log, samples, seed, "log-mean"))
    if method == "closed_form":
        raise ValueError(f"no closed-form log-mean for {dist.describe()}")
    val, err, ok = _memo_quad(dist, "log-mean", lambda u, q: math.log(q), lambda v, a, b: np.log(v) * (b - a))
    return _quad_result(val, err, ok)


def _degenerate_value(dist: Distribution) -> Optional[float]:
    if isinstance(dist, SampleBackedMax):
        st = dist.store
        return float(st[0]) if st[0] == st[-1] else None
    atoms = dist.atoms()
    if len(atoms) == 1 and atoms[0][1] == 0.0 and atoms[0][2] == 1.0:
        return float(atoms[0][0])
    return None


def geometric_expectation(
    dist: Distribution, method: str = "auto", samples: int = DEFAULT_MC_SAMPLES, seed: int = 0
) -> FunctionalResult:
    """exp(E[log X]); 0 when E[log X] = -inf."""
    v = _degenerate_value(dist)
    if v is not None:
        # exp(log v) can land an ulp above v
        return FunctionalResult(v, CLOSED_FORM)
    lm = log_expectation(dist, method, samples, seed)
    if lm.value == -math.inf:
        return FunctionalResult(0.0, lm.method, 0.0, lm.sample_count)
    g = math.exp(lm.value)
    # delta method for the MC error, relative quadrature error carried through
    return FunctionalResult(
        g, lm.method, g * lm.std_err, lm.sample_count, g * lm.abs_err, lm.converged
    )


def concentration_ratio(dist: Distribution, method: str = "auto") -> FunctionalResult:
    """G/E in [0, 1]: 0 for infinite means, exactly 1 for point masses."""
    if _degenerate_value(dist) is not None:
        return FunctionalResult(1.0, CLOSED_FORM)
    e = expectation(dist, method)
    if math.isinf(e.value):
        return FunctionalResult(0.0, e.method)
    g = geometric_expectation(dist, method)
    c = min(1.0, g.value / e.value)
    std = c * math.hypot(g.std_err / g.value if g.value else 0.0, e.std_err / e.value)
    err = c * (g.abs_err / g.value + e.abs_err / e.value) if g.value else 0.0
    methods = {g.method, e.method}
    tag = MONTE_CARLO if MONTE_CARLO in methods else QUADRATURE if QUADRATURE in methods else CLOSED_FORM
    return FunctionalResult(c, tag, std, max(g.sample_count, e.sample_count), err, g.converged and e.converged)


def posted_price_revenue(dist: Distribution, p: float):
    """p * P(X >= p): a buyer whose value equals the price buys."""
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0.0)):
        raise ValueError("posted price must be positive")
    rev = arr * np.asarray(dist.sf_left(arr), dtype=float)
    return float(rev) if np.ndim(p) == 0 else rev


# ---------------------------------------------------------------------------
# monopoly price

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, a: float, b: float, xtol: float = 1e-12, max_iter: int = 200):
    """Maximize a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def monopoly_price(
    dist: Distribution, grid: int = 2001, xtol: float = 1e-12, flat_tol: float = 1e-9, refine: int = 5
) -> MonopolyPriceResult:
    """Price maximizing r * P(X >= r).

    A log-spaced grid between the 1e-6 and 1 - 1e-6 quantiles (plus the
    support floor and every atom) locates the best brackets; golden-section
    search refines the ``refine`` best local maxima.  If revenue is flat over
    the whole grid, the smallest near-maximizer is returned with
    ``attained=False``.
    """
    atoms = dist.atoms()
    atom_vals = np.array([a[0] for a in atoms], dtype=float)
    discrete_mass = sum(b - a for _, a, b in atoms)

    def rev(r):
        return posted_price_revenue(dist, r)

    if atoms and discrete_mass >= 1.0 - 1e-12:
        # purely discrete: between atoms r*P(X >= r) increases, so the sup sits on an atom
        revs = rev(atom_vals)
        i = int(np.argmax(revs))
        return MonopolyPriceResult(float(atom_vals[i]), float(revs[i]), True)

    lo, hi = float(dist.quantile(1e-6)), float(dist.quantile(1.0 - 1e-6))
    xs = np.geomspace(lo, hi, grid) if hi > lo else np.array([lo])
    fs = rev(xs)
    floor = dist.support[0]
    extra = [floor] if floor > 0.0 else []
    extra += atom_vals.tolist()
    extra_x = np.array(extra, dtype=float)
    extra_f = rev(extra_x) if extra else np.empty(0)

    fmax_grid = float(fs.max())
    if not atoms and xs.size > 1 and fmax_grid - float(fs.min()) <= flat_tol * fmax_grid:
        cand_x = np.concatenate([extra_x, xs])
        cand_f = np.concatenate([extra_f, fs])
        ok = cand_f >= fmax_grid * (1.0 - flat_tol)
        j = int(np.argmin(np.where(ok, cand_x, np.inf)))
        return MonopolyPriceResult(float(cand_x[j]), float(cand_f[j]), False)

    best_x, best_f = float(xs[int(np.argmax(fs))]), fmax_grid
    for x, fx in zip(extra_x, extra_f):
        if fx > best_f:
            best_x, best_f = float(x), float(fx)

    peaks: List[int] = [
        i for i in range(xs.size) if (i == 0 or fs[i] >= fs[i - 1]) and (i == xs.size - 1 or fs[i] >= fs[i + 1])
    ]
    peaks.sort(key=lambda i: -fs[i])
    for i in peaks[:refine]:
        a = float(xs[max(i - 1, 0)])
        b = float(xs[min(i + 1, xs.size - 1)])
        if b <= a:
            continue
        x, fx = golden_section_max(rev, a, b, xtol)
        if fx > best_f:
            best_x, best_f = x, fx
    return MonopolyPriceResult(best_x, best_f, True)


# ---------------------------------------------------------------------------


def random_reserve_revenue(
    maxdist: Distribution, samples: Optional[int] = None, seed: Optional[int] = None, workers: int = 1
) -> FunctionalResult:
    """E over r ~ F of r * P(X >= r), with r independent of X.

    For exact laws this is the quantile integral of Q(u)(1 - u) on the
    continuous part plus v * P(X >= v) * P(X = v) on each atom.  For a
    sample-backed law the stored maxima serve as reserves and an independent
    fresh batch of maxima as valuations; the two-sample statistic is averaged
    over valuations exactly and its error uses both Hoeffding projections.
    """
    if isinstance(maxdist, SampleBackedMax):
        return _two_sample_reserve_revenue(maxdist, samples, seed, workers)
    val, err, ok = _memo_quad(
        maxdist, "random-reserve", lambda u, q: q * (1.0 - u), lambda v, a, b: v * (1.0 - a) * (b - a)
    )
    return _quad_result(val, err, ok)


def _two_sample_reserve_revenue(dist: SampleBackedMax, samples, seed, workers) -> FunctionalResult:
    n = samples or dist.samples
    seed = dist.seed if seed is None else seed
    reserves = dist.store if n == dist.samples else np.sort(dist.sample(_mc.chunk_rng(seed, "rr-reserve", 0), n))
    values = np.sort(sample_max_values(dist.source, n, seed, workers, label="rr-valuations"))
    # h1(r) = r * P_hat(V >= r), h2(v) = mean_j r_j 1{r_j <= v}
    h1 = reserves * (values.size - np.searchsorted(values, reserves, side="left")) / values.size
    csum = np.concatenate([[0.0], np.cumsum(reserves)])
    h2 = csum[np.searchsorted(reserves, values, side="right")] / reserves.size
    mean = float(h1.mean())
    se = math.sqrt(h1.var(ddof=1) / h1.size + h2.var(ddof=1) / h2.size)
    return FunctionalResult(mean, MONTE_CARLO, se, int(h1.size))


def log_survival_expectation(
    dist: Distribution, samples: int = DEFAULT_MC_SAMPLES, seed: int = 0, workers: int = 1
) -> FunctionalResult:
    """Monte Carlo E[log(1 - F(X))] for X ~ F; equals -1 for every atomless F."""
    if not dist.atomless:
        raise ValueError(
            f"{dist.describe()} has atoms; E[log(1 - F(X))] = -1 only holds for atomless laws"
        )
    with np.errstate(divide="ignore"):
        summ = _mc_over(dist, lambda x: np.log(dist.sf(x)), samples, seed, "log-survival", workers)
    return _mc_result(summ)
