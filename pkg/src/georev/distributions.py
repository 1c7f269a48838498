"""Valuation distributions, joint buyer models and the law of the maximum value.

Marginals are immutable parametric families (plus an empirical step law).
Joint models describe how ``n`` buyers' values are coupled.  ``max_distribution``
turns a joint model into the distribution of ``V_max = max_i V_i``, either as an
exact CDF transform or backed by a sorted store of simulated maxima.

All array-facing methods accept scalars or numpy arrays.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special

from . import _mc

EULER_GAMMA = 0.5772156649015329

# (value, F(value-), F(value)) for each atom
Atom = Tuple[float, float, float]


def _check_u(u):
    arr = np.asarray(u, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class Distribution:
    """Shared surface of marginals and max-value laws.

    Subclasses implement ``cdf``, ``cdf_left``, ``sf`` and ``_quantile``; the
    weak-inequality survival ``sf_left(x) = P(X >= x)`` follows from them.
    """

    support: Tuple[float, float] = (0.0, math.inf)
    tail_index: float = math.inf

    def cdf(self, x):
        raise NotImplementedError

    def cdf_left(self, x):
        return self.cdf(x)

    def sf(self, x):
        return _out(1.0 - np.asarray(self.cdf(x), dtype=float), x)

    def sf_left(self, x):
        """P(X >= x), as P(X > x) plus the jump at x so tails keep precision."""
        jump = np.asarray(self.cdf(x), dtype=float) - np.asarray(self.cdf_left(x), dtype=float)
        return _out(np.asarray(self.sf(x), dtype=float) + jump, x)

    def quantile(self, u):
        arr = _check_u(u)
        return _out(self._quantile(arr), u)

    def _quantile(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self._quantile(_mc.open_uniform(rng, size))

    def atoms(self) -> List[Atom]:
        return []

    @property
    def atomless(self) -> bool:
        return not self.atoms()

    @property
    def finite_mean(self) -> bool:
        return self.tail_index > 1.0

    def mean(self) -> Optional[float]:
        """Closed-form E[X], or None when no closed form is known."""
        return None

    def log_mean(self) -> Optional[float]:
        """Closed-form E[log X], or None."""
        return None

    def describe(self) -> str:
        return repr(self)


# ---------------------------------------------------------------------------
# marginal families


class Marginal(Distribution):
    family: str = ""

    def scaled(self, k: float) -> "Marginal":
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params()}

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params().items() if isinstance(v, (int, float)))
        return f"{type(self).__name__}({inner})"


@dataclass(frozen=True)
class PowerLaw(Marginal):
    """Pareto law ``F(x) = 1 - (scale/x)**m`` on ``[scale, inf)``."""

    m: float
    scale: float = 1.0
    family = "power_law"

    def __post_init__(self):
        if not self.m >= 1.0:
            raise ValueError(f"power-law exponent must be >= 1, got {self.m}")
        if not self.scale > 0.0:
            raise ValueError("power-law scale must be positive")

    @property
    def support(self):
        return (self.scale, math.inf)

    @property
    def tail_index(self):
        return self.m

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            s = np.where(x < self.scale, 1.0, (self.scale / np.maximum(x, self.scale)) ** self.m)
        return _out(s, x)

    def cdf(self, x):
        return _out(1.0 - np.asarray(self.sf(x)), x)

    def _quantile(self, u):
        return self.scale * (1.0 - u) ** (-1.0 / self.m)

    def mean(self):
        return math.inf if self.m <= 1.0 else self.m * self.scale / (self.m - 1.0)

    def log_mean(self):
        return math.log(self.scale) + 1.0 / self.m

    def scaled(self, k):
        return PowerLaw(self.m, self.scale * k)

    def params(self):
        return {"m": self.m, "scale": self.scale}


@dataclass(frozen=True)
class Exponential(Marginal):
    rate: float
    family = "exponential"

    def __post_init__(self):
        if not self.rate > 0.0:
            raise ValueError("exponential rate must be positive")

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.exp(-self.rate * np.maximum(x, 0.0)), x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(-np.expm1(-self.rate * np.maximum(x, 0.0)), x)

    def _quantile(self, u):
        return -np.log1p(-u) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def log_mean(self):
        return -EULER_GAMMA - math.log(self.rate)

    def scaled(self, k):
        return Exponential(self.rate / k)

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class Uniform(Marginal):
    lo: float
    hi: float
    family = "uniform"

    def __post_init__(self):
        if not (self.lo >= 0.0 and self.hi > self.lo):
            raise ValueError("uniform bounds must satisfy 0 <= lo < hi")

    @property
    def support(self):
        return (self.lo, self.hi)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0), x)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.clip((self.hi - x) / (self.hi - self.lo), 0.0, 1.0), x)

    def _quantile(self, u):
        return self.lo + u * (self.hi - self.lo)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def log_mean(self):
        def xlogx(t):
            return t * math.log(t) if t > 0.0 else 0.0

        return (xlogx(self.hi) - xlogx(self.lo)) / (self.hi - self.lo) - 1.0

    def scaled(self, k):
        return Uniform(self.lo * k, self.hi * k)

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class PointMass(Marginal):
    v: float
    family = "point_mass"

    def __post_init__(self):
        if not self.v > 0.0:
            raise ValueError("point mass must sit at a positive value")

    @property
    def support(self):
        return (self.v, self.v)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out((x >= self.v).astype(float), x)

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        return _out((x > self.v).astype(float), x)

    def _quantile(self, u):
        return np.full(np.shape(u), self.v)

    def atoms(self):
        return [(self.v, 0.0, 1.0)]

    def mean(self):
        return self.v

    def log_mean(self):
        return math.log(self.v)

    def scaled(self, k):
        return PointMass(self.v * k)

    def params(self):
        return {"v": self.v}


@dataclass(frozen=True)
class LogNormal(Marginal):
    mu: float
    sigma: float
    family = "lognormal"

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("lognormal sigma must be positive")

    def _z(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (np.log(np.maximum(x, 0.0)) - self.mu) / self.sigma

    def cdf(self, x):
        return _out(special.ndtr(self._z(x)), x)

    def sf(self, x):
        return _out(special.ndtr(-self._z(x)), x)

    def _quantile(self, u):
        return np.exp(self.mu + self.sigma * special.ndtri(u))

    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def log_mean(self):
        return self.mu

    def scaled(self, k):
        return LogNormal(self.mu + math.log(k), self.sigma)

    def params(self):
        return {"mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Empirical(Marginal):
    """Uniform law on a finite list of positive observations (with repeats)."""

    values: Tuple[float, ...]
    family = "empirical"
    _arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.sort(np.asarray(self.values, dtype=float))
        if arr.size == 0:
            raise ValueError("empirical distribution needs at least one value")
        if not np.all(np.isfinite(arr)) or arr[0] <= 0.0:
            raise ValueError("empirical values must be finite and positive")
        arr.setflags(write=False)
        object.__setattr__(self, "values", tuple(arr.tolist()))
        object.__setattr__(self, "_arr", arr)

    @classmethod
    def from_array(cls, arr) -> "Empirical":
        return cls(tuple(np.asarray(arr, dtype=float).ravel().tolist()))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Empirical":
        vals = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                v = float(line)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a decimal number: {line!r}") from None
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{path}:{lineno}: values must be positive and finite, got {line!r}")
            vals.append(v)
        return cls(tuple(vals))

    @property
    def support(self):
        return (float(self._arr[0]), float(self._arr[-1]))

    @property
    def size(self) -> int:
        return int(self._arr.size)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.searchsorted(self._arr, x, side="right") / self._arr.size, x)

    def cdf_left(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.searchsorted(self._arr, x, side="left") / self._arr.size, x)

    def _quantile(self, u):
        n = self._arr.size
        idx = np.clip(np.ceil(u * n).astype(np.int64) - 1, 0, n - 1)
        return self._arr[idx]

    def sample(self, rng, size):
        return self._arr[rng.integers(0, self._arr.size, size=size)]

    def atoms(self):
        vals, counts = np.unique(self._arr, return_counts=True)
        hi = np.cumsum(counts) / self._arr.size
        lo = np.concatenate([[0.0], hi[:-1]])
        return [(float(v), float(a), float(b)) for v, a, b in zip(vals, lo, hi)]

    def mean(self):
        return float(self._arr.mean())

    def log_mean(self):
        return float(np.log(self._arr).mean())

    def scaled(self, k):
        return Empirical.from_array(self._arr * k)

    def params(self):
        return {"values": list(self.values)}

    def describe(self):
        return f"Empirical(n={self.size})"


# ---------------------------------------------------------------------------
# joint valuation models


class JointValuationModel:
    n: int

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` joint draws, shape ``(size, n)``."""
        raise NotImplementedError

    def scaled(self, k: float) -> "JointValuationModel":
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


def sample_profile(model: JointValuationModel, rng: np.random.Generator) -> np.ndarray:
    """One joint draw of the ``n`` buyer values."""
    return model.sample(rng, 1)[0]


@dataclass(frozen=True)
class Independent(JointValuationModel):
    marginals: Tuple[Marginal, ...]

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if not self.marginals:
            raise ValueError("need at least one buyer")

    @classmethod
    def iid(cls, base: Marginal, n: int) -> "Independent":
        return cls((base,) * n)

    @property
    def n(self):
        return len(self.marginals)

    @property
    def identical(self) -> bool:
        return all(m == self.marginals[0] for m in self.marginals)

    def sample(self, rng, size):
        if self.identical:
            return self.marginals[0].sample(rng, (size, self.n))
        return np.column_stack([m.sample(rng, size) for m in self.marginals])

    def scaled(self, k):
        return Independent(tuple(m.scaled(k) for m in self.marginals))

    def describe(self):
        if self.identical:
            return f"Independent({self.marginals[0].describe()} x {self.n})"
        return "Independent(" + ", ".join(m.describe() for m in self.marginals) + ")"


@dataclass(frozen=True)
class CommonValueMixture(JointValuationModel):
    """With probability ``rho`` all buyers share one draw, else i.i.d. draws."""

    rho: float
    base: Marginal
    n: int

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("need at least one buyer")

    def sample(self, rng, size):
        coupled = rng.random(size) < self.rho
        common = self.base.sample(rng, size)
        own = self.base.sample(rng, (size, self.n))
        return np.where(coupled[:, None], common[:, None], own)

    def scaled(self, k):
        return CommonValueMixture(self.rho, self.base.scaled(k), self.n)

    def describe(self):
        return f"CommonValueMixture(rho={self.rho:g}, {self.base.describe()} x {self.n})"


@dataclass(frozen=True)
class Replicated(JointValuationModel):
    """Two independent copies of ``inner``; buyers ``[0, n_inner)`` are the originals."""

    inner: JointValuationModel

    @property
    def n(self):
        return 2 * self.inner.n

    @property
    def n_inner(self) -> int:
        return self.inner.n

    def sample(self, rng, size):
        return np.hstack([self.inner.sample(rng, size), self.inner.sample(rng, size)])

    def scaled(self, k):
        return Replicated(self.inner.scaled(k))

    def describe(self):
        return f"Replicated({self.inner.describe()})"


# ---------------------------------------------------------------------------
# law of the maximum


class _Power:
    """g(y) = y**n, the CDF map for the max of n i.i.d. draws."""

    def __init__(self, n: int):
        self.n = n

    @property
    def identity(self):
        return self.n == 1

    def forward(self, y):
        return np.asarray(y, dtype=float) ** self.n

    def inverse(self, u):
        return np.asarray(u, dtype=float) ** (1.0 / self.n)

    def survival(self, s):
        # 1 - (1 - s)**n without cancellation
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return -np.expm1(self.n * np.log1p(-s))


class _MixPower:
    """g(y) = rho*y + (1 - rho)*y**n for the common-value mixture."""

    def __init__(self, rho: float, n: int):
        self.rho, self.n = rho, n

    identity = False

    def forward(self, y):
        y = np.asarray(y, dtype=float)
        return self.rho * y + (1.0 - self.rho) * y**self.n

    def inverse(self, u):
        # g is increasing and convex, so Newton from y = 1 decreases monotonically to the root
        u = np.asarray(u, dtype=float)
        y = np.ones_like(u)
        for _ in range(100):
            step = (self.forward(y) - u) / (self.rho + (1.0 - self.rho) * self.n * y ** (self.n - 1))
            y = np.maximum(y - step, 0.0)
            if np.all(np.abs(step) <= 1e-16 * np.maximum(y, 1e-300)):
                break
        return y

    def survival(self, s):
        s = np.asarray(s, dtype=float)
        return self.rho * s + (1.0 - self.rho) * _Power(self.n).survival(s)


class _Product(Distribution):
    """Max of independent, non-identical marginals: F = prod F_i."""

    def __init__(self, marginals: Sequence[Marginal]):
        self.marginals = tuple(marginals)
        self.support = (max(m.support[0] for m in marginals), max(m.support[1] for m in marginals))
        self.tail_index = min(m.tail_index for m in marginals)

    def cdf(self, x):
        out = np.ones(np.shape(x))
        for m in self.marginals:
            out = out * m.cdf(x)
        return _out(out, x)

    def cdf_left(self, x):
        out = np.ones(np.shape(x))
        for m in self.marginals:
            out = out * m.cdf_left(x)
        return _out(out, x)

    def sf(self, x):
        acc = np.zeros(np.shape(x))
        with np.errstate(divide="ignore"):
            for m in self.marginals:
                acc = acc + np.log1p(-np.asarray(m.sf(x), dtype=float))
        return _out(-np.expm1(acc), x)

    def _quantile(self, u, tol=1e-12):
        # exact bracket: max_i Q_i(u) <= Q(u) <= max_i Q_i(u**(1/n))
        n = len(self.marginals)
        lo = np.max([m._quantile(u) for m in self.marginals], axis=0)
        hi = np.max([m._quantile(u ** (1.0 / n)) for m in self.marginals], axis=0)
        done = np.asarray(self.cdf(lo)) >= u
        if np.ndim(u) == 0:
            if done or hi <= lo:
                return lo
            fn = lambda x: self.cdf(x) - float(u)  # noqa: E731
            if fn(float(hi)) <= 0.0:
                return hi
            return np.float64(optimize.brentq(fn, float(lo), float(hi), xtol=1e-300, rtol=4 * np.finfo(float).eps))
        hi = np.where(done, lo, hi)
        for _ in range(200):
            width = hi - lo
            if np.all(width <= tol * np.maximum(1.0, np.abs(hi))):
                break
            mid = 0.5 * (lo + hi)
            reach = np.asarray(self.cdf(mid)) >= u
            hi = np.where(reach, mid, hi)
            lo = np.where(reach, lo, mid)
        return hi

    def atoms(self):
        out = []
        vals = sorted({a[0] for m in self.marginals for a in m.atoms()})
        for v in vals:
            a, b = float(self.cdf_left(v)), float(self.cdf(v))
            if b > a:
                out.append((v, a, b))
        return out


class MaxValueDistribution(Distribution):
    """Law of ``V_max`` for a joint model."""

    source: JointValuationModel
    mode: str


class AnalyticMax(MaxValueDistribution):
    """Exact F_max written as ``g(H(x))`` with g a continuous increasing bijection of [0, 1]."""

    mode = "analytic"

    def __init__(self, source: JointValuationModel, base: Distribution, g):
        self.source, self.base, self.g = source, base, g
        self.support = base.support
        self.tail_index = base.tail_index

    def cdf(self, x):
        return _out(self.g.forward(self.base.cdf(x)), x)

    def cdf_left(self, x):
        return _out(self.g.forward(self.base.cdf_left(x)), x)

    def sf(self, x):
        return _out(self.g.survival(self.base.sf(x)), x)

    def _quantile(self, u):
        return self.base._quantile(self.g.inverse(u))

    def atoms(self):
        return [
            (v, float(self.g.forward(a)), float(self.g.forward(b))) for v, a, b in self.base.atoms()
        ]

    def mean(self):
        return self.base.mean() if self.g.identity else None

    def log_mean(self):
        return self.base.log_mean() if self.g.identity else None

    def scaled(self, k):
        return max_distribution(self.source.scaled(k))

    def describe(self):
        return f"max of {self.source.describe()}"


class SampleBackedMax(MaxValueDistribution):
    """F_max estimated by the empirical law of simulated maxima."""

    mode = "sampled"

    def __init__(self, source: JointValuationModel, samples: int, seed: int, store: np.ndarray):
        self.source, self.samples, self.seed = source, samples, seed
        self.store = np.sort(np.asarray(store, dtype=float))
        self.store.setflags(write=False)
        self._emp = Empirical.from_array(self.store)
        self.support = self._emp.support

    def cdf(self, x):
        return self._emp.cdf(x)

    def cdf_left(self, x):
        return self._emp.cdf_left(x)

    def _quantile(self, u):
        return self._emp._quantile(u)

    def sample(self, rng, size):
        return self._emp.sample(rng, size)

    def atoms(self):
        return self._emp.atoms()

    @property
    def atomless(self):
        return False

    def scaled(self, k):
        return SampleBackedMax(self.source.scaled(k), self.samples, self.seed, self.store * k)

    def describe(self):
        return f"max of {self.source.describe()} [{self.samples} samples, seed {self.seed}]"


@functools.lru_cache(maxsize=512)
def _analytic(model: JointValuationModel) -> AnalyticMax:
    if isinstance(model, Independent):
        if model.identical:
            return AnalyticMax(model, model.marginals[0], _Power(model.n))
        return AnalyticMax(model, _Product(model.marginals), _Power(1))
    if isinstance(model, CommonValueMixture):
        if model.rho == 1.0 or model.n == 1:
            g = _Power(1)
        elif model.rho == 0.0:
            g = _Power(model.n)
        else:
            g = _MixPower(model.rho, model.n)
        return AnalyticMax(model, model.base, g)
    if isinstance(model, Replicated):
        return AnalyticMax(model, _analytic(model.inner), _Power(2))
    raise TypeError(f"no analytic max law for {type(model).__name__}")


def sample_max_values(
    model: JointValuationModel, samples: int, seed: int, workers: int = 1, label: str = "max-store"
) -> np.ndarray:
    parts = _mc.map_chunks(lambda rng, k: model.sample(rng, k).max(axis=1), samples, seed, label, workers)
    return np.concatenate(parts) if parts else np.empty(0)


def max_distribution(
    model: JointValuationModel,
    samples: Optional[int] = None,
    seed: int = 0,
    mode: str = "auto",
    workers: int = 1,
) -> MaxValueDistribution:
    """Distribution of the maximum buyer value.

    ``mode="auto"`` gives the exact law for every built-in joint structure;
    ``mode="sampled"`` simulates ``samples`` profiles and keeps their maxima.
    """
    if mode in ("auto", "analytic"):
        return _analytic(model)
    if mode != "sampled":
        raise ValueError(f"unknown max-distribution mode {mode!r}")
    if not samples or samples < 1:
        raise ValueError("sampled mode needs a positive sample budget")
    store = sample_max_values(model, samples, seed, workers)
    return SampleBackedMax(model, samples, seed, store)
