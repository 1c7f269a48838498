"""Revenue of posted prices and auctions against the geometric expectation of the top value."""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
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
from .analytics import (  # noqa: E402
    concentration_ratio,
    expectation,
    geometric_expectation,
    log_expectation,
    monopoly_price,
    posted_price_revenue,
    random_reserve_revenue,
)
from .verification import run_checks  # noqa: E402

__all__ = [
    "CommonValueMixture",
    "Empirical",
    "Exponential",
    "Independent",
    "LogNormal",
    "PointMass",
    "PowerLaw",
    "Replicated",
    "Uniform",
    "max_distribution",
    "concentration_ratio",
    "expectation",
    "geometric_expectation",
    "log_expectation",
    "monopoly_price",
    "posted_price_revenue",
    "random_reserve_revenue",
    "run_checks",
]
