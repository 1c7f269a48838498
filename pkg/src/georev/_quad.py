"""Quantile-space integration of functionals of a distribution.

A law is split into its atoms, where the quantile function is flat and the
integral is exact, and the continuous stretches between them, handed to
QUADPACK's adaptive routine.  Integrable endpoint singularities (``log u`` at
0, heavy tails at 1) are left to its extrapolation; a stretch that does not
converge keeps its error estimate instead of being truncated.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, Tuple

import numpy as np
from scipy import integrate

EPSABS = 1e-13
EPSREL = 1e-12
LIMIT = 500
_GAP = 1e-15


def quantile_integral(
    dist,
    cont: Callable[[float, float], float],
    atom: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
) -> Tuple[float, float, bool]:
    """Integrate over u in (0, 1).

    ``cont(u, q)`` is the integrand at a continuity point with ``q = Q(u)``;
    ``atom(v, a, b)`` returns the exact contribution of atoms at values ``v``
    occupying quantile levels ``[a, b]``.  Returns (value, abs error, converged).
    """
    atoms = dist.atoms()
    total, err, ok = 0.0, 0.0, True
    if atoms:
        v, a, b = (np.array(col, dtype=float) for col in zip(*atoms))
        total += float(np.sum(atom(v, a, b)))
        gaps = []
        cursor = 0.0
        for lo, hi in zip(a, b):
            if lo - cursor > _GAP:
                gaps.append((cursor, float(lo)))
            cursor = max(cursor, float(hi))
        if 1.0 - cursor > _GAP:
            gaps.append((cursor, 1.0))
    else:
        gaps = [(0.0, 1.0)]

    def f(u):
        return cont(u, float(dist._quantile(np.asarray(u))))

    for lo, hi in gaps:
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, e = integrate.quad(f, lo, hi, epsabs=EPSABS, epsrel=EPSREL, limit=LIMIT)
            except integrate.IntegrationWarning:
                ok = False
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, e = integrate.quad(f, lo, hi, epsabs=EPSABS, epsrel=EPSREL, limit=LIMIT)
        total += val
        err += e
    if not math.isfinite(total):
        ok = False
    return total, err, ok
