"""Independent reference computations for the test suite.

Everything here deliberately avoids the package's own numeric paths:
zeta values come from direct series summation with an integral tail (or from
mpmath), and the stationary sojourn oracle evaluates its definitional sum
with mpmath arbitrary precision plus an exact analytic tail integral.
"""

from __future__ import annotations

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def zeta_series(a: float, n_terms: int = 1_000_000) -> float:
    """Direct summation plus integral tail correction; >= 12 digits for a >= 2.1."""
    i = np.arange(1, n_terms + 1, dtype=np.float64)
    head = float(np.sum(np.sort(i ** (-a))))  # ascending sum limits rounding
    n = float(n_terms)
    tail = n ** (1.0 - a) / (a - 1.0) - 0.5 * n ** (-a) + a * n ** (-a - 1.0) / 12.0
    return head + tail


def survival_brute(rho: float, k: int, n_terms: int = 10_000_000) -> float:
    """P(count >= k) by brute-force summation with an analytic tail."""
    i = np.arange(k, n_terms + 1, dtype=np.float64)
    head = float(np.sum(np.sort(i ** (-rho))))
    n = float(n_terms)
    tail = n ** (1.0 - rho) / (rho - 1.0) + 0.5 * n ** (-rho)
    return (head + tail) / zeta_series(rho)


def stationary_sojourn_double_sum(rho: float, n: int, head_terms: int = 3000) -> float:
    """Definitional evaluation: sum_{i>=1} i * pmf(i + n) / mean.

    Literal mpmath summation of the first `head_terms` terms; the remainder
    uses Euler-Maclaurin with the exact closed-form integral of
    x (x+n)^-rho (elementary calculus), so the tail adds no dependence on
    the package's zeta machinery.
    """
    rr = mp.mpf(rho)
    f = lambda i: i * (i + n) ** (-rr)
    head = mp.fsum(f(mp.mpf(i)) for i in range(1, head_terms))
    K = head_terms
    exact_integral = (K + n) ** (2 - rr) / (rr - 2) - n * (K + n) ** (1 - rr) / (rr - 1)
    tail = mp.sumem(f, [K, mp.inf], integral=exact_integral)
    mean_reps = mp.zeta(rr - 1) / mp.zeta(rr)
    return float((head + tail) / mp.zeta(rr) / mean_reps)


def loglog_slope(x, y, lo, hi):
    """Plain least-squares slope of log y vs log x inside [lo, hi]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sel = (x >= lo) & (x <= hi) & np.isfinite(y) & (y > 0)
    lx, ly = np.log(x[sel]), np.log(y[sel])
    lx -= lx.mean()
    return float(np.sum(lx * ly) / np.sum(lx * lx))
