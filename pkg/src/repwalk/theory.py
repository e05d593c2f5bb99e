"""Closed-form and Laplace-domain predictions.

The step autocorrelation of waiting times is the stationarized sojourn
probability, exactly; its large-lag decay exponent is -(rho - 2).  The first
two moments of the walk are assembled in the Laplace domain from the two
power-weighted sums

    j(n; s) = sum_nu nu^n psi~(s nu) p(nu)
    J(n; s) = sum_nu nu^n psi~(s nu) P(count > nu)

(`psi~` the waiting-time Laplace transform, p the repetition pmf) and mapped
back to the time domain with a Gaver-Stehfest inversion, which only ever
needs the transform on the positive real axis -- exactly where the sums
live.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .distributions import (
    IncrementModel,
    NonErgodicRhoError,
    RepetitionDistribution,
    WaitingTimeModel,
)
from .zmath import zeta_tail, zeta_value


class TruncationError(RuntimeError):
    """The repetition sum cannot reach the requested tolerance."""


class SingularDenominatorError(ValueError):
    """1 - j(0;s) vanished numerically; s is too small to evaluate."""


# ---------------------------------------------------------------------------
# step-domain predictions
# ---------------------------------------------------------------------------


def step_acf_exact(repetition, lags) -> np.ndarray | float:
    """Exact normalized step ACF of waiting times: corr(n) equals the
    stationary sojourn probability at lag n (corr(0) = 1)."""
    return repetition.stationary_sojourn(lags)


def step_acf_asymptote(repetition: RepetitionDistribution, lags) -> np.ndarray:
    """Large-lag power law n^-(rho-2) / [zeta(rho-1) (rho-2) (rho-1)]."""
    rho = repetition.rho
    if not rho > 2.0:
        raise NonErgodicRhoError(f"rho={rho} <= 2")
    n = np.asarray(lags, dtype=np.float64)
    return n ** (-(rho - 2.0)) / (
        repetition.zeta_rho_m1 * (rho - 2.0) * (rho - 1.0)
    )


def step_acf_asymptotic_slope(repetition: RepetitionDistribution) -> float:
    """Log-log decay slope of the step ACF: -(rho - 2)."""
    rho = repetition.rho
    if not rho > 2.0:
        raise NonErgodicRhoError(f"rho={rho} <= 2")
    return -(rho - 2.0)


@dataclass(frozen=True)
class TimePropagatorQuery:
    """Conditional law of the waiting-time value n steps after observing dt0."""

    dt0: float
    n: int
    waiting: WaitingTimeModel
    repetition: object

    def __post_init__(self):
        if self.dt0 <= 0:
            raise ValueError("dt0 must be positive")
        if self.n < 0:
            raise ValueError("step count must be >= 0")


def propagator_bin_mass(query: TimePropagatorQuery, dt: float, bin_width: float) -> float:
    """Probability mass that the waiting time n steps later lies in
    [dt, dt + bin_width).

    The law is an atom of weight equal to the sojourn probability at the
    initial value plus the fresh law with the complementary weight.
    """
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    stay = float(query.repetition.stationary_sojourn(query.n))
    mass = 0.0
    if dt <= query.dt0 < dt + bin_width:
        mass += stay
    fresh = query.waiting.cdf(dt + bin_width) - query.waiting.cdf(dt)
    return mass + (1.0 - stay) * float(fresh)


def asymptotic_moment_exponents(rho: float, mu1_zero: bool = False) -> dict:
    """Power-law exponents of the long-time moment expansions.

    Returns the exponent of the anomalous term of the first moment (3 - rho),
    of the variance (4 - rho), and the decay exponent of the increment ACF:
    -(rho - 2) for nonzero mean increments, -(rho - 1) for symmetric ones.
    """
    if not rho > 2.0:
        raise NonErgodicRhoError(f"rho={rho} <= 2")
    return {
        "m1_powerlaw_exp": 3.0 - rho,
        "variance_powerlaw_exp": 4.0 - rho,
        "acf_exp": -(rho - 1.0) if mu1_zero else -(rho - 2.0),
    }


# ---------------------------------------------------------------------------
# repetition-weighted Laplace sums
# ---------------------------------------------------------------------------


class LaplaceSum(NamedTuple):
    value: float
    error_bound: float
    nu_max: int


_NU_START = 1 << 15
_NU_CAP = 1 << 22


def _tail_bound(order: int, s: float, waiting, rho: float, zeta_rho: float, N: float, weight: str) -> float:
    # psi~(x) <= min(1, c/x) turns both tails into pure zeta tails.
    c = waiting.laplace_decay_coeff()
    if weight == "pmf":
        # sum_{nu>N} nu^order psi~(s nu) p(nu)
        plain = float(zeta_tail(rho - order, N + 1.0)) / zeta_rho
        decay = (c / s) * N ** (order - rho) / ((rho - order) * zeta_rho)
        return min(plain, decay)
    # survival weight: P(count > nu) <= nu^(1-rho)/((rho-1) zeta)
    a = rho - 1.0 - order
    bound_plain = np.inf
    if a > 1.0:
        bound_plain = N ** (order + 2.0 - rho) / (
            (rho - order - 2.0) * (rho - 1.0) * zeta_rho
        ) if rho - order - 2.0 > 0 else np.inf
    decay = np.inf
    if rho - order > 1.0:
        decay = (c / s) * N ** (order + 1.0 - rho) / (
            (rho - order - 1.0) * (rho - 1.0) * zeta_rho
        )
    return min(bound_plain, decay)


def _tail_integral(order: int, s: float, waiting, rho: float, zeta_rho: float, N: int, weight: str) -> tuple[float, float]:
    # Euler-Maclaurin: sum_{nu>N} f(nu) ~ int_{N+1}^inf f + f(N+1)/2 - f'(N+1)/12
    def f(x):
        xa = np.array([float(x)])
        pt = waiting.laplace_array(s * xa)
        if weight == "pmf":
            w = xa ** (-rho) / zeta_rho
        else:
            w = zeta_tail(rho, xa + 1.0) / zeta_rho
        return float((xa**order * pt * w)[0])

    a = float(N + 1)

    def g(v):  # x = a e^v: log-space integration avoids endpoint singularities
        x = a * np.exp(v)
        return f(x) * x

    # upper cut: past the transform turnover x* ~ c/s the integrand decays at
    # least like x^-(rho - order - 1); run far enough that the remainder is lost
    # in rounding
    q1 = rho - order - 1.0
    x_turn = max(waiting.laplace_decay_coeff() / s, a)
    v_hi = np.log(x_turn / a) + 34.0 / q1 + 5.0
    integral, int_err = integrate.quad(
        g, 0.0, v_hi, limit=300, epsabs=1e-300, epsrel=1e-10
    )
    int_err += _tail_bound(order, s, waiting, rho, zeta_rho, a * np.exp(v_hi), weight)
    f_a = f(a)
    h = max(1.0, a * 1e-6)
    f_prime = (f(a + h) - f(a - h)) / (2.0 * h)
    tail = integral + 0.5 * f_a - f_prime / 12.0
    # remaining E-M error is O(f'''/720); for these power-law-times-transform
    # integrands f''' ~ f' * (few/a)^2, vanishingly small at a >= 2^15
    err = abs(int_err) + abs(f_prime) * (4.0 / a) ** 2 / 720.0 + abs(tail) * 1e-12
    return tail, err


def repetition_laplace_sum(
    order: int,
    s: float,
    waiting: WaitingTimeModel,
    repetition: object,
    weight: str = "pmf",
    tol: float = 1e-10,
    nu_max: int | None = None,
    tail_correction: str = "power_law",
) -> LaplaceSum:
    """Evaluate j(order; s) (weight="pmf") or J(order; s) (weight="survival").

    Explicit summation up to an adaptively grown cutoff; the remainder is
    added as a power-law tail estimate (Euler-Maclaurin with a quadrature
    integral) unless ``tail_correction="none"``.  Raises
    :class:`TruncationError` when the reported bound cannot reach `tol`
    relative accuracy, suggesting the needed cutoff.
    """
    if s <= 0:
        raise ValueError("laplace variable must be positive")
    if order not in (0, 1):
        raise ValueError("only orders 0 and 1 are used by the moment formulas")
    if weight not in ("pmf", "survival"):
        raise ValueError("weight must be 'pmf' or 'survival'")

    if isinstance(repetition, RepetitionDistribution):
        rho = repetition.rho
        zr = repetition.zeta_rho
    else:
        # degenerate law: finite support, sum directly
        nu = np.arange(1, repetition.nu + 1, dtype=np.float64)
        pt = waiting.laplace_array(s * nu)
        w = repetition.pmf(nu) if weight == "pmf" else repetition.survival_strict(nu)
        return LaplaceSum(float(np.sum(nu**order * pt * w)), 0.0, repetition.nu)

    cap = int(nu_max) if nu_max is not None else _NU_CAP
    total = 0.0
    lo = 1
    size = min(_NU_START, cap)
    N = 0
    while True:
        hi = min(lo + size - 1, cap)
        nu = np.arange(lo, hi + 1, dtype=np.float64)
        pt = waiting.laplace_array(s * nu)
        if weight == "pmf":
            w = nu ** (-rho) / zr
        else:
            w = zeta_tail(rho, nu + 1.0) / zr
        total += float(np.sum(nu**order * pt * w))
        N = hi
        scale = max(abs(total), 1e-300)
        if tail_correction == "power_law":
            # the integral tail is cheap and sharp; let its own error
            # estimate decide when the explicit part is long enough
            tail, err = _tail_integral(order, s, waiting, rho, zr, N, weight)
            if err <= tol * max(scale, abs(total + tail)) or N >= cap:
                total += tail
                break
        else:
            err = _tail_bound(order, s, waiting, rho, zr, float(N), weight)
            if err <= tol * scale or N >= cap:
                break
        lo = hi + 1
        size *= 2

    if err > tol * max(abs(total), 1e-300) and N >= cap:
        # suggest the cutoff the plain bound would need
        needed = cap
        b = err
        while b > tol * max(abs(total), 1e-300) and needed < 1 << 40:
            needed *= 2
            b = _tail_bound(order, s, waiting, rho, zr, float(needed), weight)
        raise TruncationError(
            f"repetition sum tail bound {err:.3g} exceeds tolerance at "
            f"nu_max={N}; retry with nu_max >= {needed}"
        )
    return LaplaceSum(total, err, N)


# ---------------------------------------------------------------------------
# expansion coefficients of the small-s behaviour
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Constant terms of the small-s expansions of j and J.

    c0_of(n) is the s^0 coefficient of j(n; s): zeta(rho-n)/zeta(rho).
    d0_0 and d1_0 are the s^0 coefficients of J(0;s), J(1;s); the ratio
    c1_0/c0_1 equals -1/mean_dt independently of the waiting law.
    """

    rho: float
    mean_dt: float

    def __post_init__(self):
        if not self.rho > 2.0:
            raise NonErgodicRhoError(f"rho={self.rho} <= 2")

    def _zeta_ratio(self, shift: float) -> float:
        arg = self.rho - shift
        if arg <= 1.0:
            raise ValueError(f"zeta({arg}) diverges; coefficient undefined")
        return zeta_value(arg) / zeta_value(self.rho)

    def c0_of(self, n: int) -> float:
        return self._zeta_ratio(float(n))

    @property
    def d0_0(self) -> float:
        return self._zeta_ratio(1.0) - 1.0

    @property
    def d1_0(self) -> float:
        return 0.5 * (self._zeta_ratio(2.0) - self._zeta_ratio(1.0))

    @property
    def ratio_c10_over_c01(self) -> float:
        return -1.0 / self.mean_dt


# ---------------------------------------------------------------------------
# Laplace-domain moments and their numeric inversion
# ---------------------------------------------------------------------------


@dataclass
class LaplaceMoment:
    """m~1(s), m~2(s) on a grid, plus everything needed to re-evaluate the
    transform exactly at the inversion nodes."""

    s_grid: np.ndarray
    m1_tilde: np.ndarray
    m2_tilde: np.ndarray
    truncation_error: np.ndarray
    truncation_nu_max: int
    tail_correction: str
    waiting: WaitingTimeModel
    increment: IncrementModel
    repetition: object


def _moments_at(
    s: float,
    waiting: WaitingTimeModel,
    increment: IncrementModel,
    repetition,
    tol: float,
    tail_correction: str,
) -> tuple[float, float, float, int]:
    j0 = repetition_laplace_sum(0, s, waiting, repetition, "pmf", tol, tail_correction=tail_correction)
    j1 = repetition_laplace_sum(1, s, waiting, repetition, "pmf", tol, tail_correction=tail_correction)
    J0 = repetition_laplace_sum(0, s, waiting, repetition, "survival", tol, tail_correction=tail_correction)
    J1 = repetition_laplace_sum(1, s, waiting, repetition, "survival", tol, tail_correction=tail_correction)
    denom = 1.0 - j0.value
    if abs(denom) < 1e-12:
        mean_block_dt = waiting.mean_dt * getattr(repetition, "mean", 1.0)
        raise SingularDenominatorError(
            f"1 - j(0;s) = {denom:.3e} at s={s:.3e}; usable range is roughly "
            f"s > {1e-12 / mean_block_dt:.3e}"
        )
    mu1, mu2 = increment.mean, increment.second_moment
    ratio = (J0.value + j0.value) / denom
    m1 = (mu1 / s) * ratio
    m2 = (2.0 * mu1**2 / s) * (
        j1.value * (J0.value + j0.value)
        + denom * (J1.value + j1.value - J0.value - j0.value)
    ) / denom**2 + (mu2 / s) * ratio
    err = j0.error_bound + j1.error_bound + J0.error_bound + J1.error_bound
    numax = max(j0.nu_max, j1.nu_max, J0.nu_max, J1.nu_max)
    return m1, m2, err, numax


def laplace_moments(
    s_grid,
    waiting: WaitingTimeModel,
    increment: IncrementModel,
    repetition,
    tol: float = 1e-10,
    tail_correction: str = "power_law",
) -> LaplaceMoment:
    """Evaluate the Laplace-domain first two moments on a grid of s > 0."""
    if isinstance(repetition, RepetitionDistribution) and not repetition.rho > 2.0:
        raise NonErgodicRhoError(f"rho={repetition.rho} <= 2")
    s_arr = np.asarray(s_grid, dtype=np.float64)
    if np.any(s_arr <= 0):
        raise ValueError("s grid must be positive")
    m1 = np.empty_like(s_arr)
    m2 = np.empty_like(s_arr)
    err = np.empty_like(s_arr)
    numax = 0
    for i, s in enumerate(s_arr):
        m1[i], m2[i], err[i], nm = _moments_at(
            float(s), waiting, increment, repetition, tol, tail_correction
        )
        numax = max(numax, nm)
    return LaplaceMoment(
        s_arr, m1, m2, err, numax, tail_correction, waiting, increment, repetition
    )


def gaver_stehfest_weights(order: int) -> np.ndarray:
    """Salzer weights for the even-order Gaver-Stehfest inversion."""
    if order % 2 != 0 or order < 2:
        raise ValueError("order must be a positive even integer")
    M2 = order // 2
    V = np.zeros(order)
    for k in range(1, order + 1):
        acc = 0.0
        for j in range((k + 1) // 2, min(k, M2) + 1):
            acc += (
                j**M2
                * math.factorial(2 * j)
                / (
                    math.factorial(M2 - j)
                    * math.factorial(j)
                    * math.factorial(j - 1)
                    * math.factorial(k - j)
                    * math.factorial(2 * j - k)
                )
            )
        V[k - 1] = (-1) ** (k + M2) * acc
    return V


def gaver_stehfest(transform, t: float, order: int = 12) -> float:
    """Invert a real-axis Laplace transform at time t."""
    if t <= 0:
        raise ValueError("time must be positive")
    V = gaver_stehfest_weights(order)
    ln2_t = math.log(2.0) / t
    vals = np.array([transform(ln2_t * k) for k in range(1, order + 1)])
    return float(ln2_t * np.dot(V, vals))


@dataclass
class MomentCurves:
    """Time-domain moments from numeric inversion, with reliability flags."""

    t_grid: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    m1_error_estimate: np.ndarray
    m2_error_estimate: np.ndarray
    reliable: np.ndarray


def invert_laplace(
    lm: LaplaceMoment,
    t_grid,
    order: int = 12,
    reliability_threshold: float = 0.05,
    tol: float = 1e-10,
) -> MomentCurves:
    """Gaver-Stehfest inversion of the moment transforms on a time grid.

    The error estimate per point is the relative difference between orders
    `order` and `order - 2`; points above `reliability_threshold` are flagged
    unreliable.  The transform is re-evaluated exactly at the inversion
    nodes (the stored grid is for inspection and export only).
    """
    t_arr = np.asarray(t_grid, dtype=np.float64)
    if np.any(t_arr <= 0):
        raise ValueError("time grid must be positive")

    cache: dict[float, tuple[float, float]] = {}

    def ev(s: float) -> tuple[float, float]:
        if s not in cache:
            m1, m2, _, _ = _moments_at(
                s, lm.waiting, lm.increment, lm.repetition, tol, lm.tail_correction
            )
            cache[s] = (m1, m2)
        return cache[s]

    out = {name: np.empty_like(t_arr) for name in ("m1", "m2", "e1", "e2")}
    rel = np.empty(len(t_arr), dtype=bool)
    for i, t in enumerate(t_arr):
        res = {}
        for m in (order, order - 2):
            V = gaver_stehfest_weights(m)
            ln2_t = math.log(2.0) / t
            vals = np.array([ev(ln2_t * k) for k in range(1, m + 1)])
            res[m] = (
                ln2_t * float(np.dot(V, vals[:, 0])),
                ln2_t * float(np.dot(V, vals[:, 1])),
            )
        m1, m2 = res[order]
        p1, p2 = res[order - 2]
        e1 = abs(m1 - p1) / max(abs(m1), 1e-300)
        e2 = abs(m2 - p2) / max(abs(m2), 1e-300)
        out["m1"][i], out["m2"][i] = m1, m2
        out["e1"][i], out["e2"][i] = e1, e2
        rel[i] = (e1 <= reliability_threshold) and (e2 <= reliability_threshold)
    return MomentCurves(t_arr, out["m1"], out["m2"], out["e1"], out["e2"], rel)
