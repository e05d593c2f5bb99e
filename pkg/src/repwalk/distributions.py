"""Model distributions: repetition counts, waiting times and increments.

The repetition law is a zeta (discrete Pareto) distribution
``p(k) = k^-rho / zeta(rho)`` on k = 1, 2, ...; its survival and the
stationarized sojourn probability drive every closed-form prediction in
:mod:`repwalk.theory`.  Waiting times and increments are plain parametric or
bootstrap-resampled empirical laws with the few summary moments the rest of
the package needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .zmath import zeta_tail, zeta_value


class NonErgodicRhoError(ValueError):
    """Raised when an operation requires rho > 2 (finite mean repetitions)."""


# ---------------------------------------------------------------------------
# repetition laws
# ---------------------------------------------------------------------------

# CDF table is truncated once the untabulated mass drops below this; samples
# beyond the table fall through to an exact Pareto-envelope rejection step,
# so truncation introduces no bias, only a slower (rare) code path.
_TABLE_EPS = 1e-8
_TABLE_MAX = 4_000_000


class RepetitionDistribution:
    """Zeta repetition law with exponent rho > 1.

    Parameters
    ----------
    rho : float
        Tail exponent.  rho > 1 for a valid law, rho > 2 for a finite mean
        (required by the stationarized quantities).

    Attributes
    ----------
    rho, zeta_rho : float
        Exponent and its zeta normalization zeta(rho).
    zeta_rho_m1 : float
        zeta(rho - 1); infinite for rho <= 2.
    """

    def __init__(self, rho: float):
        if not rho > 1.0:
            raise ValueError(f"repetition exponent must exceed 1 (got {rho})")
        self.rho = float(rho)
        self.zeta_rho = zeta_value(self.rho)
        self.zeta_rho_m1 = zeta_value(self.rho - 1.0) if self.rho > 2.0 else np.inf
        self._cdf_table: np.ndarray | None = None

    def __repr__(self):
        return f"RepetitionDistribution(rho={self.rho})"

    def __getstate__(self):
        # sampling tables are large and lazily rebuilt; keep pickles small
        state = self.__dict__.copy()
        state["_cdf_table"] = None
        state.pop("_size_biased", None)
        return state

    @property
    def mean(self) -> float:
        """Expected repetition count, zeta(rho-1)/zeta(rho); inf for rho <= 2."""
        return self.zeta_rho_m1 / self.zeta_rho

    def _require_ergodic(self):
        if not self.rho > 2.0:
            raise NonErgodicRhoError(
                f"non-ergodic regime: rho={self.rho} <= 2 has infinite mean "
                "repetition count"
            )

    def pmf(self, k) -> np.ndarray | float:
        """P(count = k) = k^-rho / zeta(rho) for integer k >= 1."""
        k_arr = np.asarray(k)
        if np.any(k_arr < 1):
            raise ValueError("repetition count must be >= 1")
        return np.asarray(k_arr, dtype=np.float64) ** (-self.rho) / self.zeta_rho

    def survival(self, k) -> np.ndarray | float:
        """P(count >= k) = sum_{i>=k} pmf(i).

        Evaluated as a zeta tail sum rather than 1 - cdf so that values stay
        accurate when they are tiny (large k).
        """
        k_arr = np.asarray(k)
        if np.any(k_arr < 1):
            raise ValueError("repetition count must be >= 1")
        return zeta_tail(self.rho, k_arr) / self.zeta_rho

    def survival_strict(self, k) -> np.ndarray | float:
        """P(count > k) for integer k >= 0."""
        k_arr = np.asarray(k, dtype=np.float64)
        if np.any(k_arr < 0):
            raise ValueError("k must be >= 0")
        return zeta_tail(self.rho, k_arr + 1.0) / self.zeta_rho

    def stationary_sojourn(self, n) -> np.ndarray | float:
        """Probability that the value observed at step 0 still holds at step n,
        for a sequence whose block structure is stationary.

        Requires rho > 2.  Equal to the definitional double tail sum
        sum_{i>=n} sum_{k>i} pmf(k) / mean; evaluated in the closed form
        [T(rho-1, n+1) - n T(rho, n+1)] / zeta(rho-1) with T the zeta tail.
        """
        self._require_ergodic()
        n_arr = np.asarray(n, dtype=np.float64)
        scalar = n_arr.ndim == 0
        n_arr = np.atleast_1d(n_arr)
        if np.any(n_arr < 0):
            raise ValueError("step lag must be >= 0")
        out = (
            zeta_tail(self.rho - 1.0, n_arr + 1.0) - n_arr * zeta_tail(self.rho, n_arr + 1.0)
        ) / self.zeta_rho_m1
        # exact endpoints; the formula already gives 1 at n=0 up to rounding
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    # -- sampling ----------------------------------------------------------

    def _table(self) -> np.ndarray:
        if self._cdf_table is None:
            # k*: smallest k with survival(k+1) < _TABLE_EPS, capped
            k_star = (_TABLE_EPS * self.zeta_rho * (self.rho - 1.0)) ** (
                -1.0 / (self.rho - 1.0)
            )
            k_star = int(min(_TABLE_MAX, np.ceil(k_star) + 2))
            k = np.arange(1, k_star + 1, dtype=np.float64)
            pmf = k ** (-self.rho) / self.zeta_rho
            # accumulate in extended precision: 4e6 float64 cumsum would
            # drift by ~1e-9 which matters for inversion fidelity
            self._cdf_table = np.cumsum(pmf.astype(np.longdouble)).astype(np.float64)
        return self._cdf_table

    def _sample_tail(self, rng: np.random.Generator, k_min: int) -> int:
        # Exact rejection for P(k) ~ k^-rho on k > k_min using the floor of a
        # continuous Pareto(rho - 1) envelope; acceptance -> 1 as k_min grows.
        rho = self.rho
        while True:
            w = k_min * rng.random() ** (-1.0 / (rho - 1.0))
            m = int(np.floor(w)) + 1
            q = (m - 1.0) ** (1.0 - rho) - m ** (1.0 - rho)
            if rng.random() * q <= (rho - 1.0) * m ** (-rho):
                return m

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw repetition counts; exact over the full support."""
        cdf = self._table()
        scalar = size is None
        n = 1 if scalar else int(size)
        u = rng.random(n)
        out = np.searchsorted(cdf, u, side="right").astype(np.int64) + 1
        beyond = np.nonzero(u > cdf[-1])[0]
        for i in beyond:
            out[i] = self._sample_tail(rng, len(cdf))
        return int(out[0]) if scalar else out

    def sample_stationary_remaining(self, rng: np.random.Generator) -> int:
        """Remaining length (current step included) of the block in progress
        when a stationary sequence is first observed.

        Uses the size-biased representation: a zeta(rho) block picked
        proportionally to its length is zeta(rho-1) distributed, and the
        observation point is uniform inside it.
        """
        self._require_ergodic()
        if not hasattr(self, "_size_biased"):
            self._size_biased = RepetitionDistribution(self.rho - 1.0)
        nu = self._size_biased.sample(rng)
        return int(np.ceil(rng.random() * nu))


class FixedRepetition:
    """Degenerate repetition law (always `nu` repeats); the nu=1 case is the
    memoryless benchmark used in tests and classical-limit checks."""

    def __init__(self, nu: int = 1):
        if nu < 1:
            raise ValueError("repetition count must be >= 1")
        self.nu = int(nu)
        self.rho = np.inf

    def __repr__(self):
        return f"FixedRepetition(nu={self.nu})"

    @property
    def mean(self) -> float:
        return float(self.nu)

    def pmf(self, k):
        k_arr = np.asarray(k)
        return np.where(k_arr == self.nu, 1.0, 0.0)

    def survival(self, k):
        k_arr = np.asarray(k)
        return np.where(k_arr <= self.nu, 1.0, 0.0)

    def survival_strict(self, k):
        k_arr = np.asarray(k)
        return np.where(k_arr < self.nu, 1.0, 0.0)

    def stationary_sojourn(self, n):
        n_arr = np.asarray(n, dtype=np.float64)
        out = np.clip((self.nu - n_arr) / self.nu, 0.0, 1.0)
        return float(out) if np.ndim(n) == 0 else out

    def sample(self, rng, size=None):
        if size is None:
            return self.nu
        return np.full(int(size), self.nu, dtype=np.int64)

    def sample_stationary_remaining(self, rng) -> int:
        return int(np.ceil(rng.random() * self.nu))


# ---------------------------------------------------------------------------
# waiting times
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WaitingTimeModel:
    """Waiting-time law psi with finite mean; kinds: exponential, lognormal,
    empirical (bootstrap over a stored sample)."""

    kind: str
    params: tuple = ()
    sample_values: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def exponential(cls, rate: float) -> "WaitingTimeModel":
        if rate <= 0:
            raise ValueError("rate must be positive")
        return cls("exponential", (float(rate),))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "WaitingTimeModel":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls("lognormal", (float(mu), float(sigma)))

    @classmethod
    def empirical(cls, values) -> "WaitingTimeModel":
        arr = np.sort(np.asarray(values, dtype=np.float64))
        if arr.size == 0:
            raise ValueError("empirical waiting-time sample is empty")
        if np.any(arr <= 0):
            raise ValueError("waiting times must be strictly positive")
        return cls("empirical", (), arr)

    @property
    def mean_dt(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.params[0]
        if self.kind == "lognormal":
            mu, sigma = self.params
            return float(np.exp(mu + 0.5 * sigma**2))
        return float(self.sample_values.mean())

    @property
    def variance(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.params[0] ** 2
        if self.kind == "lognormal":
            mu, sigma = self.params
            return float((np.exp(sigma**2) - 1.0) * np.exp(2 * mu + sigma**2))
        return float(self.sample_values.var())

    def sample(self, rng: np.random.Generator, size: int):
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.params[0], size)
        if self.kind == "lognormal":
            mu, sigma = self.params
            return rng.lognormal(mu, sigma, size)
        return rng.choice(self.sample_values, size=size, replace=True)

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=np.float64)
        if self.kind == "exponential":
            return -np.expm1(-self.params[0] * np.maximum(x_arr, 0.0))
        if self.kind == "lognormal":
            mu, sigma = self.params
            out = np.zeros_like(x_arr, dtype=np.float64)
            pos = x_arr > 0
            from scipy.special import ndtr

            out[pos] = ndtr((np.log(x_arr[pos]) - mu) / sigma)
            return out
        return np.searchsorted(self.sample_values, x_arr, side="right") / len(
            self.sample_values
        )

    def laplace(self, s: float) -> float:
        """E[exp(-s dt)] for scalar s > 0.

        Exponential in closed form, lognormal by adaptive quadrature,
        empirical by averaging over the stored sample.
        """
        if s <= 0:
            raise ValueError("laplace variable must be positive")
        if self.kind == "exponential":
            rate = self.params[0]
            return rate / (rate + s)
        if self.kind == "empirical":
            return float(np.mean(np.exp(-s * self.sample_values)))
        mu, sigma = self.params
        # integrate over z ~ N(0,1): exp(-s e^{mu + sigma z}) phi(z)
        norm = 1.0 / np.sqrt(2 * np.pi)

        def integrand(z):
            return np.exp(-s * np.exp(mu + sigma * z) - 0.5 * z * z) * norm

        # the integrand turns over where s * dt ~ 1; give quad the breakpoint
        z_star = (np.log(1.0 / s) - mu) / sigma
        points = [z_star] if -12.0 < z_star < 12.0 else None
        val, err = integrate.quad(
            integrand, -12.0, 12.0, limit=300, points=points,
            epsabs=1e-13, epsrel=1e-11,
        )
        if not np.isfinite(val) or err > max(1e-10, 1e-5 * abs(val)):
            raise ArithmeticError(
                f"lognormal Laplace transform quadrature did not converge at "
                f"s={s} (estimate {val}, error {err})"
            )
        return float(val)

    def _laplace_panel(self, x: np.ndarray) -> np.ndarray:
        # direct panel evaluation (sum of exponentials) for non-closed-form kinds
        if self.kind == "empirical":
            dts = self.sample_values
            w = np.full(dts.size, 1.0 / dts.size)
        else:
            # lognormal via Gauss-Hermite; 96 nodes gives ~1e-12 for sigma <= 2
            mu, sigma = self.params
            nodes, weights = np.polynomial.hermite_e.hermegauss(96)
            dts = np.exp(mu + sigma * nodes)
            w = weights / np.sqrt(2 * np.pi)
        out = np.empty_like(x)
        step = max(1, 2**24 // dts.size)
        for i in range(0, x.size, step):
            out[i : i + step] = np.exp(-np.outer(x[i : i + step], dts)) @ w
        return out

    def _laplace_interp(self, x: np.ndarray) -> np.ndarray:
        # cubic interpolation of log(transform) on a log(x) grid; rebuilt when
        # the requested range outgrows the cached one.  ~200 nodes/decade keeps
        # the relative error near 1e-11, far below the truncation tolerances.
        from scipy.interpolate import CubicSpline

        lo = max(np.min(x[x > 0], initial=1e-12), 1e-300)
        hi = float(np.max(x))
        cache = self.__dict__.get("_laplace_cache")
        if cache is None or lo < cache[0] or hi > cache[1]:
            glo, ghi = lo / 10.0, hi * 10.0
            n = int(np.ceil(np.log10(ghi / glo) * 200)) + 8
            grid = np.geomspace(glo, ghi, min(n, 40_000))
            vals = self._laplace_panel(grid)
            good = vals > 1e-290
            spline = CubicSpline(np.log(grid[good]), np.log(vals[good]))
            cutoff = grid[good][-1]
            cache = (glo, ghi, spline, cutoff)
            object.__setattr__(self, "_laplace_cache", cache)
        _, _, spline, cutoff = cache
        out = np.zeros_like(x)
        inside = (x > 0) & (x <= cutoff)
        out[inside] = np.exp(spline(np.log(x[inside])))
        return out

    def laplace_array(self, x: np.ndarray) -> np.ndarray:
        """Vectorized E[exp(-x dt)]; interpolated panels for non-exponential
        kinds once arrays get large."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "exponential":
            rate = self.params[0]
            return rate / (rate + x)
        if x.size <= 4096:
            return self._laplace_panel(x)
        return self._laplace_interp(x)

    def laplace_decay_coeff(self) -> float:
        """c such that laplace(x) <= min(1, c/x); used in truncation bounds."""
        if self.kind == "exponential":
            return self.params[0]
        if self.kind == "lognormal":
            mu, sigma = self.params
            # E[1/dt]/e from exp(-u) <= 1/(e u)
            return float(np.exp(-mu + 0.5 * sigma**2) / np.e)
        return float(np.mean(1.0 / self.sample_values) / np.e)


# ---------------------------------------------------------------------------
# increments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IncrementModel:
    """Jump-size law h; optionally half-rectified (only the positive half of
    the symmetric law, doubled), which turns a symmetric law into one with
    nonzero mean while keeping its magnitude distribution."""

    kind: str
    params: tuple = ()
    sample_values: np.ndarray | None = field(default=None, repr=False)
    half_rectified: bool = False

    @classmethod
    def gaussian(cls, mu: float, sigma: float, half_rectified: bool = False):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        return cls("gaussian", (float(mu), float(sigma)), half_rectified=half_rectified)

    @classmethod
    def two_point(cls, a: float, half_rectified: bool = False):
        if a <= 0:
            raise ValueError("jump amplitude must be positive")
        return cls("two_point", (float(a),), half_rectified=half_rectified)

    @classmethod
    def empirical(cls, values, half_rectified: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            raise ValueError("empirical increment sample is empty")
        return cls("empirical", (), arr, half_rectified)

    @property
    def mean(self) -> float:
        """First moment mu_1 (of the rectified law when half_rectified)."""
        if self.kind == "gaussian":
            mu, sigma = self.params
            if not self.half_rectified:
                return mu
            # folded normal mean
            from scipy.special import ndtr

            return float(
                sigma * np.sqrt(2.0 / np.pi) * np.exp(-0.5 * (mu / sigma) ** 2)
                + mu * (1.0 - 2.0 * ndtr(-mu / sigma))
            ) if sigma > 0 else abs(mu)
        if self.kind == "two_point":
            return self.params[0] if self.half_rectified else 0.0
        vals = np.abs(self.sample_values) if self.half_rectified else self.sample_values
        return float(vals.mean())

    @property
    def second_moment(self) -> float:
        """mu_2 = E[dx^2]; rectification leaves it unchanged for built-ins."""
        if self.kind == "gaussian":
            mu, sigma = self.params
            return mu**2 + sigma**2
        if self.kind == "two_point":
            return self.params[0] ** 2
        return float((self.sample_values**2).mean())

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2

    def sample(self, rng: np.random.Generator, size: int):
        if self.kind == "gaussian":
            mu, sigma = self.params
            out = rng.normal(mu, sigma, size)
        elif self.kind == "two_point":
            a = self.params[0]
            out = np.where(rng.random(size) < 0.5, a, -a)
        else:
            out = rng.choice(self.sample_values, size=size, replace=True)
        return np.abs(out) if self.half_rectified else out
