"""Observation models whose sample mean drives the sequential tests.

Two discrete families are supported: Bernoulli trials with mean ``theta`` in
(0, 1) and Poisson counts with mean ``theta`` in (0, inf).  In both cases the
n-sample sum is a sufficient statistic (Binomial(n, theta) respectively
Poisson(n*theta)), so every exact computation in the package works on integer
sum counts.  All mass functions are evaluated in log space and tail sums use
log-sum-exp; upper Poisson tails are taken as the complement of a finite
lower sum so no infinite series is ever truncated silently.

The large-deviation rate function appears here as ``chernoff(z, theta)``:
the infimum over the exponential tilt of the moment generating function,
evaluated in closed form for both families.  It lies in (0, 1] and equals 1
exactly when ``z == theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp, xlogy

from .errors import DomainError

__all__ = ["Bernoulli", "Poisson", "model_by_name"]

# Slack used when mapping a mean-scale threshold z onto integer sum counts.
# Support atoms arrive as k/n floats; n*(k/n) can miss k by a few ulp.
_COUNT_EPS = 1e-9


def _count_floor(x: float) -> int:
    """Largest integer <= x, tolerating float noise just below an integer."""
    if math.isinf(x):
        raise DomainError("threshold must be finite")
    return math.floor(x + _COUNT_EPS)


def _count_ceil(x: float) -> int:
    if math.isinf(x):
        raise DomainError("threshold must be finite")
    return math.ceil(x - _COUNT_EPS)


@dataclass(frozen=True)
class Bernoulli:
    """Bernoulli observations; the n-sample sum is Binomial(n, theta)."""

    name = "bernoulli"

    # Open parameter interval and the closed convex hull of the mean support.
    theta_lo = 0.0
    theta_hi = 1.0
    mean_hull = (0.0, 1.0)

    def validate_theta(self, theta: float, closed: bool = False) -> None:
        lo_ok = theta >= 0.0 if closed else theta > 0.0
        hi_ok = theta <= 1.0 if closed else theta < 1.0
        if not (lo_ok and hi_ok):
            raise DomainError(f"Bernoulli mean must lie in (0, 1), got {theta}")

    def sum_upper(self, n: int) -> int:
        """Largest sum count (the support is {0, ..., n})."""
        return n

    def log_pmf_sum(self, n: int, k, theta: float):
        """log Pr{sum = k} for Binomial(n, theta); vectorized over k."""
        k = np.asarray(k)
        valid = (k >= 0) & (k <= n)
        kk = np.where(valid, k, 0)
        out = (
            gammaln(n + 1.0)
            - gammaln(kk + 1.0)
            - gammaln(n - kk + 1.0)
            + xlogy(kk, theta)
            + xlogy(n - kk, 1.0 - theta)
        )
        return np.where(valid, out, -np.inf)

    def pmf_sum(self, n: int, k, theta: float):
        return np.exp(self.log_pmf_sum(n, k, theta))

    def tail_lower(self, n: int, z: float, theta: float) -> float:
        """Pr{sample mean <= z} evaluated exactly."""
        kmax = _count_floor(n * z)
        if kmax < 0:
            return 0.0
        if kmax >= n:
            return 1.0
        terms = self.log_pmf_sum(n, np.arange(kmax + 1), theta)
        return min(1.0, float(np.exp(logsumexp(terms))))

    def tail_upper(self, n: int, z: float, theta: float) -> float:
        """Pr{sample mean >= z} evaluated exactly."""
        kmin = _count_ceil(n * z)
        if kmin <= 0:
            return 1.0
        if kmin > n:
            return 0.0
        terms = self.log_pmf_sum(n, np.arange(kmin, n + 1), theta)
        return min(1.0, float(np.exp(logsumexp(terms))))

    def log_chernoff(self, z, theta: float):
        """log of the tilted-MGF infimum; vectorized over z in [0, 1]."""
        self.validate_theta(theta)
        z = np.asarray(z, dtype=float)
        if np.any((z < -_COUNT_EPS) | (z > 1.0 + _COUNT_EPS)):
            raise DomainError("z must lie in the mean hull [0, 1]")
        z = np.clip(z, 0.0, 1.0)
        out = (
            xlogy(z, theta)
            - xlogy(z, z)
            + xlogy(1.0 - z, 1.0 - theta)
            - xlogy(1.0 - z, 1.0 - z)
        )
        return out

    def chernoff(self, z, theta: float):
        val = np.exp(self.log_chernoff(z, theta))
        out = np.minimum(val, 1.0)
        return float(out) if np.isscalar(z) or np.asarray(z).ndim == 0 else out

    def increment_pmf(self, m: int, theta: float, tail_mass: float = 1e-15):
        """Distribution of a stage increment of m samples.

        Returns (probs, deficit): probs[d] = Pr{increment sum = d} and the
        mass discarded by truncation (always 0 here; the support is finite).
        """
        probs = self.pmf_sum(m, np.arange(m + 1), theta)
        return probs, 0.0

    def draw(self, rng: np.random.Generator, size: int, theta: float):
        return (rng.random(size) < theta).astype(np.int64)


@dataclass(frozen=True)
class Poisson:
    """Poisson observations; the n-sample sum is Poisson(n * theta)."""

    name = "poisson"

    theta_lo = 0.0
    theta_hi = math.inf
    mean_hull = (0.0, math.inf)

    def validate_theta(self, theta: float, closed: bool = False) -> None:
        ok = theta >= 0.0 if closed else theta > 0.0
        if not ok or math.isinf(theta):
            raise DomainError(f"Poisson mean must lie in (0, inf), got {theta}")

    def sum_upper(self, n: int) -> None:
        return None  # unbounded support

    def log_pmf_sum(self, n: int, k, theta: float):
        k = np.asarray(k)
        mu = n * theta
        valid = k >= 0
        kk = np.where(valid, k, 0)
        out = xlogy(kk, mu) - mu - gammaln(kk + 1.0)
        return np.where(valid, out, -np.inf)

    def pmf_sum(self, n: int, k, theta: float):
        return np.exp(self.log_pmf_sum(n, k, theta))

    def tail_lower(self, n: int, z: float, theta: float) -> float:
        kmax = _count_floor(n * z)
        if kmax < 0:
            return 0.0
        terms = self.log_pmf_sum(n, np.arange(kmax + 1), theta)
        return min(1.0, float(np.exp(logsumexp(terms))))

    def tail_upper(self, n: int, z: float, theta: float) -> float:
        # Complement of the finite lower sum; the infinite upper series is
        # never summed directly.
        kmin = _count_ceil(n * z)
        if kmin <= 0:
            return 1.0
        terms = self.log_pmf_sum(n, np.arange(kmin), theta)
        return max(0.0, 1.0 - float(np.exp(logsumexp(terms))))

    def log_chernoff(self, z, theta: float):
        self.validate_theta(theta)
        z = np.asarray(z, dtype=float)
        if np.any(z < -_COUNT_EPS):
            raise DomainError("z must lie in the mean hull [0, inf)")
        z = np.maximum(z, 0.0)
        out = z - theta + xlogy(z, theta) - xlogy(z, z)
        return out

    def chernoff(self, z, theta: float):
        val = np.exp(self.log_chernoff(z, theta))
        out = np.minimum(val, 1.0)
        return float(out) if np.isscalar(z) or np.asarray(z).ndim == 0 else out

    def increment_pmf(self, m: int, theta: float, tail_mass: float = 1e-15):
        mu = m * theta
        # Smallest cutoff whose upper tail is at most tail_mass; the
        # discarded mass is reported analytically so the truncation slack
        # is certified rather than inferred from a float sum.
        k_hi = int(stats.poisson.isf(tail_mass, mu))
        probs = self.pmf_sum(m, np.arange(k_hi + 1), theta)
        deficit = float(stats.poisson.sf(k_hi, mu))
        return probs, deficit

    def draw(self, rng: np.random.Generator, size: int, theta: float):
        return rng.poisson(theta, size).astype(np.int64)


_MODELS = {"bernoulli": Bernoulli(), "poisson": Poisson()}


def model_by_name(name: str):
    try:
        return _MODELS[name]
    except KeyError:
        raise DomainError(f"unknown model {name!r}; expected one of {sorted(_MODELS)}")
