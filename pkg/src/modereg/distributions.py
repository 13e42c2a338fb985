"""Distributions on (0,1) used by the regression families.

Three parameterizations:

* :class:`BetaModeDist` -- beta with shapes ``1 + m*theta`` and
  ``1 + m*(1-theta)`` so the mode is exactly ``theta`` and both shapes
  exceed one.
* :class:`GbpDist` -- generalized biparabolic with mode ``theta`` and shape
  ``m``; density proportional to ``d^m (2 - d^m)`` where ``d`` is the
  distance ratio to the nearer endpoint, normalized so d=1 at the mode.
* :class:`BetaMeanDist` -- beta with shapes ``mu*phi`` and ``(1-mu)*phi``
  (mean/precision parameterization).

The GBP CDF below is a closed form obtained by integrating the density
piecewise; it is validated against quadrature in the test suite before
anything downstream relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.special

from .numerics import RngStream


def _as_array(v):
    arr = np.asarray(v, dtype=float)
    return arr, arr.ndim == 0


def _gbp_norm_const(m):
    return (2 * m + 1) * (m + 1) / (3 * m + 1)


def gbp_distance_ratio(v, theta):
    """d = v/theta below the mode, (1-v)/(1-theta) above; vectorized."""
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return np.where(v <= theta, v / theta, (1 - v) / (1 - theta))


def gbp_log_pdf(v, theta, m):
    """log GBP density, vectorized over v and theta; -inf at the endpoints."""
    v = np.asarray(v, dtype=float)
    d = gbp_distance_ratio(v, theta)
    with np.errstate(divide="ignore"):
        out = (np.log(_gbp_norm_const(m)) + m * np.log(d)
               + np.log1p(1 - d**m))
    return np.where((v <= 0) | (v >= 1), -np.inf, out)


def gbp_cdf(v, theta, m):
    """Closed-form GBP CDF, vectorized; satisfies F(theta) = theta."""
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    c = _gbp_norm_const(m)
    d = np.clip(np.where(v <= theta, v / theta, (1 - v) / (1 - theta)), 0, 1)
    piece = c * (2 * d ** (m + 1) / (m + 1) - d ** (2 * m + 1) / (2 * m + 1))
    lower = theta * piece
    upper = 1 - (1 - theta) * piece
    out = np.where(v <= theta, lower, upper)
    return np.clip(np.where(v <= 0, 0.0, np.where(v >= 1, 1.0, out)), 0.0, 1.0)


def gbp_quantile(p, theta, m, tol=1e-12):
    """Inverse of :func:`gbp_cdf` by bracketed bisection, vectorized."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("quantile requires p in [0, 1]")
    theta = np.broadcast_to(np.asarray(theta, dtype=float), p.shape).copy()
    lo = np.zeros_like(p, dtype=float)
    hi = np.ones_like(p, dtype=float)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        below = gbp_cdf(mid, theta, m) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < tol:
            break
    out = 0.5 * (lo + hi)
    return np.where(p <= 0, 0.0, np.where(p >= 1, 1.0, out))


def gbp_mean(theta, m):
    return (6 * m**2 * np.asarray(theta, dtype=float) + 7 * m + 2) / (
        6 * m**2 + 14 * m + 4)


def gbp_variance(theta, m):
    theta = np.asarray(theta, dtype=float)
    denom = 4 * (3 * m + 1) ** 2 * (m + 2) ** 2 * (2 * m + 3) * (m + 3)
    num = (4 * m**2 * (37 * m**2 + 61 * m + 10) * theta * (theta - 1)
           + 82 * m**4 + 247 * m**3 + 247 * m**2 + 96 * m + 12)
    return num / denom


def sample_gbp(theta, m, stream: RngStream, count=None):
    """Inverse-CDF draws; theta may be a vector of per-draw modes."""
    theta = np.asarray(theta, dtype=float)
    if count is None:
        count = theta.size if theta.ndim else 1
    u = stream.generator().random(count)
    th = np.broadcast_to(theta, u.shape)
    return gbp_quantile(u, th, m)


def sample_beta_shapes(a1, a2, stream: RngStream, count=None):
    """Beta draws via two gamma draws; shape vectors give per-draw shapes."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if count is None:
        count = max(a1.size, a2.size) if (a1.ndim or a2.ndim) else 1
    gen = stream.generator()
    g1 = gen.gamma(np.broadcast_to(a1, (count,)) if a1.ndim == 0 else a1, 1.0)
    g2 = gen.gamma(np.broadcast_to(a2, (count,)) if a2.ndim == 0 else a2, 1.0)
    return g1 / (g1 + g2)


def _beta_log_pdf(v, a1, a2):
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (scipy.special.gammaln(a1 + a2) - scipy.special.gammaln(a1)
               - scipy.special.gammaln(a2)
               + (a1 - 1) * np.log(v) + (a2 - 1) * np.log1p(-v))
    return np.where((v <= 0) | (v >= 1), -np.inf, out)


class _BetaBase:
    """Shared beta machinery over implied shape parameters (a1, a2)."""

    @property
    def shapes(self):
        raise NotImplementedError

    def _domain_check(self, v):
        if np.any((np.asarray(v, dtype=float) < 0)
                  | (np.asarray(v, dtype=float) > 1)):
            raise ValueError("v must lie in [0, 1]")

    def log_pdf(self, v):
        self._domain_check(v)
        a1, a2 = self.shapes
        out = _beta_log_pdf(v, a1, a2)
        return out if out.ndim else float(out)

    def pdf(self, v):
        self._domain_check(v)
        a1, a2 = self.shapes
        v_arr, scalar = _as_array(v)
        out = np.exp(_beta_log_pdf(v_arr, a1, a2))
        # endpoint limits: 0 when the shape on that side exceeds 1, the
        # normalizing constant when it equals 1, +inf below 1
        bconst = np.exp(scipy.special.gammaln(a1 + a2)
                        - scipy.special.gammaln(a1) - scipy.special.gammaln(a2))
        at0 = 0.0 if a1 > 1 else (bconst if a1 == 1 else np.inf)
        at1 = 0.0 if a2 > 1 else (bconst if a2 == 1 else np.inf)
        out = np.where(v_arr == 0, at0, out)
        out = np.where(v_arr == 1, at1, out)
        return float(out) if scalar else out

    def cdf(self, v):
        self._domain_check(v)
        a1, a2 = self.shapes
        out = scipy.special.betainc(a1, a2, np.asarray(v, dtype=float))
        return float(out) if np.asarray(v).ndim == 0 else out

    def quantile(self, p):
        p_arr, scalar = _as_array(p)
        if np.any((p_arr < 0) | (p_arr > 1)):
            raise ValueError("quantile requires p in [0, 1]")
        a1, a2 = self.shapes
        out = scipy.special.betaincinv(a1, a2, p_arr)
        return float(out) if scalar else out

    def sample(self, stream: RngStream, count):
        if count < 1:
            raise ValueError("count must be >= 1")
        a1, a2 = self.shapes
        return sample_beta_shapes(np.full(count, a1), np.full(count, a2), stream)

    def mean(self):
        a1, a2 = self.shapes
        return a1 / (a1 + a2)

    def variance(self):
        a1, a2 = self.shapes
        s = a1 + a2
        return a1 * a2 / (s**2 * (s + 1))


@dataclass(frozen=True)
class BetaModeDist(_BetaBase):
    """Beta distribution parameterized by its mode theta and concentration m."""

    theta: float
    m: float

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if self.m <= 0:
            raise ValueError("m must be > 0")

    @property
    def shapes(self):
        return 1 + self.m * self.theta, 1 + self.m * (1 - self.theta)

    def mode(self):
        return self.theta


@dataclass(frozen=True)
class BetaMeanDist(_BetaBase):
    """Beta distribution parameterized by its mean mu and precision phi."""

    mu: float
    phi: float

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError("mu must lie in (0, 1)")
        if self.phi <= 0:
            raise ValueError("phi must be > 0")

    @property
    def shapes(self):
        return self.mu * self.phi, (1 - self.mu) * self.phi

    def mode(self):
        a1, a2 = self.shapes
        if a1 <= 1 or a2 <= 1:
            raise ValueError("mode undefined: both implied shapes must exceed 1")
        return (a1 - 1) / (a1 + a2 - 2)


@dataclass(frozen=True)
class GbpDist:
    """Generalized biparabolic distribution with mode theta and shape m."""

    theta: float
    m: float

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if self.m <= 0:
            raise ValueError("m must be > 0")

    def log_pdf(self, v):
        self._domain_check(v)
        out = gbp_log_pdf(v, self.theta, self.m)
        return out if out.ndim else float(out)

    def pdf(self, v):
        self._domain_check(v)
        v_arr, scalar = _as_array(v)
        with np.errstate(over="ignore"):
            out = np.where((v_arr <= 0) | (v_arr >= 1), 0.0,
                           np.exp(gbp_log_pdf(np.clip(v_arr, 1e-300, 1), self.theta, self.m)))
        return float(out) if scalar else out

    def _domain_check(self, v):
        if np.any((np.asarray(v, dtype=float) < 0)
                  | (np.asarray(v, dtype=float) > 1)):
            raise ValueError("v must lie in [0, 1]")

    def cdf(self, v):
        self._domain_check(v)
        out = gbp_cdf(v, self.theta, self.m)
        return float(out) if np.asarray(v).ndim == 0 else out

    def quantile(self, p):
        p_arr, scalar = _as_array(p)
        out = gbp_quantile(p_arr, self.theta, self.m)
        return float(out) if scalar else out

    def sample(self, stream: RngStream, count):
        if count < 1:
            raise ValueError("count must be >= 1")
        return sample_gbp(np.full(count, self.theta), self.m, stream, count)

    def mean(self):
        return float(gbp_mean(self.theta, self.m))

    def variance(self):
        return float(gbp_variance(self.theta, self.m))

    def mode(self):
        return self.theta
