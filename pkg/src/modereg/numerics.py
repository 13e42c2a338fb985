"""Numerical primitives: special functions, quadrature, optimization, RNG.

Everything here is deterministic given its inputs.  Random sampling goes
through :class:`RngStream`, an immutable (seed, stream_id) descriptor; the
same descriptor always reproduces the same draws, and distinct stream ids
give independent Philox counter-based streams, so Monte Carlo loops can be
parallelized without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.special


class NonFiniteObjectiveError(ValueError):
    """Objective returned NaN; the offending point is in ``args[1]``."""

    def __init__(self, message, point):
        super().__init__(message, np.asarray(point))
        self.point = np.asarray(point)


class IntegrationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

def log_gamma(x):
    """ln Gamma(x) for x > 0 (elementwise)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("log_gamma requires x > 0")
    return scipy.special.gammaln(x) if x.ndim else float(scipy.special.gammaln(x))


def digamma(x):
    """psi(x) for x > 0 (elementwise)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("digamma requires x > 0")
    return scipy.special.psi(x) if x.ndim else float(scipy.special.psi(x))


def std_normal_cdf(x):
    x = np.asarray(x, dtype=float)
    return scipy.special.ndtr(x) if x.ndim else float(scipy.special.ndtr(x))


def std_normal_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("std_normal_quantile requires p in (0, 1)")
    return scipy.special.ndtri(p) if p.ndim else float(scipy.special.ndtri(p))


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerOptions:
    max_iterations: int = 5000
    objective_tolerance: float = 1e-10
    parameter_tolerance: float = 1e-8
    restart_count: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.objective_tolerance <= 0 or self.parameter_tolerance <= 0:
            raise ValueError("tolerances must be strictly positive")
        if self.restart_count < 0:
            raise ValueError("restart_count must be >= 0")


@dataclass(frozen=True)
class MinimizeResult:
    argmin: np.ndarray
    min_value: float
    converged: bool
    iterations: int
    n_eval: int


def minimize(objective, x0, options=None):
    """Nelder-Mead minimization, robust to kinks in the objective.

    ``+inf`` objective values act as barriers; NaN aborts with
    :class:`NonFiniteObjectiveError`.  After the first simplex converges the
    search restarts from the found optimum ``options.restart_count`` times
    with a fresh simplex, which guards against premature collapse on flat
    ridges.
    """
    options = options or OptimizerOptions()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def wrapped(x):
        v = objective(x)
        if np.isnan(v):
            raise NonFiniteObjectiveError("objective returned NaN", x)
        return v

    f0 = wrapped(x0)
    if not np.isfinite(f0):
        raise ValueError("objective must be finite at x0")

    best_x, best_f = x0, f0
    converged = False
    iterations = 0
    n_eval = 1
    for _ in range(options.restart_count + 1):
        res = scipy.optimize.minimize(
            wrapped,
            best_x,
            method="Nelder-Mead",
            options={
                "maxiter": options.max_iterations,
                "maxfev": 20 * options.max_iterations,
                "fatol": options.objective_tolerance,
                "xatol": options.parameter_tolerance,
            },
        )
        iterations += res.nit
        n_eval += res.nfev
        if res.fun <= best_f:
            best_x, best_f = res.x, res.fun
        converged = bool(res.success)
    return MinimizeResult(np.asarray(best_x, dtype=float), float(best_f),
                          converged, iterations, n_eval)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def integrate(f, a, b, tol=1e-10):
    """Adaptive quadrature of f over [a, b] to absolute tolerance tol."""
    if not a < b:
        raise ValueError("integrate requires a < b")
    value, abserr, info, *rest = scipy.integrate.quad(
        f, a, b, epsabs=tol, epsrel=0.0, limit=200, full_output=True)
    if rest:
        raise IntegrationError(f"quadrature failed on [{a}, {b}]: {rest[0]}")
    if abserr > max(tol, 1e-14 * abs(value)):
        raise IntegrationError(
            f"quadrature error estimate {abserr:.3e} exceeds tol {tol:.3e}")
    return value


# ---------------------------------------------------------------------------
# seeded sampling
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _splitmix64(z):
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of one reproducible random stream."""

    seed: int
    stream_id: int = 0

    def generator(self):
        key = ((self.seed & _MASK64) << 64) | (self.stream_id & _MASK64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index):
        """Derive an independent substream, stable under (stream_id, index)."""
        return RngStream(self.seed, _splitmix64(self.stream_id ^ _splitmix64(index)))


def sample_uniform(stream, size=None):
    return stream.generator().random(size)


def sample_normal(stream, mean=0.0, sd=1.0, size=None):
    if sd <= 0:
        raise ValueError("sd must be > 0")
    return stream.generator().normal(mean, sd, size)


def sample_gamma(stream, shape, scale=1.0, size=None):
    if shape <= 0 or scale <= 0:
        raise ValueError("shape and scale must be > 0")
    return stream.generator().gamma(shape, scale, size)


def sample_bernoulli(stream, p, size=None):
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    return (stream.generator().random(size) < p).astype(int)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def _check_finite(v, x):
    if not np.all(np.isfinite(v)):
        raise NonFiniteObjectiveError("non-finite evaluation", x)
    return v


def finite_diff_gradient(f, x, h=None):
    """Central-difference gradient; h defaults to 1e-5*max(1,|x_j|)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grad = np.empty_like(x)
    for j in range(x.size):
        hj = h if h is not None else 1e-5 * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += hj
        xm[j] -= hj
        grad[j] = (_check_finite(f(xp), xp) - _check_finite(f(xm), xm)) / (2 * hj)
    return grad


def finite_diff_hessian(f, x, h=None):
    """Central-difference Hessian; h defaults to 1e-4*max(1,|x_j|)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = x.size
    steps = np.array([h if h is not None else 1e-4 * max(1.0, abs(x[j]))
                      for j in range(p)])
    hess = np.empty((p, p))
    f0 = _check_finite(f(x), x)
    for j in range(p):
        for k in range(j, p):
            if j == k:
                xp, xm = x.copy(), x.copy()
                xp[j] += steps[j]
                xm[j] -= steps[j]
                hess[j, j] = (_check_finite(f(xp), xp) - 2 * f0
                              + _check_finite(f(xm), xm)) / steps[j] ** 2
            else:
                xpp, xpm, xmp, xmm = x.copy(), x.copy(), x.copy(), x.copy()
                xpp[j] += steps[j]; xpp[k] += steps[k]
                xpm[j] += steps[j]; xpm[k] -= steps[k]
                xmp[j] -= steps[j]; xmp[k] += steps[k]
                xmm[j] -= steps[j]; xmm[k] -= steps[k]
                hess[j, k] = hess[k, j] = (
                    _check_finite(f(xpp), xpp) - _check_finite(f(xpm), xpm)
                    - _check_finite(f(xmp), xmp) + _check_finite(f(xmm), xmm)
                ) / (4 * steps[j] * steps[k])
    return hess


def one_sided_second_derivative(f, x, h=1e-5, side="right"):
    """One-sided second derivative of a scalar function at x.

    Used for directional limits where the second derivative jumps across x.
    """
    s = 1.0 if side == "right" else -1.0
    f0 = _check_finite(f(x), x)
    f1 = _check_finite(f(x + s * h), x + s * h)
    f2 = _check_finite(f(x + 2 * s * h), x + 2 * s * h)
    return (f2 - 2 * f1 + f0) / h**2
