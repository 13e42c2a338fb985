"""Link functions mapping the linear predictor to a mode/mean in (0,1).

Note the convention: here a "link" g maps eta in R to (0,1), i.e. it is the
inverse link in GLM terminology.  Outputs are clamped to
[1e-12, 1 - 1e-12] so likelihood code never sees an exact 0 or 1 while the
optimizer explores extreme linear predictors.
"""

from __future__ import annotations

import numpy as np
import scipy.special

CLAMP_EPS = 1e-12

LINK_NAMES = ("logit", "probit", "loglog", "cloglog")


def _check_kind(kind):
    if kind not in LINK_NAMES:
        raise ValueError(f"unknown link {kind!r}; valid: {', '.join(LINK_NAMES)}")


def apply(kind, eta):
    """g(eta) in (0,1), clamped away from the boundary."""
    _check_kind(kind)
    eta = np.asarray(eta, dtype=float)
    if kind == "logit":
        out = scipy.special.expit(eta)
    elif kind == "probit":
        out = scipy.special.ndtr(eta)
    elif kind == "loglog":
        out = np.exp(-np.exp(-eta))
    else:  # cloglog
        out = -np.expm1(-np.exp(eta))
    out = np.clip(out, CLAMP_EPS, 1 - CLAMP_EPS)
    return float(out) if out.ndim == 0 else out


def invert(kind, p):
    """g^{-1}(p) for p in (0,1)."""
    _check_kind(kind)
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("invert requires p in (0, 1)")
    if kind == "logit":
        out = scipy.special.logit(p)
    elif kind == "probit":
        out = scipy.special.ndtri(p)
    elif kind == "loglog":
        out = -np.log(-np.log(p))
    else:  # cloglog
        out = np.log(-np.log1p(-p))
    return float(out) if out.ndim == 0 else out


def derivative(kind, eta):
    """dg/deta, strictly positive."""
    _check_kind(kind)
    eta = np.asarray(eta, dtype=float)
    if kind == "logit":
        p = scipy.special.expit(eta)
        out = p * (1 - p)
    elif kind == "probit":
        out = np.exp(-0.5 * eta**2) / np.sqrt(2 * np.pi)
    elif kind == "loglog":
        out = np.exp(-eta) * np.exp(-np.exp(-eta))
    else:  # cloglog
        out = np.exp(eta) * np.exp(-np.exp(eta))
    return float(out) if out.ndim == 0 else out
