"""Shared pieces for the built-in models: prior log-densities and parameter transforms."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit, gammaln

LOG_2PI = math.log(2.0 * math.pi)


def normal_logpdf(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def inv_gamma_logpdf(x, shape, scale):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = shape * math.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x
    return np.where(x > 0, out, -np.inf)


def half_cauchy_logpdf(x, scale=1.0):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = math.log(2.0 / (math.pi * scale)) - np.log1p((x / scale) ** 2)
    return np.where(x >= 0, out, -np.inf)


def log_jacobian_log(u):
    """d exp(u) / du = exp(u)."""
    return np.asarray(u, dtype=float)


def log_jacobian_tanh(u):
    """d tanh(u) / du = 1 - tanh(u)^2, computed without cancellation."""
    u = np.abs(np.asarray(u, dtype=float))
    return math.log(4.0) - 2.0 * u - 2.0 * np.log1p(np.exp(-2.0 * u))


def log_jacobian_logit(u):
    """d expit(u) / du = expit(u) expit(-u)."""
    u = np.asarray(u, dtype=float)
    return -np.logaddexp(0.0, u) - np.logaddexp(0.0, -u)


def as_rows(theta, dim):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 1:
        theta = theta.reshape(1, dim)
    if theta.shape[1] != dim:
        raise ValueError(f"parameter vectors must have length {dim}")
    return theta


__all__ = [
    "LOG_2PI",
    "as_rows",
    "expit",
    "half_cauchy_logpdf",
    "inv_gamma_logpdf",
    "log_jacobian_log",
    "log_jacobian_logit",
    "log_jacobian_tanh",
    "normal_logpdf",
]
