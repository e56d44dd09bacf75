"""Linear Gaussian state space model with an exact Kalman-filter likelihood.

    x_1 ~ N(0, q),  x_t = phi x_{t-1} + N(0, q),  y_t = x_t + N(0, r)

The free parameters are (phi, q) on the unbounded scale (atanh phi, log q);
r is held fixed.  Priors: phi ~ U(-1, 1), q ~ IG(3, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..likelihood import LikelihoodEstimate, bootstrap_filter_batch
from ..rng import stream
from .base import LOG_2PI, as_rows, inv_gamma_logpdf, log_jacobian_log, log_jacobian_tanh

Q_PRIOR = (3.0, 1.0)


def kalman_loglik(y, phi, q, r):
    """Prediction-error decomposition log-likelihood; parameters broadcast against each other."""
    y = np.asarray(y, dtype=float)
    phi, q, r = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (phi, q, r)))
    m = np.zeros(phi.shape)
    p = q.copy()
    total = np.zeros(phi.shape)
    for y_t in y:
        f = p + r
        v = y_t - m
        total += -0.5 * (LOG_2PI + np.log(f) + v * v / f)
        m = phi * (m + p / f * v)
        p = phi * phi * (p * r / f) + q
    return total


@dataclass(frozen=True)
class LgssModel:
    observations: np.ndarray
    r: float = 1.0
    name: str = "lgss"
    param_names: tuple = ("atanh_phi", "log_q")
    self_tuning: bool = False
    has_overhead: bool = False

    @property
    def dim(self) -> int:
        return 2

    @staticmethod
    def natural(theta) -> dict:
        theta = as_rows(theta, 2)
        return {"phi": np.tanh(theta[:, 0]), "q": np.exp(theta[:, 1])}

    @staticmethod
    def unconstrained(phi, q) -> np.ndarray:
        return np.array([math.atanh(phi), math.log(q)])

    def log_prior(self, theta) -> np.ndarray:
        theta = as_rows(theta, 2)
        q = np.exp(theta[:, 1])
        return (math.log(0.5) + log_jacobian_tanh(theta[:, 0])
                + inv_gamma_logpdf(q, *Q_PRIOR) + log_jacobian_log(theta[:, 1]))

    def exact_loglik(self, theta) -> np.ndarray:
        p = self.natural(theta)
        return kalman_loglik(self.observations, p["phi"], p["q"], self.r)

    # state space interface for the bootstrap filter; params entries are (B, 1)
    def initial_state(self, params, u):
        return np.sqrt(params["q"]) * u

    def transition(self, params, x, u):
        return params["phi"] * x + np.sqrt(params["q"]) * u

    def log_obs_density(self, params, y_t, x):
        return -0.5 * (LOG_2PI + math.log(self.r) + (y_t - x) ** 2 / self.r)

    def loglik_values(self, theta, n: int, rngs, antithetic: bool = False) -> np.ndarray:
        return bootstrap_filter_batch(self, self.natural(theta), self.observations, n, rngs, antithetic)

    def estimate_loglik(self, theta, rngs, n=None, sigma2=None, antithetic=False, stratified=True):
        if n is None:
            raise ConfigError("the particle filter needs an explicit particle count or a tuning profile")
        values = self.loglik_values(theta, n, rngs, antithetic)
        return [LikelihoodEstimate(float(v), n) for v in values]

    def simulate(self, phi: float, q: float, n_times: int, seed: int) -> np.ndarray:
        return simulate_lgss(phi, q, self.r, n_times, seed)

    def to_dict(self) -> dict:
        return {"kind": self.name, "r": self.r}


def simulate_lgss(phi, q, r, n_times, seed):
    rng = stream(seed, 0)
    eta = rng.standard_normal(n_times) * math.sqrt(q)
    eps = rng.standard_normal(n_times) * math.sqrt(r)
    x = np.empty(n_times)
    prev = 0.0
    for t in range(n_times):
        prev = phi * prev + eta[t]
        x[t] = prev
    return x + eps


def grid_posterior(model: LgssModel, lower, upper, n_grid: int = 401) -> dict:
    """Posterior of the unconstrained parameters by a dense midpoint-rule grid.

    Returns the posterior means, standard deviations and log evidence.
    """
    axes = [np.linspace(lo, hi, n_grid) for lo, hi in zip(lower, upper)]
    a, b = np.meshgrid(*axes, indexing="ij")
    theta = np.column_stack([a.ravel(), b.ravel()])
    log_post = model.log_prior(theta) + model.exact_loglik(theta)
    top = log_post.max()
    w = np.exp(log_post - top)
    cell = np.prod([ax[1] - ax[0] for ax in axes])
    mass = w.sum()
    mean = w @ theta / mass
    var = w @ (theta - mean) ** 2 / mass
    edge = max(w.reshape(n_grid, n_grid)[[0, -1], :].max(), w.reshape(n_grid, n_grid)[:, [0, -1]].max())
    return {
        "mean": mean,
        "sd": np.sqrt(var),
        "log_evidence": float(top + math.log(mass * cell)),
        "edge_mass_ratio": float(edge),
    }
