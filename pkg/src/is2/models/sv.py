"""One-factor stochastic volatility model, estimated by the bootstrap particle filter.

    y_t = exp((c + x_t) / 2) eps_t,   x_{t+1} = phi x_t + sigma_eta eta_t,
    x_1 ~ N(0, sigma_eta^2 / (1 - phi^2))

Unconstrained parameters are (c, logit phi, log sigma_eta^2) with priors
c ~ N(0, 1), phi ~ U(0, 1), sigma_eta^2 ~ IG(2.5, 0.0075).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from ..errors import ConfigError
from ..likelihood import LikelihoodEstimate, bootstrap_filter_batch
from ..rng import stream
from .base import LOG_2PI, as_rows, inv_gamma_logpdf, log_jacobian_log, log_jacobian_logit, normal_logpdf

SIGMA2_PRIOR = (2.5, 0.0075)


@dataclass(frozen=True)
class SvModel:
    observations: np.ndarray
    name: str = "sv"
    param_names: tuple = ("c", "logit_phi", "log_sigma_eta2")
    self_tuning: bool = False
    has_overhead: bool = False

    @property
    def dim(self) -> int:
        return 3

    @staticmethod
    def natural(theta) -> dict:
        theta = as_rows(theta, 3)
        return {"c": theta[:, 0], "phi": expit(theta[:, 1]), "sigma_eta2": np.exp(theta[:, 2])}

    @staticmethod
    def unconstrained(c, phi, sigma_eta2) -> np.ndarray:
        return np.array([c, float(logit(phi)), math.log(sigma_eta2)])

    def log_prior(self, theta) -> np.ndarray:
        theta = as_rows(theta, 3)
        return (normal_logpdf(theta[:, 0], 0.0, 1.0)
                + log_jacobian_logit(theta[:, 1])
                + inv_gamma_logpdf(np.exp(theta[:, 2]), *SIGMA2_PRIOR) + log_jacobian_log(theta[:, 2]))

    def initial_state(self, params, u):
        return np.sqrt(params["sigma_eta2"] / (1.0 - params["phi"] ** 2)) * u

    def transition(self, params, x, u):
        return params["phi"] * x + np.sqrt(params["sigma_eta2"]) * u

    def log_obs_density(self, params, y_t, x):
        h = params["c"] + x
        return -0.5 * (LOG_2PI + h + y_t * y_t * np.exp(-h))

    def loglik_values_natural(self, params: dict, n: int, rngs, antithetic: bool = False) -> np.ndarray:
        """Filter directly on natural parameters; sigma_eta2 = 0 is allowed here."""
        return bootstrap_filter_batch(self, params, self.observations, n, rngs, antithetic)

    def loglik_values(self, theta, n: int, rngs, antithetic: bool = False) -> np.ndarray:
        return self.loglik_values_natural(self.natural(theta), n, rngs, antithetic)

    def estimate_loglik(self, theta, rngs, n=None, sigma2=None, antithetic=False, stratified=True):
        if n is None:
            raise ConfigError("the particle filter needs an explicit particle count or a tuning profile")
        values = self.loglik_values(theta, n, rngs, antithetic)
        return [LikelihoodEstimate(float(v), n) for v in values]

    def simulate(self, c: float, phi: float, sigma_eta2: float, n_times: int, seed: int) -> np.ndarray:
        return simulate_sv(c, phi, sigma_eta2, n_times, seed)

    def to_dict(self) -> dict:
        return {"kind": self.name}


def sv_loglik_estimate(model: SvModel, theta, n: int, rng, antithetic: bool = False) -> LikelihoodEstimate:
    value = model.loglik_values(np.atleast_2d(theta), n, [rng], antithetic)[0]
    return LikelihoodEstimate(float(value), n)


def simulate_sv(c, phi, sigma_eta2, n_times, seed):
    rng = stream(seed, 0)
    eta = rng.standard_normal(n_times)
    eps = rng.standard_normal(n_times)
    x = np.empty(n_times)
    x[0] = math.sqrt(sigma_eta2 / (1.0 - phi * phi)) * eta[0]
    for t in range(1, n_times):
        x[t] = phi * x[t - 1] + math.sqrt(sigma_eta2) * eta[t]
    return np.exp((c + x) / 2.0) * eps
