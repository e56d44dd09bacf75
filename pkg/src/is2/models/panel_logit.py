"""Random-intercept panel logit with a per-individual defensive-mixture likelihood estimate.

    y_it ~ Bernoulli(expit(x_it' beta + alpha_i)),   alpha_i ~ N(0, sigma_alpha^2)

The likelihood is a product over individuals of one-dimensional integrals.
Each factor is estimated by importance sampling from
pi * Laplace(alpha_i) + (1 - pi) * N(0, sigma_alpha^2), and the particle
counts are chosen per individual so the variance of the summed log estimate
is close to a target.  Unconstrained parameters are (beta, log sigma_alpha)
with priors beta_k ~ N(0, 100) and a half-Cauchy(1) on sigma_alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import expit, logsumexp

from ..errors import NonFiniteWeight, NotConverged
from ..likelihood import LikelihoodEstimate, _component_normals, stratified_allocation
from ..rng import stream
from ..tuning import grouped_jackknife, panel_particle_allocation
from .base import LOG_2PI, as_rows, half_cauchy_logpdf, log_jacobian_log, normal_logpdf

BETA_PRIOR_VAR = 100.0
PILOT_PARTICLES = 50
# with stratified antithetic sampling, four particles give each component one full pair
STRATIFIED_PAIR_FLOOR = 4
GH_TOLERANCE = 1e-8


@dataclass(frozen=True)
class PanelLikelihoodEstimate(LikelihoodEstimate):
    """Summed estimate with its per-individual pieces."""

    per_individual_log: np.ndarray | None = field(default=None, repr=False)
    per_individual_var: np.ndarray | None = field(default=None, repr=False)
    counts: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class PanelLogitModel:
    y: np.ndarray
    x: np.ndarray
    pi: float = 0.5
    pilot_n: int = PILOT_PARTICLES
    name: str = "panel_logit"
    self_tuning: bool = True
    has_overhead: bool = True

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise ValueError("y must be an (I, T) array with I, T >= 1")
        if x.ndim == 2:
            x = x[:, :, None]
        if x.shape[:2] != y.shape:
            raise ValueError("x must be (I, T, K) matching y")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n_individuals(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[2] + 1

    @property
    def param_names(self) -> tuple:
        return tuple(f"beta_{k}" for k in range(self.x.shape[2])) + ("log_sigma_alpha",)

    def natural(self, theta):
        theta = as_rows(theta, self.dim)
        return theta[:, :-1], np.exp(theta[:, -1])

    def log_prior(self, theta) -> np.ndarray:
        theta = as_rows(theta, self.dim)
        beta, sigma = theta[:, :-1], np.exp(theta[:, -1])
        return (normal_logpdf(beta, 0.0, BETA_PRIOR_VAR).sum(axis=1)
                + half_cauchy_logpdf(sigma) + log_jacobian_log(theta[:, -1]))

    def subset(self, individuals) -> PanelLogitModel:
        idx = np.atleast_1d(individuals)
        return PanelLogitModel(self.y[idx], self.x[idx], self.pi, self.pilot_n)

    # -- per-individual integrand ------------------------------------------------

    def base_index(self, beta) -> np.ndarray:
        return self.x @ np.asarray(beta, dtype=float)

    def _cond_loglik(self, eta, y, alpha):
        """sum_t log p(y_t | alpha) for rows of eta/y and a trailing alpha axis."""
        e = eta[..., None, :] + alpha[..., :, None]
        return (y[..., None, :] * e - np.logaddexp(0.0, e)).sum(axis=-1)

    def plain_logit_loglik(self, beta) -> float:
        e = self.base_index(beta)
        return float((self.y * e - np.logaddexp(0.0, e)).sum())

    def laplace(self, beta, sigma: float, max_iter: int = 100):
        """Mode and curvature-based scale of each alpha_i's conditional posterior."""
        eta = self.base_index(beta)
        prec = 1.0 / (sigma * sigma)
        alpha = np.zeros(self.n_individuals)

        def objective(a):
            e = eta + a[:, None]
            return (self.y * e - np.logaddexp(0.0, e)).sum(axis=1) - 0.5 * prec * a * a

        current = objective(alpha)
        for _ in range(max_iter):
            p = expit(eta + alpha[:, None])
            grad = (self.y - p).sum(axis=1) - prec * alpha
            hess = -(p * (1.0 - p)).sum(axis=1) - prec
            step = -grad / hess
            scale = np.ones_like(step)
            for _ in range(40):
                trial = objective(alpha + scale * step)
                worse = trial < current - 1e-12 * np.abs(current)
                if not worse.any():
                    break
                scale = np.where(worse, 0.5 * scale, scale)
            alpha = alpha + scale * step
            current = objective(alpha)
            if np.max(np.abs(scale * step)) < 1e-10:
                break
        p = expit(eta + alpha[:, None])
        hess = (p * (1.0 - p)).sum(axis=1) + prec
        return alpha, 1.0 / np.sqrt(hess)

    # -- estimation ----------------------------------------------------------------

    def individual_estimates(self, theta, counts, rngs, antithetic=False, stratified=True):
        """Independent log-likelihood estimates for each individual.

        Args:
            theta: One unconstrained parameter vector.
            counts: Particles per individual.
            rngs: One generator per individual.

        Returns:
            ``(log_p, var_hat)``, each of shape (I,); ``var_hat`` is the
            per-individual stratified jackknife variance (NaN when a
            stratum has fewer than two deletable units).
        """
        beta, sigma = self.natural(theta)
        beta, sigma = beta[0], float(sigma[0])
        counts = np.asarray(counts, dtype=np.int64)
        n_ind = self.n_individuals
        if sigma == 0.0:
            e = self.base_index(beta)
            return (self.y * e - np.logaddexp(0.0, e)).sum(axis=1), np.zeros(n_ind)
        mode, scale = self.laplace(beta, sigma)
        eta = self.base_index(beta)

        alphas, owners, units, strata, log_pis = [], [], [], [], []
        next_unit = 0
        for i in range(n_ind):
            rng, n = rngs[i], int(counts[i])
            if stratified and n >= 2:
                n_eff, n_nat = stratified_allocation(n, self.pi)
                u_eff, g_eff = _component_normals(rng, n_eff, 1, antithetic, 0)
                u_nat, g_nat = _component_normals(rng, n_nat, 1, antithetic, int(g_eff.max()) + 1)
                a = np.concatenate([mode[i] + scale[i] * u_eff[:, 0], sigma * u_nat[:, 0]])
                g = np.concatenate([g_eff, g_nat])
                pi_i = n_eff / n
                strata.append(np.repeat([0, 1], [n_eff, n_nat]))
            else:
                k = n // 2 if antithetic else 0
                base = rng.standard_normal(k + (n - 2 * k))
                u = np.concatenate([np.repeat(base[:k], 2) * np.tile([1.0, -1.0], k), base[k:]])
                g = np.concatenate([np.repeat(np.arange(k), 2), k + np.arange(n - 2 * k)])
                from_eff = np.repeat(rng.random(k + (n - 2 * k)) < self.pi, [2] * k + [1] * (n - 2 * k))
                a = np.where(from_eff, mode[i] + scale[i] * u, sigma * u)
                pi_i = self.pi
                strata.append(np.zeros(n, dtype=np.int64))
            alphas.append(a)
            owners.append(np.full(n, i))
            units.append(next_unit + g)
            next_unit += int(g.max()) + 1
            log_pis.append(np.full(n, pi_i))

        alpha = np.concatenate(alphas)
        owner = np.concatenate(owners)
        unit = np.concatenate(units)
        pi_p = np.concatenate(log_pis)
        log_prior = normal_logpdf(alpha, 0.0, sigma * sigma)
        log_eff = normal_logpdf(alpha, mode[owner], scale[owner] ** 2)
        log_h = np.logaddexp(np.log(pi_p) + log_eff, np.log1p(-pi_p) + log_prior)
        e = eta[owner] + alpha[:, None]
        log_obs = (self.y[owner] * e - np.logaddexp(0.0, e)).sum(axis=1)
        log_w = log_obs + log_prior - log_h
        bad = np.isnan(log_w) | (log_w == np.inf)
        if bad.any():
            i = int(owner[np.argmax(bad)])
            raise NonFiniteWeight(f"non-finite particle weight for individual {i}", individual=i)
        return grouped_jackknife(log_w, owner, unit, np.concatenate(strata), n_ind)

    def loglik_estimate(self, theta, rng, n=None, sigma2=None, antithetic=True, stratified=True):
        """Summed estimate with fixed ``n`` per individual or counts targeting ``sigma2``."""
        base_seed = int(rng.integers(2**63))
        n_ind = self.n_individuals

        def streams(purpose):
            return [stream(base_seed, purpose, i) for i in range(n_ind)]

        predicted = None
        if n is not None:
            counts = np.full(n_ind, int(n))
        elif sigma2 is not None:
            pilot = np.full(n_ind, self.pilot_n + (self.pilot_n % 2 if antithetic else 0))
            _, pilot_var = self.individual_estimates(theta, pilot, streams(0), antithetic, stratified)
            gamma2 = pilot * np.nan_to_num(pilot_var, nan=0.0)
            floor = STRATIFIED_PAIR_FLOOR if (antithetic and stratified) else 2
            counts = panel_particle_allocation(gamma2, n_ind, sigma2, even=antithetic, min_count=floor)
            predicted = gamma2 / counts
        else:
            raise ValueError("give either n or sigma2")
        log_p, var_hat = self.individual_estimates(theta, counts, streams(1), antithetic, stratified)
        if predicted is not None:
            # at very small counts the jackknife is undefined; fall back on the pilot prediction
            var_hat = np.where(np.isnan(var_hat), predicted, var_hat)
        return PanelLikelihoodEstimate(
            log_value=float(log_p.sum()),
            n_particles=int(counts.sum()),
            loglik_var_hat=float(np.nansum(var_hat)),
            per_individual_log=log_p,
            per_individual_var=var_hat,
            counts=counts,
        )

    def estimate_loglik(self, theta, rngs, n=None, sigma2=None, antithetic=True, stratified=True):
        theta = as_rows(theta, self.dim)
        return [self.loglik_estimate(row, rng, n, sigma2, antithetic, stratified) for row, rng in zip(theta, rngs)]

    def simulate(self, beta, sigma_alpha, seed):
        return simulate_panel(self.x, beta, sigma_alpha, seed)

    def to_dict(self) -> dict:
        return {"kind": self.name, "pi": self.pi, "pilot_n": self.pilot_n}


def panel_logit_loglik_estimate(model: PanelLogitModel, theta, sigma2_target, rng,
                                antithetic=True, stratified=True) -> PanelLikelihoodEstimate:
    return model.loglik_estimate(theta, rng, sigma2=sigma2_target, antithetic=antithetic, stratified=stratified)


def gauss_hermite_log_integral(log_f, center, scale, nodes: int):
    """log of the integral of exp(log_f) on the real line, Gauss-Hermite rule around (center, scale).

    ``log_f`` maps an array of shape (..., nodes) to log integrand values;
    ``center`` and ``scale`` broadcast over the leading axes.
    """
    t, w = hermgauss(nodes)
    center = np.asarray(center, dtype=float)[..., None]
    scale = np.asarray(scale, dtype=float)[..., None]
    points = center + math.sqrt(2.0) * scale * t
    return (np.log(math.sqrt(2.0) * scale[..., 0])
            + logsumexp(np.log(w) + t * t + log_f(points), axis=-1))


def _gh_individual(model: PanelLogitModel, beta, sigma, nodes):
    mode, scale = model.laplace(beta, sigma)
    eta = model.base_index(beta)

    def log_f(a):
        return model._cond_loglik(eta, model.y, a) + normal_logpdf(a, 0.0, sigma * sigma)

    return gauss_hermite_log_integral(log_f, mode, scale, nodes)


def gh_quadrature_loglik(model: PanelLogitModel, theta, nodes: int = 40, per_individual: bool = False):
    """Adaptive Gauss-Hermite log-likelihood; converged when ``nodes`` and 2 * ``nodes`` agree to 1e-8.

    Raises:
        NotConverged: if the two rules disagree.
    """
    if nodes < 20:
        raise ValueError("nodes must be at least 20")
    beta, sigma = model.natural(theta)
    beta, sigma = beta[0], float(sigma[0])
    if sigma == 0.0:
        e = model.base_index(beta)
        parts = (model.y * e - np.logaddexp(0.0, e)).sum(axis=1)
    else:
        coarse = _gh_individual(model, beta, sigma, nodes)
        parts = _gh_individual(model, beta, sigma, 2 * nodes)
        gap = float(np.max(np.abs(coarse - parts)))
        if gap > GH_TOLERANCE:
            raise NotConverged(f"Gauss-Hermite rules with {nodes} and {2 * nodes} nodes differ by {gap:.3g}")
    return parts if per_individual else float(parts.sum())


def panel_design(n_individuals, n_times, n_covariates=1, seed=0):
    """Intercept plus standard-normal covariates, shape (I, T, 1 + n_covariates)."""
    rng = stream(seed, 1)
    x = np.ones((n_individuals, n_times, 1 + n_covariates))
    x[:, :, 1:] = rng.standard_normal((n_individuals, n_times, n_covariates))
    return x


def simulate_panel(x, beta, sigma_alpha, seed):
    rng = stream(seed, 0)
    x = np.asarray(x, dtype=float)
    alpha = sigma_alpha * rng.standard_normal(x.shape[0])
    p = expit(x @ np.asarray(beta, dtype=float) + alpha[:, None])
    return (rng.random(p.shape) < p).astype(float)
