"""The IS² sampler: draw parameters, estimate each likelihood, store the weighted draws.

Draw i owns the generator ``stream(seed, DRAWS, i)``; it first samples
theta_i from the proposal and then drives the likelihood estimate.  Draws
are processed in fixed-size batches, optionally on several threads, and the
output is identical for any thread count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import DrawSet, asymptotic_variance_estimate, self_normalized_estimate
from .errors import ConfigError
from .proposals import ParameterProposal, fit_from_weighted_draws
from .rng import draw_streams
from .tuning import TuningProfile

DRAWS = 0
BATCH_SIZE = 256


@dataclass(frozen=True)
class RunResult:
    draws: DrawSet
    elapsed: float


def particle_count(model, fixed_n=None, sigma2_target=None, profile: TuningProfile | None = None):
    """Resolve the per-draw particle setting; returns ``(n, sigma2)`` for ``estimate_loglik``."""
    if (fixed_n is None) == (sigma2_target is None):
        raise ConfigError("set exactly one of fixed_n and sigma2_target")
    if fixed_n is not None:
        if int(fixed_n) < 1:
            raise ConfigError("fixed_n must be positive")
        return int(fixed_n), None
    if sigma2_target <= 0:
        raise ConfigError("sigma2_target must be positive")
    if getattr(model, "self_tuning", False):
        return None, float(sigma2_target)
    if profile is None:
        raise ConfigError("a variance target for this model needs a tuning profile")
    return profile.particles_for(sigma2_target), None


def run_is2(model, proposal: ParameterProposal, m: int, seed: int, *, fixed_n=None, sigma2_target=None,
            profile: TuningProfile | None = None, antithetic: bool = False, stratified: bool = True,
            threads: int = 1, batch_size: int = BATCH_SIZE) -> RunResult:
    """Run M draws of IS² and return the weighted draws with the wall-clock time."""
    if m < 1:
        raise ConfigError("M must be positive")
    n, sigma2 = particle_count(model, fixed_n, sigma2_target, profile)
    if antithetic and n is not None and n % 2:
        n += 1

    def evaluate(start):
        idx = range(start, min(start + batch_size, m))
        rngs = draw_streams(seed, idx, DRAWS)
        theta = np.vstack([proposal.sample(1, rng) for rng in rngs])
        ests = model.estimate_loglik(theta, rngs, n=n, sigma2=sigma2, antithetic=antithetic, stratified=stratified)
        return theta, ests

    began = time.perf_counter()
    starts = range(0, m, batch_size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(evaluate, starts))
    else:
        parts = [evaluate(s) for s in starts]
    theta = np.vstack([p[0] for p in parts])
    ests = [e for p in parts for e in p[1]]
    elapsed = time.perf_counter() - began

    draws = DrawSet(
        theta=theta,
        log_prior=model.log_prior(theta),
        log_lik_hat=[e.log_value for e in ests],
        log_proposal=proposal.log_density(theta),
        n_particles=[e.n_particles for e in ests],
        loglik_var_hat=[np.nan if e.loglik_var_hat is None else e.loglik_var_hat for e in ests],
        master_seed=seed,
        model_id=model.name,
        proposal_id=proposal.id,
        param_names=model.param_names,
    )
    return RunResult(draws, elapsed)


def adapt_proposal(model, initial: ParameterProposal, m_pilot: int, seed: int, *, iterations: int = 2,
                   df: float = 5.0, **run_options) -> ParameterProposal:
    """Refit a Student-t proposal to the weighted draws of short pilot runs."""
    proposal = initial
    for k in range(iterations):
        pilot = run_is2(model, proposal, m_pilot, seed + 1000003 * (k + 1), **run_options)
        proposal = fit_from_weighted_draws(pilot.draws, df=df)
    return proposal


def exact_draws(model, proposal: ParameterProposal, m: int, seed: int) -> DrawSet:
    """Draws weighted with the exact log-likelihood (models with an ``exact_loglik`` oracle)."""
    rngs = draw_streams(seed, range(m), DRAWS)
    theta = np.vstack([proposal.sample(1, rng) for rng in rngs])
    return DrawSet(
        theta=theta,
        log_prior=model.log_prior(theta),
        log_lik_hat=model.exact_loglik(theta),
        log_proposal=proposal.log_density(theta),
        master_seed=seed,
        model_id=model.name,
        proposal_id=proposal.id,
        param_names=model.param_names,
    )


def synthetic_noise(m: int, sigma2: float, rng) -> np.ndarray:
    """z ~ N(-sigma2 / 2, sigma2): the log of a unit-mean lognormal likelihood error."""
    return rng.normal(-0.5 * sigma2, math.sqrt(sigma2), size=m)


def with_synthetic_noise(draws: DrawSet, sigma2: float, rng) -> DrawSet:
    """Copy of exact-likelihood draws with synthetic estimation error added to every log-likelihood."""
    z = synthetic_noise(len(draws), sigma2, rng)
    return replace(draws, log_lik_hat=draws.log_lik_hat + z, loglik_var_hat=np.full(len(draws), sigma2))


@dataclass(frozen=True)
class TnvPoint:
    n: int
    elapsed: float
    variance: float
    tnv: float
    mean_loglik_var: float


def tnv_curve(model, proposal: ParameterProposal, m: int, seed: int, n_values, phi, *,
              repeats: int = 1, antithetic: bool = False, stratified: bool = True) -> list[TnvPoint]:
    """Time-normalized variance of the IS² estimate of E[phi] for each particle count.

    ``variance`` is the estimated variance of the estimator, the asymptotic
    variance divided by M and averaged over ``repeats`` runs; ``elapsed`` is
    the average wall-clock time of a run.
    """
    out = []
    for n in n_values:
        times, variances, lvars = [], [], []
        for r in range(repeats):
            res = run_is2(model, proposal, m, seed + r, fixed_n=n, antithetic=antithetic, stratified=stratified)
            times.append(res.elapsed)
            variances.append(asymptotic_variance_estimate(res.draws, phi) / m)
            lv = res.draws.loglik_var_hat
            lvars.append(float(np.nanmean(lv)) if np.isfinite(lv).any() else np.nan)
        t, v = float(np.mean(times)), float(np.mean(variances))
        out.append(TnvPoint(int(n), t, v, v * t, float(np.mean(lvars))))
    return out


def posterior_means(draws: DrawSet) -> np.ndarray:
    return np.array([self_normalized_estimate(draws, draws.theta[:, k]).value for k in range(draws.dim)])
