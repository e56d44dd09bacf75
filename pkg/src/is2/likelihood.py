"""Unbiased likelihood estimators and diagnostics of their log.

Two routes are provided: importance sampling over a latent variable (with an
optional defensive mixture, antithetic pairs and stratified component
counts) and a bootstrap particle filter for state space models.  The
filter is written over a leading batch axis of parameter values so that
many IS² draws can be filtered at once; every row consumes only its own
random stream, so a row's result does not depend on the batch it sits in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import NonFiniteWeight, OddCount, ParticleCollapse

JB_CRITICAL_5PCT = 5.991


@dataclass(frozen=True)
class LikelihoodEstimate:
    """An unbiased natural-scale likelihood estimate carried as its log.

    ``particle_groups`` labels particles that were drawn jointly (antithetic
    pairs); the jackknife deletes whole groups.  ``particle_strata`` labels
    blocks of fixed size (mixture components under stratified sampling).
    """

    log_value: float
    n_particles: int
    loglik_var_hat: float | None = None
    particle_log_weights: np.ndarray | None = field(default=None, repr=False)
    particle_groups: np.ndarray | None = field(default=None, repr=False)
    particle_strata: np.ndarray | None = field(default=None, repr=False)


def log_mean_exp(log_values, axis=None):
    log_values = np.asarray(log_values, dtype=float)
    n = log_values.shape[axis] if axis is not None else log_values.size
    with np.errstate(divide="ignore"):
        return logsumexp(log_values, axis=axis) - math.log(n)


# -- latent importance densities ---------------------------------------------


@dataclass(frozen=True)
class LatentProposal:
    """Importance density for a latent variable, given as a map from standard normals.

    Generating draws through ``transform`` lets antithetic pairs be formed
    on the standard-normal scale before the location/scale is applied.
    """

    transform: Callable[[np.ndarray], np.ndarray]
    log_density: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    has_overhead: bool = False

    def sample(self, rng, n):
        return self.transform(rng.standard_normal((n, self.dim)))

    @classmethod
    def gaussian(cls, mean, cov, has_overhead=False):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        d = mean.size
        chol = np.linalg.cholesky(cov)
        log_det = 2.0 * np.log(np.diag(chol)).sum()

        def transform(u):
            return mean + u @ chol.T

        def log_density(x):
            x = np.asarray(x, dtype=float).reshape(-1, d)
            z = np.linalg.solve(chol, (x - mean).T)
            return -0.5 * (d * math.log(2 * math.pi) + log_det + (z * z).sum(axis=0))

        return cls(transform=transform, log_density=log_density, dim=d, has_overhead=has_overhead)


@dataclass(frozen=True)
class DefensiveMixture:
    """``pi * efficient + (1 - pi) * natural``, natural being the latent prior.

    Keeping the prior in the mixture bounds p(x)/h(x) by 1 / (1 - pi).
    """

    efficient: LatentProposal
    natural: LatentProposal
    pi: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.pi < 1.0:
            raise ValueError("mixture weight pi must lie in (0, 1)")

    @property
    def dim(self):
        return self.efficient.dim

    @property
    def has_overhead(self):
        return self.efficient.has_overhead or self.natural.has_overhead

    def log_density(self, x, pi=None):
        pi = self.pi if pi is None else pi
        return np.logaddexp(
            math.log(pi) + self.efficient.log_density(x),
            math.log1p(-pi) + self.natural.log_density(x),
        )


def antithetic_pairs(base_draws) -> np.ndarray:
    """Interleave each seed ``u`` with its mirror ``-u``: [u1, -u1, u2, -u2, ...]."""
    base = np.asarray(base_draws, dtype=float)
    out = np.empty((2 * base.shape[0],) + base.shape[1:])
    out[0::2] = base
    out[1::2] = -base
    return out


def antithetic_normals(rng, n, dim=1) -> np.ndarray:
    if n % 2:
        raise OddCount(f"antithetic sampling needs an even count, got {n}")
    return antithetic_pairs(rng.standard_normal((n // 2, dim)))


def stratified_allocation(n: int, pi: float) -> tuple[int, int]:
    """Particles for the efficient and natural components: round-half-up of pi * n.

    Both counts are kept at least one.
    """
    if n < 2:
        raise ValueError("stratified allocation needs n >= 2")
    n_eff = int(math.floor(pi * n + 0.5))
    n_eff = min(max(n_eff, 1), n - 1)
    return n_eff, n - n_eff


def _component_normals(rng, count, dim, antithetic, group_offset):
    """Standard normals for one mixture component; an odd leftover is drawn independently."""
    if antithetic:
        k = count // 2
        u = antithetic_pairs(rng.standard_normal((k, dim)))
        groups = group_offset + np.repeat(np.arange(k), 2)
        if count % 2:
            u = np.vstack([u, rng.standard_normal((1, dim))])
            groups = np.append(groups, group_offset + k)
        return u, groups
    return rng.standard_normal((count, dim)), group_offset + np.arange(count)


def sample_mixture(mixture: DefensiveMixture, n, rng, antithetic=False, stratified=True):
    """Draw ``n`` latent values from a defensive mixture.

    With stratification the component counts are fixed by
    :func:`stratified_allocation` and the density used for the weights is
    the mixture at the realized proportion n_eff / n, which keeps the
    estimator unbiased when pi * n is not an integer.

    Returns:
        (x, log_h, groups, strata, pi_used); ``strata`` is None when the
        component labels were drawn at random.
    """
    d = mixture.dim
    if stratified and n >= 2:
        n_eff, n_nat = stratified_allocation(n, mixture.pi)
        u_eff, g_eff = _component_normals(rng, n_eff, d, antithetic, 0)
        u_nat, g_nat = _component_normals(rng, n_nat, d, antithetic, int(g_eff.max(initial=-1)) + 1)
        x = np.vstack([mixture.efficient.transform(u_eff), mixture.natural.transform(u_nat)])
        pi_used = n_eff / n
        groups = np.concatenate([g_eff, g_nat])
        strata = np.repeat([0, 1], [n_eff, n_nat])
    else:
        if antithetic:
            u = antithetic_normals(rng, n, d)
            unit_from_eff = rng.random(n // 2) < mixture.pi
            from_eff = np.repeat(unit_from_eff, 2)
            groups = np.repeat(np.arange(n // 2), 2)
        else:
            u = rng.standard_normal((n, d))
            from_eff = rng.random(n) < mixture.pi
            groups = np.arange(n)
        x = np.where(from_eff[:, None], mixture.efficient.transform(u), mixture.natural.transform(u))
        pi_used = mixture.pi
        strata = None
    return x, mixture.log_density(x, pi_used), groups, strata, pi_used


def is_likelihood_estimate(model, theta, proposal, n, rng, *, antithetic=False, stratified=True):
    """Latent-variable importance sampling estimate of p(y | theta).

    Args:
        model: Object with ``log_obs_density(theta, x)`` (log p(y|x,theta))
            and ``latent_log_density(theta, x)`` (log p(x|theta)), both
            vectorized over rows of ``x``.
        theta: Parameter point, passed through to ``model``.
        proposal: A :class:`LatentProposal` or :class:`DefensiveMixture`.
        n: Number of particles.
        rng: numpy Generator owned by this estimate.
        antithetic: Draw mirrored standard-normal pairs.
        stratified: For mixtures, fix the component counts instead of
            drawing component labels.

    Raises:
        NonFiniteWeight: if a particle weight is NaN or +inf.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if isinstance(proposal, DefensiveMixture):
        x, log_h, groups, strata, _ = sample_mixture(proposal, n, rng, antithetic, stratified)
    else:
        u = antithetic_normals(rng, n, proposal.dim) if antithetic else rng.standard_normal((n, proposal.dim))
        x = proposal.transform(u)
        log_h = proposal.log_density(x)
        groups = np.repeat(np.arange(n // 2), 2) if antithetic else np.arange(n)
        strata = None
    log_w = model.log_obs_density(theta, x) + model.latent_log_density(theta, x) - log_h
    log_w = np.asarray(log_w, dtype=float)
    bad = np.isnan(log_w) | (log_w == np.inf)
    if bad.any():
        raise NonFiniteWeight(f"{int(bad.sum())} particle weight(s) are not finite")
    return LikelihoodEstimate(
        log_value=float(log_mean_exp(log_w)),
        n_particles=n,
        particle_log_weights=log_w,
        particle_groups=groups,
        particle_strata=strata,
    )


# -- bootstrap particle filter -----------------------------------------------


def filter_noise(rng, n_times, n, antithetic=False):
    """Pre-draw the randomness one filter run consumes: state shocks and resampling uniforms."""
    if antithetic:
        if n % 2:
            raise OddCount(f"antithetic filtering needs an even particle count, got {n}")
        half = rng.standard_normal((n_times, n // 2))
        shocks = np.empty((n_times, n))
        shocks[:, 0::2] = half
        shocks[:, 1::2] = -half
    else:
        shocks = rng.standard_normal((n_times, n))
    uniforms = rng.random((max(n_times - 1, 0), n))
    return shocks, uniforms


def multinomial_resample(log_w, uniforms):
    """Ancestor indices by inverting each row's weight CDF at the given uniforms.

    Ancestor j of a row is the number of CDF values <= u_j * total.  The
    count comes from a stable merge of the CDF with the targets, which keeps
    every row's arithmetic independent of the other rows.
    """
    b, n = log_w.shape
    w = np.exp(log_w - log_w.max(axis=1, keepdims=True))
    cum = np.cumsum(w, axis=1)
    target = uniforms * cum[:, -1:]
    merged = np.concatenate([cum, target], axis=1)
    order = np.argsort(merged, axis=1, kind="stable")
    is_target = order >= n
    below = np.cumsum(~is_target, axis=1)
    idx = np.empty((b, n), dtype=np.int64)
    np.put_along_axis(idx, order[is_target].reshape(b, n) - n, below[is_target].reshape(b, n), axis=1)
    np.minimum(idx, n - 1, out=idx)
    return idx


def bootstrap_filter_batch(ssm, params, observations, n, rngs, antithetic=False):
    """Bootstrap filter log-likelihood estimates for a batch of parameter values.

    Args:
        ssm: State space model with ``initial_state(params, u)``,
            ``transition(params, x, u)`` and ``log_obs_density(params, y_t, x)``,
            where every entry of ``params`` has shape (B, 1).
        params: Mapping of parameter arrays of shape (B,).
        observations: Sequence y_1..y_T.
        n: Particles per row.
        rngs: One generator per row.
        antithetic: Mirror the state shocks in pairs.

    Returns:
        Array (B,) of log-likelihood estimates.

    Raises:
        ParticleCollapse: if a row has zero weight on every particle at some t.
    """
    y = np.asarray(observations, dtype=float)
    n_times = y.shape[0]
    if n < 1 or n_times < 1:
        raise ValueError("need n >= 1 and at least one observation")
    b = len(rngs)
    p = {k: np.asarray(v, dtype=float).reshape(b, 1) for k, v in params.items()}
    shocks = np.empty((b, n_times, n))
    uniforms = np.empty((b, max(n_times - 1, 0), n))
    for row, rng in enumerate(rngs):
        shocks[row], uniforms[row] = filter_noise(rng, n_times, n, antithetic)

    log_n = math.log(n)
    x = ssm.initial_state(p, shocks[:, 0, :])
    total = np.zeros(b)
    for t in range(n_times):
        if t > 0:
            ancestors = multinomial_resample(log_w, uniforms[:, t - 1, :])
            x = np.take_along_axis(x, ancestors, axis=1)
            x = ssm.transition(p, x, shocks[:, t, :])
        log_w = ssm.log_obs_density(p, y[t], x)
        if np.isnan(log_w).any():
            raise NonFiniteWeight(f"observation density is NaN at t={t}")
        top = log_w.max(axis=1)
        if np.any(top == -np.inf):
            raise ParticleCollapse(t)
        total += top + np.log(np.exp(log_w - top[:, None]).sum(axis=1)) - log_n
    return total


def bootstrap_particle_filter(ssm, params, observations, n, rng, antithetic=False) -> LikelihoodEstimate:
    """Single-parameter bootstrap filter with multinomial resampling every period.

    The estimate is prod_t (1/n) sum_j p(y_t | x_t^j), unbiased on the natural scale.
    """
    batch = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in params.items()}
    log_value = bootstrap_filter_batch(ssm, batch, observations, n, [rng], antithetic)[0]
    return LikelihoodEstimate(log_value=float(log_value), n_particles=n)


# -- diagnostics --------------------------------------------------------------


@dataclass(frozen=True)
class LogLikDiagnostics:
    variance: float
    skewness: float
    kurtosis: float
    jb_statistic: float
    jb_reject_5pct: bool

    def to_record(self) -> dict:
        return {
            "variance": self.variance,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
            "jb_statistic": self.jb_statistic,
            "jb_reject_5pct": self.jb_reject_5pct,
        }


def loglik_diagnostics(samples) -> LogLikDiagnostics:
    """Variance, skewness, kurtosis and Jarque-Bera test of replicate log-likelihood estimates.

    A zero-variance sample (up to rounding) is reported as skewness 0, kurtosis 3 and a JB
    statistic of 0 (no rejection).
    """
    x = np.asarray(samples, dtype=float).ravel()
    m = x.size
    if m < 20:
        raise ValueError("diagnostics need at least 20 samples")
    dev = x - x.mean()
    m2 = np.mean(dev**2)
    # deviations at rounding level are a constant sample, not a distribution
    if m2 <= (64 * np.finfo(float).eps * np.abs(x).max()) ** 2:
        return LogLikDiagnostics(0.0, 0.0, 3.0, 0.0, False)
    # moments of rescaled deviations: scale-free and safe from underflow
    z = dev / np.abs(dev).max()
    z2 = np.mean(z**2)
    skew = float(np.mean(z**3) / z2**1.5)
    kurt = float(np.mean(z**4) / z2**2)
    jb = float(m / 6.0 * (skew**2 + (kurt - 3.0) ** 2 / 4.0))
    return LogLikDiagnostics(
        variance=float(x.var(ddof=1)),
        skewness=skew,
        kurtosis=kurt,
        jb_statistic=jb,
        jb_reject_5pct=jb > JB_CRITICAL_5PCT,
    )


def diagnostics_table(batches) -> dict:
    """Aggregate diagnostics over parameter draws, one batch of replicates per draw."""
    diags = [loglik_diagnostics(b) for b in batches]
    variances = np.array([d.variance for d in diags])
    return {
        "n_draws": len(diags),
        "variance": float(variances.mean()),
        "sd_of_variance": float(variances.std(ddof=1)) if len(diags) > 1 else 0.0,
        "skewness": float(np.mean([d.skewness for d in diags])),
        "kurtosis": float(np.mean([d.kurtosis for d in diags])),
        "jb_rejection_rate": float(np.mean([d.jb_reject_5pct for d in diags])),
        "records": [d.to_record() for d in diags],
    }
