"""Importance sampling squared: weights, estimators and error measures.

Every quantity here is a pure function of a :class:`DrawSet`.  Weight
arithmetic is carried out on log weights shifted by their maximum, so
weights spanning hundreds of log units are handled without overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import AllWeightsZero, TooFewDraws

NO_PARTNER = -1


@dataclass(frozen=True)
class WeightedDraw:
    """One parameter draw of Algorithm 1 with everything needed for its weight."""

    theta: np.ndarray
    log_prior: float
    log_lik_hat: float
    log_proposal: float
    n_particles: int = 1
    loglik_var_hat: float = float("nan")
    antithetic_partner: int | None = None

    @property
    def log_weight(self) -> float:
        return float(_log_weights(self.log_prior, self.log_lik_hat, self.log_proposal))


def _log_weights(log_prior, log_lik_hat, log_proposal):
    log_prior = np.asarray(log_prior, dtype=float)
    log_lik_hat = np.asarray(log_lik_hat, dtype=float)
    with np.errstate(invalid="ignore"):
        lw = log_prior + log_lik_hat - np.asarray(log_proposal, dtype=float)
    # a draw outside the prior support has weight exactly zero, whatever its estimate
    return np.where((log_prior == -np.inf) | (log_lik_hat == -np.inf), -np.inf, lw)


@dataclass(frozen=True)
class DrawSet:
    """Columnar store of the M weighted draws of one IS² run.

    Zero-weight draws are kept: the sample size M enters the variance
    estimators explicitly.
    """

    theta: np.ndarray
    log_prior: np.ndarray
    log_lik_hat: np.ndarray
    log_proposal: np.ndarray
    n_particles: np.ndarray | None = None
    loglik_var_hat: np.ndarray | None = None
    antithetic_partner: np.ndarray | None = None
    master_seed: int = 0
    model_id: str = ""
    proposal_id: str = ""
    param_names: tuple = field(default=())

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim == 1:
            theta = theta[:, None]
        m = theta.shape[0]
        if m < 1:
            raise TooFewDraws("a DrawSet needs at least one draw")

        def column(values, default, dtype):
            if values is None:
                return np.full(m, default, dtype=dtype)
            arr = np.asarray(values, dtype=dtype).reshape(-1)
            if arr.shape != (m,):
                raise ValueError(f"column has length {arr.shape[0]}, expected {m}")
            return arr

        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "log_prior", column(self.log_prior, 0.0, float))
        object.__setattr__(self, "log_lik_hat", column(self.log_lik_hat, 0.0, float))
        object.__setattr__(self, "log_proposal", column(self.log_proposal, 0.0, float))
        object.__setattr__(self, "n_particles", column(self.n_particles, 1, np.int64))
        object.__setattr__(self, "loglik_var_hat", column(self.loglik_var_hat, np.nan, float))
        object.__setattr__(
            self, "antithetic_partner", column(self.antithetic_partner, NO_PARTNER, np.int64)
        )
        if not np.all(np.isfinite(self.log_proposal)):
            raise ValueError("log_proposal must be finite for every draw")
        if not self.param_names:
            object.__setattr__(self, "param_names", tuple(f"theta{k}" for k in range(theta.shape[1])))
        else:
            object.__setattr__(self, "param_names", tuple(self.param_names))

    @classmethod
    def from_draws(cls, draws: Sequence[WeightedDraw], **meta) -> DrawSet:
        return cls(
            theta=np.array([np.atleast_1d(d.theta) for d in draws], dtype=float),
            log_prior=[d.log_prior for d in draws],
            log_lik_hat=[d.log_lik_hat for d in draws],
            log_proposal=[d.log_proposal for d in draws],
            n_particles=[d.n_particles for d in draws],
            loglik_var_hat=[d.loglik_var_hat for d in draws],
            antithetic_partner=[
                NO_PARTNER if d.antithetic_partner is None else d.antithetic_partner for d in draws
            ],
            **meta,
        )

    def __len__(self):
        return self.theta.shape[0]

    def __getitem__(self, i) -> WeightedDraw:
        partner = int(self.antithetic_partner[i])
        return WeightedDraw(
            theta=self.theta[i].copy(),
            log_prior=float(self.log_prior[i]),
            log_lik_hat=float(self.log_lik_hat[i]),
            log_proposal=float(self.log_proposal[i]),
            n_particles=int(self.n_particles[i]),
            loglik_var_hat=float(self.loglik_var_hat[i]),
            antithetic_partner=None if partner == NO_PARTNER else partner,
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def dim(self) -> int:
        return self.theta.shape[1]

    @property
    def log_weights(self) -> np.ndarray:
        return _log_weights(self.log_prior, self.log_lik_hat, self.log_proposal)

    def subset(self, keep) -> DrawSet:
        """Draws selected by an index array or boolean mask; partner links are remapped."""
        idx = np.arange(len(self))[keep]
        new_pos = np.full(len(self), NO_PARTNER, dtype=np.int64)
        new_pos[idx] = np.arange(idx.size)
        partners = self.antithetic_partner[idx]
        has = partners != NO_PARTNER
        remapped = np.full(idx.size, NO_PARTNER, dtype=np.int64)
        remapped[has] = new_pos[partners[has]]
        return replace(
            self,
            theta=self.theta[idx],
            log_prior=self.log_prior[idx],
            log_lik_hat=self.log_lik_hat[idx],
            log_proposal=self.log_proposal[idx],
            n_particles=self.n_particles[idx],
            loglik_var_hat=self.loglik_var_hat[idx],
            antithetic_partner=remapped,
        )


@dataclass(frozen=True)
class PosteriorEstimate:
    value: float
    asym_var_hat: float
    mc_se: float
    ess: float


@dataclass(frozen=True)
class MarginalLikelihoodEstimate:
    log_value: float
    mc_se_of_log: float


# -- test functions ----------------------------------------------------------


def coordinate(k: int) -> Callable:
    """Test function returning parameter coordinate ``k``."""

    def phi(theta):
        return np.asarray(theta)[..., k]

    phi.vectorized = True
    phi.__name__ = f"coordinate_{k}"
    return phi


def indicator(k: int, lower=-np.inf, upper=np.inf) -> Callable:
    """Test function ``1{lower < theta_k <= upper}``, e.g. for credible-interval mass."""

    def phi(theta):
        x = np.asarray(theta)[..., k]
        return ((x > lower) & (x <= upper)).astype(float)

    phi.vectorized = True
    return phi


def evaluate_test_function(phi, theta) -> np.ndarray:
    """Values of ``phi`` at every row of ``theta``.

    ``phi`` may be a callable on one parameter vector, a callable flagged
    ``vectorized = True`` that maps an (M, d) array to M values, or an
    array of precomputed values.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if not callable(phi):
        values = np.asarray(phi, dtype=float)
    elif getattr(phi, "vectorized", False):
        values = np.asarray(phi(theta), dtype=float)
    else:
        values = np.array([float(phi(row)) for row in theta])
    if values.shape[0] != theta.shape[0]:
        raise ValueError("test function values do not match the number of draws")
    return values


# -- weight kernels ----------------------------------------------------------


def shifted_weights(log_weights) -> np.ndarray:
    """Weights rescaled so that the largest equals one.

    Raises:
        AllWeightsZero: if no log weight exceeds ``-inf``.
    """
    lw = np.asarray(log_weights, dtype=float)
    if np.isnan(lw).any():
        raise ValueError("log weights contain NaN")
    top = lw.max(initial=-np.inf)
    if top == -np.inf:
        raise AllWeightsZero("every importance weight is zero; the proposal misses the posterior")
    if top == np.inf:
        raise ValueError("log weights contain +inf")
    return np.exp(lw - top)


def weighted_mean(log_weights, values):
    """Self-normalized estimate sum(phi w) / sum(w) from log weights."""
    w = shifted_weights(log_weights)
    values = np.asarray(values, dtype=float)
    return np.tensordot(w, values, axes=(0, 0)) / w.sum()


def asymptotic_variance_from_log(log_weights, values, center=None):
    """M * sum((phi - phi_hat)^2 w^2) / (sum w)^2."""
    w = shifted_weights(log_weights)
    values = np.asarray(values, dtype=float)
    if center is None:
        center = np.tensordot(w, values, axes=(0, 0)) / w.sum()
    dev2 = (values - center) ** 2
    return w.size * np.tensordot(w * w, dev2, axes=(0, 0)) / w.sum() ** 2


def ess_from_log(log_weights) -> float:
    w = shifted_weights(log_weights)
    return float(w.sum() ** 2 / np.dot(w, w))


def importance_estimate(log_weights, values) -> PosteriorEstimate:
    """Shared kernel of standard IS and IS²: they differ only in where the log weights come from."""
    w = shifted_weights(log_weights)
    values = np.asarray(values, dtype=float)
    total = w.sum()
    # centred on one value so that a constant statistic is reproduced exactly
    ref = values[0]
    value = float(ref + np.dot(w, values - ref) / total)
    asym = float(w.size * np.dot(w * w, (values - value) ** 2) / total**2)
    return PosteriorEstimate(
        value=value,
        asym_var_hat=asym,
        mc_se=float(np.sqrt(asym / w.size)),
        ess=float(total**2 / np.dot(w, w)),
    )


def standard_is_estimate(log_prior, exact_loglik, log_proposal, values) -> PosteriorEstimate:
    """Importance sampling with the exact likelihood in the weights."""
    return importance_estimate(_log_weights(log_prior, exact_loglik, log_proposal), values)


# -- estimators on DrawSets --------------------------------------------------


def self_normalized_estimate(draws: DrawSet, phi) -> PosteriorEstimate:
    """IS² estimate of the posterior expectation of ``phi``.

    Args:
        draws: Weighted parameter draws.
        phi: Test function (see :func:`evaluate_test_function`).

    Returns:
        The estimate together with its estimated asymptotic variance, the
        implied Monte Carlo standard error and the ESS of the weights.

    Raises:
        AllWeightsZero: if no draw carries positive weight.
    """
    return importance_estimate(draws.log_weights, evaluate_test_function(phi, draws.theta))


def asymptotic_variance_estimate(draws: DrawSet, phi) -> float:
    values = evaluate_test_function(phi, draws.theta)
    return float(asymptotic_variance_from_log(draws.log_weights, values))


def ess(draws: DrawSet) -> float:
    """Effective sample size (sum w)^2 / sum w^2, between 1 and M."""
    return ess_from_log(draws.log_weights)


def adjusted_ess(ess_is2: float, sigma2: float) -> float:
    """ESS the proposal would reach with exact likelihoods, given Var(log p_hat) = sigma2."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    return float(np.exp(sigma2) * ess_is2)


def marginal_likelihood_from_log(log_weights) -> MarginalLikelihoodEstimate:
    lw = np.asarray(log_weights, dtype=float)
    w = shifted_weights(lw)
    m = w.size
    mean = w.mean()
    log_value = float(lw.max() + np.log(mean))
    if m < 2:
        return MarginalLikelihoodEstimate(log_value, float("nan"))
    se = float(w.std(ddof=1) / (np.sqrt(m) * mean))
    return MarginalLikelihoodEstimate(log_value, se)


def marginal_likelihood_estimate(draws: DrawSet) -> MarginalLikelihoodEstimate:
    """Log of the unbiased evidence estimate (1/M) sum w_i.

    The standard error of the log uses the delta method,
    sd(w) / (sqrt(M) mean(w)).
    """
    return marginal_likelihood_from_log(draws.log_weights)


def marginal_likelihood_bootstrap_se(draws: DrawSet, n_boot: int, seed: int) -> float:
    """Bootstrap alternative to the delta-method standard error of the log evidence."""
    lw = draws.log_weights
    w = shifted_weights(lw)
    rng = np.random.default_rng(seed)
    logs = np.empty(n_boot)
    for b, idx in enumerate(_bootstrap_indices(rng, w.size, n_boot)):
        logs[b] = np.log(w[idx].mean())
    if np.isneginf(logs).any():
        raise AllWeightsZero("a bootstrap resample contained only zero weights")
    return float(logs.std(ddof=1))


def trim_index(draws: DrawSet) -> np.ndarray:
    """Indices kept after removing the largest-weight draw and its antithetic partner."""
    lw = draws.log_weights
    top = int(np.argmax(lw))  # first index among ties
    drop = {top}
    partner = int(draws.antithetic_partner[top])
    if partner != NO_PARTNER:
        drop.add(partner)
    return np.array([i for i in range(len(draws)) if i not in drop], dtype=np.int64)


def trimmed_estimate(draws: DrawSet, phi) -> PosteriorEstimate:
    """Self-normalized estimate after deleting the single largest-weight draw (and its partner)."""
    keep = trim_index(draws)
    if keep.size < 2:
        raise TooFewDraws("trimming would leave fewer than two draws")
    values = evaluate_test_function(phi, draws.theta)
    return importance_estimate(draws.log_weights[keep], values[keep])


def _bootstrap_indices(rng, m, n_boot, max_cells=4_000_000):
    rows = max(1, max_cells // m)
    done = 0
    while done < n_boot:
        k = min(rows, n_boot - done)
        block = rng.integers(0, m, size=(k, m))
        for row in block:
            yield row
        done += k


def bootstrap_replicates(log_weights, values, n_boot: int, seed: int) -> np.ndarray:
    """Self-normalized estimates over ``n_boot`` with-replacement resamples of the draws."""
    w = shifted_weights(log_weights)
    values = np.asarray(values, dtype=float)
    ref = values[0]
    dev = values - ref
    rng = np.random.default_rng(seed)
    out = np.empty((n_boot,) + values.shape[1:])
    for b, idx in enumerate(_bootstrap_indices(rng, w.size, n_boot)):
        wb = w[idx]
        total = wb.sum()
        if total == 0.0:
            raise AllWeightsZero("a bootstrap resample contained only zero weights")
        out[b] = ref + np.tensordot(wb, dev[idx], axes=(0, 0)) / total
    return out


def bootstrap_mc_se(draws: DrawSet, phi, n_boot: int = 200, seed: int = 0) -> float:
    """Bootstrap Monte Carlo standard error of the self-normalized estimate."""
    if len(draws) < 2:
        raise TooFewDraws("bootstrap needs at least two draws")
    values = evaluate_test_function(phi, draws.theta)
    reps = bootstrap_replicates(draws.log_weights, values, n_boot, seed)
    return float(reps.std(ddof=1))
