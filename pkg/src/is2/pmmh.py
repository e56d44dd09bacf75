"""Particle marginal Metropolis-Hastings with an independent proposal, and its comparison with IS².

With an independent proposal every candidate and its likelihood estimate
can be computed up front in batches; only the accept/reject pass is
sequential.  The estimate attached to the current state is never refreshed:
it changes only when a candidate is accepted.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .algorithm import particle_count, run_is2
from .core import self_normalized_estimate, trimmed_estimate
from .errors import ConfigError, InitFailure
from .proposals import ParameterProposal
from .rng import draw_streams, stream
from .tuning import TuningProfile

CANDIDATES = 1
UNIFORMS = 2
INIT = 3
INIT_TRIES = 100


@dataclass(frozen=True)
class PmmhChain:
    """States after each iteration; row 0 is the state after the first step."""

    theta: np.ndarray
    log_lik_hat: np.ndarray
    log_prior: np.ndarray
    log_proposal: np.ndarray
    accepted: np.ndarray
    burnin: int
    param_names: tuple = ()

    @property
    def iterations(self) -> int:
        return self.theta.shape[0]

    @property
    def accept_count(self) -> int:
        return int(self.accepted.sum())

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.iterations

    @property
    def states(self) -> list:
        return list(zip(self.theta, self.log_lik_hat, self.log_prior, self.log_proposal))

    def kept(self) -> np.ndarray:
        return self.theta[self.burnin:]

    def mean(self) -> np.ndarray:
        return self.kept().mean(axis=0)

    def batch_means_se(self, values=None) -> np.ndarray:
        """Batch-means Monte Carlo standard error with floor(sqrt(K)) batches."""
        x = self.kept() if values is None else np.asarray(values, dtype=float)[self.burnin:]
        return batch_means_se(x)

    def write_csv(self, path) -> None:
        names = self.param_names or tuple(f"theta{k}" for k in range(self.theta.shape[1]))
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", *names, "log_lik_hat", "log_prior", "log_proposal", "accepted"])
            for k in range(self.iterations):
                writer.writerow([k, *(format(v, ".17g") for v in self.theta[k]),
                                 format(self.log_lik_hat[k], ".17g"), format(self.log_prior[k], ".17g"),
                                 format(self.log_proposal[k], ".17g"), int(self.accepted[k])])


def batch_means_se(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    k = x.shape[0]
    n_batches = max(2, int(math.isqrt(k)))
    size = k // n_batches
    if size < 1:
        raise ValueError("too few states for batch means")
    means = x[: n_batches * size].reshape(n_batches, size, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(n_batches)


def _default_estimator(model, n, sigma2, antithetic, stratified):
    def estimate(theta, rngs):
        ests = model.estimate_loglik(theta, rngs, n=n, sigma2=sigma2, antithetic=antithetic, stratified=stratified)
        return np.array([e.log_value for e in ests])

    return estimate


def exact_estimator(model):
    """Estimator that returns the exact log-likelihood (for models with an oracle)."""

    def estimate(theta, rngs):
        return model.exact_loglik(theta)

    return estimate


def _candidates(model, proposal, estimator, seed, purpose, count, batch_size):
    theta, loglik = [], []
    for start in range(0, count, batch_size):
        rngs = draw_streams(seed, range(start, min(start + batch_size, count)), purpose)
        th = np.vstack([proposal.sample(1, rng) for rng in rngs])
        theta.append(th)
        loglik.append(np.asarray(estimator(th, rngs), dtype=float))
    theta = np.vstack(theta)
    return theta, np.concatenate(loglik), model.log_prior(theta), proposal.log_density(theta)


def pmmh_run(model, proposal: ParameterProposal, iterations: int, burnin: int, seed: int, *,
             estimator=None, fixed_n=None, sigma2_target=None, profile: TuningProfile | None = None,
             antithetic: bool = False, stratified: bool = True, batch_size: int = 256) -> PmmhChain:
    """Independent-proposal PMMH chain of ``iterations`` steps (the first ``burnin`` are discarded).

    Args:
        estimator: ``estimator(theta_rows, rngs) -> log-likelihood array``;
            defaults to the model's own estimator at the given particle setting.

    Raises:
        InitFailure: when none of the first 100 proposal draws has a finite target.
    """
    if iterations < 1:
        raise ConfigError("iterations must be positive")
    if not 0 <= burnin < iterations:
        raise ConfigError("burnin must lie in [0, iterations)")
    if estimator is None:
        n, sigma2 = particle_count(model, fixed_n, sigma2_target, profile)
        estimator = _default_estimator(model, n, sigma2, antithetic, stratified)

    init = _candidates(model, proposal, estimator, seed, INIT, INIT_TRIES, batch_size)
    finite = np.isfinite(init[1] + init[2])
    if not finite.any():
        raise InitFailure(f"no finite target value among {INIT_TRIES} proposal draws")
    first = int(np.argmax(finite))
    cur_theta, cur_ll, cur_lp, cur_lq = (a[first] for a in init)

    cand_theta, cand_ll, cand_lp, cand_lq = _candidates(model, proposal, estimator, seed, CANDIDATES, iterations,
                                                        batch_size)
    log_u = np.log(stream(seed, UNIFORMS).random(iterations))
    theta = np.empty_like(cand_theta)
    ll, lp, lq = np.empty(iterations), np.empty(iterations), np.empty(iterations)
    accepted = np.zeros(iterations, dtype=bool)
    cur_target = cur_lp + cur_ll - cur_lq
    with np.errstate(invalid="ignore"):
        cand_target = cand_lp + cand_ll - cand_lq
    for k in range(iterations):
        log_alpha = cand_target[k] - cur_target
        if np.isfinite(cand_target[k]) and log_u[k] < log_alpha:
            cur_theta, cur_ll, cur_lp, cur_lq = cand_theta[k], cand_ll[k], cand_lp[k], cand_lq[k]
            cur_target = cand_target[k]
            accepted[k] = True
        theta[k], ll[k], lp[k], lq[k] = cur_theta, cur_ll, cur_lp, cur_lq
    return PmmhChain(theta, ll, lp, lq, accepted, burnin, tuple(getattr(model, "param_names", ())))


# -- IS² versus PMMH ----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    param_names: tuple
    reference: np.ndarray
    mse: dict
    se_variance: dict
    replications: int
    budget: int

    def mse_ratio(self) -> dict:
        base = self.mse["pmmh"]
        return {k: _ratio(v, base) for k, v in self.mse.items()}

    def se_variance_ratio(self) -> dict:
        base = self.se_variance["pmmh"]
        return {k: _ratio(v, base) for k, v in self.se_variance.items()}

    def to_json(self) -> str:
        return json.dumps({
            "param_names": list(self.param_names),
            "reference": self.reference.tolist(),
            "replications": self.replications,
            "budget": self.budget,
            "mse": {k: v.tolist() for k, v in self.mse.items()},
            "se_variance": {k: v.tolist() for k, v in self.se_variance.items()},
            "mse_ratio": {k: v.tolist() for k, v in self.mse_ratio().items()},
            "se_variance_ratio": {k: v.tolist() for k, v in self.se_variance_ratio().items()},
        }, indent=2, sort_keys=True)

    def table(self) -> str:
        mse, sev = self.mse_ratio(), self.se_variance_ratio()
        cols = ("is2", "is2_trimmed", "pmmh")
        lines = [
            f"{'':<18}{'MC MSE (relative to PMMH)':^36}  {'Variance of MC SE estimate':^36}",
            f"{'':<18}" + "".join(f"{c:>12}" for c in cols) + "  " + "".join(f"{c:>12}" for c in cols),
        ]
        for k, name in enumerate(self.param_names):
            lines.append(f"{name:<18}" + "".join(f"{mse[c][k]:>12.3f}" for c in cols) + "  "
                         + "".join(f"{sev[c][k]:>12.3f}" for c in cols))
        return "\n".join(lines) + "\n"


def _ratio(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(b > 0, a / np.where(b > 0, b, 1.0), np.where(a > 0, np.inf, 1.0))


def compare_is2_pmmh(model, proposal: ParameterProposal, budget: int, replications: int, seed: int, *,
                     reference=None, phi=None, fixed_n=None, sigma2_target=None,
                     profile: TuningProfile | None = None, antithetic: bool = False, stratified: bool = True,
                     burnin: int | None = None) -> ComparisonReport:
    """Monte Carlo MSE of posterior-mean estimates from IS², trimmed IS² and PMMH at a matched budget.

    Each replication runs IS² with M = ``budget`` draws and a PMMH chain of
    ``budget`` kept iterations with the same proposal and particle setting.
    ``reference`` defaults to a pooled IS² run with ten times the budget.
    ``phi`` maps an (M, d) parameter array to the (M, k) statistics whose
    posterior means are compared; by default the coordinates themselves.
    """
    if replications < 20:
        raise ConfigError("replications must be at least 20")
    phi = (lambda th: th) if phi is None else phi
    burnin = budget if burnin is None else burnin
    run_opts = dict(fixed_n=fixed_n, sigma2_target=sigma2_target, profile=profile, antithetic=antithetic,
                    stratified=stratified)
    if reference is None:
        pooled = run_is2(model, proposal, 10 * budget, stream(seed, 99).integers(2**63), **run_opts).draws
        stats = np.atleast_2d(phi(pooled.theta).T).T
        reference = np.array([self_normalized_estimate(pooled, stats[:, k]).value for k in range(stats.shape[1])])
    reference = np.atleast_1d(np.asarray(reference, dtype=float))

    est = {"is2": [], "is2_trimmed": [], "pmmh": []}
    ses = {"is2": [], "is2_trimmed": [], "pmmh": []}
    for r in range(replications):
        rep_seed = int(stream(seed, 100, r).integers(2**63))
        draws = run_is2(model, proposal, budget, rep_seed, **run_opts).draws
        stats = np.atleast_2d(phi(draws.theta).T).T
        full = [self_normalized_estimate(draws, stats[:, k]) for k in range(stats.shape[1])]
        trim = [trimmed_estimate(draws, stats[:, k]) for k in range(stats.shape[1])]
        est["is2"].append([e.value for e in full])
        ses["is2"].append([e.mc_se for e in full])
        est["is2_trimmed"].append([e.value for e in trim])
        ses["is2_trimmed"].append([e.mc_se for e in trim])
        chain = pmmh_run(model, proposal, budget + burnin, burnin, rep_seed, **run_opts)
        cstats = np.atleast_2d(phi(chain.theta).T).T
        est["pmmh"].append(cstats[burnin:].mean(axis=0))
        ses["pmmh"].append(batch_means_se(cstats[burnin:]))
    mse = {k: np.mean((np.array(v) - reference) ** 2, axis=0) for k, v in est.items()}
    se_var = {k: np.var(np.array(v), axis=0, ddof=1) for k, v in ses.items()}
    names = tuple(getattr(model, "param_names", ())) if reference.size == proposal.dim else ()
    if not names:
        names = tuple(f"phi{k}" for k in range(reference.size))
    return ComparisonReport(names, reference, mse, se_var, replications, budget)
