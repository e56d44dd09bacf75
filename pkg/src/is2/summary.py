"""Posterior summaries from a DrawSet: weighted moments and quantiles with bootstrap standard errors."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    DrawSet,
    _bootstrap_indices,
    adjusted_ess,
    ess,
    marginal_likelihood_estimate,
    shifted_weights,
)
from .errors import AllWeightsZero

STATISTICS = ("mean", "sd", "skewness", "kurtosis", "q05", "q95")
# guards the >= comparison in the quantile rule against rounding in the cumulative sum
_QUANTILE_RTOL = 1e-12


def weighted_quantile(values, weights, p: float) -> float:
    """Smallest value whose weighted empirical CDF reaches ``p`` (ties resolve to the lower value)."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(weights[order])
    if cw[-1] <= 0:
        raise AllWeightsZero("quantile of zero total weight")
    k = int(np.searchsorted(cw, p * cw[-1] * (1.0 - _QUANTILE_RTOL), side="left"))
    return float(values[order[min(k, values.size - 1)]])


def weighted_statistics(values, weights) -> np.ndarray:
    """Mean, SD, skewness, kurtosis, 5% and 95% quantiles under normalized weights."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    x = np.asarray(values, dtype=float)
    mean = float(x[0] + w @ (x - x[0]))
    dev = x - mean
    m2 = float(w @ dev**2)
    if m2 > 0:
        skew = float(w @ dev**3) / m2**1.5
        kurt = float(w @ dev**4) / m2**2
    else:
        skew, kurt = 0.0, 3.0
    return np.array([mean, math.sqrt(m2), skew, kurt, weighted_quantile(x, w, 0.05), weighted_quantile(x, w, 0.95)])


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    skewness: float
    kurtosis: float
    q05: float
    q95: float
    se: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PosteriorSummary:
    parameters: tuple
    log_marginal_likelihood: float
    log_marginal_likelihood_se: float
    ess: float
    adjusted_ess: float | None
    sigma2: float | None
    m: int
    master_seed: int
    model_id: str
    proposal_id: str
    elapsed: float | None = None

    @property
    def tnv(self) -> dict | None:
        """Time-normalized variance of each posterior-mean estimate (bootstrap variance x time)."""
        if self.elapsed is None:
            return None
        return {p.name: p.se["mean"] ** 2 * self.elapsed for p in self.parameters}

    def to_record(self) -> dict:
        """Deterministic content: everything except wall-clock figures."""
        return {
            "model_id": self.model_id,
            "proposal_id": self.proposal_id,
            "master_seed": self.master_seed,
            "M": self.m,
            "parameters": [asdict(p) for p in self.parameters],
            "log_marginal_likelihood": self.log_marginal_likelihood,
            "log_marginal_likelihood_se": self.log_marginal_likelihood_se,
            "ess": self.ess,
            "adjusted_ess": self.adjusted_ess,
            "sigma2": self.sigma2,
        }

    def timing_record(self) -> dict:
        return {"elapsed_seconds": self.elapsed, "tnv": self.tnv}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        head = f"{'parameter':<18}" + "".join(f"{s:>12}" for s in STATISTICS)
        lines = [f"IS² posterior summary: model {self.model_id}, proposal {self.proposal_id}, M = {self.m}", "", head]
        for p in self.parameters:
            lines.append(f"{p.name:<18}" + "".join(f"{getattr(p, s):>12.4f}" for s in STATISTICS))
            lines.append(f"{'':<18}" + "".join(f"{'(' + format(p.se[s], '.4f') + ')':>12}" for s in STATISTICS))
        lines.append("")
        lines.append(f"log p(y)        {self.log_marginal_likelihood:.4f} ({self.log_marginal_likelihood_se:.4f})")
        lines.append(f"ESS             {self.ess:.1f}")
        if self.adjusted_ess is not None:
            lines.append(f"adjusted ESS    {self.adjusted_ess:.1f}  (sigma2 = {self.sigma2:.4f})")
        return "\n".join(lines) + "\n"


def summarize(draws: DrawSet, n_boot: int = 200, seed: int = 0, sigma2: float | None = None,
              elapsed: float | None = None) -> PosteriorSummary:
    """Summary statistics of every parameter with bootstrap standard errors.

    ``sigma2`` (the variance of the log-likelihood error used for the
    adjusted ESS) defaults to the mean recorded ``loglik_var_hat`` when the
    draws carry one.
    """
    w = shifted_weights(draws.log_weights)
    theta = draws.theta
    point = np.array([weighted_statistics(theta[:, k], w) for k in range(draws.dim)])
    reps = np.empty((n_boot, draws.dim, len(STATISTICS)))
    rng = np.random.default_rng(seed)
    for b, idx in enumerate(_bootstrap_indices(rng, len(draws), n_boot)):
        wb = w[idx]
        if wb.sum() == 0:
            raise AllWeightsZero("a bootstrap resample contained only zero weights")
        for k in range(draws.dim):
            reps[b, k] = weighted_statistics(theta[idx, k], wb)
    se = reps.std(axis=0, ddof=1) if n_boot > 1 else np.full(point.shape, np.nan)
    params = tuple(
        ParameterSummary(name, *map(float, point[k]), se={s: float(se[k, j]) for j, s in enumerate(STATISTICS)})
        for k, name in enumerate(draws.param_names)
    )
    ml = marginal_likelihood_estimate(draws)
    if sigma2 is None and np.isfinite(draws.loglik_var_hat).any():
        sigma2 = float(np.nanmean(draws.loglik_var_hat))
    e = ess(draws)
    return PosteriorSummary(
        parameters=params,
        log_marginal_likelihood=ml.log_value,
        log_marginal_likelihood_se=ml.mc_se_of_log,
        ess=e,
        adjusted_ess=None if sigma2 is None else adjusted_ess(e, sigma2),
        sigma2=sigma2,
        m=len(draws),
        master_seed=int(draws.master_seed),
        model_id=draws.model_id,
        proposal_id=draws.proposal_id,
        elapsed=elapsed,
    )
