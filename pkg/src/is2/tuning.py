"""Choosing the precision of the likelihood estimate.

Covers the computing-time model CT*(sigma2) = exp(sigma2) (tau0 + tau1 gbar2 / sigma2),
its minimizer, the marginal-likelihood variant, and the practical machinery
around it: jackknife variances of log-likelihood estimates, pilot estimates
of gbar2, and the particle-count search.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import CapReachedWarning, TooFewParticles, TooFewPilots
from .likelihood import LikelihoodEstimate

N_MAX = 1_000_000
MIN_PARTICLES = 2
_LOG_BOUNDS = (math.log(1e-4), math.log(10.0))


@dataclass(frozen=True)
class CostModel:
    """Time per likelihood evaluation: tau0 + N * tau1 seconds."""

    tau0: float
    tau1: float

    def __post_init__(self):
        if self.tau1 <= 0:
            raise ValueError("tau1 must be positive")
        if self.tau0 < 0:
            raise ValueError("tau0 must be nonnegative")


@dataclass
class TuningProfile:
    gamma_bar2: float
    sigma2_opt: float
    cost: CostModel | None = None
    per_theta_gamma2: dict = field(default_factory=dict)
    n_pilot: int | None = None

    def to_json(self) -> str:
        data = asdict(self)
        data["per_theta_gamma2"] = {str(k): v for k, v in self.per_theta_gamma2.items()}
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> TuningProfile:
        data = json.loads(text)
        cost = data.get("cost")
        return cls(
            gamma_bar2=data["gamma_bar2"],
            sigma2_opt=data["sigma2_opt"],
            cost=CostModel(**cost) if cost else None,
            per_theta_gamma2={int(k): v for k, v in data.get("per_theta_gamma2", {}).items()},
            n_pilot=data.get("n_pilot"),
        )

    def particles_for(self, sigma2: float) -> int:
        """Common particle count giving Var(log p_hat) ~= sigma2 when gamma^2 is flat in theta."""
        return max(MIN_PARTICLES, math.ceil(self.gamma_bar2 / sigma2))


@dataclass(frozen=True)
class MlCostInputs:
    v: float
    cost: CostModel
    gamma_bar2: float

    def __post_init__(self):
        if self.v <= 0:
            raise ValueError("v must be positive")


# -- variance of the log-likelihood estimate ---------------------------------


def _sum_of_others(values, group, n_groups):
    """For each element, the sum of the other elements in its group.

    The largest element of each group gets its complement summed directly,
    so a dominant element never cancels against the group total.
    """
    total = np.bincount(group, weights=values, minlength=n_groups)
    size = np.bincount(group, minlength=n_groups)
    order = np.lexsort((-values, group))
    first = np.concatenate([[0], np.cumsum(size)[:-1]])[size > 0]
    is_top = np.zeros(values.size, dtype=bool)
    is_top[order[first]] = True
    rest_of_top = np.bincount(group, weights=np.where(is_top, 0.0, values), minlength=n_groups)
    return np.where(is_top, rest_of_top[group], total[group] - values)


def grouped_jackknife(log_w, owner=None, unit=None, stratum=None, n_owner=None):
    """Log-mean-exp and stratified delete-one jackknife variance, per owner.

    Particles belong to an owner (an independent estimate), a stratum (a
    fixed-size block of the sample, such as one mixture component) and a
    unit (what gets deleted: a particle or an antithetic pair).  Deleting a
    unit rescales the mean of its stratum only, and the variance is summed
    over strata: V = sum_s (g_s - 1) / g_s * sum_u (l_u - lbar_s)^2.

    Returns:
        ``(log_p, var)`` per owner; ``var`` is NaN where a stratum has fewer
        than two units and inf where deleting a unit leaves zero weight.
    """
    log_w = np.asarray(log_w, dtype=float)
    n = log_w.size
    owner = np.zeros(n, dtype=np.int64) if owner is None else np.asarray(owner, dtype=np.int64)
    unit = np.arange(n) if unit is None else np.asarray(unit)
    stratum = np.zeros(n, dtype=np.int64) if stratum is None else np.asarray(stratum, dtype=np.int64)
    n_owner = int(owner.max()) + 1 if n_owner is None else n_owner

    top = np.full(n_owner, -np.inf)
    np.maximum.at(top, owner, log_w)
    live = np.isfinite(top)
    w = np.exp(log_w - np.where(live, top, 0.0)[owner])
    count = np.bincount(owner, minlength=n_owner)

    _, cell = np.unique(owner * (int(stratum.max()) + 1) + stratum, return_inverse=True)
    _, uidx = np.unique(unit, return_inverse=True)
    n_units, n_cells = int(uidx.max()) + 1, int(cell.max()) + 1
    unit_w = np.bincount(uidx, weights=w, minlength=n_units)
    unit_size = np.bincount(uidx, minlength=n_units)
    unit_cell = np.zeros(n_units, dtype=np.int64)
    unit_cell[uidx] = cell
    cell_owner = np.zeros(n_cells, dtype=np.int64)
    cell_owner[cell] = owner
    cell_w = np.bincount(unit_cell, weights=unit_w, minlength=n_cells)
    cell_n = np.bincount(unit_cell, weights=unit_size, minlength=n_cells)
    cell_g = np.bincount(unit_cell, minlength=n_cells)

    in_cell = _sum_of_others(unit_w, unit_cell, n_cells)
    other_cells = _sum_of_others(cell_w, cell_owner, n_owner)
    total = np.bincount(cell_owner, weights=cell_w, minlength=n_owner)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_p = np.where(live, top + np.log(total) - np.log(count), -np.inf)
        kept = cell_n[unit_cell] - unit_size
        rescaled = other_cells[unit_cell] + cell_n[unit_cell] / kept * in_cell
        loo = np.log(rescaled) - np.log(count[cell_owner[unit_cell]])
        mean = np.bincount(unit_cell, weights=loo, minlength=n_cells) / cell_g
        dev = loo - mean[unit_cell]
        ss = np.bincount(unit_cell, weights=np.where(np.isfinite(dev), dev * dev, np.inf), minlength=n_cells)
        cell_var = (cell_g - 1) / cell_g * ss
    cell_var = np.where(cell_g >= 2, cell_var, np.nan)
    var = np.bincount(cell_owner, weights=cell_var, minlength=n_owner)
    var = np.where(live, var, 0.0)
    return log_p, var


def jackknife_loglik_variance(estimate: LikelihoodEstimate, min_particles: int = 10) -> float:
    """Delete-one jackknife variance of log p_hat from a single estimate.

    Each replicate is the log-mean of the particle weights with one particle
    (or one antithetic pair, when ``particle_groups`` is set) left out.  When
    the estimate was drawn with fixed component counts (``particle_strata``),
    the deletion is done within each stratum; see :func:`grouped_jackknife`.

    Raises:
        TooFewParticles: with fewer than ``min_particles`` particle weights,
            or a stratum with fewer than two deletable units.
    """
    if estimate.particle_log_weights is None:
        raise TooFewParticles("estimate carries no particle weights")
    lw = np.asarray(estimate.particle_log_weights, dtype=float)
    if lw.size < min_particles:
        raise TooFewParticles(f"jackknife needs >= {min_particles} particles, got {lw.size}")
    _, var = grouped_jackknife(lw, unit=estimate.particle_groups, stratum=estimate.particle_strata)
    if np.isnan(var[0]):
        raise TooFewParticles("jackknife needs at least two deletable units per stratum")
    return float(var[0])


def replicate_loglik_variance(estimator: Callable, theta, n: int, reps: int, rng) -> float:
    """Sample variance of ``reps`` independent log-likelihood estimates.

    This is the route for particle filters, where the jackknife does not apply.
    """
    values = [estimator(theta, n, rng).log_value for _ in range(reps)]
    return float(np.var(values, ddof=1))


def estimate_gamma_bar(pilot_estimates, min_pilots: int = 5) -> float:
    """Pilot estimate gbar2 = (N0 / J) sum_j Vhat_j from J pilots at a common N0.

    Args:
        pilot_estimates: Sequence of ``(theta, LikelihoodEstimate)`` pairs,
            each estimate carrying ``loglik_var_hat``.
        min_pilots: Smallest acceptable J.
    """
    pilots = list(pilot_estimates)
    if len(pilots) < min_pilots:
        raise TooFewPilots(f"need at least {min_pilots} pilot draws, got {len(pilots)}")
    n0 = {int(est.n_particles) for _, est in pilots}
    if len(n0) != 1:
        raise ValueError("pilot estimates must share one particle count")
    variances = np.array([est.loglik_var_hat for _, est in pilots], dtype=float)
    return float(n0.pop() * variances.mean())


# -- computing-time model -------------------------------------------------------


def ct_star(sigma2: float, cost: CostModel, gamma_bar2: float) -> float:
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return math.exp(sigma2) * (cost.tau0 + cost.tau1 * gamma_bar2 / sigma2)


def sigma2_opt(cost: CostModel, gamma_bar2: float) -> float:
    """Closed-form minimizer of :func:`ct_star`; exactly 1 without overhead."""
    if gamma_bar2 <= 0:
        raise ValueError("gamma_bar2 must be positive")
    if cost.tau0 == 0:
        return 1.0
    a = cost.tau0 / gamma_bar2
    t1 = cost.tau1
    # the root of a s^2 + t1 s - t1 = 0, written to avoid cancellation when a is tiny
    return 2.0 * t1 / (t1 + math.sqrt(t1 * t1 + 4.0 * a * t1))


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Minimize a unimodal function on [lo, hi]."""
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def inflation_factor(sigma2: float) -> float:
    """Ratio of IS² to exact-likelihood IS asymptotic variances."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    return math.exp(sigma2)


def ml_inflation_factor(sigma2: float, v: float) -> float:
    """Relative variance of the IS² evidence estimate, (e^sigma2 (v + 1) - 1) / v."""
    if v <= 0:
        raise ValueError("v must be positive")
    return math.expm1(sigma2) * (v + 1.0) / v + 1.0


def ml_ct_star(sigma2: float, cost: CostModel, gamma_bar2: float, v: float) -> float:
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return (cost.tau0 + cost.tau1 * gamma_bar2 / sigma2) * (math.exp(sigma2) * (v + 1.0) - 1.0)


def sigma2_min_ml(v: float, cost: CostModel, gamma_bar2: float) -> float:
    """Minimizer of the evidence computing time, searched on log sigma2 over [1e-4, 10]."""
    if v <= 0:
        raise ValueError("v must be positive")
    log_s = golden_section(lambda u: ml_ct_star(math.exp(u), cost, gamma_bar2, v), *_LOG_BOUNDS)
    return math.exp(log_s)


def ml_ct_ratio(v: float, cost: CostModel, gamma_bar2: float) -> float:
    """CT at sigma2_opt relative to CT at sigma2_min(v) for the evidence estimator."""
    s_opt = sigma2_opt(cost, gamma_bar2)
    s_min = sigma2_min_ml(v, cost, gamma_bar2)
    return ml_ct_star(s_opt, cost, gamma_bar2, v) / ml_ct_star(s_min, cost, gamma_bar2, v)


def required_samples(sigma2_is_phi: float, sigma2: float, precision: float) -> int:
    """Importance samples needed for the IS² estimator to reach variance ``precision``."""
    if precision <= 0:
        raise ValueError("precision must be positive")
    return math.ceil(sigma2_is_phi * math.exp(sigma2) / precision)


def tnv(var_hat: float, elapsed_seconds: float) -> float:
    """Time-normalized variance."""
    return var_hat * elapsed_seconds


def tnv_ratio_theory(sigma2_a: float, sigma2_b: float, cost: CostModel, gamma_bar2: float) -> float:
    """Predicted TNV(M, sigma2_a) / TNV(M, sigma2_b)."""
    return ct_star(sigma2_a, cost, gamma_bar2) / ct_star(sigma2_b, cost, gamma_bar2)


# -- particle counts ------------------------------------------------------------


def tune_particles(estimator: Callable, theta, target_sigma2: float, n_init: int = 10,
                   growth: float = 2.0, rng=None, n_max: int = N_MAX):
    """Smallest n on the schedule n_init, ceil(growth n), ... whose jackknife variance <= target.

    The estimates produced here are pilot estimates only; the caller draws
    fresh particles for the likelihood that enters the weight.

    Args:
        estimator: ``estimator(theta, n, rng) -> LikelihoodEstimate`` carrying
            either ``loglik_var_hat`` or particle weights for the jackknife.

    Returns:
        ``(n, v_hat)``.  When ``n_max`` is hit first a
        :class:`CapReachedWarning` is emitted and ``(n_max, v_hat)`` returned.
    """
    if target_sigma2 <= 0:
        raise ValueError("target_sigma2 must be positive")
    if growth <= 1:
        raise ValueError("growth must exceed 1")
    n = max(1, int(n_init))
    while True:
        n = min(n, n_max)
        est = estimator(theta, n, rng)
        v_hat = est.loglik_var_hat
        if v_hat is None:
            v_hat = jackknife_loglik_variance(est, min_particles=2)
        if v_hat <= target_sigma2:
            return n, float(v_hat)
        if n >= n_max:
            warnings.warn(
                f"particle cap {n_max} reached with Vhat={v_hat:.3g} > {target_sigma2}",
                CapReachedWarning,
                stacklevel=2,
            )
            return n_max, float(v_hat)
        n = math.ceil(growth * n)


def panel_particle_allocation(per_individual_gamma2, n_individuals: int, sigma2: float,
                              even: bool = False, min_count: int = MIN_PARTICLES) -> np.ndarray:
    """Per-individual particle counts N_i = max(min_count, ceil(gamma_i^2 I / sigma2)).

    Targets Var(log p_hat_i) ~= sigma2 / I for each of the I independent
    factors.  With ``even`` the counts are rounded up to even numbers.
    """
    g = np.asarray(per_individual_gamma2, dtype=float)
    if g.size != n_individuals:
        raise ValueError("need one gamma^2 per individual")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    counts = np.maximum(min_count, np.ceil(g * n_individuals / sigma2)).astype(np.int64)
    if even:
        counts += counts % 2
    return counts


def measure_cost_model(evaluate: Callable[[int], object], n_low: int, n_high: int,
                       repeats: int = 5, overhead: bool = True,
                       clock: Callable[[], float] = time.perf_counter) -> CostModel:
    """Fit tau0 + tau1 N from median timings of ``evaluate(N)`` at two particle counts.

    With ``overhead=False`` tau0 is fixed at 0 (fixed importance densities,
    sequential IS) and tau1 is fitted through the origin.
    """
    if n_high <= n_low:
        raise ValueError("n_high must exceed n_low")

    def timed(n):
        samples = []
        for _ in range(repeats):
            start = clock()
            evaluate(n)
            samples.append(clock() - start)
        return float(np.median(samples))

    t_low, t_high = timed(n_low), timed(n_high)
    if not overhead:
        tau1 = (t_low * n_low + t_high * n_high) / (n_low**2 + n_high**2)
        return CostModel(0.0, max(tau1, 1e-12))
    tau1 = max((t_high - t_low) / (n_high - n_low), 1e-12)
    tau0 = max(t_low - tau1 * n_low, 0.0)
    return CostModel(tau0, tau1)
