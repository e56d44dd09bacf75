"""Parameter importance densities: Gaussian, multivariate Student-t and finite mixtures."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import DrawSet, ess, shifted_weights
from .errors import DegenerateCovarianceWarning

DEFAULT_DF = 5.0
COVARIANCE_INFLATION = 1.2


@dataclass(frozen=True)
class ParameterProposal:
    """Sampleable, log-evaluable density over the (unconstrained) parameter space.

    The scale matrix is stored through its lower-triangular factor ``chol``.
    """

    kind: str
    location: np.ndarray | None = None
    chol: np.ndarray | None = None
    df: float | None = None
    components: tuple = ()
    weights: np.ndarray | None = None

    @classmethod
    def gaussian(cls, location, scale):
        loc = np.atleast_1d(np.asarray(location, dtype=float))
        return cls("gaussian", loc, _factor(scale, loc.size))

    @classmethod
    def student_t(cls, location, scale, df=DEFAULT_DF):
        if df <= 2:
            raise ValueError("degrees of freedom must exceed 2")
        loc = np.atleast_1d(np.asarray(location, dtype=float))
        return cls("student_t", loc, _factor(scale, loc.size), float(df))

    @classmethod
    def mixture(cls, components, weights):
        w = np.asarray(weights, dtype=float)
        if len(components) != w.size or np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("mixture weights must be a probability vector matching the components")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise ValueError("mixture components must share a dimension")
        return cls("mixture", components=tuple(components), weights=w)

    @property
    def dim(self) -> int:
        if self.kind == "mixture":
            return self.components[0].dim
        return self.location.size

    @property
    def id(self) -> str:
        if self.kind == "mixture":
            return "mixture(" + ",".join(c.id for c in self.components) + ")"
        if self.kind == "student_t":
            return f"student_t(df={self.df:g})"
        return "gaussian"

    def sample(self, m: int, rng) -> np.ndarray:
        """``m`` i.i.d. draws as an (m, d) array."""
        if self.kind == "mixture":
            labels = rng.choice(len(self.components), size=m, p=self.weights)
            out = np.empty((m, self.dim))
            for k, comp in enumerate(self.components):
                hit = labels == k
                if hit.any():
                    out[hit] = comp.sample(int(hit.sum()), rng)
            return out
        z = rng.standard_normal((m, self.dim))
        if self.kind == "student_t":
            z = z * np.sqrt(self.df / rng.chisquare(self.df, size=m))[:, None]
        return self.location + z @ self.chol.T

    def log_density(self, theta) -> np.ndarray:
        """Log density at each row of ``theta`` (a single vector gives a length-1 array)."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if self.kind == "mixture":
            with np.errstate(divide="ignore"):
                log_w = np.log(self.weights)
            parts = np.array([c.log_density(theta) for c in self.components])
            keep = self.weights > 0
            return logsumexp(parts[keep] + log_w[keep, None], axis=0)
        d = self.dim
        z = np.linalg.solve(self.chol, (theta - self.location).T)
        maha = (z * z).sum(axis=0)
        log_det = np.log(np.diag(self.chol)).sum()
        if self.kind == "gaussian":
            return -0.5 * (d * math.log(2 * math.pi) + maha) - log_det
        nu = self.df
        return (
            gammaln(0.5 * (nu + d))
            - gammaln(0.5 * nu)
            - 0.5 * d * math.log(nu * math.pi)
            - log_det
            - 0.5 * (nu + d) * np.log1p(maha / nu)
        )

    def to_dict(self) -> dict:
        if self.kind == "mixture":
            return {
                "kind": "mixture",
                "weights": self.weights.tolist(),
                "components": [c.to_dict() for c in self.components],
            }
        out = {
            "kind": self.kind,
            "location": self.location.tolist(),
            "scale": (self.chol @ self.chol.T).tolist(),
        }
        if self.kind == "student_t":
            out["df"] = self.df
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ParameterProposal:
        kind = data["kind"]
        if kind == "mixture":
            return cls.mixture([cls.from_dict(c) for c in data["components"]], data["weights"])
        if kind == "gaussian":
            return cls.gaussian(data["location"], data["scale"])
        if kind == "student_t":
            return cls.student_t(data["location"], data["scale"], data.get("df", DEFAULT_DF))
        raise ValueError(f"unknown proposal kind {kind!r}")


def _factor(scale, d):
    s = np.asarray(scale, dtype=float)
    if s.ndim == 0:
        s = np.eye(d) * float(s)
    elif s.ndim == 1:
        s = np.diag(s)
    if s.shape != (d, d):
        raise ValueError(f"scale must be ({d}, {d})")
    if not np.any(s):
        # zero scale: a point mass at the location (sampling only)
        return np.zeros((d, d))
    return np.linalg.cholesky(s)


def sample(proposal: ParameterProposal, m: int, rng) -> np.ndarray:
    return proposal.sample(m, rng)


def log_density(proposal: ParameterProposal, theta) -> np.ndarray:
    return proposal.log_density(theta)


def fit_from_weighted_draws(draws: DrawSet, df: float = DEFAULT_DF,
                            inflation: float = COVARIANCE_INFLATION) -> ParameterProposal:
    """Student-t proposal matched to the importance-weighted mean and covariance.

    The weighted covariance, inflated by ``inflation``, is used as the scale
    matrix.  When the effective sample size is below d + 2 or the matrix is
    not positive definite, a diagonal scale is used instead and a
    :class:`DegenerateCovarianceWarning` is emitted.
    """
    w = shifted_weights(draws.log_weights)
    w = w / w.sum()
    theta = draws.theta
    d = theta.shape[1]
    mean = w @ theta
    dev = theta - mean
    cov = inflation * (dev * w[:, None]).T @ dev
    degenerate = ess(draws) < d + 2
    if not degenerate:
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            degenerate = True
    if degenerate:
        warnings.warn("weighted covariance is degenerate; using a diagonal scale", DegenerateCovarianceWarning,
                      stacklevel=2)
        diag = np.diag(cov).copy()
        fallback = inflation * theta.var(axis=0, ddof=1) if len(theta) > 1 else np.ones(d)
        bad = ~(diag > 1e-12 * np.maximum(fallback, 1e-300))
        diag[bad] = fallback[bad]
        diag[~(diag > 0)] = 1.0
        cov = np.diag(diag)
    return ParameterProposal.student_t(mean, cov, df)
