"""Small builders shared by the test modules."""

import numpy as np

from is2.core import DrawSet


def drawset_from_weights(weights, phi_values=None, **kw):
    """DrawSet whose log weights are log(weights) and whose single coordinate holds ``phi_values``."""
    w = np.asarray(weights, dtype=float)
    theta = np.arange(w.size, dtype=float) if phi_values is None else np.asarray(phi_values, dtype=float)
    with np.errstate(divide="ignore"):
        lw = np.log(w)
    return DrawSet(theta=theta, log_prior=np.zeros(w.size), log_lik_hat=lw, log_proposal=np.zeros(w.size), **kw)


LGSS_TRUTH = dict(phi=0.5, q=0.1, r=1.0, T=100, seed=11)
GRID_BOUNDS = ([-4.0, -12.0], [7.0, 3.0])


def lgss_problem(n_times=100):
    """The LGSS data set used across the tests, with its grid-quadrature posterior."""
    from is2.models import LgssModel, grid_posterior, simulate_lgss

    t = LGSS_TRUTH
    model = LgssModel(simulate_lgss(t["phi"], t["q"], t["r"], n_times, t["seed"]), r=t["r"])
    return model, grid_posterior(model, *GRID_BOUNDS, n_grid=401)


def posterior_t(post, df=5.0, inflation=1.5):
    """Student-t proposal centred on the oracle posterior with an inflated covariance."""
    from is2.proposals import ParameterProposal

    return ParameterProposal.student_t(post["mean"], np.diag(inflation * post["sd"] ** 2), df)


class ExactLikelihood:
    """Wraps an oracle-bearing model so its 'estimates' are the exact log-likelihood."""

    self_tuning = False
    has_overhead = False

    def __init__(self, model):
        self.model = model
        self.name = model.name + "_exact"
        self.param_names = model.param_names
        self.dim = model.dim

    def log_prior(self, theta):
        return self.model.log_prior(theta)

    def exact_loglik(self, theta):
        return self.model.exact_loglik(theta)

    def estimate_loglik(self, theta, rngs, n=None, sigma2=None, antithetic=False, stratified=True):
        from is2.likelihood import LikelihoodEstimate

        return [LikelihoodEstimate(float(v), 1, loglik_var_hat=0.0) for v in self.model.exact_loglik(theta)]
