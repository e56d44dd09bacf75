from .datasets import build_model, read_panel, read_series, write_panel, write_series
from .lgss import LgssModel, grid_posterior, kalman_loglik, simulate_lgss
from .panel_logit import (
    PanelLikelihoodEstimate,
    PanelLogitModel,
    gauss_hermite_log_integral,
    gh_quadrature_loglik,
    panel_design,
    panel_logit_loglik_estimate,
    simulate_panel,
)
from .sv import SvModel, simulate_sv, sv_loglik_estimate


def lgss_exact_loglik(model: LgssModel, theta):
    return model.exact_loglik(theta)


__all__ = [
    "LgssModel",
    "PanelLikelihoodEstimate",
    "PanelLogitModel",
    "SvModel",
    "build_model",
    "gauss_hermite_log_integral",
    "gh_quadrature_loglik",
    "grid_posterior",
    "kalman_loglik",
    "lgss_exact_loglik",
    "panel_design",
    "panel_logit_loglik_estimate",
    "read_panel",
    "read_series",
    "simulate_lgss",
    "simulate_panel",
    "simulate_sv",
    "sv_loglik_estimate",
    "write_panel",
    "write_series",
]
