"""Logarithmic-norm robust-stability certificates for ``x' = A(t) x + w(x, t)``."""

from .certify import CertificateReport, CertifyConfig, certify, envelope_bound
from .funclass import probe_AD, probe_D, probe_V, trend_verdict
from .linalg import NormKind, log_norm, log_norm_limit, lyapunov_solve, mat_induced_norm, mu_weighted_hurwitz
from .odesim import IntegratorSettings, fundamental_matrix, integrate_ode, transition_matrix
from .quadrature import cumulative_mu, integrate
from .system_model import Scenario, builtin_scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "CertificateReport", "CertifyConfig", "certify", "envelope_bound",
    "probe_AD", "probe_D", "probe_V", "trend_verdict",
    "NormKind", "log_norm", "log_norm_limit", "lyapunov_solve", "mat_induced_norm", "mu_weighted_hurwitz",
    "IntegratorSettings", "fundamental_matrix", "integrate_ode", "transition_matrix",
    "cumulative_mu", "integrate",
    "Scenario", "builtin_scenario", "load_scenario",
]
