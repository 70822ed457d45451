"""Completely bounded norms and CB minimal conditional entropy of quantum channels."""
from . import cbentropy, channels, inequalities, linalg, vnorms
from .cbentropy import CbResult, cb_limit_estimate, closed_forms, mu_star, nu_p, omega_p, s_cb_min, u_fn
from .channels import Channel
from .errors import (
    BadExponent,
    BadName,
    BadPOVM,
    CbNormError,
    DimMismatch,
    NoSignChange,
    NonHermitian,
    NotCP,
    NotEBT,
    NotPSD,
    NotTP,
    UnnormalizedStateWarning,
)
from .vnorms import NormParams, OptReport

__version__ = "0.1.0"
