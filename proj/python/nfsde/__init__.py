"""Python access to the nfsde core: constants, distances, OT and experiments."""

import json as _json

from . import _core
from ._core import (
    CheckerFailure,
    DomainError,
    Error,
    SizeError,
    ValidationError,
    alpha,
    beta,
    c_lambda,
    exact_w2,
    rho_2_lambda,
    rho_inf,
    sinkhorn_w2,
    theorem31_coefficients,
)

__all__ = [
    "CheckerFailure",
    "DomainError",
    "Error",
    "SizeError",
    "ValidationError",
    "alpha",
    "beta",
    "c_lambda",
    "config_hash",
    "constants",
    "couple_summary",
    "exact_w2",
    "rho_2_lambda",
    "rho_inf",
    "simulate",
    "sinkhorn_w2",
    "theorem31_coefficients",
    "verify",
]


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def config_hash(config, overrides=()):
    return _core.config_hash(_text(config), list(overrides))


def simulate(config, overrides=()):
    """Return (paths, seeds); each path is a (points, d) array on [-tau, T]."""
    return _core.simulate(_text(config), list(overrides))


def couple_summary(config, overrides=()):
    return _json.loads(_core.couple_summary(_text(config), list(overrides)))


def verify(config, overrides=()):
    """Run the full verification pipeline and return the report as a dict."""
    return _json.loads(_core.verify(_text(config), list(overrides)))


def constants(**params):
    return _json.loads(_core.constants(**params))
