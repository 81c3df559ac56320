"""Exact interval exchange transformations, Rauzy-Veech induction and
rigidity / spectral / product experiments."""
from .core import (
    IET,
    PiecewiseTranslation,
    Permutation,
    Rational,
    evaluate,
    identity_iet,
    invert,
    keane_check,
    make_iet,
    rotation,
    to_piecewise,
)
from .errors import IETError

__version__ = "0.1.0"

__all__ = [
    "IET",
    "IETError",
    "PiecewiseTranslation",
    "Permutation",
    "Rational",
    "evaluate",
    "identity_iet",
    "invert",
    "keane_check",
    "make_iet",
    "rotation",
    "to_piecewise",
]
