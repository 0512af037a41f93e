"""Norm-controlled shallow ReLU network regression.

Submodules: :mod:`srl.network` (parameterizations and path norm),
:mod:`srl.canonical` (canonical forms and path-norm bounds),
:mod:`srl.estimators` (least-squares fitting), :mod:`srl.complexity`
(entropy, Dudley and Monte-Carlo local complexity), :mod:`srl.bench`
(synthetic rate experiments) and :mod:`srl.cli`.
"""
from .errors import (ConfigError, DegenerateDirectionError, DimensionError, DivergenceError,
                     DomainError, EmptyDataError, NumericError, ParseError, RangeError, SRLError,
                     VerificationError)
from .network import Parameterization, evaluate, path_norm, rescale_balanced, truncate

__version__ = "0.1.0"

__all__ = [
    "Parameterization", "evaluate", "path_norm", "rescale_balanced", "truncate",
    "SRLError", "ConfigError", "DimensionError", "DegenerateDirectionError", "EmptyDataError",
    "DomainError", "ParseError", "NumericError", "DivergenceError", "RangeError", "VerificationError",
]
