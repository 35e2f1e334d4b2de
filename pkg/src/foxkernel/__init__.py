"""Fox H-function evaluation and fractional (Lévy) quantum propagators."""
from .errors import *  # noqa: F401,F403
from .errors import __all__ as _error_names
from .foxh import (
    EXP_SET,
    HParams,
    SeriesControl,
    SeriesResult,
    beta,
    chi,
    eval_contour,
    eval_series,
    evaluate,
    mu,
    transform_invert,
    transform_laplace_lift,
    transform_power_shift,
    transform_reduce,
    transform_scale,
)
from .gamma import gamma, log_gamma, reciprocal_gamma
from .kernels import *  # noqa: F401,F403
from .kernels import __all__ as _kernel_names

__version__ = "0.1.0"

__all__ = [
    "EXP_SET",
    "HParams",
    "SeriesControl",
    "SeriesResult",
    "beta",
    "chi",
    "eval_contour",
    "eval_series",
    "evaluate",
    "mu",
    "transform_invert",
    "transform_laplace_lift",
    "transform_power_shift",
    "transform_reduce",
    "transform_scale",
    "gamma",
    "log_gamma",
    "reciprocal_gamma",
    *_error_names,
    *_kernel_names,
]
