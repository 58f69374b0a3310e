"""
Performability measures of continuous-time Markov chains.

Measures are evaluated as ``pi0^T f(Q) r`` with ``f`` the exponential or
``t phi_1(t z)`` using restarted Krylov methods, with uniformization as an
independent baseline and block-matrix Frechet derivatives for sensitivity.
"""

from .ctmc import (
    Generator,
    StatePartition,
    build_generator,
    from_rate_matrix,
    read_matrix_market,
    write_matrix_market,
)
from .errors import ConvergenceError, ResourceError, SolveError, SpecError, ValidationError
from .krylov import KrylovConfig, KrylovResult, arnoldi, bilinear_form, funm_action
from .measures import Kind, MeasureResult, MeasureSpec, evaluate, measure_spec_from_dict
from .models import build_model, direction_matrix
from .sensitivity import BlockOperator, measure_sensitivity, mttf_sensitivity

__version__ = "0.1.0"

__all__ = [
    "BlockOperator",
    "ConvergenceError",
    "Generator",
    "Kind",
    "KrylovConfig",
    "KrylovResult",
    "MeasureResult",
    "MeasureSpec",
    "ResourceError",
    "SolveError",
    "SpecError",
    "StatePartition",
    "ValidationError",
    "arnoldi",
    "bilinear_form",
    "build_generator",
    "build_model",
    "direction_matrix",
    "evaluate",
    "from_rate_matrix",
    "funm_action",
    "measure_sensitivity",
    "measure_spec_from_dict",
    "mttf_sensitivity",
    "read_matrix_market",
    "write_matrix_market",
]
