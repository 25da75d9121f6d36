"""Quantumness certification of spin qudits with precession protocols."""
from .errors import (
    DegenerateTruncation,
    GradientUndefined,
    InvalidArgument,
    NumericalInconsistency,
    PrecessionError,
    UnsupportedDimension,
    UnsupportedRegime,
    UnsupportedState,
)
from .protocol import (
    AngleSet,
    classical_bound,
    classical_score,
    max_quantum_score,
    pos_curve,
    q_matrix,
    quantum_score,
)
from .spin import QuditState, SpinSystem, cat_state, spin_coherent_state, spin_operators, system_for_dimension

__version__ = "0.1.0"
FORMAT_VERSION = 1

__all__ = [
    "AngleSet",
    "DegenerateTruncation",
    "GradientUndefined",
    "InvalidArgument",
    "NumericalInconsistency",
    "PrecessionError",
    "QuditState",
    "SpinSystem",
    "UnsupportedDimension",
    "UnsupportedRegime",
    "UnsupportedState",
    "cat_state",
    "classical_bound",
    "classical_score",
    "max_quantum_score",
    "pos_curve",
    "q_matrix",
    "quantum_score",
    "spin_coherent_state",
    "spin_operators",
    "system_for_dimension",
]
