"""Resonance poles, Breit-Wigner lineshapes, Jordan-Gamow evolution and survival tails."""

from .errors import (
    DataFormatError,
    GamowkitError,
    NumericalError,
    SingularMatrixError,
    ValidationError,
)
from .pole_param import (
    HBAR_GEV_S,
    ComplexPole,
    Convention,
    NonRelResonance,
    ResonanceParams,
    convert,
    lifetime_from_width,
    params_from_pole,
    pole_from_params,
)

__version__ = "0.1.0"
