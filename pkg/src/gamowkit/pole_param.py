"""S-matrix pole positions and the (M, Gamma) conventions that encode them.

A resonance is fixed by a single complex number, the pole position ``s_R``
of the S-matrix in ``s = p^mu p_mu`` (GeV^2).  Three real parameterizations
are in common use:

``polesqrt``
    ``s_R = (M - i Gamma/2)**2``
``barmass``
    ``s_R = M**2 - i M Gamma``
``onshell``
    pole of ``R / (s - M**2 + i (s/M) Gamma)``, i.e. ``s_R = M**2 / (1 + i Gamma/M)``

All three are bijections on the decaying half plane ``Re s_R > 0``,
``Im s_R <= 0``, so conversions between them are lossless.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

from .errors import ValidationError

#: Reduced Planck constant in GeV s (CODATA 2018).
HBAR_GEV_S = 6.582119569e-25


class Convention(str, enum.Enum):
    POLE_SQRT = "polesqrt"
    BAR_MASS = "barmass"
    ON_SHELL = "onshell"

    @classmethod
    def parse(cls, label) -> "Convention":
        if isinstance(label, cls):
            return label
        key = str(label).strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if member.value == key:
                return member
        raise ValidationError(
            f"unknown convention {label!r}; expected one of "
            + ", ".join(m.value for m in cls)
        )

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ComplexPole:
    """Pole of the S-matrix in the ``s`` plane, GeV^2."""

    s_r: complex

    def __post_init__(self):
        s = complex(self.s_r)
        object.__setattr__(self, "s_r", s)
        if not (math.isfinite(s.real) and math.isfinite(s.imag)):
            raise ValidationError(f"pole position must be finite, got {s}")
        if s.real <= 0.0:
            raise ValidationError(f"pole requires Re(s_R) > 0, got {s.real}")
        if s.imag > 0.0:
            raise ValidationError(
                f"decaying pole requires Im(s_R) <= 0, got {s.imag}"
            )

    @property
    def sqrt(self) -> complex:
        """Principal square root; the branch cut is never reached since Re(s_R) > 0."""
        return cmath.sqrt(self.s_r)


@dataclass(frozen=True)
class ResonanceParams:
    convention: Convention
    M: float
    Gamma: float

    def __post_init__(self):
        object.__setattr__(self, "convention", Convention.parse(self.convention))
        M, G = float(self.M), float(self.Gamma)
        if not (math.isfinite(M) and math.isfinite(G)):
            raise ValidationError(f"M and Gamma must be finite, got ({M}, {G})")
        if M <= 0.0:
            raise ValidationError(f"M must be positive, got {M}")
        if G < 0.0:
            raise ValidationError(f"Gamma must be non-negative, got {G}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "Gamma", G)


@dataclass(frozen=True)
class NonRelResonance:
    """Non-relativistic resonance with pole ``z_R = E_R - i Gamma/2`` in the energy plane."""

    E_R: float
    Gamma: float

    def __post_init__(self):
        E, G = float(self.E_R), float(self.Gamma)
        if not E > 0.0:
            raise ValidationError(f"E_R must be positive, got {E}")
        if not G > 0.0:
            raise ValidationError(f"Gamma must be positive, got {G}")
        object.__setattr__(self, "E_R", E)
        object.__setattr__(self, "Gamma", G)

    @property
    def z_r(self) -> complex:
        return complex(self.E_R, -0.5 * self.Gamma)


def pole_from_params(params: ResonanceParams) -> ComplexPole:
    """Complex pole position selected by ``params.convention``."""
    M, G = params.M, params.Gamma
    conv = params.convention
    if conv is Convention.POLE_SQRT:
        s = complex(M, -0.5 * G) ** 2
    elif conv is Convention.BAR_MASS:
        s = complex(M * M, -M * G)
    else:
        g = G / M
        d = 1.0 + g * g
        s = complex(M * M / d, -M * M * g / d)
    return ComplexPole(s)


def params_from_pole(pole: ComplexPole, convention) -> ResonanceParams:
    """Read off ``(M, Gamma)`` of the given convention from a pole position."""
    if not isinstance(pole, ComplexPole):
        pole = ComplexPole(pole)
    conv = Convention.parse(convention)
    s = pole.s_r
    if conv is Convention.POLE_SQRT:
        root = pole.sqrt
        M, G = root.real, -2.0 * root.imag
    elif conv is Convention.BAR_MASS:
        M = math.sqrt(s.real)
        G = -s.imag / M
    else:
        # 1/s_R = (1 + i Gamma/M) / M**2
        mod2 = s.real * s.real + s.imag * s.imag
        inv_re, inv_im = s.real / mod2, -s.imag / mod2
        M = 1.0 / math.sqrt(inv_re)
        G = M**3 * inv_im
    # -0.0 from a real pole
    return ResonanceParams(conv, M, abs(G) if G == 0.0 else G)


def convert(params: ResonanceParams, target) -> ResonanceParams:
    target = Convention.parse(target)
    if target is params.convention:
        return params
    return params_from_pole(pole_from_params(params), target)


def lifetime_from_width(Gamma: float) -> float:
    """Lifetime in seconds, ``tau = hbar / Gamma`` with Gamma in GeV."""
    Gamma = float(Gamma)
    if not Gamma > 0.0:
        raise ValidationError(f"width must be positive, got {Gamma}")
    return HBAR_GEV_S / Gamma


def width_from_lifetime(tau: float) -> float:
    tau = float(tau)
    if not tau > 0.0:
        raise ValidationError(f"lifetime must be positive, got {tau}")
    return HBAR_GEV_S / tau
