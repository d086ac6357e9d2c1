"""Survival amplitude of a Breit-Wigner state on a spectrum bounded from below.

The energy density is the Lorentzian of a pole ``z = E_R - i Gamma/2``
truncated to ``[0, inf)`` and renormalized.  Its Fourier transform

    A(t) = int_0^inf rho(E) exp(-i E t) dE

splits, after rotating the integration ray onto the negative imaginary
axis, into the residue of the pole inside the swept quadrant,
``norm * exp(-i z t)`` (the Gamow exponential), plus a background integral
along the rotated ray.  With ``E = -i u / t`` the background is

    norm/(2 pi) * i Gamma t * int_0^inf exp(-u) / ((u - i z t)(u - i z* t)) du

which is smooth, non-oscillatory and decays like ``exp(-u) / u**2``.  It
dominates at late times, so ``|A(t)|**2`` eventually falls off as a power
law rather than as ``exp(-Gamma t)``.

An independent closed form uses the exponential integral of complex
argument; the pole at ``z`` contributes an extra ``-2 pi i`` because the
continuation from real to imaginary frequency crosses the branch cut of
``E1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class TruncatedBWState:
    E_R: float
    Gamma: float

    def __post_init__(self):
        E, G = float(self.E_R), float(self.Gamma)
        if not (math.isfinite(E) and E > 0.0):
            raise ValidationError(f"E_R must be positive, got {E}")
        if not (math.isfinite(G) and G > 0.0):
            raise ValidationError(f"Gamma must be positive, got {G}")
        object.__setattr__(self, "E_R", E)
        object.__setattr__(self, "Gamma", G)

    @classmethod
    def from_ratio(cls, er_over_gamma: float, Gamma: float = 1.0) -> "TruncatedBWState":
        return cls(er_over_gamma * Gamma, Gamma)

    @property
    def z(self) -> complex:
        return complex(self.E_R, -0.5 * self.Gamma)

    @property
    def norm(self) -> float:
        """Inverse of the Lorentzian probability mass on ``[0, inf)``."""
        return 1.0 / (0.5 + math.atan(2.0 * self.E_R / self.Gamma) / math.pi)

    def density(self, E):
        """Normalized energy density; zero below threshold."""
        E = np.asarray(E, dtype=float)
        lor = (self.Gamma / (2.0 * math.pi)) / ((E - self.E_R) ** 2 + 0.25 * self.Gamma**2)
        return np.where(E >= 0.0, self.norm * lor, 0.0)


def _check_t(t) -> float:
    t = float(t)
    if not math.isfinite(t):
        raise ValidationError(f"time must be finite, got {t}")
    if t < 0.0:
        raise ValidationError(f"survival amplitude is defined for t >= 0, got {t}")
    return t


def pole_term(state: TruncatedBWState, t) -> complex:
    """Residue contribution ``norm * exp(-i z t)``; its modulus squared is ``norm**2 exp(-Gamma t)``."""
    t = _check_t(t)
    return state.norm * complex(np.exp(-1j * state.z * t))


def background_term(state: TruncatedBWState, t, *, tol=1e-13) -> complex:
    """Integral along the rotated ray from the threshold ``E = 0``.

    ``tol`` is the absolute accuracy targeted for the returned term.
    """
    t = _check_t(t)
    if t == 0.0:
        return 1.0 - state.norm
    a = 1j * state.z * t
    b = 1j * state.z.conjugate() * t
    prefactor = state.norm / (2.0 * math.pi) * state.Gamma * t

    def f(u):
        return math.exp(-u) / ((u - a) * (u - b))

    # denominators are smallest at u = Gamma t / 2 and vary on the scale E_R t
    c, w = a.real, a.imag
    end = max(c, 1.0) + 40.0
    edges = {0.0, c, end}
    step = w
    while c + step < end:
        edges.add(c + step)
        step *= 10.0
    edges = sorted(edges)
    epsabs = tol / prefactor / (2 * len(edges))
    total = 0.0j
    for lo, hi in zip(edges, edges[1:]):
        if hi <= lo:
            continue
        kw = dict(epsabs=epsabs, epsrel=1e-13, limit=500)
        re, _ = integrate.quad(lambda u: f(u).real, lo, hi, **kw)
        im, _ = integrate.quad(lambda u: f(u).imag, lo, hi, **kw)
        total += complex(re, im)
    # beyond the last edge exp(-u) is below 1e-17 of its value at max(c, 1)
    return 1j * prefactor * total


def survival_amplitude(state: TruncatedBWState, t) -> complex:
    """``A(t)`` by contour rotation: pole term plus ray background."""
    t = _check_t(t)
    if t == 0.0:
        return 1.0 + 0.0j
    return pole_term(state, t) + background_term(state, t)


def survival_amplitude_expint(state: TruncatedBWState, t, *, dps=40) -> complex:
    """``A(t)`` in closed form through the complex exponential integral ``E1``.

    Evaluated with mpmath at ``dps`` decimal digits; used to cross-check the
    quadrature path.
    """
    t = _check_t(t)
    if t == 0.0:
        return 1.0 + 0.0j
    with mpmath.workdps(dps):
        z = mpmath.mpc(state.E_R, -0.5 * state.Gamma)
        zc = mpmath.conj(z)
        tt = mpmath.mpf(t)

        def half_line(w, crosses_cut):
            # int_0^inf exp(-i E t) / (E - w) dE
            val = mpmath.exp(-1j * w * tt) * mpmath.e1(-1j * w * tt)
            if crosses_cut:
                val -= 2j * mpmath.pi * mpmath.exp(-1j * w * tt)
            return val

        diff = half_line(z, True) - half_line(zc, False)
        A = state.norm / (2 * mpmath.pi) * 1j * diff
        return complex(A)


def survival_probability(state: TruncatedBWState, t) -> float:
    return abs(survival_amplitude(state, t)) ** 2


def gamow_reference(Gamma, t) -> float:
    """Exponential decay law ``exp(-Gamma t)`` for ``t >= 0``."""
    t = _check_t(t)
    return math.exp(-float(Gamma) * t)


def deviation_curve(state: TruncatedBWState, t_grid):
    """Rows ``(t, |A|**2, exp(-Gamma t), ratio)`` over a sorted, non-negative grid."""
    ts = [float(t) for t in t_grid]
    if not ts:
        raise ValidationError("time grid is empty")
    if any(t < 0.0 for t in ts):
        raise ValidationError("time grid must be non-negative")
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ValidationError("time grid must be sorted")
    rows = []
    for t in ts:
        p = survival_probability(state, t)
        e = gamow_reference(state.Gamma, t)
        if e == 0.0:
            raise NumericalError(f"exponential reference underflows at Gamma*t = {state.Gamma * t:g}")
        rows.append((t, p, e, p / e))
    return rows
