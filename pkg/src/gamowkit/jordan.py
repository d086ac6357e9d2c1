"""Jordan-Gamow sector of an N-th order S-matrix pole.

The Hamiltonian restricted to the span of the Jordan-Gamow kets
``|z>^(0), ..., |z>^(N-1)`` acts as

    H |z>^(0) = z |z>^(0)
    H |z>^(k) = z |z>^(k) + Gamma |z>^(k-1)      (k >= 1)

with ``z = E - i Gamma/2``.  Basis index ``k`` increases with Jordan degree,
so in matrix form ``A[k-1, k] = Gamma`` (the transpose of the layout in which
this block is often printed).

State operators are stored as ``N x N`` matrices whose entry ``[k, l]`` is the
coefficient of the dyad ``|z>^(k) (l)<z|``.  The ket index evolves with
``exp(-i A t)``; the bra index with the conjugate evolution at ``z*`` and a
polynomial in ``+i t``, so that ``W(t) = E(t) W E(t)^H``.

Time evolution is a semigroup: only ``t >= 0`` is accepted unless the caller
explicitly opts in with ``allow_negative_time=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class JordanBlock:
    z: complex
    N: int = 1

    def __post_init__(self):
        z = complex(self.z)
        object.__setattr__(self, "z", z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise ValidationError(f"pole position must be finite, got {z}")
        if not z.imag < 0.0:
            raise ValidationError(f"decaying pole requires Im(z) < 0, got {z.imag}")
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"pole order N must be an integer >= 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def from_energy_width(cls, E: float, Gamma: float, N: int = 1) -> "JordanBlock":
        return cls(complex(E, -0.5 * Gamma), N)

    @property
    def Gamma(self) -> float:
        return -2.0 * self.z.imag

    @property
    def E(self) -> float:
        return self.z.real


@dataclass
class StateOperator:
    block: JordanBlock
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.block.N
        if self.matrix.shape != (n, n):
            raise ValidationError(
                f"state operator must be {n}x{n} for block order {n}, "
                f"got shape {self.matrix.shape}"
            )

    def __mul__(self, c):
        return StateOperator(self.block, self.matrix * c)

    __rmul__ = __mul__

    def __add__(self, other: "StateOperator") -> "StateOperator":
        if other.block != self.block:
            raise ValidationError("cannot add state operators over different blocks")
        return StateOperator(self.block, self.matrix + other.matrix)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


def _check_time(t, allow_negative_time=False) -> float:
    t = float(t)
    if not math.isfinite(t):
        raise ValidationError(f"time must be finite, got {t}")
    if t < 0.0 and not allow_negative_time:
        raise ValidationError(
            f"semigroup evolution is defined for t >= 0 only, got t={t}; "
            "pass allow_negative_time=True to override"
        )
    return t


def hamiltonian_matrix(block: JordanBlock) -> np.ndarray:
    """Matrix of H on the Jordan-Gamow basis: ``z`` on the diagonal, ``Gamma`` on the superdiagonal."""
    n = block.N
    A = np.diag(np.full(n, block.z, dtype=complex))
    if n > 1:
        A += np.diag(np.full(n - 1, block.Gamma, dtype=complex), k=1)
    return A


def _evolution_polynomial(n: int, c: complex) -> np.ndarray:
    """Upper-triangular Toeplitz matrix with ``c**nu / nu!`` on the nu-th superdiagonal."""
    P = np.zeros((n, n), dtype=complex)
    term = 1.0 + 0.0j
    for nu in range(n):
        if nu:
            term = term * c / nu
        P += np.diag(np.full(n - nu, term), k=nu)
    return P


def evolution_matrix(block: JordanBlock, t, *, allow_negative_time=False) -> np.ndarray:
    """Closed-form ``exp(-i A t)``; column ``k`` is the evolved ket of degree ``k+1``."""
    t = _check_time(t, allow_negative_time)
    phase = np.exp(-1j * block.z * t)
    return phase * _evolution_polynomial(block.N, -1j * block.Gamma * t)


def evolve_ket(block: JordanBlock, k: int, t, *, allow_negative_time=False) -> np.ndarray:
    """Coefficients of ``exp(-i H t) |z>^(k)`` over the Jordan-Gamow basis.

    Index ``k - nu`` carries ``exp(-i z t) (Gamma**nu / nu!) (-i t)**nu``.
    """
    if not 0 <= k < block.N:
        raise ValidationError(f"ket index must satisfy 0 <= k < {block.N}, got {k}")
    t = _check_time(t, allow_negative_time)
    out = np.zeros(block.N, dtype=complex)
    phase = np.exp(-1j * block.z * t)
    term = 1.0 + 0.0j
    for nu in range(k + 1):
        if nu:
            term = term * (-1j * block.Gamma * t) / nu
        out[k - nu] = phase * term
    return out


def numeric_evolution(block: JordanBlock, t) -> np.ndarray:
    """``exp(-i A t)`` by Pade scaling-and-squaring, independent of the closed form."""
    t = float(t)
    if not math.isfinite(t):
        raise ValidationError(f"time must be finite, got {t}")
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(-1j * hamiltonian_matrix(block) * t)
    if not np.all(np.isfinite(E)):
        raise NumericalError(
            f"matrix exponential overflowed at Gamma*t = {block.Gamma * t:g}"
        )
    return E


def w_n(block: JordanBlock, n: int) -> StateOperator:
    """``W^(n) = sum_k |z>^(k) (n-k)<z|``: ones on the n-th anti-diagonal band."""
    if not 0 <= n < block.N:
        raise ValidationError(f"W^(n) requires 0 <= n < {block.N}, got {n}")
    M = np.zeros((block.N, block.N), dtype=complex)
    for k in range(n + 1):
        M[k, n - k] = 1.0
    return StateOperator(block, M)


def w_pt(block: JordanBlock) -> StateOperator:
    """Pole-term state operator ``2 pi Gamma sum_n C(N, n+1) (-i)**n W^(n)``."""
    N = block.N
    M = np.zeros((N, N), dtype=complex)
    for n in range(N):
        M += math.comb(N, n + 1) * (-1j) ** n * w_n(block, n).matrix
    return StateOperator(block, 2.0 * math.pi * block.Gamma * M)


def evolve_operator(W: StateOperator, t, *, allow_negative_time=False) -> StateOperator:
    """``exp(-i H t) W exp(i H t)`` on the dyad basis."""
    E = evolution_matrix(W.block, t, allow_negative_time=allow_negative_time)
    return StateOperator(W.block, E @ W.matrix @ E.conj().T)


def detection_probability(Lambda, W: StateOperator, t) -> complex:
    """``Tr(Lambda W(t))`` for an observable ``Lambda`` on the block.

    For ``W^(n)`` and ``W_PT`` this equals ``exp(-Gamma t) Tr(Lambda W)``.
    The dual basis is the formal transpose index, so with the ``-i`` weights
    of ``W_PT`` the trace is complex in general; it is returned unprojected.
    """
    L = np.asarray(Lambda, dtype=complex)
    n = W.block.N
    if L.shape != (n, n):
        raise ValidationError(f"observable must be {n}x{n}, got shape {L.shape}")
    if not np.allclose(L, L.conj().T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(L).max())):
        raise ValidationError("observable must be Hermitian")
    Wt = evolve_operator(W, t)
    return complex(np.trace(L @ Wt.matrix))


def semigroup_check(block: JordanBlock, t1, t2) -> float:
    """Max elementwise ``|E(t1) E(t2) - E(t1 + t2)|`` of the closed-form evolution."""
    E1 = evolution_matrix(block, t1)
    E2 = evolution_matrix(block, t2)
    E12 = evolution_matrix(block, float(t1) + float(t2))
    return float(np.max(np.abs(E1 @ E2 - E12)))


def catastrophe_demo(block: JordanBlock, t, *, allow_negative_time=False) -> float:
    """Gamow survival factor ``exp(-Gamma t)`` continued to ``t < 0``.

    The factor exceeds one and grows without bound as ``t -> -inf``, which is
    why evolution is restricted to the forward semigroup.
    """
    if not allow_negative_time:
        raise ValidationError(
            "catastrophe_demo evaluates the Gamow factor at negative time; "
            "set allow_negative_time=True"
        )
    t = float(t)
    if not t < 0.0:
        raise ValidationError(f"catastrophe_demo expects t < 0, got {t}")
    return math.exp(-block.Gamma * t)
