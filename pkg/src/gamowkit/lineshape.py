"""Breit-Wigner lineshapes: amplitude models, synthetic data and fitting.

Three amplitude families are supported, each with an optional real
polynomial background ``B(x) = sum_k c_k (x - x0)**k`` added at amplitude
level (default) or directly to the cross section:

``nonrelbw``  ``r / (E - z_R)``, ``x = E``
``relbw``     ``r / (s - s_R)``, ``x = sqrt(s)``; ``s_R`` from any (M, Gamma) convention
``onshellbw`` ``R / (s - M**2 + i (s/M) Gamma)``, ``x = sqrt(s)``

The fitter is a Levenberg-Marquardt loop on the weighted residuals with a
central-difference Jacobian and Marquardt (diagonal) damping.
"""

from __future__ import annotations

import cmath
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import SingularMatrixError, ValidationError
from .pole_param import (
    Convention,
    NonRelResonance,
    ResonanceParams,
    convert,
    pole_from_params,
)

log = logging.getLogger(__name__)

MAX_BACKGROUND_DEGREE = 4


class ModelKind(str, enum.Enum):
    NONREL_BW = "nonrelbw"
    REL_BW = "relbw"
    ONSHELL_BW = "onshellbw"

    @classmethod
    def parse(cls, label) -> "ModelKind":
        if isinstance(label, cls):
            return label
        key = str(label).strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if member.value == key:
                return member
        raise ValidationError(
            f"unknown model kind {label!r}; expected one of "
            + ", ".join(m.value for m in cls)
        )

    def __str__(self) -> str:
        return self.value


class BackgroundLevel(str, enum.Enum):
    AMPLITUDE = "amplitude"
    CROSS_SECTION = "cross_section"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class LineshapeModel:
    kind: ModelKind
    resonance: object
    residue: complex = 1.0
    background: tuple = ()
    channel_label: Optional[str] = None
    background_center: float = 0.0
    background_level: BackgroundLevel = BackgroundLevel.AMPLITUDE

    def __post_init__(self):
        kind = ModelKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "residue", complex(self.residue))
        object.__setattr__(self, "background", tuple(float(c) for c in self.background))
        object.__setattr__(self, "background_level", BackgroundLevel(self.background_level))
        object.__setattr__(self, "background_center", float(self.background_center))
        if self.residue == 0:
            raise ValidationError("residue must be non-zero")
        if len(self.background) > MAX_BACKGROUND_DEGREE + 1:
            raise ValidationError(
                f"background degree must be <= {MAX_BACKGROUND_DEGREE}, "
                f"got {len(self.background) - 1}"
            )
        res = self.resonance
        if kind is ModelKind.NONREL_BW:
            if not isinstance(res, NonRelResonance):
                raise ValidationError("nonrelbw model needs a NonRelResonance")
        else:
            if not isinstance(res, ResonanceParams):
                raise ValidationError(f"{kind} model needs ResonanceParams")
            if kind is ModelKind.ONSHELL_BW and res.convention is not Convention.ON_SHELL:
                raise ValidationError("onshellbw model needs onshell-convention parameters")

    @property
    def mass(self) -> float:
        r = self.resonance
        return r.E_R if isinstance(r, NonRelResonance) else r.M

    @property
    def width(self) -> float:
        return self.resonance.Gamma


@dataclass(frozen=True)
class CrossSectionDataset:
    x: np.ndarray
    sigma: np.ndarray
    sigma_err: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).ravel()
        y = np.array(self.sigma, dtype=float).ravel()
        e = np.array(self.sigma_err, dtype=float).ravel()
        if not (len(x) == len(y) == len(e)):
            raise ValidationError("x, sigma and sigma_err must have equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(e))):
            raise ValidationError("dataset contains non-finite values")
        if len(x) > 1 and np.any(np.diff(x) <= 0.0):
            i = int(np.argmax(np.diff(x) <= 0.0))
            raise ValidationError(f"x must be strictly increasing (point {i + 1} -> {i + 2})")
        if np.any(y < 0.0):
            raise ValidationError("sigma must be non-negative")
        if np.any(e <= 0.0):
            i = int(np.argmax(e <= 0.0))
            raise ValidationError(f"sigma_err must be positive (point {i + 1})")
        for name, arr in (("x", x), ("sigma", y), ("sigma_err", e)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_points(cls, points, *, sort=False) -> "CrossSectionDataset":
        pts = [tuple(map(float, p)) for p in points]
        if sort:
            pts.sort(key=lambda p: p[0])
        if not pts:
            return cls(np.empty(0), np.empty(0), np.empty(0))
        x, y, e = zip(*pts)
        return cls(x, y, e)

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.sigma.tolist(), self.sigma_err.tolist()))

    def __len__(self) -> int:
        return len(self.x)

    def __eq__(self, other):
        if not isinstance(other, CrossSectionDataset):
            return NotImplemented
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.sigma, other.sigma)
            and np.array_equal(self.sigma_err, other.sigma_err)
        )

    def scaled(self, factor: float) -> "CrossSectionDataset":
        return CrossSectionDataset(self.x, self.sigma * factor, self.sigma_err * factor)


@dataclass
class FitOptions:
    max_iter: int = 200
    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    rel_step: float = 1e-6
    chi2_rtol: float = 1e-10
    step_tol: float = 1e-12
    # None: free phase only when an amplitude-level background can interfere
    fix_phase: Optional[bool] = None
    fit_background: bool = True


@dataclass
class FitResult:
    model: LineshapeModel
    chi2: float
    dof: int
    covariance: np.ndarray = field(repr=False)
    converged: bool
    iterations: int
    parameter_names: tuple = ()
    message: str = ""

    @property
    def chi2_per_dof(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else math.nan

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def error_of(self, name: str) -> float:
        return float(self.errors[self.parameter_names.index(name)])


def _background(coeffs, center, x):
    out = np.zeros_like(x, dtype=float)
    for c in reversed(coeffs):
        out = out * (x - center) + c
    return out


def _raw_cross_section(kind, conv, mass, width, residue, coeffs, center, level, x):
    """Cross section without domain checks; shared by the public API and the fitter."""
    amp = _raw_resonant(kind, conv, mass, width, residue, x)
    if not coeffs:
        return np.abs(amp) ** 2
    bg = _background(coeffs, center, x)
    if level is BackgroundLevel.AMPLITUDE:
        return np.abs(amp + bg) ** 2
    return np.abs(amp) ** 2 + bg


def _raw_resonant(kind, conv, mass, width, residue, x):
    if kind is ModelKind.NONREL_BW:
        return residue / (x - complex(mass, -0.5 * width))
    s = x * x
    if kind is ModelKind.ONSHELL_BW:
        return residue / (s - mass * mass + 1j * (s / mass) * width)
    s_r = pole_from_params(ResonanceParams(conv, mass, width)).s_r
    return residue / (s - s_r)


def _check_domain(model: LineshapeModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValidationError("x must be finite")
    if model.kind is ModelKind.NONREL_BW:
        if np.any(x < 0.0):
            raise ValidationError("energy must satisfy E >= 0")
    elif np.any(x <= 0.0):
        raise ValidationError("sqrt(s) must be positive")
    return x


def _conv(model):
    r = model.resonance
    return r.convention if isinstance(r, ResonanceParams) else None


def amplitude(model: LineshapeModel, x):
    """Complex amplitude ``a_res(x) + B(x)``; the background term is omitted for cross-section-level backgrounds."""
    xa = _check_domain(model, x)
    amp = _raw_resonant(model.kind, _conv(model), model.mass, model.width, model.residue, xa)
    if model.background and model.background_level is BackgroundLevel.AMPLITUDE:
        amp = amp + _background(model.background, model.background_center, xa)
    return complex(amp) if np.ndim(x) == 0 else amp


def cross_section(model: LineshapeModel, x):
    xa = _check_domain(model, x)
    sig = _raw_cross_section(
        model.kind,
        _conv(model),
        model.mass,
        model.width,
        model.residue,
        model.background,
        model.background_center,
        model.background_level,
        xa,
    )
    return float(sig) if np.ndim(x) == 0 else sig


def synthesize(model: LineshapeModel, grid, noise_rel: float, seed: int) -> CrossSectionDataset:
    """Relative-Gaussian pseudo data on ``grid``, reproducible for a fixed ``seed``."""
    x = np.asarray(grid, dtype=float).ravel()
    if x.size == 0:
        raise ValidationError("grid is empty")
    if x.size > 1 and np.any(np.diff(x) <= 0.0):
        raise ValidationError("grid must be strictly increasing")
    if not noise_rel >= 0.0:
        raise ValidationError(f"noise_rel must be >= 0, got {noise_rel}")
    truth = cross_section(model, x)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(x.size)
    sigma = np.clip(truth * (1.0 + noise_rel * g), 0.0, None)
    err = np.maximum(noise_rel * truth, 1e-12)
    return CrossSectionDataset(x, sigma, err)


def weighted_residuals(model: LineshapeModel, data: CrossSectionDataset) -> np.ndarray:
    return (data.sigma - cross_section(model, data.x)) / data.sigma_err


# --------------------------------------------------------------------------
# fitting


class _Layout:
    """Maps a LineshapeModel to the free-parameter vector of the fitter and back."""

    def __init__(self, model: LineshapeModel, opts: FitOptions):
        self.model = model
        nbg = len(model.background) if opts.fit_background else 0
        if opts.fix_phase is None:
            free_phase = nbg > 0 and model.background_level is BackgroundLevel.AMPLITUDE
        else:
            free_phase = not opts.fix_phase
        self.free_phase = free_phase
        self.nbg = nbg
        names = ["M" if model.kind is not ModelKind.NONREL_BW else "E_R", "Gamma", "residue_abs"]
        if free_phase:
            names.append("residue_phase")
        names += [f"bg{k}" for k in range(nbg)]
        self.names = tuple(names)

    def pack(self, model: LineshapeModel) -> np.ndarray:
        p = [model.mass, model.width, abs(model.residue)]
        if self.free_phase:
            p.append(cmath.phase(model.residue))
        p += list(model.background[: self.nbg])
        return np.array(p, dtype=float)

    def residue(self, p) -> complex:
        if self.free_phase:
            return cmath.rect(p[2], p[3])
        return complex(p[2])

    def background(self, p) -> tuple:
        if self.nbg == 0:
            return self.model.background
        return tuple(p[len(p) - self.nbg :])

    def valid(self, p) -> bool:
        return bool(np.all(np.isfinite(p)) and p[0] > 0.0 and p[1] > 0.0 and p[2] != 0.0)

    def predict(self, p, x) -> np.ndarray:
        m = self.model
        return _raw_cross_section(
            m.kind, _conv(m), p[0], p[1], self.residue(p), self.background(p),
            m.background_center, m.background_level, x,
        )

    def unpack(self, p) -> LineshapeModel:
        m = self.model
        if m.kind is ModelKind.NONREL_BW:
            res = NonRelResonance(p[0], p[1])
        else:
            res = ResonanceParams(m.resonance.convention, p[0], p[1])
        residue = self.residue(p)
        if not self.free_phase:
            residue = complex(abs(residue))
        return replace(m, resonance=res, residue=residue, background=self.background(p))


def _coerce_init(init: LineshapeModel, kind: ModelKind) -> LineshapeModel:
    if init.kind is kind:
        return init
    rel = (ModelKind.REL_BW, ModelKind.ONSHELL_BW)
    if init.kind not in rel or kind not in rel:
        raise ValidationError(f"cannot start a {kind} fit from a {init.kind} model")
    # r/(s - s_R) == R/(s - M^2 + i s Gamma/M) with R = r (1 + i Gamma/M)
    if kind is ModelKind.ONSHELL_BW:
        res = convert(init.resonance, Convention.ON_SHELL)
        residue = init.residue * (1 + 1j * res.Gamma / res.M)
    else:
        res = init.resonance
        residue = init.residue / (1 + 1j * res.Gamma / res.M)
    return replace(init, kind=kind, resonance=res, residue=residue)


def _jacobian(layout, p, x, err, rel_step):
    J = np.empty((x.size, p.size))
    for j in range(p.size):
        h = rel_step * (abs(p[j]) if p[j] != 0.0 else 1.0)
        up, dn = p.copy(), p.copy()
        up[j] += h
        dn[j] -= h
        J[:, j] = (layout.predict(up, x) - layout.predict(dn, x)) / (2.0 * h) / err
    return J


def _solve(A, g):
    try:
        return np.linalg.solve(A, g)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"normal matrix is singular: {exc}") from None


def fit(data, kind, init: LineshapeModel, opts: Optional[FitOptions] = None) -> FitResult:
    """Weighted least-squares fit of a lineshape model to cross-section data.

    ``data`` may be a :class:`CrossSectionDataset` or any iterable of
    ``(x, sigma, sigma_err)`` triples in any order.  The starting model may
    be of a different relativistic kind than ``kind``; it is converted.

    Raises :class:`SingularMatrixError` if the normal matrix cannot be
    inverted.  Failure to converge within ``opts.max_iter`` is reported by
    ``converged=False`` together with the best parameters found.
    """
    opts = opts or FitOptions()
    if not isinstance(data, CrossSectionDataset):
        data = CrossSectionDataset.from_points(data, sort=True)
    kind = ModelKind.parse(kind)
    init = _coerce_init(init, kind)
    layout = _Layout(init, opts)
    npar = len(layout.names)
    if len(data) < npar + 1:
        raise ValidationError(
            f"need at least {npar + 1} data points for {npar} free parameters, got {len(data)}"
        )
    x, y, err = data.x, data.sigma, data.sigma_err

    def chi2_of(p):
        if not layout.valid(p):
            return math.inf
        with np.errstate(all="ignore"):
            r = (y - layout.predict(p, x)) / err
        c = float(r @ r)
        return c if math.isfinite(c) else math.inf

    p = layout.pack(init)
    chi2 = chi2_of(p)
    if not math.isfinite(chi2):
        raise ValidationError("initial model gives a non-finite chi-square")
    lam = opts.lambda_init
    converged = False
    message = "maximum number of iterations reached"
    it = 0
    while it < opts.max_iter:
        it += 1
        J = _jacobian(layout, p, x, err, opts.rel_step)
        r = (y - layout.predict(p, x)) / err
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        if np.any(diag <= 0.0):
            bad = [layout.names[i] for i in np.flatnonzero(diag <= 0.0)]
            raise SingularMatrixError(f"model does not depend on parameter(s) {bad}")
        # inner loop: raise damping until the step lowers chi2 or becomes negligible
        while True:
            step = _solve(A + lam * np.diag(diag), g)
            if np.linalg.norm(step) <= opts.step_tol * (np.linalg.norm(p) + opts.step_tol):
                converged = True
                message = "step norm below tolerance"
                break
            trial = p + step
            chi2_new = chi2_of(trial)
            if chi2_new < chi2:
                decrease = (chi2 - chi2_new) / chi2
                p, chi2 = trial, chi2_new
                lam = max(lam / opts.lambda_down, 1e-15)
                if decrease < opts.chi2_rtol:
                    converged = True
                    message = "relative chi-square decrease below tolerance"
                break
            lam *= opts.lambda_up
            if lam > 1e20:
                converged = True
                message = "no further decrease possible"
                break
        log.debug("iteration %d: chi2=%.10g lambda=%.3g", it, chi2, lam)
        if converged:
            break
        if chi2 == 0.0:
            converged = True
            message = "exact fit"
            break

    J = _jacobian(layout, p, x, err, opts.rel_step)
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"normal matrix at the optimum is singular: {exc}") from None
    cov = 0.5 * (cov + cov.T)
    return FitResult(
        model=layout.unpack(p),
        chi2=chi2,
        dof=len(data) - npar,
        covariance=cov,
        converged=converged,
        iterations=it,
        parameter_names=layout.names,
        message=message,
    )
