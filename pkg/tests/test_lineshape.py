import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from gamowkit.errors import SingularMatrixError, ValidationError
from gamowkit.lineshape import (
    CrossSectionDataset,
    FitOptions,
    LineshapeModel,
    ModelKind,
    amplitude,
    cross_section,
    fit,
    synthesize,
    weighted_residuals,
)
from gamowkit.pole_param import NonRelResonance, ResonanceParams, convert, params_from_pole, pole_from_params

Z_POLE = ResonanceParams("polesqrt", 91.1611, 2.4943)
Z_GRID = np.linspace(88.0, 94.0, 200)
Z_RESIDUE = 91.1611 * 2.4943 * 6.44  # peak cross section about 41.5


def z_model(**kw):
    kw.setdefault("residue", Z_RESIDUE)
    return LineshapeModel("relbw", kw.pop("resonance", Z_POLE), **kw)


def displaced(model, dM=0.5):
    r = model.resonance
    return LineshapeModel(model.kind, type(r)(r.convention, r.M + dM, r.Gamma), residue=model.residue,
                          background=model.background)


# ---------------------------------------------------------------- models


def test_model_validation():
    with pytest.raises(ValidationError):
        LineshapeModel("relbw", Z_POLE, residue=0)
    with pytest.raises(ValidationError):
        LineshapeModel("relbw", Z_POLE, background=[0.0] * 6)
    with pytest.raises(ValidationError):
        LineshapeModel("nonrelbw", Z_POLE)
    with pytest.raises(ValidationError):
        LineshapeModel("onshellbw", Z_POLE)
    with pytest.raises(ValidationError):
        LineshapeModel("breitwigner", Z_POLE)
    m = LineshapeModel("nonrelbw", NonRelResonance(1.0, 0.1), channel_label="eta=1")
    assert m.kind is ModelKind.NONREL_BW and m.channel_label == "eta=1"


def test_nonrel_on_peak():
    m = LineshapeModel("nonrelbw", NonRelResonance(5.0, 2.0))
    assert amplitude(m, 5.0) == pytest.approx(-1j, abs=1e-15)
    assert cross_section(m, 5.0) == pytest.approx(1.0, rel=1e-15)


def test_nonrel_half_maximum_at_half_width():
    m = LineshapeModel("nonrelbw", NonRelResonance(5.0, 2.0), residue=0.7)
    peak = cross_section(m, 5.0)
    assert cross_section(m, 4.0) == pytest.approx(peak / 2, rel=1e-14)
    assert cross_section(m, 6.0) == pytest.approx(peak / 2, rel=1e-14)


def test_nonrel_peak_location():
    m = LineshapeModel("nonrelbw", NonRelResonance(5.0, 0.8), residue=2.0)
    res = optimize.minimize_scalar(lambda E: -cross_section(m, E), bracket=(4.0, 5.0, 6.0), tol=1e-12)
    assert res.x == pytest.approx(5.0, abs=1e-6)


def test_relbw_amplitude_against_high_precision():
    with mpmath.workdps(40):
        M, G = mpmath.mpf("91.1611"), mpmath.mpf("2.4943")
        s_r = (M - 1j * G / 2) ** 2
        ref = complex(1 / (M**2 - s_r))
    a = amplitude(z_model(residue=1.0), 91.1611)
    assert abs(a - ref) < 1e-12 * abs(ref)


def test_relbw_fwhm_close_to_width():
    m = z_model()
    peak = optimize.minimize_scalar(lambda x: -cross_section(m, x), bracket=(90.5, 91.2, 92.0), tol=1e-12)
    half = -peak.fun / 2
    lo = optimize.brentq(lambda x: cross_section(m, x) - half, 85.0, peak.x, xtol=1e-12)
    hi = optimize.brentq(lambda x: cross_section(m, x) - half, peak.x, 97.0, xtol=1e-12)
    assert hi - lo == pytest.approx(Z_POLE.Gamma, rel=0.01)


def test_onshell_finite_on_real_axis():
    m = LineshapeModel("onshellbw", ResonanceParams("onshell", 91.1875, 2.4939))
    x = np.linspace(1.0, 200.0, 20001)
    assert np.all(np.isfinite(cross_section(m, x)))


def test_onshell_is_rescaled_pole_amplitude():
    os_params = ResonanceParams("onshell", 91.1875, 2.4939)
    m_os = LineshapeModel("onshellbw", os_params, residue=3.0)
    pole = pole_from_params(os_params)
    m_pole = LineshapeModel("relbw", params_from_pole(pole, "polesqrt"),
                            residue=3.0 / (1 + 1j * os_params.Gamma / os_params.M))
    x = np.linspace(85, 97, 50)
    assert np.allclose(amplitude(m_os, x), amplitude(m_pole, x), rtol=1e-10)


def test_background_levels():
    res = NonRelResonance(5.0, 2.0)
    amp_bg = LineshapeModel("nonrelbw", res, background=[0.5])
    xs_bg = LineshapeModel("nonrelbw", res, background=[0.5], background_level="cross_section")
    assert cross_section(amp_bg, 5.0) == pytest.approx(abs(-1j + 0.5) ** 2)
    assert cross_section(xs_bg, 5.0) == pytest.approx(1.5)
    centred = LineshapeModel("nonrelbw", res, background=[0.0, 1.0], background_center=5.0)
    assert amplitude(centred, 7.0) == pytest.approx(1 / (2 + 1j) + 2.0)


def test_domain_checks():
    with pytest.raises(ValidationError):
        cross_section(LineshapeModel("nonrelbw", NonRelResonance(1.0, 0.1)), -0.5)
    with pytest.raises(ValidationError):
        amplitude(z_model(), 0.0)


# ---------------------------------------------------------------- data


def test_dataset_validation():
    with pytest.raises(ValidationError):
        CrossSectionDataset([1, 1], [1, 1], [1, 1])
    with pytest.raises(ValidationError):
        CrossSectionDataset([1, 2], [1, 1], [1, 0])
    with pytest.raises(ValidationError):
        CrossSectionDataset([1, 2], [1, -1], [1, 1])
    d = CrossSectionDataset.from_points([(2, 1, 0.1), (1, 2, 0.2)], sort=True)
    assert d.points == [(1.0, 2.0, 0.2), (2.0, 1.0, 0.1)]


def test_synthesize_noiseless_and_deterministic():
    m = z_model()
    d0 = synthesize(m, Z_GRID, 0.0, 1)
    assert np.array_equal(d0.sigma, cross_section(m, Z_GRID))
    assert np.all(d0.sigma_err == 1e-12)
    assert synthesize(m, Z_GRID, 0.01, 42) == synthesize(m, Z_GRID, 0.01, 42)
    assert synthesize(m, Z_GRID, 0.01, 42) != synthesize(m, Z_GRID, 0.01, 43)


def test_synthesize_residual_variance():
    m = z_model()
    r = weighted_residuals(m, synthesize(m, Z_GRID, 0.01, 42))
    # sample variance of 200 unit normals: sd about 0.1
    assert 0.7 < np.var(r, ddof=1) < 1.3
    pooled = np.concatenate([weighted_residuals(m, synthesize(m, Z_GRID, 0.01, s)) for s in range(50)])
    assert np.var(pooled, ddof=1) == pytest.approx(1.0, abs=0.05)


def test_synthesize_validation():
    with pytest.raises(ValidationError):
        synthesize(z_model(), [], 0.01, 1)
    with pytest.raises(ValidationError):
        synthesize(z_model(), [90, 89], 0.01, 1)
    with pytest.raises(ValidationError):
        synthesize(z_model(), Z_GRID, -0.1, 1)


# ---------------------------------------------------------------- fitting


def noiseless(model, grid=Z_GRID, rel_err=0.01):
    d = synthesize(model, grid, 0.0, 0)
    return CrossSectionDataset(d.x, d.sigma, rel_err * d.sigma)


def test_fit_at_truth_converges_immediately():
    m = z_model()
    r = fit(noiseless(m), "relbw", m)
    assert r.converged
    assert r.iterations <= 2
    assert r.chi2 < 1e-16


def test_fit_recovers_displaced_mass():
    m = z_model()
    d = synthesize(m, Z_GRID, 0.01, 3)
    r = fit(d, "relbw", displaced(m))
    assert r.converged
    assert abs(r.model.mass - 91.1611) < 3 * r.error_of("M")
    assert abs(r.model.width - 2.4943) < 3 * r.error_of("Gamma")
    assert 0.5 <= r.chi2_per_dof <= 1.5
    assert r.dof == 197
    assert np.all(np.linalg.eigvalsh(r.covariance) >= 0)
    assert r.model.residue.imag == 0.0


def test_fit_nonrel_with_background():
    truth = LineshapeModel("nonrelbw", NonRelResonance(10.0, 1.0), residue=2.0 * np.exp(0.4j), background=[0.3, 0.02],
                           background_center=10.0)
    grid = np.linspace(5.0, 15.0, 150)
    d = noiseless(truth, grid)
    start = LineshapeModel("nonrelbw", NonRelResonance(10.3, 1.3), residue=1.5, background=[0.1, 0.0],
                           background_center=10.0)
    r = fit(d, "nonrelbw", start)
    assert r.converged
    assert r.parameter_names == ("E_R", "Gamma", "residue_abs", "residue_phase", "bg0", "bg1")
    assert r.model.mass == pytest.approx(10.0, abs=1e-6)
    assert r.model.width == pytest.approx(1.0, abs=1e-6)
    assert r.model.residue == pytest.approx(truth.residue, abs=1e-6)
    assert r.model.background == pytest.approx(truth.background, abs=1e-6)


def test_fit_scaling_covariance():
    m = z_model()
    d = synthesize(m, Z_GRID, 0.01, 8)
    c = 37.5
    r1 = fit(d, "relbw", displaced(m, 0.2))
    r2 = fit(d.scaled(c), "relbw", displaced(m, 0.2))
    assert r2.model.mass == pytest.approx(r1.model.mass, rel=1e-8)
    assert r2.model.width == pytest.approx(r1.model.width, rel=1e-8)
    assert abs(r2.model.residue) ** 2 == pytest.approx(c * abs(r1.model.residue) ** 2, rel=1e-7)


def test_fit_order_invariant():
    m = z_model()
    d = synthesize(m, Z_GRID, 0.01, 9)
    pts = d.points
    rng = np.random.default_rng(0)
    shuffled = [pts[i] for i in rng.permutation(len(pts))]
    r1 = fit(d, "relbw", displaced(m))
    r2 = fit(shuffled, "relbw", displaced(m))
    assert r2.model.mass == r1.model.mass
    assert r2.chi2 == r1.chi2


def test_polesqrt_and_barmass_fits_agree_on_pole():
    m = z_model()
    d = synthesize(m, Z_GRID, 0.01, 4)
    r_ps = fit(d, "relbw", displaced(m))
    bar = convert(Z_POLE, "barmass")
    r_bar = fit(d, "relbw", z_model(resonance=ResonanceParams("barmass", bar.M + 0.3, bar.Gamma)))
    s1 = pole_from_params(r_ps.model.resonance).s_r
    s2 = pole_from_params(r_bar.model.resonance).s_r
    assert abs(s1 - s2) < 1e-6 * abs(s1)


def test_fit_converts_between_relativistic_kinds():
    m = z_model()
    d = synthesize(m, Z_GRID, 0.001, 5)
    r = fit(d, "onshellbw", m)
    assert r.model.kind is ModelKind.ONSHELL_BW
    assert r.model.resonance.convention.value == "onshell"
    with pytest.raises(ValidationError):
        fit(d, "nonrelbw", m)


def test_fit_too_few_points():
    m = z_model()
    d = synthesize(m, Z_GRID[:3], 0.01, 1)
    with pytest.raises(ValidationError):
        fit(d, "relbw", m)


def test_fit_singular_normal_matrix():
    m = z_model()
    d = synthesize(m, Z_GRID, 0.01, 1)
    # without a background the residue phase does not enter |a|^2
    with pytest.raises(SingularMatrixError):
        fit(d, "relbw", m, FitOptions(fix_phase=False))


def test_fit_non_convergence_reported():
    m = z_model()
    d = synthesize(m, Z_GRID, 0.01, 1)
    r = fit(d, "relbw", displaced(m, 1.0), FitOptions(max_iter=1))
    assert not r.converged
    assert r.iterations == 1
    assert r.chi2 < math.inf


@settings(max_examples=25, deadline=None)
@given(E=st.floats(1.0, 50.0), G=st.floats(0.05, 2.0), r=st.floats(0.1, 10.0))
def test_nonrel_noiseless_recovery(E, G, r):
    truth = LineshapeModel("nonrelbw", NonRelResonance(E, G), residue=r)
    grid = np.linspace(max(0.0, E - 5 * G), E + 5 * G, 80)
    start = LineshapeModel("nonrelbw", NonRelResonance(E + 0.2 * G, 1.2 * G), residue=r)
    res = fit(noiseless(truth, grid), "nonrelbw", start)
    assert res.converged
    assert res.model.mass == pytest.approx(E, rel=1e-8)
    assert res.model.width == pytest.approx(G, rel=1e-7)
