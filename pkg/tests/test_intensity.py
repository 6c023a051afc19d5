import numpy as np
import pytest

from pseudospec import (ConstantIntensity, CoxModelParams, DegenerateFitError, InvalidArgumentError,
                        MultitypePattern, SimulationConfig, Window, dft_bias_vector, fit_intensity,
                        make_taper, sample_cox_pattern, sample_poisson, zero_intensity)
from pseudospec.intensity import evaluate_intensity
from pseudospec.simulation import M2_INTENSITY, replicate_seeds


def test_evaluation_examples():
    assert evaluate_intensity(ConstantIntensity((0.5, 1.5)), [0.3, -0.2], 1)[0] == 0.5
    assert evaluate_intensity(M2_INTENSITY, [0.0, 0.0], 1)[0] == pytest.approx(3.0)
    assert evaluate_intensity(M2_INTENSITY, [0.5, 0.5], 2)[0] == pytest.approx(2.0)
    with pytest.raises(InvalidArgumentError):
        M2_INTENSITY.evaluate([0.6, 0.0], 1)


def test_constant_fit_is_closed_form(rng):
    w = Window.square(10.0)
    pts = rng.uniform(-5, 5, size=(37, 2))
    p = MultitypePattern(pts, [1] * 30 + [2] * 7, w, 2)
    fit = fit_intensity(p, "constant")
    assert fit.model.beta == (0.3, 0.07)
    empty = MultitypePattern(np.empty((0, 2)), [], w, 2)
    assert fit_intensity(empty, "constant").model.beta == (0.0, 0.0)
    with pytest.raises(DegenerateFitError):
        fit_intensity(empty, ["const", "x1sq"])


def test_poisson_constant_fit_within_3se():
    w = Window.square(20.0)
    pts = sample_poisson(2.0, w, seed=11)
    p = MultitypePattern(pts, np.ones(len(pts), int), w, 1)
    beta = fit_intensity(p, "constant").model.beta[0]
    assert abs(beta - 2.0) < 3 * np.sqrt(2.0 / 400)


def test_loglinear_fit_recovers_poisson_surface():
    w = Window.square(40.0)
    lam = lambda x: M2_INTENSITY.evaluate(w.to_unit(x), 1)
    pts = sample_poisson(lam, w, seed=3, bound=3.0)
    p = MultitypePattern(pts, np.ones(len(pts), int), w, 1)
    fit = fit_intensity(p, ["const", "x1sq", "x2sq"])
    assert fit.converged
    assert max(fit.residual_norms) <= 1e-8
    # about 3700 points; the quadratic coefficients have SE near 0.22
    np.testing.assert_allclose(fit.model.beta[0], [np.log(3), -2, -2], atol=0.7)


@pytest.mark.slow
def test_m2_loglinear_recovery_over_replicates():
    params = CoxModelParams.preset("M2")
    cfg = SimulationConfig(Window.square(40.0))
    betas = []
    for s in replicate_seeds(5, 50):
        pat = sample_cox_pattern(params, cfg, seed=np.random.default_rng(s))
        betas.append(fit_intensity(pat, ["const", "x1sq", "x2sq"]).model.beta)
    betas = np.array(betas)
    mean = betas.mean(axis=0)
    se = betas.std(axis=0, ddof=1) / np.sqrt(len(betas))
    truth = np.array([[np.log(3), -2, -2], [np.log(2), -2, 2]])
    assert np.all(np.abs(mean - truth) < 3 * se + 0.02)


def test_bias_vector_examples():
    w = Window.square(10.0)
    unit = make_taper(0)
    assert np.all(dft_bias_vector(zero_intensity(2), unit, w, [[0.3, 0.1], [1.0, 2.0]]) == 0)
    model = ConstantIntensity((2.0,))
    v = dft_bias_vector(model, unit, w, [0.0, 0.0])
    assert v[0] == pytest.approx(2.0 * 10 / (2 * np.pi))
    assert abs(dft_bias_vector(model, unit, w, [2 * np.pi / 10, 0.0])[0]) < 1e-12


def test_bias_vector_conjugate_symmetry():
    w = Window.square(10.0)
    t = make_taper(0.1)
    om = np.array([[0.4, -0.9], [1.7, 0.2]])
    np.testing.assert_allclose(dft_bias_vector(M2_INTENSITY, t, w, -om),
                               np.conj(dft_bias_vector(M2_INTENSITY, t, w, om)), atol=1e-12)
