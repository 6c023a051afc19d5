import numpy as np
import pytest
from scipy import integrate

from pseudospec import (ConfigError, ConstantIntensity, CoxModelParams, InvalidArgumentError,
                        InvalidIntensityError, MultitypePattern, SimulationConfig, UnsupportedOperationError,
                        Window, closed_form_L2, cox_covariance, reweight_by_thinning, sample_cox_pattern,
                        sample_poisson)
from pseudospec.bench import pair_correlation
from pseudospec.geometry import write_pattern
from pseudospec.taper import unit_integral
from pseudospec.simulation import (M2_INTENSITY, compound_field, draw_parents, kernel_overlap,
                                   latent_fields_on_grid, latent_intensity, replicate_seeds, shot_noise_field)

M1 = CoxModelParams.preset("M1")
M1_L2_AT_ZERO = np.array([[1.36745481, 0.99474796], [0.99474796, 1.51848943]])


def test_poisson_examples():
    w = Window.square(20.0)
    assert len(sample_poisson(0.0, w, seed=1)) == 0
    counts = [len(sample_poisson(2.0, w, seed=s)) for s in range(1000)]
    assert abs(np.mean(counts) - 800) < 3 * np.sqrt(800 / 1000)
    with pytest.raises(InvalidIntensityError):
        sample_poisson(-1.0, w, seed=1)
    with pytest.raises(InvalidIntensityError):
        sample_poisson(lambda x: np.full(len(x), -1.0), w, seed=1, bound=1.0)


def test_thinning_at_the_bound_keeps_everything():
    w = Window.square(10.0)
    a = sample_poisson(lambda x: np.full(len(x), 1.5), w, seed=9, bound=1.5)
    b = sample_poisson(lambda x: np.full(len(x), 1.5), w, seed=9, bound=1.5)
    np.testing.assert_array_equal(a, b)
    rng = np.random.default_rng(9)
    n = rng.poisson(1.5 * 100)
    assert len(a) == n


def test_shot_noise_examples():
    assert shot_noise_field(np.empty((0, 2)), 1.0, 0.6, [0.0, 0.0])[0] == 0
    one = np.zeros((1, 2))
    assert shot_noise_field(one, 1.0, 0.6, [0.0, 0.0], kernel_norm="linear")[0] == pytest.approx(0.6649038, abs=1e-7)
    assert shot_noise_field(one, 1.0, 0.6, [0.0, 0.0])[0] == pytest.approx(1 / (2 * np.pi * 0.36))


def test_kernel_mass_matches_radial_quadrature():
    for norm, expected in (("planar", 1.0), ("linear", np.sqrt(2 * np.pi) * 0.6)):
        p = CoxModelParams(ConstantIntensity((1.0,)), (1.0,), (0.6,), np.zeros((1, 1)), kernel_norm=norm)
        mass = integrate.quad(lambda r: 2 * np.pi * r * p.phi(0, r), 0, np.inf)[0]
        assert mass == pytest.approx(expected, rel=1e-10)


def test_shot_noise_mean_is_one():
    w = Window.square(1.0)
    vals = []
    for s in range(500):
        parents = draw_parents(M1, w, 2.4, seed=s)
        vals.append(shot_noise_field(parents[0], M1.kappa[0], M1.sigma[0], [0.0, 0.0])[0])
    vals = np.array(vals)
    # truncation at 4 sigma removes a fraction exp(-8) of the mass
    assert abs(vals.mean() - 1) < 3 * vals.std(ddof=1) / np.sqrt(len(vals)) + 1e-3


def test_compound_field_examples():
    none = CoxModelParams(ConstantIntensity((1.0, 1.0)), M1.kappa, M1.sigma, np.zeros((3, 2)))
    parents = [np.zeros((1, 2))] * 3
    assert compound_field(parents, none, 1, [0.0, 0.0])[0] == 1.0
    xi = np.zeros((3, 2))
    xi[2, 0] = 0.7
    p = CoxModelParams(ConstantIntensity((1.0, 1.0)), M1.kappa, M1.sigma, xi)
    single = [np.empty((0, 2)), np.empty((0, 2)), np.zeros((1, 2))]
    pref = np.exp(-p.kappa[2] * 0.7 / p.phi0(2))
    assert compound_field(single, p, 1, [0.0, 0.0])[0] == pytest.approx(pref * 1.7)
    with pytest.raises(InvalidArgumentError):
        CoxModelParams(ConstantIntensity((1.0, 1.0)), M1.kappa, M1.sigma, np.full((3, 2), -1.0))


def test_first_moment_identity_at_probe_points():
    w = Window.square(10.0)
    probes = np.array([[0, 0], [2, -1], [-3, 3], [4.5, 4.5], [-4, 0.5]], dtype=float)
    vals = np.array([[latent_intensity(draw_parents(M1, w, 4.0, seed=s), M1, w, i, probes)
                      for i in (1, 2)] for s in range(500)])
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(len(vals))
    target = np.array([0.5, 1.5])[:, None]
    assert np.all(np.abs(mean - target) < 3 * se + 2e-3)


def test_unit_field_counts_match_intensity_integral():
    params = CoxModelParams.preset("M2")
    w = Window.square(10.0)
    cfg = SimulationConfig(w, unit_field=True)
    counts = np.array([sample_cox_pattern(params, cfg, seed=s).counts() for s in range(200)])
    expected = [100 * unit_integral(M2_INTENSITY.integrand(j)) for j in (1, 2)]
    assert np.all(np.abs(counts.mean(axis=0) - expected) < 3 * np.sqrt(np.array(expected) / 200))


def test_closed_form_L2_examples():
    far = closed_form_L2(M1, [40.0, 0.0])
    np.testing.assert_allclose(far, 0, atol=1e-12)
    p = CoxModelParams(ConstantIntensity((1.0, 1.0)), M1.kappa, M1.sigma, [[0, 0], [0, 0], [0.3, 0]])
    assert closed_form_L2(p, [0.4, 0.1])[0, 1] == 0
    np.testing.assert_allclose(closed_form_L2(M1, [0.0, 0.0]), M1_L2_AT_ZERO, rtol=1e-8)
    np.testing.assert_allclose(closed_form_L2(M1, [0.3, -0.2]), closed_form_L2(M1, [-0.2, 0.3]))


@pytest.mark.parametrize("j", [0, 1, 2])
@pytest.mark.parametrize("r", [0.0, 0.5, 1.3])
def test_kernel_overlap_against_quadrature(j, r):
    s = M1.sigma[j]
    phi = lambda x, y: M1.phi(j, np.hypot(x, y))
    lim = 8 * s
    val = integrate.dblquad(lambda y, x: phi(x + r, y) * phi(x, y), -lim, lim, -lim, lim,
                            epsabs=1e-14, epsrel=1e-11)[0]
    assert kernel_overlap(M1, j, r) == pytest.approx(val / M1.phi0(j) ** 2, rel=1e-8)


def test_linear_normalisation_has_no_closed_form():
    with pytest.raises(UnsupportedOperationError):
        cox_covariance(CoxModelParams.preset("M1", kernel_norm="linear"))


def test_config_errors():
    w = Window.square(10.0)
    with pytest.raises(ConfigError):
        sample_cox_pattern(M1, SimulationConfig(w, seed=1, buffer=1.0))
    with pytest.raises(ConfigError):
        sample_cox_pattern(M1, SimulationConfig(w, seed=1, cell=1e-3, max_cells=10 ** 6))


def test_seeded_determinism_is_byte_exact(tmp_path):
    cfg = SimulationConfig(Window.square(10.0), seed=123)
    a, b = sample_cox_pattern(M1, cfg), sample_cox_pattern(M1, cfg)
    write_pattern(a, tmp_path / "a.csv")
    write_pattern(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.coords.tobytes() == b.coords.tobytes()
    c = sample_cox_pattern(M1, cfg, seed=124)
    assert len(c) != len(a) or not np.array_equal(c.coords, a.coords)


def test_cell_halving_converges():
    w = Window.square(10.0)
    parents = draw_parents(M1, w, 4.0, seed=5)
    totals = []
    for cell in (0.2, 0.1, 0.05, 0.025):
        f, _, sizes = latent_fields_on_grid(parents, M1, w, cell)
        totals.append(f.sum(axis=(1, 2)) * np.prod(sizes))
    steps = np.abs(np.diff(np.array(totals), axis=0))
    assert np.all(steps[-1] < steps[0])
    np.testing.assert_allclose(totals[-1], totals[-2], rtol=1e-3)


def test_reweighting_errors_and_identity():
    w = Window.square(10.0)
    observed = MultitypePattern(np.zeros((1, 2)), [1], w, 1)
    with pytest.raises(UnsupportedOperationError):
        reweight_by_thinning(observed, ConstantIntensity((1.0,)))
    p = CoxModelParams(ConstantIntensity((1.0, 1.0)), M1.kappa, M1.sigma, M1.xi)
    pat = sample_cox_pattern(p, SimulationConfig(w, seed=3))
    same = reweight_by_thinning(pat, ConstantIntensity((1.0, 1.0)), seed=1)
    np.testing.assert_array_equal(same.coords, pat.coords)


def test_reweighting_gives_unit_intensity():
    w = Window.square(10.0)
    cfg = SimulationConfig(w, unit_field=True)
    params = CoxModelParams.preset("M2")
    counts = np.array([reweight_by_thinning(sample_cox_pattern(params, cfg, seed=s), M2_INTENSITY, seed=s)
                       .counts() for s in range(200)])
    assert np.all(np.abs(counts.mean(axis=0) - 100) < 3 * np.sqrt(100 / 200))


def test_reweighting_superposes_copies_for_low_intensity():
    w = Window.square(10.0)
    cfg = SimulationConfig(w, unit_field=True)
    params = CoxModelParams(ConstantIntensity((0.5, 1.5)), M1.kappa, M1.sigma, M1.xi)
    counts = np.array([reweight_by_thinning(sample_cox_pattern(params, cfg, seed=s), params.intensity,
                                            seed=s).counts() for s in range(200)])
    assert np.all(np.abs(counts.mean(axis=0) - 100) < 3 * np.sqrt(100 / 200))


@pytest.mark.slow
@pytest.mark.parametrize("name", ["M1", "M3"])
def test_empirical_pcf_matches_closed_form(name):
    params = CoxModelParams.preset(name)
    w = Window.square(20.0)
    radii = np.array([0.5, 1.0, 2.0])
    est = []
    for s in replicate_seeds(99, 40):
        pat = sample_cox_pattern(params, SimulationConfig(w), seed=np.random.default_rng(s))
        est.append([pair_correlation(pat, params.intensity, i, j, radii) for i, j in ((1, 1), (2, 2), (1, 2))])
    est = np.array(est)
    mean = est.mean(axis=0)
    se = est.std(axis=0, ddof=1) / np.sqrt(len(est))
    truth = np.array([[closed_form_L2(params, [r, 0])[i, j] + 1 for r in radii]
                      for i, j in ((0, 0), (1, 1), (0, 1))])
    # kernel smoothing in r (h = 0.15) adds a small bias where the PCF is curved
    assert np.all(np.abs(mean - truth) < 4 * se + 0.05)
    if name == "M3":
        assert mean[2, 0] < 1 and truth[2, 0] < 1
