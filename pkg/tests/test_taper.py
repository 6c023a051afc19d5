import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pseudospec import InvalidArgumentError, Window, make_taper, taper_moment, taper_value
from pseudospec.taper import CosineBellTaper, Integrand, window_fourier


def test_taper_value_examples():
    assert taper_value(make_taper(0.025), (0.0, 0.0)) == 1.0
    assert taper_value(make_taper(0.025), (-0.5, 0.1)) == 0.0
    assert taper_value(make_taper(0.1), (-0.5 + 0.05, 0.0)) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("a", [0.0 - 1e-9, 0.5, 0.7])
def test_cosine_bell_rejects_bad_a(a):
    with pytest.raises(InvalidArgumentError):
        CosineBellTaper(a)


@given(st.floats(0.001, 0.49), st.floats(-0.6, 0.6))
def test_taper_bounds_and_plateau(a, x):
    t = make_taper(a)
    v = float(t.profile(np.array([x]))[0])
    assert 0.0 <= v <= 1.0
    if abs(x) > 0.5:
        assert v == 0.0
    if abs(x) <= 0.5 - a:
        assert v == 1.0


def test_unit_taper_moments():
    t = make_taper(0)
    assert taper_moment(t, 1) == 1.0 and taper_moment(t, 4) == 1.0


def test_h2_against_riemann_sum():
    t = make_taper(0.025)
    n = 10 ** 6
    x = -0.5 + (np.arange(n) + 0.5) / n
    riemann = float(np.mean(t.profile(x) ** 2))
    h2 = taper_moment(t, 2, d=1)
    assert 0.95 < h2 < 1.0
    assert h2 == pytest.approx(riemann, abs=1e-9)


def test_h2_decreases_with_a():
    vals = [taper_moment(make_taper(a), 2) for a in (0.025, 0.1, 0.25)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_window_fourier_examples():
    w = Window.square(10.0)
    one = Integrand.constant(2)
    assert window_fourier(one, w, [0.0, 0.0]).real == pytest.approx(100.0)
    t = make_taper(0.025)
    h2 = Integrand.from_taper(t, 2, power=2)
    assert window_fourier(h2, w, [0.0, 0.0]).real == pytest.approx(100 * taper_moment(t, 2), rel=1e-10)
    w1 = Window.square(10.0, d=1)
    assert abs(window_fourier(Integrand.constant(1), w1, [2 * np.pi / 10])) < 1e-12


def test_window_fourier_matches_sinc():
    w = Window((10.0, 7.0))
    om = np.array([[0.3, -1.1], [2.0, 0.5], [4.4, 4.1]])
    got = window_fourier(Integrand.constant(2), w, om)
    exp = np.prod(w.sides * np.sinc(om * w.sides / (2 * np.pi)), axis=1)
    np.testing.assert_allclose(got, exp, rtol=1e-8, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 0.3))
def test_window_fourier_symmetry_and_bound(w1, w2, a):
    win = Window.square(10.0)
    g = Integrand.from_taper(make_taper(a), 2, power=2)
    f = window_fourier(g, win, [w1, w2])
    fm = window_fourier(g, win, [-w1, -w2])
    assert abs(fm - np.conj(f)) < 1e-10 * 100
    assert abs(f) <= window_fourier(g.abs(), win, [0.0, 0.0]).real * (1 + 1e-12)


def test_general_and_separable_paths_agree():
    win = Window.square(8.0)
    t = make_taper(0.1)
    sep = Integrand.from_taper(t, 2, power=2)
    gen = Integrand(2, func=lambda u: t(u) ** 2, breakpoints=[t.breakpoints] * 2)
    om = np.array([[0.7, 1.3], [3.0, -2.0]])
    np.testing.assert_allclose(window_fourier(gen, win, om), window_fourier(sep, win, om), atol=1e-10)
