import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pseudospec import (FrequencyGrid, HermitianField, InvalidArgumentError, MultitypePattern, Window,
                        assert_hermitian_psd, make_frequency_grid, read_pattern, write_pattern)


def test_window_basics():
    w = Window((4.0, 5.0))
    assert w.d == 2 and w.volume == 20.0
    assert w.contains([[2.0, -2.5], [0, 0]]).all()
    assert not w.contains([[2.1, 0]]).any()
    with pytest.raises(InvalidArgumentError):
        Window((1.0, 0.0))


def test_default_grid_at_side_10():
    g = make_frequency_grid(Window.square(10.0), 4 / 3, 1.5 * np.pi)
    assert g.shape == (21, 21)
    t = np.arange(-10, 11)
    expected = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1) * 1.5 * np.pi / 10
    np.testing.assert_allclose(g.nodes(), expected, atol=1e-13)


def test_grid_boundary_node_is_kept():
    g = make_frequency_grid(Window((1.0, 1.0)), 1.0, 2 * np.pi)
    assert list(g.axis_indices(0)) == [-1, 0, 1]
    with pytest.raises(InvalidArgumentError):
        make_frequency_grid(Window((1.0, 1.0)), 1.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        make_frequency_grid(Window((1.0, 1.0)), -1.0, 1.0)


@given(st.integers(-10, 10), st.integers(-10, 10))
def test_grid_node_symmetry(k1, k2):
    g = make_frequency_grid(Window.square(10.0))
    np.testing.assert_array_equal(g.node((-k1, -k2)), -g.node((k1, k2)))


def test_pattern_validation():
    w = Window.square(2.0)
    with pytest.raises(InvalidArgumentError):
        MultitypePattern([[3.0, 0.0]], [1], w, 1)
    with pytest.raises(InvalidArgumentError):
        MultitypePattern([[0.0, 0.0]], [2], w, 1)
    p = MultitypePattern([[0.0, 0.0], [0.5, 0.5]], [1, 2], w, 3)
    assert p.counts().tolist() == [1, 1, 0]
    with pytest.raises(ValueError):
        p.coords[0, 0] = 1.0


def test_assert_hermitian_psd_examples(rng):
    assert assert_hermitian_psd(np.eye(3), 1e-12)
    assert not assert_hermitian_psd(np.array([[1, 2], [0, 1]]), 1e-12)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    assert assert_hermitian_psd(np.outer(v, v.conj()))
    assert not assert_hermitian_psd(np.diag([1.0, -1.0]))


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_assert_hermitian_psd_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    M = a @ a.conj().T if seed % 2 else a + a.conj().T
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    assert assert_hermitian_psd(M) == assert_hermitian_psd(q @ M @ q.conj().T)


def test_hermitian_field_checks():
    g = FrequencyGrid((2 * np.pi,), (1,))
    vals = np.zeros((3, 2, 2), dtype=complex)
    vals[:] = np.eye(2)
    vals[0, 0, 1], vals[0, 1, 0] = 1j * 0.1, -1j * 0.1
    vals[2] = np.conj(vals[0])
    f = HermitianField(g, vals)
    assert f.is_valid()
    assert f.entry(1, 2)[0] == pytest.approx(0.1j)
    bad = vals.copy()
    bad[2] = vals[0]
    assert not HermitianField(g, bad).is_valid()
    with pytest.raises(InvalidArgumentError):
        HermitianField(g, np.zeros((4, 2, 2)))


def test_pattern_csv_roundtrip(tmp_path, rng):
    w = Window((6.0, 4.0))
    p = MultitypePattern(rng.uniform(-2, 2, size=(25, 2)), rng.integers(1, 3, 25), w, 2)
    write_pattern(p, tmp_path / "p.csv", tmp_path / "w.json", extra_meta={"note": "x"})
    meta = json.loads((tmp_path / "w.json").read_text())
    assert meta["side_lengths"] == [6.0, 4.0] and meta["m"] == 2
    q = read_pattern(tmp_path / "p.csv", tmp_path / "w.json")
    np.testing.assert_array_equal(q.coords, p.coords)
    np.testing.assert_array_equal(q.types, p.types)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x,y,type"
