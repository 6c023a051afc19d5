"""Tapered DFTs, feasible periodograms and kernel-smoothed spectrum estimates.

Points are irregular, so DFTs are direct sums.  On a frequency grid the
exponential factorises per axis and the sum becomes a chain of matrix
products, ``O(N * sum_j n_j + prod_j n_j * N)`` instead of a dense
``N x |grid|`` exponential.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import signal

from .errors import InvalidArgumentError, InvalidBandwidthError
from .geometry import FrequencyGrid, HermitianField, MultitypePattern
from .intensity import IntensityModel, dft_bias_vector
from .taper import Taper


@dataclass(frozen=True)
class DftVector:
    omega: np.ndarray
    raw: np.ndarray
    centered: np.ndarray


def _dft_norm(taper: Taper, pattern: MultitypePattern) -> float:
    d = pattern.window.d
    return (2 * np.pi) ** (-d / 2) * taper.moment(2, d) ** -0.5 * pattern.window.volume ** -0.5


def compute_dft(pattern: MultitypePattern, taper: Taper, omegas) -> np.ndarray:
    """Raw tapered DFT at arbitrary frequencies: ``(K, m)`` or ``(m,)``."""
    omegas = np.asarray(omegas, dtype=float)
    single = omegas.ndim == 1
    om = np.atleast_2d(omegas)
    out = np.zeros((om.shape[0], pattern.m), dtype=complex)
    weights = taper(pattern.window.to_unit(pattern.coords)) if len(pattern) else np.empty(0)
    for j in range(1, pattern.m + 1):
        sel = pattern.types == j
        if not np.any(sel):
            continue
        phase = np.exp(-1j * (pattern.coords[sel] @ om.T))
        out[:, j - 1] = weights[sel] @ phase
    out *= _dft_norm(taper, pattern)
    return out[0] if single else out


def compute_dft_grid(pattern: MultitypePattern, taper: Taper, grid: FrequencyGrid) -> np.ndarray:
    """Raw tapered DFT on every grid node: ``(*grid.shape, m)``."""
    d = grid.d
    if d != pattern.window.d:
        raise InvalidArgumentError("grid and window dimensions differ")
    out = np.zeros(grid.shape + (pattern.m,), dtype=complex)
    if len(pattern) == 0:
        return out
    weights = taper(pattern.window.to_unit(pattern.coords))
    letters = string.ascii_lowercase[:d]
    expr = "p," + ",".join(f"p{c}" for c in letters) + "->" + letters
    for j in range(1, pattern.m + 1):
        sel = pattern.types == j
        if not np.any(sel):
            continue
        pts = pattern.coords[sel]
        factors = [np.exp(-1j * np.outer(pts[:, a], grid.axis_nodes(a))) for a in range(d)]
        out[..., j - 1] = np.einsum(expr, weights[sel], *factors, optimize=True)
    out *= _dft_norm(taper, pattern)
    return out


@dataclass(frozen=True, eq=False)
class Periodogram:
    """Feasible periodogram on a grid plus the DFTs it was built from."""

    field: HermitianField
    raw: np.ndarray
    centered: np.ndarray
    model: Optional[IntensityModel] = None

    @property
    def grid(self) -> FrequencyGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def m(self) -> int:
        return self.field.m

    def dft(self, k) -> DftVector:
        pos = self.grid.position(k)
        return DftVector(self.grid.node(k), self.raw[pos], self.centered[pos])


def outer_field(vectors: np.ndarray) -> np.ndarray:
    """``v v^*`` for every vector along the last axis."""
    return vectors[..., :, None] * np.conj(vectors[..., None, :])


def feasible_periodogram(pattern: MultitypePattern, taper: Taper, model: Optional[IntensityModel],
                         grid: FrequencyGrid) -> Periodogram:
    """Periodogram of the DFT centred by the expected DFT under ``model``.

    ``model=None`` (or an all-zero model) gives the uncentred periodogram.
    """
    raw = compute_dft_grid(pattern, taper, grid)
    centered = raw
    if model is not None:
        if model.m != pattern.m:
            raise InvalidArgumentError("intensity model and pattern disagree on m")
        bias = dft_bias_vector(model, taper, pattern.window, grid.nodes().reshape(-1, grid.d))
        centered = raw - bias.reshape(raw.shape)
    values = outer_field(centered)
    return Periodogram(HermitianField(grid, values), raw, centered, model)


# -- kernels -------------------------------------------------------------------

def triangular_profile(x):
    return np.maximum(1.0 - np.abs(np.asarray(x, dtype=float)), 0.0)


@dataclass(frozen=True)
class KernelSpec:
    """Smoothing kernel on ``[-1, 1]^d`` with bandwidth vector ``b``.

    Separable kernels give ``profile`` (1-D, integrating to one); general
    kernels give ``func`` acting on ``(n, d)`` arrays.
    """

    bandwidth: tuple
    profile: Optional[Callable] = triangular_profile
    func: Optional[Callable] = None
    name: str = "triangular"

    def __post_init__(self):
        b = tuple(float(v) for v in np.atleast_1d(self.bandwidth))
        if any(not v > 0 for v in b):
            raise InvalidArgumentError(f"bandwidth must be positive, got {b}")
        if (self.profile is None) == (self.func is None):
            raise InvalidArgumentError("give exactly one of profile or func")
        object.__setattr__(self, "bandwidth", b)

    @classmethod
    def triangular(cls, b, d: int = 2) -> "KernelSpec":
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if b.size == 1:
            b = np.repeat(b, d)
        return cls(tuple(b))

    @classmethod
    def custom(cls, func: Callable, b, d: int = 2, name: str = "custom",
               check: bool = True) -> "KernelSpec":
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if b.size == 1:
            b = np.repeat(b, d)
        spec = cls(tuple(b), profile=None, func=func, name=name)
        if check:
            validate_kernel(func, len(b))
        return spec

    @property
    def d(self) -> int:
        return len(self.bandwidth)

    @property
    def separable(self) -> bool:
        return self.profile is not None

    def unscaled(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all(np.abs(x) <= 1.0, axis=1)
        if self.separable:
            val = np.prod(self.profile(x), axis=1)
        else:
            val = np.asarray(self.func(x), dtype=float)
        return np.where(inside, val, 0.0)

    def scaled(self, x) -> np.ndarray:
        """``K_b(x) = (b_1 ... b_d)^{-1} K(x / b)``."""
        b = np.asarray(self.bandwidth)
        return self.unscaled(np.atleast_2d(x) / b) / np.prod(b)

    def with_bandwidth(self, b) -> "KernelSpec":
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if b.size == 1:
            b = np.repeat(b, self.d)
        return KernelSpec(tuple(b), self.profile, self.func, self.name)


def validate_kernel(func: Callable, d: int, tol: float = 1e-6, n: int = 40) -> None:
    """Check non-negativity, symmetry and unit mass of a kernel on ``[-1,1]^d``."""
    x, w = np.polynomial.legendre.leggauss(n)
    # two panels per axis so kinks at the origin are integrated exactly
    x = np.concatenate([(x - 1) / 2, (x + 1) / 2])
    w = np.concatenate([w, w]) / 2
    mesh = np.meshgrid(*[x] * d, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    wts = np.prod(np.stack([m.ravel() for m in np.meshgrid(*[w] * d, indexing="ij")], axis=-1), axis=1)
    vals = np.asarray(func(pts), dtype=float)
    if np.any(vals < -tol):
        raise InvalidArgumentError("kernel takes negative values")
    if np.max(np.abs(vals - np.asarray(func(-pts), dtype=float))) > tol:
        raise InvalidArgumentError("kernel is not symmetric")
    mass = float(wts @ vals)
    if abs(mass - 1.0) > tol:
        raise InvalidArgumentError(f"kernel integrates to {mass}, not 1")


# -- smoothing -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    field: HermitianField
    provenance: dict

    @property
    def grid(self):
        return self.field.grid

    @property
    def values(self):
        return self.field.values

    def to_json(self) -> dict:
        out = self.field.to_json()
        out["provenance"] = self.provenance
        return out


def _axis_weights(kernel: KernelSpec, grid: FrequencyGrid, axis: int) -> np.ndarray:
    """Banded ``n x n`` matrix of 1-D kernel weights between axis nodes."""
    nodes = grid.axis_nodes(axis)
    b = kernel.bandwidth[axis]
    diff = (nodes[:, None] - nodes[None, :]) / b
    return kernel.profile(diff) * (np.abs(diff) <= 1.0) / b


def _stencil(kernel: KernelSpec, grid: FrequencyGrid) -> np.ndarray:
    spacing = grid.spacing
    reach = [int(np.floor(b / s)) for b, s in zip(kernel.bandwidth, spacing)]
    reach = [min(r, k * 2) for r, k in zip(reach, grid.half_counts)]
    axes = [np.arange(-r, r + 1) * s for r, s in zip(reach, spacing)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return kernel.scaled(pts).reshape([len(a) for a in axes])


def _weighted_sums(values: np.ndarray, kernel: KernelSpec, grid: FrequencyGrid):
    """Numerator ``sum_k K_b(w_t - w_k) V_k`` and denominator for every node."""
    d = grid.d
    if kernel.d != d:
        raise InvalidArgumentError("kernel and grid dimensions differ")
    ones = np.ones(grid.shape)
    if kernel.separable:
        num, den = values, ones
        for a in range(d):
            W = _axis_weights(kernel, grid, a)
            num = np.moveaxis(np.tensordot(W, num, axes=([1], [a])), 0, a)
            den = np.moveaxis(np.tensordot(W, den, axes=([1], [a])), 0, a)
        center = np.prod([_axis_weights(kernel, grid, a)[0, 0] for a in range(d)])
        return num, den, center
    st = _stencil(kernel, grid)
    extra = values.ndim - d
    st_full = st.reshape(st.shape + (1,) * extra)
    num = signal.fftconvolve(values, st_full, mode="same", axes=tuple(range(d)))
    den = signal.fftconvolve(ones, st, mode="same")
    den = np.where(np.abs(den) < 1e-14 * np.max(st), 0.0, den)
    center = float(kernel.scaled(np.zeros((1, d)))[0])
    return num, den, center


def kernel_smooth(periodogram, kernel: KernelSpec) -> SpectrumEstimate:
    """Self-normalised Riemann-sum smoother over the periodogram's grid."""
    fld = periodogram.field if isinstance(periodogram, Periodogram) else periodogram
    grid = fld.grid
    num, den, _ = _weighted_sums(fld.values, kernel, grid)
    bad = np.argwhere(den <= 0)
    if bad.size:
        node = tuple(int(v) for v in bad[0] - np.asarray(grid.half_counts))
        raise InvalidBandwidthError(f"no kernel weight at node {node}", node=node,
                                    bandwidth=kernel.bandwidth)
    vals = num / den.reshape(den.shape + (1, 1))
    prov = {"kind": "kernel", "bandwidth": list(kernel.bandwidth), "kernel": kernel.name}
    return SpectrumEstimate(HermitianField(grid, vals), prov)


def leave_one_out_field(periodogram, kernel: KernelSpec, mask: Optional[np.ndarray] = None):
    """Leave-one-out smoother at every node (or at nodes where ``mask`` is set).

    Returns the ``(*shape, m, m)`` array; entries outside ``mask`` are NaN.
    """
    fld = periodogram.field if isinstance(periodogram, Periodogram) else periodogram
    grid = fld.grid
    num, den, center = _weighted_sums(fld.values, kernel, grid)
    num = num - center * fld.values
    den = den - center
    if mask is None:
        mask = np.ones(grid.shape, dtype=bool)
    scale = center if center > 0 else 1.0
    empty = mask & (den <= 1e-12 * scale)
    if np.any(empty):
        node = tuple(int(v) for v in np.argwhere(empty)[0] - np.asarray(grid.half_counts))
        raise InvalidBandwidthError(
            f"bandwidth {kernel.bandwidth} leaves node {node} without neighbours",
            node=node, bandwidth=kernel.bandwidth)
    out = np.full(num.shape, np.nan, dtype=complex)
    out[mask] = num[mask] / den[mask][:, None, None]
    return out


def leave_one_out_smooth(periodogram, kernel: KernelSpec, node) -> np.ndarray:
    """Smoother at ``node`` with the node's own periodogram removed."""
    fld = periodogram.field if isinstance(periodogram, Periodogram) else periodogram
    grid = fld.grid
    pos = grid.position(node)
    nodes = grid.nodes()
    diffs = (nodes[pos] - nodes).reshape(-1, grid.d)
    w = kernel.scaled(diffs).reshape(grid.shape)
    w[pos] = 0.0
    total = w.sum()
    if not total > 0:
        raise InvalidBandwidthError(
            f"bandwidth {kernel.bandwidth} leaves node {tuple(node)} without neighbours",
            node=tuple(node), bandwidth=kernel.bandwidth)
    return np.tensordot(w, fld.values, axes=(tuple(range(grid.d)), tuple(range(grid.d)))) / total


def raw_estimate(periodogram: Periodogram) -> SpectrumEstimate:
    return SpectrumEstimate(periodogram.field, {"kind": "raw_periodogram"})
