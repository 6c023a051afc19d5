"""Analytic pseudo-spectra, local spectra and coherences from ``(lambda, L2)``.

The reduced covariance ``L2`` enters only through its inverse Fourier
transform ``(2 pi)^{-d} int l2(x) exp(-i x'w) dx``, computed by quadrature
over a truncated box (any ``d``) or, for isotropic entries in the plane,
by the Hankel-type reduction ``(2 pi)^{-1} int_0^R l2(r) J0(r |w|) r dr``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from .errors import InvalidArgumentError, NumericalFailure, SingularSpectrumError
from .geometry import FrequencyGrid, HermitianField
from .intensity import IntensityModel
from .taper import Integrand, Taper, _panel_rule, unit_integral

TRUNCATION_TOL = 1e-10
GAUSS_ORDER = 16


@dataclass(frozen=True, eq=False)
class ReweightedCovariance:
    """``m x m`` reduced covariance functions with integrability metadata.

    ``radial[i][j]`` maps distances to values for isotropic entries; a
    general entry is ``funcs[i][j]`` acting on ``(n, d)`` lag arrays.
    ``length_scale`` is the smallest scale on which any entry varies.
    """

    m: int
    d: int = 2
    radial: Optional[Sequence[Sequence[Optional[Callable]]]] = None
    funcs: Optional[Sequence[Sequence[Optional[Callable]]]] = None
    support_radius: float = 0.0
    length_scale: float = 1.0

    @classmethod
    def zero(cls, m: int, d: int = 2) -> "ReweightedCovariance":
        return cls(m, d, radial=[[None] * m for _ in range(m)], support_radius=0.0)

    @classmethod
    def isotropic(cls, profiles, d: int = 2, length_scale: float = 1.0,
                  support_radius: Optional[float] = None, r_max: float = 1e3) -> "ReweightedCovariance":
        m = len(profiles)
        if support_radius is None:
            support_radius = find_support_radius(profiles, length_scale, r_max)
        return cls(m, d, radial=profiles, support_radius=support_radius, length_scale=length_scale)

    def is_isotropic(self, i: int, j: int) -> bool:
        return self.radial is not None

    def is_zero(self, i: int, j: int) -> bool:
        src = self.radial if self.radial is not None else self.funcs
        return src[i - 1][j - 1] is None

    def __call__(self, i: int, j: int, lags) -> np.ndarray:
        lags = np.atleast_2d(np.asarray(lags, dtype=float))
        if self.is_zero(i, j):
            return np.zeros(lags.shape[0])
        if self.radial is not None:
            return np.asarray(self.radial[i - 1][j - 1](np.linalg.norm(lags, axis=1)), dtype=float)
        return np.asarray(self.funcs[i - 1][j - 1](lags), dtype=float)

    def matrix(self, lag) -> np.ndarray:
        lag = np.atleast_2d(lag)
        return np.array([[self(i, j, lag)[0] for j in range(1, self.m + 1)]
                         for i in range(1, self.m + 1)])


def find_support_radius(profiles, length_scale: float, r_max: float = 1e3,
                        tol: float = TRUNCATION_TOL) -> float:
    """Smallest radius beyond which every profile stays below ``tol``."""
    r = np.linspace(0.0, r_max, 200001)
    radius = 0.0
    for row in profiles:
        for f in row:
            if f is None:
                continue
            big = np.nonzero(np.abs(f(r)) >= tol)[0]
            if big.size:
                if big[-1] == r.size - 1:
                    raise NumericalFailure("covariance does not decay within r_max", r_max=r_max)
                radius = max(radius, r[big[-1] + 1])
    return float(radius)


def _tail_check(cov: ReweightedCovariance, i: int, j: int) -> None:
    R = cov.support_radius
    r = np.linspace(R, 3 * R + 1.0, 400)
    if cov.radial is not None:
        tail = np.abs(cov.radial[i - 1][j - 1](r))
    else:
        ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        pts = np.stack([np.outer(r, np.cos(ang)).ravel(), np.outer(r, np.sin(ang)).ravel()], axis=-1)
        if cov.d != 2:
            pts = np.pad(pts, ((0, 0), (0, cov.d - 2))) if cov.d > 2 else pts[:, :1]
        tail = np.abs(cov(i, j, pts))
    if np.max(tail) > 10 * TRUNCATION_TOL:
        raise NumericalFailure("reduced covariance not negligible beyond its support radius",
                               entry=(i, j), tail=float(np.max(tail)), radius=R)


def _gauss_panels(lo: float, hi: float, width: float, order: int = GAUSS_ORDER):
    n = max(1, int(math.ceil((hi - lo) / width)))
    x0, w0 = np.polynomial.legendre.leggauss(order)
    cuts = np.linspace(lo, hi, n + 1)
    half = np.diff(cuts) / 2
    mid = (cuts[:-1] + cuts[1:]) / 2
    return (mid[:, None] + half[:, None] * x0).ravel(), (half[:, None] * w0).ravel()


def _panel_width(cov: ReweightedCovariance, rho_max: float) -> float:
    width = cov.length_scale / 2
    if rho_max > 0:
        width = min(width, math.pi / rho_max)
    return width


def inverse_fourier_L2(cov: ReweightedCovariance, i: int, j: int, omegas,
                       method: str = "auto") -> np.ndarray:
    """``(2 pi)^{-d} int l2^{(i,j)}(x) exp(-i x'w) dx`` at ``omegas`` ``(K, d)``.

    ``method`` is ``"radial"`` (isotropic, d=2), ``"tensor"`` or ``"auto"``.
    """
    omegas = np.asarray(omegas, dtype=float)
    single = omegas.ndim == 1
    om = np.atleast_2d(omegas)
    if om.shape[1] != cov.d:
        raise InvalidArgumentError("frequency dimension does not match the covariance")
    out = np.zeros(om.shape[0], dtype=complex)
    if cov.is_zero(i, j):
        return out[0] if single else out
    if method == "auto":
        method = "radial" if cov.is_isotropic(i, j) and cov.d == 2 else "tensor"
    _tail_check(cov, i, j)
    R = cov.support_radius
    if method == "radial":
        if not (cov.is_isotropic(i, j) and cov.d == 2):
            raise InvalidArgumentError("radial reduction needs an isotropic entry in d=2")
        rho = np.linalg.norm(om, axis=1)
        r, w = _gauss_panels(0.0, R, _panel_width(cov, float(rho.max(initial=0.0))))
        vals = cov.radial[i - 1][j - 1](r) * r * w
        out = (special.j0(np.outer(rho, r)) @ vals).astype(complex) / (2 * np.pi)
    elif method == "tensor":
        d = cov.d
        width = _panel_width(cov, float(np.max(np.abs(om), initial=0.0)))
        x, w = _gauss_panels(-R, R, width)
        mesh = np.meshgrid(*[x] * d, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        wt = np.ones([x.size] * d)
        for a in range(d):
            shape = [1] * d
            shape[a] = x.size
            wt = wt * w.reshape(shape)
        vals = cov(i, j, pts).reshape([x.size] * d) * wt
        letters = "abcdefgh"[:d]
        expr = letters + "," + ",".join(f"k{c}" for c in letters) + "->k"
        factors = [np.exp(-1j * np.outer(om[:, a], x)) for a in range(d)]
        out = np.einsum(expr, vals, *factors, optimize=True) / (2 * np.pi) ** d
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    return out[0] if single else out


def inverse_fourier_matrix(cov: ReweightedCovariance, omegas, method: str = "auto") -> np.ndarray:
    """All entries of ``F^{-1}(L2)``: ``(K, m, m)``."""
    om = np.atleast_2d(np.asarray(omegas, dtype=float))
    out = np.zeros((om.shape[0], cov.m, cov.m), dtype=complex)
    for i in range(1, cov.m + 1):
        for j in range(i, cov.m + 1):
            vals = inverse_fourier_L2(cov, i, j, om, method)
            out[:, i - 1, j - 1] = vals
            if j != i:
                # l2^{(j,i)}(x) = l2^{(i,j)}(-x) and l2 is real
                out[:, j - 1, i - 1] = np.conj(vals)
    return out


def _taper_intensity_moments(model: IntensityModel, taper: Taper, d: int):
    """``H_{h,2}``, ``int h^2 lambda_j`` and ``int h^2 lambda_i lambda_j`` on the unit cube."""
    m = model.m
    h2 = Integrand.from_taper(taper, d, power=2)
    first = np.array([0.0 if model.is_zero(j) else unit_integral(h2.times(model.integrand(j)))
                      for j in range(1, m + 1)])
    second = np.zeros((m, m))
    for i in range(1, m + 1):
        for j in range(i, m + 1):
            if model.is_zero(i) or model.is_zero(j):
                continue
            v = unit_integral(h2.times(model.integrand(i)).times(model.integrand(j)))
            second[i - 1, j - 1] = second[j - 1, i - 1] = v
    return taper.moment(2, d), first, second


class AnalyticPseudoSpectrum:
    """Evaluator ``w -> F_h(w)`` for a given intensity, taper and ``L2``."""

    def __init__(self, model: IntensityModel, taper: Taper, cov: ReweightedCovariance,
                 method: str = "auto"):
        if model.m != cov.m:
            raise InvalidArgumentError("intensity and covariance disagree on m")
        self.model, self.taper, self.cov, self.method = model, taper, cov, method
        self.d = cov.d
        self.h2, self.first, self.second = _taper_intensity_moments(model, taper, self.d)

    @property
    def m(self) -> int:
        return self.cov.m

    def __call__(self, omegas) -> np.ndarray:
        omegas = np.asarray(omegas, dtype=float)
        single = omegas.ndim == 1
        om = np.atleast_2d(omegas)
        finv = inverse_fourier_matrix(self.cov, om, self.method)
        diag = np.diag(self.first) / ((2 * np.pi) ** self.d * self.h2)
        out = diag[None] + self.second[None] * finv / self.h2
        return out[0] if single else out

    def on_grid(self, grid: FrequencyGrid) -> HermitianField:
        vals = self(grid.nodes().reshape(-1, grid.d)).reshape(grid.shape + (self.m, self.m))
        return HermitianField(grid, vals)


def pseudo_spectrum(model: IntensityModel, taper: Taper, cov: ReweightedCovariance, omegas,
                    method: str = "auto") -> np.ndarray:
    return AnalyticPseudoSpectrum(model, taper, cov, method)(omegas)


def local_spectrum(model: IntensityModel, cov: ReweightedCovariance, u, omegas,
                   method: str = "auto") -> np.ndarray:
    """``(2 pi)^{-d} diag(lambda(u)) + lambda(u) lambda(u)' * F^{-1}(L2)(w)``."""
    u = np.asarray(u, dtype=float).reshape(1, -1)
    lam = np.array([0.0 if model.is_zero(j) else float(model.evaluate(u, j)[0])
                    for j in range(1, model.m + 1)])
    omegas = np.asarray(omegas, dtype=float)
    single = omegas.ndim == 1
    finv = inverse_fourier_matrix(cov, np.atleast_2d(omegas), method)
    out = np.diag(lam)[None] / (2 * np.pi) ** cov.d + np.outer(lam, lam)[None] * finv
    return out[0] if single else out


def local_integral(model: IntensityModel, taper: Taper, cov: ReweightedCovariance, omegas,
                   panels: int = 32, method: str = "auto") -> np.ndarray:
    """``H_{h,2}^{-1} int h(u)^2 F^u(w) du`` by tensor quadrature over the unit cube.

    Evaluates the local spectrum pointwise; used to cross-check the
    pseudo-spectrum evaluator.
    """
    d = cov.d
    x, w = _panel_rule(panels, tuple(taper.breakpoints))
    mesh = np.meshgrid(*[x] * d, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    wts = np.prod(np.stack([g.ravel() for g in np.meshgrid(*[w] * d, indexing="ij")], axis=-1), axis=1)
    hw = taper(pts) ** 2 * wts
    lam = np.stack([np.zeros(len(pts)) if model.is_zero(j) else model.evaluate(pts, j)
                    for j in range(1, model.m + 1)], axis=-1)
    first = hw @ lam
    second = np.einsum("n,ni,nj->ij", hw, lam, lam)
    omegas = np.asarray(omegas, dtype=float)
    single = omegas.ndim == 1
    finv = inverse_fourier_matrix(cov, np.atleast_2d(omegas), method)
    h2 = float(np.sum(hw))
    out = (np.diag(first)[None] / (2 * np.pi) ** d + second[None] * finv) / h2
    return out[0] if single else out


def coherences(F: np.ndarray, check: bool = True):
    """Coherence ``R`` of ``F`` and of its inverse (``D``) for ``(..., m, m)`` input."""
    F = np.asarray(F)
    diag = np.real(np.diagonal(F, axis1=-2, axis2=-1))
    if check and np.any(diag <= 0):
        raise SingularSpectrumError("spectrum has a non-positive diagonal entry")
    R = np.abs(F) / np.sqrt(np.abs(diag[..., :, None] * diag[..., None, :]))
    try:
        Finv = np.linalg.inv(F)
    except np.linalg.LinAlgError as exc:
        raise SingularSpectrumError("spectrum matrix is singular") from exc
    cond = np.linalg.cond(F)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e14):
        raise SingularSpectrumError("spectrum matrix is numerically singular")
    idiag = np.real(np.diagonal(Finv, axis1=-2, axis2=-1))
    D = np.abs(Finv) / np.sqrt(np.abs(idiag[..., :, None] * idiag[..., None, :]))
    return R, D


def reweighted_spectrum_and_coherence(cov: ReweightedCovariance, omegas, method: str = "auto"):
    """``F~ = (2 pi)^{-d} I + F^{-1}(L2)`` and its coherence matrices ``R~``, ``D~``."""
    omegas = np.asarray(omegas, dtype=float)
    single = omegas.ndim == 1
    om = np.atleast_2d(omegas)
    F = np.eye(cov.m)[None] / (2 * np.pi) ** cov.d + inverse_fourier_matrix(cov, om, method)
    R, D = coherences(F)
    if single:
        return F[0], R[0], D[0]
    return F, R, D
