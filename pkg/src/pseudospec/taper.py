"""Data tapers and finite-window Fourier functionals.

All tapers here are separable, ``h(x) = prod_j h1(x_j)``, with ``h1``
supported on ``[-1/2, 1/2]``.  Integrals over the window are computed on
the unit cube with composite Gauss-Legendre rules whose panels are aligned
with the profile's breakpoints and whose count grows with ``A_j |omega_j|``
so the oscillating factor is always resolved.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError, NumericalFailure
from .geometry import FrequencyGrid, Window

GAUSS_ORDER = 10
PANELS_PER_PERIOD = 8
MIN_PANELS = 4
MAX_REFINEMENTS = 4


class Taper:
    """Separable taper built from a 1-D profile on ``[-1/2, 1/2]``.

    Subclasses implement :meth:`profile`.  ``breakpoints`` lists interior
    points where the profile changes formula (used to align quadrature
    panels) and ``smoothness`` is the number of continuous derivatives; it is
    informational only.
    """

    name = "custom"
    breakpoints: tuple = ()
    smoothness: int = 0

    def profile(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def profile_power(self, k: int) -> Callable[[np.ndarray], np.ndarray]:
        return lambda x: self.profile(x) ** k

    def __call__(self, u) -> np.ndarray:
        """Evaluate ``h`` at unit-cube points ``u`` of shape ``(n, d)`` or ``(d,)``."""
        u = np.asarray(u, dtype=float)
        return np.prod(self.profile(u), axis=-1)

    def moment_1d(self, k: int) -> float:
        if k < 1:
            raise InvalidArgumentError("moment order must be >= 1")
        cache = self.__dict__.setdefault("_moment_cache", {})
        if k not in cache:
            cache[k] = self._integrate_power(k)
        return cache[k]

    def _integrate_power(self, k: int) -> float:
        pts = sorted(set(self.breakpoints) - {-0.5, 0.5})
        val, err = integrate.quad(lambda x: float(self.profile(np.array(x))) ** k,
                                  -0.5, 0.5, points=pts or None,
                                  epsabs=0.0, epsrel=1e-12, limit=200)
        if err > 1e-10 * max(abs(val), 1e-300):
            raise NumericalFailure("taper moment did not converge", order=k, error=err)
        return val

    def moment(self, k: int, d: int) -> float:
        """``H_{h,k} = int_{[-1/2,1/2]^d} h(x)^k dx``."""
        return self.moment_1d(k) ** d

    def factors(self, d: int, power: int = 1) -> list:
        return [self.profile_power(power)] * d


class UnitTaper(Taper):
    name = "unit"
    smoothness = 0

    def profile(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= 0.5, 1.0, 0.0)

    def moment_1d(self, k):
        if k < 1:
            raise InvalidArgumentError("moment order must be >= 1")
        return 1.0


class CosineBellTaper(Taper):
    """Edge-tapered profile: a raised-sine ramp of width ``a`` at each end
    and exactly 1 on ``[-1/2 + a, 1/2 - a]``.
    """

    smoothness = 1

    def __init__(self, a: float = 0.025):
        a = float(a)
        if not 0 < a < 0.5:
            raise InvalidArgumentError(f"taper parameter a must lie in (0, 0.5), got {a}")
        self.a = a
        self.name = f"cosine_bell(a={a!r})"
        self.breakpoints = (-0.5 + a, 0.5 - a)
        for k in (1, 2, 4):
            self.moment_1d(k)

    def profile(self, x):
        x = np.asarray(x, dtype=float)
        a = self.a
        s = 0.5 - np.abs(x)          # distance to the nearer edge
        ramp = s / a - np.sin(2 * np.pi * s / a) / (2 * np.pi)
        out = np.where(s < a, ramp, 1.0)
        return np.where(s >= 0, out, 0.0)

    def __repr__(self):
        return f"CosineBellTaper(a={self.a})"


class ProfileTaper(Taper):
    """Separable taper from a user-supplied vectorised 1-D profile."""

    def __init__(self, profile: Callable, breakpoints: Sequence[float] = (),
                 smoothness: int = 0, name: str = "custom"):
        self._profile = profile
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.smoothness = smoothness
        self.name = name

    def profile(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= 0.5, self._profile(x), 0.0)


def make_taper(a: float) -> Taper:
    """``a == 0`` selects the unit taper, otherwise the cosine bell."""
    return UnitTaper() if a == 0 else CosineBellTaper(a)


def taper_value(t: Taper, x) -> float:
    return float(t(np.asarray(x, dtype=float)))


def taper_moment(t: Taper, k: int, d: int = 2) -> float:
    return t.moment(k, d)


# -- integrands on the unit cube ---------------------------------------------

class Integrand:
    """Function on the unit cube, either separable (``factors``) or general.

    ``breakpoints`` are per-axis interior points where the integrand is not
    smooth; quadrature panels are aligned with them.
    """

    def __init__(self, d: int, func: Optional[Callable] = None,
                 factors: Optional[Sequence[Callable]] = None,
                 breakpoints: Optional[Sequence[Sequence[float]]] = None,
                 scale: float = 1.0):
        if (func is None) == (factors is None):
            raise InvalidArgumentError("give exactly one of func or factors")
        if factors is not None and len(factors) != d:
            raise InvalidArgumentError("need one factor per axis")
        self.d = d
        self.func = func
        self.factors = list(factors) if factors is not None else None
        self.breakpoints = [tuple(b) for b in breakpoints] if breakpoints else [()] * d
        self.scale = float(scale)

    @property
    def separable(self) -> bool:
        return self.factors is not None

    @classmethod
    def from_taper(cls, taper: Taper, d: int, power: int = 1) -> "Integrand":
        return cls(d, factors=taper.factors(d, power), breakpoints=[taper.breakpoints] * d)

    @classmethod
    def constant(cls, d: int, value: float = 1.0) -> "Integrand":
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        return cls(d, factors=[one] * d, scale=value)

    def __call__(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.separable:
            out = np.ones(u.shape[0])
            for j, f in enumerate(self.factors):
                out = out * f(u[:, j])
            return self.scale * out
        return self.scale * self.func(u)

    def times(self, other: "Integrand") -> "Integrand":
        bps = [tuple(sorted(set(a) | set(b))) for a, b in zip(self.breakpoints, other.breakpoints)]
        if self.separable and other.separable:
            facs = [(lambda f, g: (lambda x: f(x) * g(x)))(f, g)
                    for f, g in zip(self.factors, other.factors)]
            return Integrand(self.d, factors=facs, breakpoints=bps, scale=self.scale * other.scale)
        return Integrand(self.d, func=lambda u: self(u) * other(u), breakpoints=bps)

    def abs(self) -> "Integrand":
        if self.separable:
            facs = [(lambda f: (lambda x: np.abs(f(x))))(f) for f in self.factors]
            return Integrand(self.d, factors=facs, breakpoints=self.breakpoints, scale=abs(self.scale))
        return Integrand(self.d, func=lambda u: np.abs(self(u)), breakpoints=self.breakpoints)


@lru_cache(maxsize=256)
def _panel_rule(n_panels: int, breakpoints: tuple, order: int = GAUSS_ORDER):
    """Composite Gauss-Legendre nodes/weights on [-1/2, 1/2]."""
    edges = [-0.5] + sorted(b for b in set(breakpoints) if -0.5 < b < 0.5) + [0.5]
    lengths = np.diff(edges)
    per_seg = np.maximum(1, np.ceil(n_panels * lengths).astype(int))
    x0, w0 = np.polynomial.legendre.leggauss(order)
    xs, ws = [], []
    for lo, hi, n in zip(edges[:-1], edges[1:], per_seg):
        cuts = np.linspace(lo, hi, n + 1)
        half = np.diff(cuts) / 2
        mid = (cuts[:-1] + cuts[1:]) / 2
        xs.append((mid[:, None] + half[:, None] * x0[None, :]).ravel())
        ws.append((half[:, None] * w0[None, :]).ravel())
    x, w = np.concatenate(xs), np.concatenate(ws)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panels_for(extent: float) -> int:
    """Panel count for an oscillation ``exp(-i * extent * u)`` on a unit interval."""
    periods = abs(extent) / (2 * np.pi)
    return max(MIN_PANELS, int(math.ceil(PANELS_PER_PERIOD * periods)))


def _fourier_unit(integrand: Integrand, extents: np.ndarray, panels: Sequence[int]) -> np.ndarray:
    """``int g(u) exp(-i u . e) du`` over the unit cube for each row of ``extents``.

    Contracts one axis at a time over the distinct per-axis extents, so a
    full tensor grid of frequencies costs a few matrix products.
    """
    K, d = extents.shape
    uniq, inv = zip(*[np.unique(extents[:, j], return_inverse=True) for j in range(d)])
    rules = [_panel_rule(panels[j], integrand.breakpoints[j]) for j in range(d)]
    if integrand.separable:
        out = np.full(K, integrand.scale, dtype=complex)
        for j, ((x, w), f) in enumerate(zip(rules, integrand.factors)):
            wf = w * f(x)
            vals = np.exp(-1j * np.outer(uniq[j], x)) @ wf
            out *= vals[inv[j]]
        return out
    mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    T = integrand(pts).reshape([len(r[0]) for r in rules]).astype(complex)
    for j, (x, w) in enumerate(rules):
        T = T * w.reshape([-1 if i == j else 1 for i in range(d)])
    # contract axis 0 repeatedly; each contraction appends the new axis at the end
    for j, (x, w) in enumerate(rules):
        E = np.exp(-1j * np.outer(uniq[j], x))          # (n_uniq_j, n_x)
        T = np.tensordot(T, E, axes=([0], [1]))
    return T[tuple(inv)]


def window_fourier(g: Integrand, window: Window, omegas, tol: float = 1e-10) -> np.ndarray:
    """``int_{D} g(x / A) exp(-i x . omega) dx`` for each frequency in ``omegas``.

    ``omegas`` has shape ``(K, d)`` or ``(d,)``; the result has shape ``(K,)``
    or is a scalar respectively.  Raises :class:`NumericalFailure` if two
    successive panel doublings still disagree by more than ``tol`` relative
    to ``int |g|``.
    """
    omegas = np.asarray(omegas, dtype=float)
    single = omegas.ndim == 1
    om = np.atleast_2d(omegas)
    if om.shape[1] != window.d or g.d != window.d:
        raise InvalidArgumentError("dimension mismatch between integrand, window and omega")
    extents = om * window.sides
    panels = [_panels_for(np.max(np.abs(extents[:, j]), initial=0.0)) for j in range(window.d)]
    current = _fourier_unit(g, extents, panels)
    ref = None
    for level in range(MAX_REFINEMENTS):
        panels = [2 * p for p in panels]
        finer = _fourier_unit(g, extents, panels)
        if ref is None:
            ref = max(abs(_fourier_unit(g.abs(), np.zeros((1, window.d)), panels)[0]), 1e-300)
        err = float(np.max(np.abs(finer - current)))
        current = finer
        if err <= tol * ref:
            break
    else:
        raise NumericalFailure("window Fourier quadrature did not converge",
                               estimated_error=err, reference=ref, panels=panels)
    out = window.volume * current
    return out[0] if single else out


def window_fourier_grid(g: Integrand, window: Window, grid: FrequencyGrid, tol: float = 1e-10) -> np.ndarray:
    """:func:`window_fourier` over every node of ``grid``, shaped like the grid."""
    nodes = grid.nodes().reshape(-1, grid.d)
    return window_fourier(g, window, nodes, tol=tol).reshape(grid.shape)


def unit_integral(g: Integrand, panels: int = 64) -> float:
    """``int_{[-1/2,1/2]^d} g(u) du`` with a refinement check."""
    a = _fourier_unit(g, np.zeros((1, g.d)), [panels] * g.d)[0].real
    b = _fourier_unit(g, np.zeros((1, g.d)), [2 * panels] * g.d)[0].real
    if abs(a - b) > 1e-10 * max(abs(b), 1e-300):
        raise NumericalFailure("unit-cube quadrature did not converge", coarse=a, fine=b)
    return b
