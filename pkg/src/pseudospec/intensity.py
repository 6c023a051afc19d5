"""Parametric first-order intensity models on the unit cube and their fits.

Models are evaluated in rescaled coordinates ``u = x / A``.  Two forms are
supported: a constant per-type intensity and a log-linear model
``exp(beta . phi(u))`` over a small library of named covariates.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegenerateFitError, InvalidArgumentError
from .geometry import MultitypePattern, Window
from .taper import Integrand, Taper, window_fourier

log = logging.getLogger(__name__)

_BASIS_RE = re.compile(r"^(?:const|x(\d+)(sq)?|x(\d+)x(\d+))$")
DEFAULT_BOUND = 100.0


def _parse_basis(name: str):
    """Return ``(kind, axes)`` for a named covariate."""
    m = _BASIS_RE.match(name)
    if not m:
        raise InvalidArgumentError(
            f"unknown covariate {name!r}; use const, x<k>, x<k>sq or x<j>x<k>"
        )
    if name == "const":
        return "const", ()
    if m.group(1):
        axis = int(m.group(1)) - 1
        return ("square" if m.group(2) else "linear"), (axis,)
    return "cross", (int(m.group(3)) - 1, int(m.group(4)) - 1)


def design_matrix(basis: Sequence[str], u: np.ndarray) -> np.ndarray:
    """Covariates evaluated at unit-cube points ``u`` of shape ``(n, d)``."""
    u = np.atleast_2d(u)
    cols = []
    for name in basis:
        kind, axes = _parse_basis(name)
        if any(a >= u.shape[1] for a in axes):
            raise InvalidArgumentError(f"covariate {name} needs dimension > {u.shape[1]}")
        if kind == "const":
            cols.append(np.ones(u.shape[0]))
        elif kind == "linear":
            cols.append(u[:, axes[0]])
        elif kind == "square":
            cols.append(u[:, axes[0]] ** 2)
        else:
            cols.append(u[:, axes[0]] * u[:, axes[1]])
    return np.column_stack(cols) if cols else np.empty((u.shape[0], 0))


def _check_unit(u, d):
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] != d:
        raise InvalidArgumentError(f"expected {d}-dimensional points")
    if np.any(np.abs(u) > 0.5 + 1e-12):
        raise InvalidArgumentError("intensity evaluated outside the unit cube")
    return u


class IntensityModel:
    """Common interface: ``m`` types on ``[-1/2, 1/2]^d``."""

    m: int
    d: int

    def evaluate(self, u, j: int) -> np.ndarray:
        raise NotImplementedError

    def integrand(self, j: int) -> Integrand:
        raise NotImplementedError

    def is_zero(self, j: int) -> bool:
        return False

    def to_json(self) -> dict:
        raise NotImplementedError

    def __call__(self, u, j: int):
        return self.evaluate(u, j)


@dataclass(frozen=True)
class ConstantIntensity(IntensityModel):
    beta: tuple
    d: int = 2

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        if any(b < 0 for b in beta):
            raise InvalidArgumentError("constant intensities must be non-negative")
        object.__setattr__(self, "beta", beta)

    @property
    def m(self) -> int:
        return len(self.beta)

    def evaluate(self, u, j):
        u = _check_unit(u, self.d)
        return np.full(u.shape[0], self.beta[j - 1])

    def integrand(self, j):
        return Integrand.constant(self.d, self.beta[j - 1])

    def is_zero(self, j):
        return self.beta[j - 1] == 0.0

    def to_json(self):
        return {"form": "constant", "beta": list(self.beta)}


@dataclass(frozen=True)
class LogLinearIntensity(IntensityModel):
    """``lambda_j(u) = exp(sum_k beta[j, k] * phi_k(u))``."""

    basis: tuple
    beta: np.ndarray
    d: int = 2

    def __post_init__(self):
        basis = tuple(self.basis)
        for name in basis:
            _parse_basis(name)
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if beta.shape[1] != len(basis):
            raise InvalidArgumentError("beta has the wrong number of coefficients")
        beta.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "beta", beta)

    @property
    def m(self) -> int:
        return self.beta.shape[0]

    def evaluate(self, u, j):
        u = _check_unit(u, self.d)
        return np.exp(design_matrix(self.basis, u) @ self.beta[j - 1])

    @property
    def separable(self) -> bool:
        return all(_parse_basis(b)[0] != "cross" for b in self.basis)

    def integrand(self, j):
        coef = self.beta[j - 1]
        if not self.separable:
            return Integrand(self.d, func=lambda u: np.exp(design_matrix(self.basis, u) @ coef))
        scale = 0.0
        per_axis = [[] for _ in range(self.d)]
        for name, c in zip(self.basis, coef):
            kind, axes = _parse_basis(name)
            if kind == "const":
                scale += c
            else:
                per_axis[axes[0]].append((kind, c))

        def factor(terms):
            def f(x):
                x = np.asarray(x, dtype=float)
                s = np.zeros_like(x)
                for kind, c in terms:
                    s = s + c * (x if kind == "linear" else x * x)
                return np.exp(s)
            return f

        return Integrand(self.d, factors=[factor(t) for t in per_axis], scale=np.exp(scale))

    def to_json(self):
        return {"form": "log_linear", "basis": list(self.basis), "beta": self.beta.tolist()}


def model_from_json(obj: dict, d: int = 2) -> IntensityModel:
    if obj["form"] == "constant":
        return ConstantIntensity(tuple(obj["beta"]), d=d)
    return LogLinearIntensity(tuple(obj["basis"]), np.asarray(obj["beta"]), d=d)


def evaluate_intensity(model: IntensityModel, u, j: int) -> np.ndarray:
    return model.evaluate(u, j)


def zero_intensity(m: int, d: int = 2) -> ConstantIntensity:
    """The "no demeaning" scheme: every intensity identically zero."""
    return ConstantIntensity((0.0,) * m, d=d)


# -- fitting -----------------------------------------------------------------

@dataclass
class FitResult:
    model: IntensityModel
    status: str
    log_composite_likelihood: float
    residual_norms: list = field(default_factory=list)
    iterations: list = field(default_factory=list)

    @property
    def beta_hat(self):
        return self.model.beta

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_json(self) -> dict:
        return {"model": self.model.to_json(), "status": self.status,
                "log_composite_likelihood": self.log_composite_likelihood,
                "residual_norms": self.residual_norms, "iterations": self.iterations}


def _quadrature(d: int, resolution: int):
    x, w = np.polynomial.legendre.leggauss(resolution)
    x, w = x / 2, w / 2
    mesh = np.meshgrid(*[x] * d, indexing="ij")
    wm = np.meshgrid(*[w] * d, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    wts = np.prod(np.stack([m.ravel() for m in wm], axis=-1), axis=1)
    return pts, wts


def _newton_loglinear(data_design, quad_design, quad_w, volume, bounds,
                      max_iter=100, tol=1e-8):
    """Maximise ``sum phi(x)'b - |D| int exp(phi'b)`` by damped, projected Newton."""
    n, p = data_design.shape
    s = data_design.sum(axis=0)
    beta = np.zeros(p)
    if "const_index" in bounds:
        ci = bounds["const_index"]
        beta[ci] = np.log(n / volume)
    lo, hi = bounds["lo"], bounds["hi"]

    def objective(b):
        lam = np.exp(np.clip(quad_design @ b, -700, 700))
        return s @ b - volume * (quad_w @ lam), lam

    obj, lam = objective(beta)
    status = "max_iter"
    resid = np.inf
    for it in range(1, max_iter + 1):
        wl = volume * quad_w * lam
        grad = s - quad_design.T @ wl
        resid = float(np.max(np.abs(grad))) / max(1.0, n)
        if resid <= tol:
            status = "converged"
            break
        hess = (quad_design * wl[:, None]).T @ quad_design
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            status = "singular"
            break
        if not np.all(np.isfinite(step)) or np.linalg.cond(hess) > 1e14:
            status = "singular"
            break
        t = 1.0
        while t > 1e-10:
            cand = np.clip(beta + t * step, lo, hi)
            cobj, clam = objective(cand)
            if cobj >= obj - 1e-12 * abs(obj):
                break
            t /= 2
        beta, obj, lam = cand, cobj, clam
    return beta, status, float(obj), resid, it


def fit_intensity(pattern: MultitypePattern, model_spec: Union[str, Sequence[str]] = "constant",
                  quadrature_resolution: int = 64, types: Optional[Sequence[int]] = None,
                  bound: float = DEFAULT_BOUND, max_iter: int = 100) -> FitResult:
    """Per-type Poisson composite-likelihood fit.

    ``model_spec`` is ``"constant"`` (closed form ``N_j / |D|``) or a list of
    covariate names for a log-linear model.  ``types`` restricts fitting to a
    subset; the remaining types get a zero intensity (constant) or a zero
    coefficient vector (log-linear).
    """
    window = pattern.window
    volume = window.volume
    types = list(types) if types is not None else list(range(1, pattern.m + 1))
    counts = pattern.counts()

    if isinstance(model_spec, str) and model_spec == "constant":
        beta = np.zeros(pattern.m)
        for j in types:
            beta[j - 1] = counts[j - 1] / volume
        ll = sum(counts[j - 1] * np.log(beta[j - 1]) - beta[j - 1] * volume
                 for j in types if counts[j - 1] > 0)
        return FitResult(ConstantIntensity(tuple(beta), d=window.d), "converged", float(ll),
                         [0.0] * len(types), [0] * len(types))

    basis = tuple([model_spec] if isinstance(model_spec, str) else model_spec)
    quad_pts, quad_w = _quadrature(window.d, quadrature_resolution)
    quad_design = design_matrix(basis, quad_pts)
    bounds = {"lo": np.full(len(basis), -bound), "hi": np.full(len(basis), bound)}
    if "const" in basis:
        bounds["const_index"] = basis.index("const")
    beta = np.zeros((pattern.m, len(basis)))
    statuses, resids, iters = [], [], []
    total = 0.0
    for j in types:
        pts = pattern.of_type(j)
        if len(pts) == 0:
            raise DegenerateFitError(f"type {j} has no points; cannot fit a log-linear intensity")
        data_design = design_matrix(basis, window.to_unit(pts))
        b, status, obj, resid, it = _newton_loglinear(
            data_design, quad_design, quad_w, volume, bounds, max_iter=max_iter)
        if status != "converged":
            log.warning("type %d intensity fit ended with status %s (residual %.3g)", j, status, resid)
        beta[j - 1] = b
        statuses.append(status)
        resids.append(resid)
        iters.append(it)
        total += obj
    overall = "converged" if all(s == "converged" for s in statuses) else next(
        s for s in statuses if s != "converged")
    return FitResult(LogLinearIntensity(basis, beta, d=window.d), overall, total, resids, iters)


def dft_bias_vector(model: IntensityModel, taper: Taper, window: Window, omegas) -> np.ndarray:
    """Expected tapered DFT under ``model``: shape ``(K, m)`` (or ``(m,)``)."""
    omegas = np.asarray(omegas, dtype=float)
    single = omegas.ndim == 1
    om = np.atleast_2d(omegas)
    d = window.d
    norm = (2 * np.pi) ** (-d / 2) * taper.moment(2, d) ** -0.5 * window.volume ** -0.5
    out = np.zeros((om.shape[0], model.m), dtype=complex)
    h = Integrand.from_taper(taper, d)
    for j in range(1, model.m + 1):
        if model.is_zero(j):
            continue
        out[:, j - 1] = norm * window_fourier(h.times(model.integrand(j)), window, om)
    return out[0] if single else out
