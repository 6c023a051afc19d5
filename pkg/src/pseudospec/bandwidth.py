"""Bandwidth rules: the rate-optimal rule and cross-validated spectral divergence."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (InvalidArgumentError, InvalidBandwidthError, SelectionFailure,
                     SingularSmootherError, UnsupportedDimensionError)
from .geometry import FrequencyGrid, Window, make_frequency_grid
from .spectral import KernelSpec, Periodogram, leave_one_out_field

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5) - 1) / 2


def optimal_bandwidth(window: Window, grid_spacing: Optional[float] = None,
                      floor_step: float = 0.1) -> float:
    """``|D|^{-1/(d+4)}``, raised to the grid spacing when it falls below it.

    The floor is the grid spacing rounded up to a multiple of ``floor_step``
    so the smoother always reaches the neighbouring nodes.
    """
    d = window.d
    if d > 4:
        raise UnsupportedDimensionError(f"rate-optimal bandwidth is defined for d <= 4, got {d}")
    raw = window.volume ** (-1.0 / (d + 4))
    if grid_spacing is None:
        grid_spacing = float(np.max(make_frequency_grid(window).spacing))
    if raw >= grid_spacing:
        return raw
    floor = math.ceil(grid_spacing / floor_step - 1e-9) * floor_step
    return round(floor, 10)


@dataclass(frozen=True)
class CvConfig:
    """Frequency domain, exclusion ball, search interval and ridge for CV."""

    half_width: float = 1.5 * np.pi
    exclusion: float = 0.1 * np.pi
    b_min: Optional[float] = None
    b_max: Optional[float] = None
    ridge: float = 1e-8
    n_scan: int = 20
    tol: float = 0.005

    def __post_init__(self):
        if self.half_width <= 0 or self.exclusion < 0 or self.ridge < 0:
            raise InvalidArgumentError("CV domain, exclusion and ridge must be non-negative")
        if self.n_scan < 2:
            raise InvalidArgumentError("need at least two scan points")

    def mask(self, grid: FrequencyGrid) -> np.ndarray:
        sup = grid.sup_norms()
        return (sup <= self.half_width * (1 + 1e-12)) & (sup >= self.exclusion * (1 - 1e-12))

    def interval(self, grid: FrequencyGrid) -> tuple:
        spacing = float(np.max(grid.spacing))
        lo = self.b_min if self.b_min is not None else 1.01 * spacing
        hi = self.b_max if self.b_max is not None else self.half_width
        if lo < spacing:
            raise InvalidArgumentError(f"b_min={lo} is below the grid spacing {spacing}")
        if hi > self.half_width + 1e-12:
            raise InvalidArgumentError("b_max exceeds half the extent of the CV domain")
        if not lo < hi:
            raise InvalidArgumentError(f"empty bandwidth interval ({lo}, {hi})")
        return lo, hi

    def to_json(self) -> dict:
        return {"half_width": self.half_width, "exclusion": self.exclusion, "b_min": self.b_min,
                "b_max": self.b_max, "ridge": self.ridge, "n_scan": self.n_scan, "tol": self.tol}


def cv_objective(periodogram: Periodogram, b: float, config: CvConfig = CvConfig(),
                 kernel: Optional[KernelSpec] = None) -> float:
    """Cross-validated spectral divergence ``L(b)``.

    Sums ``tr(I F^{-1}) + log det F`` over the CV nodes, with ``F`` the
    leave-one-out smoother plus a trace-scaled ridge.
    """
    grid = periodogram.grid
    kernel = (kernel or KernelSpec.triangular(b, grid.d)).with_bandwidth(b)
    mask = config.mask(grid)
    loo = leave_one_out_field(periodogram, kernel, mask)[mask]
    J = periodogram.centered[mask]
    m = loo.shape[-1]
    tr = np.real(np.trace(loo, axis1=-2, axis2=-1))
    F = loo + (config.ridge * tr / m)[:, None, None] * np.eye(m)
    F = (F + np.conj(np.swapaxes(F, -1, -2))) / 2
    try:
        chol = np.linalg.cholesky(F)
    except np.linalg.LinAlgError:
        chol = None
    if chol is None or not np.all(np.isfinite(chol)):
        eig = np.linalg.eigvalsh(F)
        k = int(np.argmin(eig[:, 0]))
        node = tuple(int(v) for v in np.argwhere(mask)[k] - np.asarray(grid.half_counts))
        raise SingularSmootherError(f"leave-one-out matrix singular at node {node} for b={b}",
                                    node=node, bandwidth=b)
    # tr(J J^* F^{-1}) = |L^{-1} J|^2 and log det F = 2 sum log diag(L)
    y = np.linalg.solve(chol, J[..., None])[..., 0]
    trace_term = np.sum(np.abs(y) ** 2, axis=-1)
    logdet = 2 * np.sum(np.log(np.real(np.diagonal(chol, axis1=-2, axis2=-1))), axis=-1)
    return float(np.sum(trace_term + logdet))


@dataclass
class CvResult:
    b_cv: float
    objective: float
    curve: list = field(default_factory=list)
    refinements: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"b_cv": self.b_cv, "objective": self.objective,
                "scan": [{"b": b, "L": (None if not np.isfinite(v) else v)} for b, v in self.curve],
                "refinement": [{"b": b, "L": v} for b, v in self.refinements]}


def select_bandwidth_cv(periodogram: Periodogram, config: CvConfig = CvConfig(),
                        kernel: Optional[KernelSpec] = None) -> CvResult:
    """Log-spaced scan of ``L(b)`` followed by golden-section refinement."""
    lo, hi = config.interval(periodogram.grid)
    scan = np.geomspace(lo, hi, config.n_scan)
    curve = []
    errors = 0
    for b in scan:
        try:
            val = cv_objective(periodogram, float(b), config, kernel)
        except (InvalidBandwidthError, SingularSmootherError) as exc:
            log.info("CV scan point b=%.4g failed: %s", b, exc)
            val, errors = math.inf, errors + 1
        curve.append((float(b), val))
    vals = np.array([v for _, v in curve])
    if errors == len(scan) or not np.any(np.isfinite(vals)):
        raise SelectionFailure("every bandwidth in the CV scan failed")
    best = int(np.nanargmin(vals))
    a = scan[max(best - 1, 0)]
    c = scan[min(best + 1, len(scan) - 1)]

    refinements = []

    def f(b):
        try:
            v = cv_objective(periodogram, float(b), config, kernel)
        except (InvalidBandwidthError, SingularSmootherError):
            v = math.inf
        refinements.append((float(b), v))
        return v

    x1 = c - GOLDEN * (c - a)
    x2 = a + GOLDEN * (c - a)
    f1, f2 = f(x1), f(x2)
    while c - a > config.tol:
        if f1 <= f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - GOLDEN * (c - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (c - a)
            f2 = f(x2)
    candidates = [(vals[best], scan[best]), (f1, x1), (f2, x2)]
    obj, b_cv = min(candidates, key=lambda t: t[0])
    b_cv = float(np.clip(b_cv, lo, hi))
    return CvResult(b_cv, float(obj), curve, refinements)
