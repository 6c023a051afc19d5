"""Monte Carlo harness: simulate, estimate, and score against analytic truth."""
from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .bandwidth import CvConfig, optimal_bandwidth, select_bandwidth_cv
from .errors import ConfigError, InvalidArgumentError, SingularSpectrumError
from .geometry import FrequencyGrid, HermitianField, MultitypePattern, Window, make_frequency_grid
from .intensity import IntensityModel, fit_intensity, zero_intensity
from .simulation import CoxModelParams, SimulationConfig, cox_covariance, sample_cox_pattern, sample_poisson
from .spectral import KernelSpec, Periodogram, SpectrumEstimate, feasible_periodogram, kernel_smooth
from .taper import Taper, make_taper
from .theory import AnalyticPseudoSpectrum, _taper_intensity_moments, coherences

log = logging.getLogger(__name__)

ESTIMATORS = ("raw", "kernel_opt", "kernel_cv")
SCHEMES = ("correct", "sos", "zero")
TRUTH_FLOOR = 1e-12
DEFAULT_BASIS = ("const", "x1sq", "x2sq")


# -- metrics -------------------------------------------------------------------

def _as_values(x) -> np.ndarray:
    if isinstance(x, (HermitianField, SpectrumEstimate)):
        return x.values
    return np.asarray(x)


def _relative_errors(estimates, truth, entry=None, mask=None) -> np.ndarray:
    """``Re(F_hat) / F - 1`` as ``(reps, nodes)`` over the usable nodes."""
    est = np.stack([_as_values(e) for e in estimates]) if isinstance(estimates, (list, tuple)) \
        else np.asarray(estimates)
    tru = _as_values(truth)
    if entry is not None:
        i, j = entry
        est = est[..., i - 1, j - 1]
        tru = tru[..., i - 1, j - 1]
    if mask is not None:
        est = est[:, mask]
        tru = tru[mask]
    est = np.real(est).reshape(est.shape[0], -1)
    tru = np.real(tru).reshape(-1)
    small = np.abs(tru) < TRUTH_FLOOR
    if np.any(small):
        warnings.warn(f"skipping {int(small.sum())} node(s) where the truth is below {TRUTH_FLOOR}",
                      RuntimeWarning, stacklevel=3)
    if est.shape[0] < 1:
        raise InvalidArgumentError("need at least one replicate")
    return est[:, ~small] / tru[~small] - 1.0


def ibias2(estimates, truth, entry=None, mask=None) -> float:
    """Node-average of the squared relative bias of the replicate mean."""
    rel = _relative_errors(estimates, truth, entry, mask)
    return float(np.mean(np.mean(rel, axis=0) ** 2))


def imse(estimates, truth, entry=None, mask=None) -> float:
    """Node-average of the mean squared relative error."""
    rel = _relative_errors(estimates, truth, entry, mask)
    return float(np.mean(np.mean(rel ** 2, axis=0)))


def metric_mask(grid: FrequencyGrid, exclusion: float = 0.1 * np.pi,
                max_norm: float = 1.5 * np.pi) -> np.ndarray:
    sup = grid.sup_norms()
    return (sup >= exclusion * (1 - 1e-12)) & (sup <= max_norm * (1 + 1e-12))


def radial_average(fld, entry=(1, 1), width: Optional[float] = None) -> list:
    """Average real parts of ``entry`` over rings of ``|w|``."""
    grid = fld.grid
    spacing = float(np.max(grid.spacing))
    width = 2 * spacing if width is None else width
    if width <= spacing:
        raise InvalidArgumentError(f"ring width {width} must exceed the grid spacing {spacing}")
    vals = np.real(_as_values(fld)[..., entry[0] - 1, entry[1] - 1]).ravel()
    radii = grid.euclidean_norms().ravel()
    bins = np.floor(radii / width + 0.5).astype(int)
    out = []
    for b in np.unique(bins):
        sel = bins == b
        out.append((float(b * width), float(vals[sel].mean())))
    return out


def pair_correlation(pattern: MultitypePattern, model: IntensityModel, i: int, j: int, radii,
                     bandwidth: float = 0.15) -> np.ndarray:
    """Inhomogeneous (cross) pair correlation with translation edge correction.

    Epanechnikov smoothing in the distance; only implemented for ``d = 2``.
    """
    if pattern.window.d != 2:
        raise InvalidArgumentError("pair correlation is implemented for planar patterns")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    window = pattern.window
    xi, xj = pattern.of_type(i), pattern.of_type(j)
    if len(xi) == 0 or len(xj) == 0:
        return np.zeros_like(radii)
    li = model.evaluate(window.to_unit(xi), i)
    lj = model.evaluate(window.to_unit(xj), j)
    pairs = cKDTree(xi).sparse_distance_matrix(cKDTree(xj), radii.max() + bandwidth,
                                               output_type="coo_matrix")
    a, b, dist = pairs.row, pairs.col, pairs.data
    if i == j:
        keep = a != b
        a, b, dist = a[keep], b[keep], dist[keep]
    lag = np.abs(xi[a] - xj[b])
    overlap = np.prod(window.sides - lag, axis=1)
    w = 1.0 / (li[a] * lj[b] * overlap)
    u = (radii[:, None] - dist[None, :]) / bandwidth
    k = np.where(np.abs(u) < 1, 0.75 * (1 - u ** 2) / bandwidth, 0.0)
    return (k @ w) / (2 * np.pi * radii)


# -- coherence -------------------------------------------------------------------

@dataclass
class CoherenceResult:
    R: np.ndarray
    D: np.ndarray
    maxima: dict
    psd: bool

    def to_json(self) -> dict:
        return {"maxima": {f"{a},{b}": v for (a, b), v in self.maxima.items()}, "psd": self.psd}


def empirical_coherence(estimate, model: IntensityModel, taper: Taper, mask: Optional[np.ndarray] = None,
                        ridge: float = 1e-8) -> CoherenceResult:
    """Plug-in coherence ``R`` and partial coherence ``D`` of the reweighted process."""
    vals = _as_values(estimate)
    grid = estimate.grid
    d, m = grid.d, vals.shape[-1]
    h2, first, second = _taper_intensity_moments(model, taper, d)
    if np.any(np.diag(second) <= 0):
        raise SingularSpectrumError("fitted intensity must be positive for every type")
    finv = h2 * (vals - np.diag(first) / ((2 * np.pi) ** d * h2)) / second
    Ft = np.eye(m) / (2 * np.pi) ** d + finv
    Ft = (Ft + np.conj(np.swapaxes(Ft, -1, -2))) / 2
    tr = np.real(np.trace(Ft, axis1=-2, axis2=-1))
    Ft = Ft + (ridge * np.abs(tr) / m)[..., None, None] * np.eye(m)
    psd = bool(np.all(np.linalg.eigvalsh(Ft)[..., 0] >= -1e-12 * np.maximum(np.abs(tr), 1)))
    R, D = coherences(Ft, check=False)
    if mask is None:
        mask = np.ones(grid.shape, dtype=bool)
    maxima = {}
    for a in range(m):
        for b in range(a + 1, m):
            maxima[(a + 1, b + 1)] = {"max_R2": float(np.max(R[mask][:, a, b] ** 2)),
                                      "max_D2": float(np.max(D[mask][:, a, b] ** 2))}
    return CoherenceResult(R, D, maxima, psd)


def coherence_null_band(model: IntensityModel, window: Window, taper: Taper, bandwidth: float,
                        reps: int = 100, seed=None, quantile: float = 0.95,
                        mask_fn: Callable = metric_mask) -> dict:
    """Quantiles of max ``R^2`` for independent Poisson patterns under ``model``."""
    grid = make_frequency_grid(window)
    mask = mask_fn(grid)
    rng = np.random.default_rng(seed)
    stats = []
    for _ in range(reps):
        comps = [sample_poisson(lambda x, j=j: model.evaluate(window.to_unit(x), j), window, rng)
                 for j in range(1, model.m + 1)]
        pat = MultitypePattern.from_components(comps, window)
        fit = fit_intensity(pat, "constant").model
        est = kernel_smooth(feasible_periodogram(pat, taper, fit, grid),
                            KernelSpec.triangular(bandwidth, window.d))
        res = empirical_coherence(est, fit, taper, mask)
        stats.append([v["max_R2"] for v in res.maxima.values()])
    stats = np.asarray(stats)
    return {"quantile": quantile, "max_R2": np.quantile(stats, quantile, axis=0).tolist()}


# -- study ---------------------------------------------------------------------------

@dataclass
class StudyConfig:
    model: str = "M1"
    sides: Sequence[float] = (10.0, 20.0)
    reps: int = 50
    estimators: Sequence[str] = ESTIMATORS
    schemes: Sequence[str] = ("correct",)
    entries: Sequence[tuple] = ((1, 1), (1, 2), (2, 2))
    exclusion: float = 0.1 * np.pi
    max_norm: float = 1.5 * np.pi
    grid_scale: float = 4 / 3
    taper_a: float = 0.025
    seed: int = 0
    basis: Optional[Sequence[str]] = None
    cv_exclusion: Optional[float] = None
    cell: float = 0.05
    kernel_norm: str = "planar"

    def __post_init__(self):
        if self.reps < 2:
            raise ConfigError("a study needs at least two replicates")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ConfigError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown intensity schemes {bad}; choose from {SCHEMES}")
        if not 0 <= self.exclusion < self.max_norm:
            raise ConfigError("metric domain must satisfy 0 <= exclusion < max_norm")
        if self.max_norm > 1.5 * np.pi * self.grid_scale / (4 / 3) + 1e-12:
            raise ConfigError("metric domain exceeds the grid extent")
        self.entries = tuple(tuple(e) for e in self.entries)
        self.sides = tuple(float(s) for s in self.sides)

    @property
    def fitted_basis(self):
        if self.basis is not None:
            return list(self.basis)
        return "constant" if self.model.upper() == "M1" else list(DEFAULT_BASIS)

    @classmethod
    def from_json(cls, obj: dict) -> "StudyConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown study keys {sorted(unknown)}")
        return cls(**obj)

    def to_json(self) -> dict:
        out = asdict(self)
        out["entries"] = [list(e) for e in self.entries]
        return out


@dataclass
class StudyReport:
    config: dict
    cells: list = field(default_factory=list)
    bandwidths: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    runtime: dict = field(default_factory=dict)

    def cell(self, side, estimator, entry, scheme="correct") -> dict:
        for c in self.cells:
            if (c["side"] == side and c["estimator"] == estimator and tuple(c["entry"]) == tuple(entry)
                    and c["scheme"] == scheme):
                return c
        raise KeyError((side, estimator, entry, scheme))

    def to_json(self) -> dict:
        return {"config": self.config, "cells": self.cells, "bandwidths": self.bandwidths,
                "failures": self.failures, "runtime": self.runtime}

    def write(self, json_path, csv_path=None) -> None:
        with open(json_path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
        if csv_path is not None:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["model", "side", "scheme", "estimator", "entry", "ibias2", "imse", "n_reps"])
                for c in self.cells:
                    w.writerow([c["model"], c["side"], c["scheme"], c["estimator"],
                                f"{c['entry'][0]}{c['entry'][1]}", f"{c['ibias2']:.6g}",
                                f"{c['imse']:.6g}", c["n_reps"]])


def _fit(pattern: MultitypePattern, scheme: str, basis) -> IntensityModel:
    if scheme == "zero":
        return zero_intensity(pattern.m, pattern.window.d)
    if scheme == "sos":
        return fit_intensity(pattern, "constant").model
    return fit_intensity(pattern, basis).model


def _summary(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": None, "q1": None, "median": None, "q3": None, "n": 0}
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return {"mean": float(v.mean()), "q1": float(q1), "median": float(med), "q3": float(q3), "n": int(v.size)}


def run_study(config: StudyConfig, hooks: Optional[Dict[str, Callable]] = None,
              collect: bool = False) -> StudyReport:
    """Simulate ``config.reps`` replicates per window and score each estimator.

    ``hooks`` maps extra estimator names to callables
    ``(pattern, periodogram, truth_field) -> (*shape, m, m)`` array.  With
    ``collect`` the per-replicate estimates are kept on ``report.samples``.
    """
    hooks = hooks or {}
    params = CoxModelParams.preset(config.model, kernel_norm=config.kernel_norm)
    taper = make_taper(config.taper_a)
    cov = cox_covariance(params)
    cv_cfg = CvConfig(half_width=config.max_norm,
                      exclusion=config.exclusion if config.cv_exclusion is None else config.cv_exclusion)
    report = StudyReport(config.to_json())
    samples = {}
    start = time.perf_counter()
    side_seeds = np.random.SeedSequence(config.seed).spawn(len(config.sides))
    for side, side_seed in zip(config.sides, side_seeds):
        t0 = time.perf_counter()
        window = Window.square(side)
        grid = make_frequency_grid(window, config.grid_scale, config.max_norm)
        mask = metric_mask(grid, config.exclusion, config.max_norm)
        truth = AnalyticPseudoSpectrum(params.intensity, taper, cov).on_grid(grid)
        b_opt = optimal_bandwidth(window, float(np.max(grid.spacing)))
        sim_cfg = SimulationConfig(window, cell=config.cell)
        names = list(config.estimators) + list(hooks)
        est = {(s, e): [] for s in config.schemes for e in names}
        b_cv = {s: [] for s in config.schemes}
        for rep, rep_seed in enumerate(side_seed.spawn(config.reps)):
            try:
                pattern = sample_cox_pattern(params, sim_cfg, seed=np.random.default_rng(rep_seed))
                row = {}
                for scheme in config.schemes:
                    model = _fit(pattern, scheme, config.fitted_basis)
                    pg = feasible_periodogram(pattern, taper, model, grid)
                    for name in config.estimators:
                        if name == "raw":
                            row[(scheme, name)] = pg.values
                        elif name == "kernel_opt":
                            row[(scheme, name)] = kernel_smooth(
                                pg, KernelSpec.triangular(b_opt, grid.d)).values
                        else:
                            res = select_bandwidth_cv(pg, cv_cfg)
                            row[(scheme, "b_cv")] = res.b_cv
                            row[(scheme, name)] = kernel_smooth(
                                pg, KernelSpec.triangular(res.b_cv, grid.d)).values
                    for name, fn in hooks.items():
                        row[(scheme, name)] = np.asarray(fn(pattern, pg, truth))
            except Exception as exc:  # a failed replicate must not sink the study
                log.warning("side %s replicate %d failed: %s", side, rep, exc)
                report.failures.append({"side": side, "rep": rep, "error": f"{type(exc).__name__}: {exc}"})
                continue
            for key, val in row.items():
                if key[1] == "b_cv":
                    b_cv[key[0]].append(val)
                else:
                    est[key].append(val)
        for (scheme, name), vals in est.items():
            if len(vals) < 2:
                continue
            arr = np.stack(vals)
            if collect:
                samples[(side, scheme, name)] = arr
            for entry in config.entries:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    report.cells.append({
                        "model": config.model, "side": side, "scheme": scheme, "estimator": name,
                        "entry": list(entry), "n_reps": len(vals),
                        "ibias2": ibias2(arr, truth, entry, mask), "imse": imse(arr, truth, entry, mask)})
        for scheme in config.schemes:
            report.bandwidths.append({"side": side, "scheme": scheme, "b_opt": b_opt,
                                      "b_cv": _summary(b_cv[scheme])})
        report.runtime[str(side)] = time.perf_counter() - t0
    report.runtime["total"] = time.perf_counter() - start
    if collect:
        report.samples = samples
    return report
