"""Poisson and product-shot-noise Cox simulators with closed-form ``L2``.

Latent intensity of type ``i``::

    Lambda_i(x) = lambda_i(x / A) * S_i(x) * Y_i(x)
    S_i(x)      = kappa_i^{-1} sum_{v in Phi_i} phi_i(|x - v|)
    Y_i(x)      = exp(-sum_j kappa_j xi[j, i] / phi_j(0))
                  * prod_j prod_{v in Phi_j} (1 + xi[j, i] phi_j(|x - v|) / phi_j(0))

with independent Poisson parent processes ``Phi_1, Phi_2, Phi_3`` and
Gaussian kernels ``phi_j``.  Patterns are drawn from the latent field on a
fine cell grid (piecewise-constant approximation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (ConfigError, InvalidArgumentError, InvalidIntensityError,
                     UnsupportedOperationError)
from .geometry import MultitypePattern, Window
from .intensity import ConstantIntensity, IntensityModel, LogLinearIntensity
from .theory import ReweightedCovariance

KERNEL_NORMS = ("planar", "linear")
MAX_CELLS = 20_000_000


@dataclass(frozen=True, eq=False)
class CoxModelParams:
    """Parameters of the bivariate product-shot-noise Cox model.

    ``xi[j, i]`` is the effect of parent process ``j`` on target type ``i``
    (0-based, shape ``(3, 2)``); ``xi[i, i]`` must be zero.  ``kernel_norm``
    selects ``phi(r) = exp(-r^2 / 2 sigma^2)`` divided by ``2 pi sigma^2``
    (``"planar"``, unit mass in the plane) or by ``sqrt(2 pi sigma^2)``
    (``"linear"``).
    """

    intensity: IntensityModel
    kappa: tuple
    sigma: tuple
    xi: np.ndarray
    kernel_norm: str = "planar"
    name: str = "custom"

    def __post_init__(self):
        kappa = tuple(float(k) for k in self.kappa)
        sigma = tuple(float(s) for s in self.sigma)
        xi = np.array(self.xi, dtype=float)
        m = self.intensity.m
        if len(kappa) != len(sigma) or len(kappa) < m:
            raise InvalidArgumentError("need one kappa and sigma per parent process")
        if xi.shape != (len(kappa), m):
            raise InvalidArgumentError(f"xi must have shape ({len(kappa)}, {m})")
        if any(k <= 0 for k in kappa) or any(s <= 0 for s in sigma):
            raise InvalidArgumentError("kappa and sigma must be positive")
        if np.any(xi <= -1):
            raise InvalidArgumentError("interaction parameters must exceed -1")
        if any(xi[i, i] != 0 for i in range(m)):
            raise InvalidArgumentError("self-interaction xi[i, i] must be zero")
        if self.kernel_norm not in KERNEL_NORMS:
            raise InvalidArgumentError(f"kernel_norm must be one of {KERNEL_NORMS}")
        xi.setflags(write=False)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "xi", xi)

    @property
    def m(self) -> int:
        return self.intensity.m

    @property
    def n_parents(self) -> int:
        return len(self.kappa)

    def phi0(self, j: int) -> float:
        """Kernel peak ``phi_j(0)`` (0-based ``j``)."""
        s2 = self.sigma[j] ** 2
        return 1 / (2 * np.pi * s2) if self.kernel_norm == "planar" else (2 * np.pi * s2) ** -0.5

    def phi(self, j: int, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.phi0(j) * np.exp(-r ** 2 / (2 * self.sigma[j] ** 2))

    def to_json(self) -> dict:
        return {"name": self.name, "intensity": self.intensity.to_json(), "kappa": list(self.kappa),
                "sigma": list(self.sigma), "xi": self.xi.tolist(), "kernel_norm": self.kernel_norm}

    @classmethod
    def preset(cls, name: str, kernel_norm: str = "planar") -> "CoxModelParams":
        name = name.upper()
        if name not in PRESETS:
            raise InvalidArgumentError(f"unknown model {name!r}; choose from {sorted(PRESETS)}")
        return replace(PRESETS[name], kernel_norm=kernel_norm)


def _xi(x12, x21, x31, x32):
    return np.array([[0.0, x12], [x21, 0.0], [x31, x32]])


M2_INTENSITY = LogLinearIntensity(("const", "x1sq", "x2sq"),
                                  np.array([[math.log(3), -2.0, -2.0], [math.log(2), -2.0, 2.0]]))
PRESETS = {
    "M1": CoxModelParams(ConstantIntensity((0.5, 1.5)), (0.25, 0.75, 0.2), (0.6, 0.3, 1.0),
                         _xi(0.7, 0.9, 0.3, 0.1), name="M1"),
    "M2": CoxModelParams(M2_INTENSITY, (0.25, 0.75, 0.2), (0.6, 0.3, 1.0),
                         _xi(0.7, 0.9, 0.3, 0.1), name="M2"),
    "M3": CoxModelParams(M2_INTENSITY, (0.25, 0.75, 0.2), (0.6, 0.3, 1.0),
                         _xi(-0.7, -0.9, 0.3, 0.1), name="M3"),
}


@dataclass(frozen=True)
class SimulationConfig:
    window: Window
    seed: Optional[int] = None
    cell: float = 0.05
    buffer: Optional[float] = None
    truncation: float = 4.0
    unit_field: bool = False
    max_cells: int = MAX_CELLS

    def buffer_for(self, params: CoxModelParams) -> float:
        buf = self.buffer if self.buffer is not None else 4 * max(params.sigma)
        if buf < 3 * max(params.sigma):
            raise ConfigError("parent buffer must be at least 3 * max(sigma)")
        return buf


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# -- Poisson -----------------------------------------------------------------

def _uniform_in(window_lo, window_hi, n, rng):
    return rng.uniform(window_lo, window_hi, size=(n, len(window_lo)))


def sample_poisson(intensity: Union[float, Callable], window: Window, seed=None,
                   bound: Optional[float] = None, resolution: float = 0.05) -> np.ndarray:
    """Points of a Poisson process on ``window``.

    ``intensity`` is a constant or a function of ``(n, d)`` spatial
    coordinates.  Inhomogeneous intensities are sampled by thinning a
    homogeneous process at rate ``bound``; without a bound the maximum over a
    ``resolution`` grid, inflated by 10%, is used.
    """
    rng = _rng(seed)
    sides = window.sides
    lo, hi = -sides / 2, sides / 2
    if not callable(intensity):
        lam = float(intensity)
        if not np.isfinite(lam) or lam < 0:
            raise InvalidIntensityError(f"intensity must be finite and non-negative, got {lam}")
        n = rng.poisson(lam * window.volume)
        return _uniform_in(lo, hi, n, rng)
    if bound is None:
        axes = [np.linspace(l, h, max(2, int(math.ceil((h - l) / resolution)) + 1))
                for l, h in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.asarray(intensity(np.stack([g.ravel() for g in mesh], axis=-1)), dtype=float)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise InvalidIntensityError("intensity is negative or not finite")
        bound = 1.1 * float(vals.max())
    if not np.isfinite(bound) or bound < 0:
        raise InvalidIntensityError("intensity bound must be finite and non-negative")
    n = rng.poisson(bound * window.volume)
    pts = _uniform_in(lo, hi, n, rng)
    if n == 0:
        return pts
    vals = np.asarray(intensity(pts), dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise InvalidIntensityError("intensity is negative or not finite")
    if np.any(vals > bound * (1 + 1e-12)):
        raise InvalidIntensityError("intensity exceeds the dominating bound")
    keep = rng.uniform(size=n) * bound < vals
    return pts[keep]


# -- latent fields -------------------------------------------------------------

def draw_parents(params: CoxModelParams, window: Window, buffer: float, seed=None) -> list:
    """Parent processes on the window enlarged by ``buffer`` on every side."""
    rng = _rng(seed)
    big = Window(tuple(s + 2 * buffer for s in window.side_lengths))
    return [sample_poisson(k, big, rng) for k in params.kappa]


def _pairwise_kernel(params, j, parents, x, truncation):
    if len(parents) == 0 or len(x) == 0:
        return np.zeros((len(x), 0))
    r = np.sqrt(((x[:, None, :] - parents[None, :, :]) ** 2).sum(-1))
    vals = params.phi(j, r)
    vals[r > truncation * params.sigma[j]] = 0.0
    return vals


def shot_noise_field(parents: np.ndarray, kappa: float, sigma: float, x, kernel_norm: str = "planar",
                     truncation: float = 4.0) -> np.ndarray:
    """``kappa^{-1} sum_v phi(|x - v|)`` at points ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    parents = np.asarray(parents, dtype=float).reshape(-1, x.shape[1])
    params = CoxModelParams(ConstantIntensity((1.0,)), (kappa,), (sigma,), np.zeros((1, 1)),
                            kernel_norm=kernel_norm)
    return _pairwise_kernel(params, 0, parents, x, truncation).sum(axis=1) / kappa


def compound_field(parents: Sequence[np.ndarray], params: CoxModelParams, i: int, x,
                   truncation: float = 4.0) -> np.ndarray:
    """``Y_i`` at points ``x`` (``i`` is 1-based)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    log_y = np.zeros(len(x))
    for j in range(params.n_parents):
        xi = params.xi[j, i - 1]
        if xi == 0:
            continue
        log_y -= params.kappa[j] * xi / params.phi0(j)
        k = _pairwise_kernel(params, j, np.asarray(parents[j]).reshape(-1, x.shape[1]), x, truncation)
        log_y += np.log1p(xi * k / params.phi0(j)).sum(axis=1)
    return np.exp(log_y)


def latent_intensity(parents: Sequence[np.ndarray], params: CoxModelParams, window: Window, i: int,
                     x, truncation: float = 4.0) -> np.ndarray:
    """``Lambda_i(x) = lambda_i(x / A) S_i(x) Y_i(x)`` at spatial points ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = shot_noise_field(parents[i - 1], params.kappa[i - 1], params.sigma[i - 1], x,
                         params.kernel_norm, truncation)
    y = compound_field(parents, params, i, x, truncation)
    return params.intensity.evaluate(window.to_unit(x), i) * s * y


def _cell_grid(window: Window, cell: float, max_cells: int):
    counts = [max(1, int(math.ceil(s / cell - 1e-9))) for s in window.side_lengths]
    if int(np.prod(counts)) > max_cells:
        raise ConfigError(f"field grid of {counts} cells exceeds the limit of {max_cells}")
    sizes = np.array(window.side_lengths) / counts
    centres = [-s / 2 + h * (np.arange(n) + 0.5) for s, h, n in zip(window.side_lengths, sizes, counts)]
    return centres, sizes


def _gaussian_patch(params, j, v, centres, sizes, radius):
    """Per-axis index ranges and the kernel values of one parent on the cell grid."""
    sl, profs = [], []
    for a, (c, h) in enumerate(zip(centres, sizes)):
        lo = int(np.searchsorted(c, v[a] - radius - h))
        hi = int(np.searchsorted(c, v[a] + radius + h))
        sl.append(slice(lo, hi))
        profs.append(c[lo:hi] - v[a])
    if any(p.size == 0 for p in profs):
        return None, None
    r2 = profs[0] ** 2
    for p in profs[1:]:
        r2 = np.add.outer(r2, p ** 2)
    vals = params.phi0(j) * np.exp(-r2 / (2 * params.sigma[j] ** 2))
    vals[r2 > radius ** 2] = 0.0
    return tuple(sl), vals


def latent_fields_on_grid(parents, params: CoxModelParams, window: Window, cell: float = 0.05,
                          truncation: float = 4.0, max_cells: int = MAX_CELLS):
    """``S_i Y_i`` for each type on the cell-centre grid, plus the grid itself."""
    centres, sizes = _cell_grid(window, cell, max_cells)
    shape = tuple(len(c) for c in centres)
    m = params.m
    shot = np.zeros((m,) + shape)
    log_y = np.zeros((m,) + shape)
    for j in range(params.n_parents):
        radius = truncation * params.sigma[j]
        targets = [i for i in range(m) if params.xi[j, i] != 0]
        log_y[targets] -= (params.kappa[j] * params.xi[j, targets] / params.phi0(j))[
            (slice(None),) + (None,) * len(shape)]
        if j >= m and not targets:
            continue
        for v in parents[j]:
            sl, vals = _gaussian_patch(params, j, v, centres, sizes, radius)
            if sl is None:
                continue
            if j < m:
                shot[(j,) + sl] += vals
            for i in targets:
                log_y[(i,) + sl] += np.log1p(params.xi[j, i] * vals / params.phi0(j))
    for i in range(m):
        shot[i] /= params.kappa[i]
    return shot * np.exp(log_y), centres, sizes


def _sample_cells(field: np.ndarray, centres, sizes, rng) -> np.ndarray:
    d = len(centres)
    counts = rng.poisson(field * float(np.prod(sizes)))
    idx = np.nonzero(counts)
    reps = counts[idx]
    base = np.stack([centres[a][idx[a]] for a in range(d)], axis=-1)
    base = np.repeat(base, reps, axis=0)
    jitter = (rng.uniform(size=base.shape) - 0.5) * sizes
    return base + jitter


def sample_cox_pattern(params: CoxModelParams, config: SimulationConfig, seed=None) -> MultitypePattern:
    """One realisation of the Cox model in ``config.window``.

    ``seed`` overrides ``config.seed``; the returned pattern carries a
    ``sampler`` that draws further independent realisations.
    """
    seed = config.seed if seed is None else seed
    rng = _rng(seed)
    window = config.window
    comps = []
    if config.unit_field:
        for i in range(1, params.m + 1):
            lam = lambda x, i=i: params.intensity.evaluate(window.to_unit(x), i)
            comps.append(sample_poisson(lam, window, rng))
    else:
        buf = config.buffer_for(params)
        parents = draw_parents(params, window, buf, rng)
        field_si, centres, sizes = latent_fields_on_grid(parents, params, window, config.cell,
                                                         config.truncation, config.max_cells)
        mesh = np.meshgrid(*centres, indexing="ij")
        u = window.to_unit(np.stack([g.ravel() for g in mesh], axis=-1))
        for i in range(1, params.m + 1):
            lam = params.intensity.evaluate(u, i).reshape(field_si.shape[1:]) * field_si[i - 1]
            comps.append(_sample_cells(lam, centres, sizes, rng))
    comps = [np.clip(c, -window.sides / 2, window.sides / 2) for c in comps]
    child = np.random.SeedSequence(int(rng.integers(2 ** 63)))

    def sampler(s=None):
        return sample_cox_pattern(params, config, seed=np.random.SeedSequence(
            [int(child.generate_state(1)[0]), int(s or 0)]))

    return MultitypePattern.from_components(comps, window, sampler=sampler)


def replicate_seeds(seed, reps: int) -> list:
    return np.random.SeedSequence(seed).spawn(reps)


def simulate_replicates(params: CoxModelParams, config: SimulationConfig, reps: int) -> list:
    return [sample_cox_pattern(params, config, seed=np.random.default_rng(s))
            for s in replicate_seeds(config.seed, reps)]


# -- second order --------------------------------------------------------------

def kernel_overlap(params: CoxModelParams, j: int, r) -> np.ndarray:
    """``c_j(r) = phi_j(0)^{-2} int phi_j(x + u) phi_j(u) du`` for ``|x| = r`` (0-based ``j``)."""
    s2 = params.sigma[j] ** 2
    return np.pi * s2 * np.exp(-np.asarray(r, dtype=float) ** 2 / (4 * s2))


def _l2_profile(params: CoxModelParams, i: int, j: int) -> Callable:
    """Radial profile of ``l2^{(i,j)}`` (0-based indices)."""
    K = params.n_parents
    kap = params.kappa

    def ell(r):
        c = [kernel_overlap(params, l, r) for l in range(K)]
        expo = sum(kap[l] * params.xi[l, i] * params.xi[l, j] * c[l] for l in range(K))
        if i == j:
            pre = 1 + params.phi0(i) ** 2 * c[i] / kap[i]
        else:
            pre = ((1 + params.xi[i, j] * params.phi0(i) * c[i])
                   * (1 + params.xi[j, i] * params.phi0(j) * c[j]))
        return pre * np.exp(expo) - 1
    return ell


def closed_form_L2(params: CoxModelParams, x) -> np.ndarray:
    """``L2(x)`` as an ``m x m`` matrix for a lag vector ``x``."""
    r = float(np.linalg.norm(np.asarray(x, dtype=float)))
    m = params.m
    return np.array([[float(_l2_profile(params, i, j)(r)) for j in range(m)] for i in range(m)])


def cox_covariance(params: CoxModelParams) -> ReweightedCovariance:
    """The model's reduced covariance as an isotropic :class:`ReweightedCovariance`.

    The closed form assumes the planar kernel normalisation, under which
    ``E S_i = E Y_i = 1``.
    """
    if params.kernel_norm != "planar":
        raise UnsupportedOperationError("closed-form L2 requires planar kernel normalisation")
    m = params.m
    profiles = [[_l2_profile(params, i, j) for j in range(m)] for i in range(m)]
    return ReweightedCovariance.isotropic(profiles, length_scale=2 * min(params.sigma))


# -- reweighting -----------------------------------------------------------------

def _sup_inverse(model: IntensityModel, j: int, d: int, n: int = 201) -> float:
    axes = [np.linspace(-0.5, 0.5, n)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = model.evaluate(np.stack([g.ravel() for g in mesh], axis=-1), j)
    if np.any(vals <= 0):
        raise InvalidIntensityError(f"intensity of type {j} is not positive on the window")
    return float(np.max(1 / vals))


def reweight_by_thinning(pattern: MultitypePattern, model: IntensityModel, seed=None) -> MultitypePattern:
    """Thin a superposition of ``k`` independent copies to unit intensity.

    Needs ``pattern.sampler``, so it only works on simulated patterns.
    Type ``j`` keeps a point at ``x`` with probability
    ``1 / (k_j lambda_j(x / A))`` where ``k_j = ceil(sup 1 / lambda_j)``.
    """
    if pattern.sampler is None:
        raise UnsupportedOperationError("reweighting by thinning needs a simulated pattern")
    rng = _rng(seed)
    window = pattern.window
    ks = [max(1, math.ceil(_sup_inverse(model, j, window.d) - 1e-12)) for j in range(1, model.m + 1)]
    copies = [pattern] + [pattern.sampler(int(rng.integers(2 ** 31))) for _ in range(max(ks) - 1)]
    comps = []
    for j in range(1, pattern.m + 1):
        pts = np.concatenate([c.of_type(j) for c in copies[:ks[j - 1]]])
        p = 1 / (ks[j - 1] * model.evaluate(window.to_unit(pts), j)) if len(pts) else np.empty(0)
        comps.append(pts[rng.uniform(size=len(pts)) < p])
    return MultitypePattern.from_components(comps, window)
