"""Observation windows, multitype point patterns, frequency grids and
matrix-valued fields on those grids.

Frequencies are addressed by integer index vectors ``k`` and the node is
derived as ``2 * pi * k / Omega``; keeping the integer index as the primary
key makes the symmetry ``k -> -k`` exact.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-8


@dataclass(frozen=True)
class Window:
    """Centred box ``[-A_1/2, A_1/2] x ... x [-A_d/2, A_d/2]``."""

    side_lengths: tuple

    def __post_init__(self):
        sides = tuple(float(a) for a in np.atleast_1d(self.side_lengths))
        if not sides or any(not (a > 0 and math.isfinite(a)) for a in sides):
            raise InvalidArgumentError(f"side lengths must be positive, got {sides}")
        object.__setattr__(self, "side_lengths", sides)

    @classmethod
    def square(cls, side: float, d: int = 2) -> "Window":
        return cls((side,) * d)

    @property
    def d(self) -> int:
        return len(self.side_lengths)

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.side_lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_lengths))

    def contains(self, coords, atol: float = 1e-12) -> np.ndarray:
        coords = np.atleast_2d(coords)
        half = self.sides / 2
        return np.all(np.abs(coords) <= half + atol * np.maximum(half, 1.0), axis=1)

    def to_unit(self, coords) -> np.ndarray:
        """Rescale window coordinates to the unit cube ``[-1/2, 1/2]^d``."""
        return np.asarray(coords, dtype=float) / self.sides

    def to_json(self, m: Optional[int] = None) -> dict:
        out = {"side_lengths": list(self.side_lengths)}
        if m is not None:
            out["m"] = int(m)
        return out


@dataclass(frozen=True, eq=False)
class MultitypePattern:
    """An m-variate point pattern observed in ``window``.

    ``types`` is 1-based, as in the CSV exchange format.  ``sampler`` is only
    set for simulated patterns; it maps a seed to a fresh independent
    realisation of the same model and is what makes thinning-based
    reweighting possible.
    """

    coords: np.ndarray
    types: np.ndarray
    window: Window
    m: int
    sampler: Optional[Callable[[int], "MultitypePattern"]] = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, self.window.d)
        types = np.asarray(self.types, dtype=int).reshape(-1)
        if coords.shape[0] != types.shape[0]:
            raise InvalidArgumentError("coords and types have different lengths")
        if self.m < 1:
            raise InvalidArgumentError("m must be at least 1")
        if types.size and (types.min() < 1 or types.max() > self.m):
            raise InvalidArgumentError(f"type indices must lie in 1..{self.m}")
        if coords.size and not np.all(self.window.contains(coords)):
            raise InvalidArgumentError("some points lie outside the window")
        coords.setflags(write=False)
        types.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "types", types)

    @classmethod
    def from_components(cls, components: Sequence, window: Window, **kw) -> "MultitypePattern":
        """Build from a list of per-type ``(n_j, d)`` coordinate arrays."""
        d = window.d
        arrays = [np.asarray(c, dtype=float).reshape(-1, d) for c in components]
        coords = np.concatenate(arrays) if arrays else np.empty((0, d))
        types = np.concatenate(
            [np.full(len(a), j + 1, dtype=int) for j, a in enumerate(arrays)]
        ) if arrays else np.empty(0, dtype=int)
        return cls(coords, types, window, len(arrays), **kw)

    def __len__(self):
        return self.coords.shape[0]

    def of_type(self, j: int) -> np.ndarray:
        """Coordinates of type ``j`` (1-based)."""
        return self.coords[self.types == j]

    def counts(self) -> np.ndarray:
        return np.bincount(self.types, minlength=self.m + 1)[1:]

    def shifted(self, shift, window: Optional[Window] = None) -> "MultitypePattern":
        """Translate all points by ``shift`` and keep those inside ``window``."""
        window = window or self.window
        moved = self.coords + np.asarray(shift, dtype=float)
        keep = window.contains(moved, atol=0.0)
        return MultitypePattern(moved[keep], self.types[keep], window, self.m)

    def restricted(self, window: Window) -> "MultitypePattern":
        keep = window.contains(self.coords, atol=0.0)
        return MultitypePattern(self.coords[keep], self.types[keep], window, self.m)


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric lattice of frequencies ``2 pi k / Omega`` with
    ``-K_j <= k_j <= K_j`` on each axis."""

    grid_vector: tuple
    half_counts: tuple

    def __post_init__(self):
        omega = tuple(float(o) for o in np.atleast_1d(self.grid_vector))
        half = tuple(int(k) for k in np.atleast_1d(self.half_counts))
        if len(omega) != len(half):
            raise InvalidArgumentError("grid vector and index ranges differ in dimension")
        if any(o <= 0 for o in omega) or any(k < 0 for k in half):
            raise InvalidArgumentError("invalid frequency grid")
        object.__setattr__(self, "grid_vector", omega)
        object.__setattr__(self, "half_counts", half)

    @property
    def d(self) -> int:
        return len(self.grid_vector)

    @property
    def shape(self) -> tuple:
        return tuple(2 * k + 1 for k in self.half_counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> np.ndarray:
        return 2 * np.pi / np.asarray(self.grid_vector)

    def axis_indices(self, axis: int) -> np.ndarray:
        k = self.half_counts[axis]
        return np.arange(-k, k + 1)

    def axis_nodes(self, axis: int) -> np.ndarray:
        return 2 * np.pi * self.axis_indices(axis) / self.grid_vector[axis]

    def indices(self) -> np.ndarray:
        """Integer index vectors, shape ``(*shape, d)``."""
        mesh = np.meshgrid(*[self.axis_indices(j) for j in range(self.d)], indexing="ij")
        return np.stack(mesh, axis=-1)

    def nodes(self) -> np.ndarray:
        """Frequency vectors, shape ``(*shape, d)``."""
        return 2 * np.pi * self.indices() / np.asarray(self.grid_vector)

    def node(self, k) -> np.ndarray:
        return 2 * np.pi * np.asarray(k, dtype=float) / np.asarray(self.grid_vector)

    def position(self, k) -> tuple:
        """Array position of index vector ``k``."""
        k = tuple(int(v) for v in k)
        if any(abs(v) > h for v, h in zip(k, self.half_counts)):
            raise InvalidArgumentError(f"index {k} outside grid")
        return tuple(v + h for v, h in zip(k, self.half_counts))

    def sup_norms(self) -> np.ndarray:
        return np.max(np.abs(self.nodes()), axis=-1)

    def euclidean_norms(self) -> np.ndarray:
        return np.linalg.norm(self.nodes(), axis=-1)

    def to_json(self) -> dict:
        return {"grid_vector": list(self.grid_vector), "half_counts": list(self.half_counts)}


def make_frequency_grid(window: Window, scale: float = 4 / 3,
                        max_norm: float = 1.5 * np.pi) -> FrequencyGrid:
    """Grid with ``Omega = scale * A`` covering ``||omega||_inf <= max_norm``.

    >>> g = make_frequency_grid(Window((10.0, 10.0)))
    >>> g.half_counts
    (10, 10)
    """
    if not scale > 0:
        raise InvalidArgumentError(f"scale must be positive, got {scale}")
    if not max_norm > 0:
        raise InvalidArgumentError(f"max_norm must be positive, got {max_norm}")
    omega = scale * window.sides
    # relative slack so boundary nodes such as 2*pi*1/1 == 2*pi are kept
    half = np.floor(max_norm * omega / (2 * np.pi) * (1 + 1e-12) + 1e-12).astype(int)
    return FrequencyGrid(tuple(omega), tuple(half))


def _flip_all(values: np.ndarray, d: int) -> np.ndarray:
    return values[(slice(None, None, -1),) * d]


@dataclass(frozen=True, eq=False)
class HermitianField:
    """Dense ``(*grid.shape, m, m)`` complex array of matrices on a grid."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape[: self.grid.d] != self.grid.shape or vals.ndim != self.grid.d + 2:
            raise InvalidArgumentError(
                f"values of shape {vals.shape} do not match grid {self.grid.shape}"
            )
        if vals.shape[-1] != vals.shape[-2]:
            raise InvalidArgumentError("field values must be square matrices")
        vals = np.array(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    def at(self, k) -> np.ndarray:
        return self.values[self.grid.position(k)]

    def entry(self, i: int, j: int) -> np.ndarray:
        """Entry ``(i, j)`` (1-based) over the whole grid."""
        return self.values[..., i - 1, j - 1]

    def hermitian_defect(self) -> float:
        vals = self.values
        return float(np.max(np.abs(vals - np.conj(np.swapaxes(vals, -1, -2))), initial=0.0))

    def symmetry_defect(self) -> float:
        """max |F(-w) - conj(F(w))| over the grid."""
        flipped = _flip_all(self.values, self.grid.d)
        return float(np.max(np.abs(flipped - np.conj(self.values)), initial=0.0))

    def min_eigenvalue(self) -> np.ndarray:
        herm = 0.5 * (self.values + np.conj(np.swapaxes(self.values, -1, -2)))
        return np.linalg.eigvalsh(herm)[..., 0]

    def is_valid(self, tol: float = HERMITIAN_TOL, psd_tol: float = PSD_TOL) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.values), initial=0.0)))
        return (self.hermitian_defect() <= tol * scale
                and self.symmetry_defect() <= tol * scale
                and bool(np.all(self.min_eigenvalue() >= -psd_tol * scale)))

    def to_json(self) -> dict:
        nodes = self.grid.nodes().reshape(-1, self.grid.d)
        idx = self.grid.indices().reshape(-1, self.grid.d)
        flat = self.values.reshape(-1, self.m, self.m)
        return {
            "grid": self.grid.to_json(),
            "m": self.m,
            "nodes": [
                {"index": k.tolist(), "omega": w.tolist(),
                 "real": v.real.tolist(), "imag": v.imag.tolist()}
                for k, w, v in zip(idx, nodes, flat)
            ],
        }


def assert_hermitian_psd(M, tol: float = HERMITIAN_TOL) -> bool:
    """True iff ``M`` is Hermitian and positive semidefinite up to ``tol``.

    Both checks are scaled by ``max(1, ||M||_inf)`` so the predicate does not
    depend on the overall magnitude of well-scaled inputs.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    if np.max(np.abs(M - M.conj().T), initial=0.0) > tol * scale:
        return False
    eig = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    return bool(np.all(eig >= -tol * scale))


# -- pattern exchange format -------------------------------------------------

def read_window_json(path) -> tuple:
    meta = json.loads(Path(path).read_text())
    return Window(tuple(meta["side_lengths"])), meta.get("m")


def read_pattern(csv_path, window_path) -> MultitypePattern:
    """Read ``x,y[,z...],type`` CSV plus a ``{"side_lengths", "m"}`` sidecar."""
    window, m = read_window_json(window_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header[-1] != "type" or len(header) - 1 != window.d:
            raise InvalidArgumentError(f"unexpected CSV header {header} for d={window.d}")
        rows = [r for r in reader if r]
    if rows:
        data = np.array(rows, dtype=float)
        coords, types = data[:, :-1], data[:, -1].astype(int)
    else:
        coords, types = np.empty((0, window.d)), np.empty(0, dtype=int)
    if m is None:
        m = int(types.max()) if types.size else 1
    return MultitypePattern(coords, types, window, int(m))


def write_pattern(pattern: MultitypePattern, csv_path, window_path=None, extra_meta=None):
    axes = ["x", "y", "z"] + [f"x{j}" for j in range(4, pattern.window.d + 1)]
    header = axes[: pattern.window.d] + ["type"]
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for c, t in zip(pattern.coords, pattern.types):
            w.writerow([repr(float(v)) for v in c] + [int(t)])
    if window_path is not None:
        meta = pattern.window.to_json(pattern.m)
        if extra_meta:
            meta.update(extra_meta)
        Path(window_path).write_text(json.dumps(meta, indent=2))
