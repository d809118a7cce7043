"""Uniform cuboid grids, boundary padding and 1D quadrature rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from .errors import ConfigError

BOUNDARIES = ("periodic", "outflow")


@dataclass(frozen=True)
class CuboidGrid:
    """Uniform grid of ``shape`` cells on ``[lower, upper]``.

    Axes with a single cell are inactive: no fluxes are computed along them,
    so 1D and 2D problems run as one-cell-thick 3D grids.
    """

    shape: tuple
    lower: tuple = (0.0, 0.0, 0.0)
    upper: tuple = (1.0, 1.0, 1.0)
    boundary: tuple = ("periodic", "periodic", "periodic")

    def __post_init__(self):
        problems = []
        if len(self.shape) != 3 or any(int(n) < 1 for n in self.shape):
            problems.append(f"grid.shape: need three positive cell counts, got {self.shape}")
        if any(not (u > l) for l, u in zip(self.lower, self.upper)):
            problems.append("grid.upper: must exceed grid.lower on every axis")
        for d, b in enumerate(self.boundary):
            if b not in BOUNDARIES:
                problems.append(f"grid.boundary[{d}]: unknown boundary {b!r}")
        if problems:
            raise ConfigError(problems)
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))

    @property
    def dx(self) -> np.ndarray:
        return (np.asarray(self.upper, float) - np.asarray(self.lower, float)) / np.asarray(self.shape)

    @property
    def active(self) -> tuple:
        return tuple(d for d in range(3) if self.shape[d] > 1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    def centers(self) -> np.ndarray:
        """Cell centres, shape ``shape + (3,)``."""
        lo = np.asarray(self.lower, float)
        axes = [lo[d] + (np.arange(self.shape[d]) + 0.5) * self.dx[d] for d in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def points(self, local) -> np.ndarray:
        """Physical positions of local offsets ``local`` (M, 3) in [-1/2, 1/2]^3.

        Returns ``shape + (M, 3)``.
        """
        return self.centers()[..., None, :] + np.asarray(local)[None, None, None] * self.dx

    def pad_index(self, axis: int, g: int) -> np.ndarray:
        """Indices into the real cells for a ``g``-ghost padded axis."""
        n = self.shape[axis]
        idx = np.arange(-g, n + g)
        if self.boundary[axis] == "periodic":
            return np.mod(idx, n)
        return np.clip(idx, 0, n - 1)

    def pad(self, arr, g: int, axes=None) -> np.ndarray:
        """Pad the leading three axes of ``arr`` with ``g`` ghost layers."""
        axes = self.active if axes is None else axes
        out = arr
        for d in axes:
            out = np.take(out, self.pad_index(d, g), axis=d)
        return out


@dataclass(frozen=True)
class QuadratureSet:
    """Gauss-Lobatto and Gauss-Legendre rules on [-1/2, 1/2], weights summing to 1."""

    K: int
    lobatto_nodes: np.ndarray
    lobatto_weights: np.ndarray
    gauss_nodes: np.ndarray
    gauss_weights: np.ndarray

    @property
    def L(self):
        return self.lobatto_nodes.size

    @property
    def Q(self):
        return self.gauss_nodes.size

    @property
    def omega1(self) -> float:
        return float(self.lobatto_weights[0])


def gauss_lobatto(L: int):
    """``L``-point Gauss-Lobatto rule on [-1, 1]."""
    if L < 2:
        raise ValueError("Gauss-Lobatto needs at least two points")
    PLm1 = legendre.Legendre.basis(L - 1)
    interior = np.sort(PLm1.deriv().roots().real) if L > 2 else np.zeros(0)
    x = np.concatenate([[-1.0], interior, [1.0]])
    w = 2.0 / (L * (L - 1) * PLm1(x) ** 2)
    return x, w


def build_quadrature(K: int) -> QuadratureSet:
    """Minimal rules for degree ``K``: ``2L - 3 >= K`` (L >= 2) and ``2Q >= K + 1``."""
    if K < 0:
        raise ValueError("degree must be non-negative")
    L = max(2, -(-(K + 3) // 2))
    Q = max(1, -(-(K + 1) // 2))
    xl, wl = gauss_lobatto(L)
    xg, wg = legendre.leggauss(Q)
    return QuadratureSet(K, 0.5 * xl, 0.5 * wl, 0.5 * xg, 0.5 * wg)
