"""Point sets on the projective sphere (unit sphere modulo x ~ -x).

Two kinds of grids live here:

* ``search_grid`` gives roughly uniform seeds for a minimum search; it makes
  no covering promise.
* :class:`CoverCells` partitions the projective sphere into cells, each with
  a node and a *proven* radius: every unit vector lies within Euclidean
  distance ``radius`` of ``+node`` or ``-node`` for the node of its cell.
  Certification relies on this bound, and cells can be split to halve it.

For M = 2 the cells are angle intervals of ``[0, pi)``. For M >= 3 they are
squares of the lattice on the facets ``x_j = +1`` of ``[-1, 1]^M``
(facets ``x_j = -1`` are antipodes and are left out). Radial projection onto
the unit ball is nonexpansive, so a facet cell of half-side ``h`` maps into
a spherical patch of radius ``h * sqrt(M - 1)`` around its projected center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, InvalidInput

NODE_CAP = 10**7


def _normalize_rows(X):
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def angle_nodes(n):
    """``n`` unit vectors in R^2 at angles ``(j + 1/2) * pi/n``."""
    t = (np.arange(n) + 0.5) * (math.pi / n)
    return np.column_stack([np.cos(t), np.sin(t)])


def fibonacci_hemisphere(n):
    """About ``n`` quasi-uniform points on the upper unit hemisphere of R^3."""
    total = 2 * n
    i = np.arange(total) + 0.5
    z = 1.0 - 2.0 * i / total
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    X = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return X[z > 0]


def _lift(M, facets, coords):
    X = np.empty((len(facets), M))
    for j in range(M):
        rows = facets == j
        X[rows, :j] = coords[rows, :j]
        X[rows, j] = 1.0
        X[rows, j + 1:] = coords[rows, j:]
    return _normalize_rows(X)


@dataclass(frozen=True, eq=False)
class CoverCells:
    """A set of cells covering (part of) the projective sphere of R^M.

    ``coords`` holds the angle (M = 2) or the facet coordinates (M >= 3) of
    each cell center, ``facets`` the facet index, ``half`` the common
    half-width of all cells.
    """

    M: int
    coords: np.ndarray
    facets: np.ndarray
    half: float

    def __len__(self):
        return len(self.facets)

    @property
    def radius(self):
        if self.M == 2:
            return 2.0 * math.sin(self.half / 2.0)
        return self.half * math.sqrt(self.M - 1)

    def points(self):
        if self.M == 2:
            t = self.coords[:, 0]
            return np.column_stack([np.cos(t), np.sin(t)])
        return _lift(self.M, self.facets, self.coords)

    def split(self, mask=None):
        """Children of the selected cells, each with half the half-width."""
        coords = self.coords if mask is None else self.coords[mask]
        facets = self.facets if mask is None else self.facets[mask]
        h = self.half / 2.0
        d = coords.shape[1]
        offsets = np.array(np.meshgrid(*([[-h, h]] * d), indexing="ij")).reshape(d, -1).T
        child = (coords[:, None, :] + offsets[None, :, :]).reshape(-1, d)
        return CoverCells(self.M, child, np.repeat(facets, len(offsets)), h)


def _cells_per_side(M, spacing):
    if M == 2:
        return int(math.ceil(math.pi / (2.0 * spacing)))
    return int(math.ceil(math.sqrt(M - 1) / spacing))


def cover_size(M, spacing):
    """Number of cells ``projective_cover(M, spacing)`` would produce."""
    n = _cells_per_side(M, spacing)
    return n if M == 2 else M * n ** (M - 1)


def projective_cover(M, spacing, node_cap=NODE_CAP):
    """Cells of radius at most ``spacing`` covering the projective sphere.

    Raises BudgetExceeded above ``node_cap`` cells.
    """
    if spacing <= 0:
        raise InvalidInput("grid spacing must be positive")
    if M < 2:
        raise InvalidInput("ambient dimension must be at least 2")
    size = cover_size(M, spacing)
    if size > node_cap:
        raise BudgetExceeded(
            f"grid with spacing {spacing} in R^{M} needs {size} nodes (cap {node_cap})"
        )
    n = _cells_per_side(M, spacing)
    if M == 2:
        h = math.pi / (2 * n)
        t = (2 * np.arange(n) + 1) * h
        return CoverCells(2, t[:, None], np.zeros(n, dtype=int), h)
    ticks = -1.0 + (2 * np.arange(n) + 1) / n
    mesh = np.stack(np.meshgrid(*([ticks] * (M - 1)), indexing="ij"), axis=-1)
    mesh = mesh.reshape(-1, M - 1)
    coords = np.tile(mesh, (M, 1))
    facets = np.repeat(np.arange(M), len(mesh))
    return CoverCells(M, coords, facets, 1.0 / n)


def search_grid(M, n_points):
    """Roughly ``n_points`` spread-out seeds on the projective sphere."""
    if M == 2:
        return angle_nodes(max(n_points, 4))
    if M == 3:
        return fibonacci_hemisphere(max(n_points, 8))
    n = max(2, int(round((n_points / M) ** (1.0 / (M - 1)))))
    ticks = -1.0 + (2 * np.arange(n) + 1) / n
    mesh = np.stack(np.meshgrid(*([ticks] * (M - 1)), indexing="ij"), axis=-1)
    mesh = mesh.reshape(-1, M - 1)
    return _lift(M, np.repeat(np.arange(M), len(mesh)), np.tile(mesh, (M, 1)))


def separated_minima(X, values, count, min_angle=0.25):
    """Indices of up to ``count`` lowest ``values`` whose nodes are pairwise
    at least ``min_angle`` apart as projective points.

    Greedy; tops up with the plain lowest values if too few are separated.
    """
    order = np.argsort(values, kind="stable")
    cos_max = math.cos(min_angle)
    chosen = []
    for i in order:
        if len(chosen) == count:
            break
        if all(abs(float(X[i] @ X[j])) < cos_max for j in chosen):
            chosen.append(int(i))
    for i in order:
        if len(chosen) == count:
            break
        if int(i) not in chosen:
            chosen.append(int(i))
    return chosen
