"""Recovering ``x`` up to sign from ``b_i = |P_i x|^2``.

Least squares on ``F(z) = sum_i (z^T P_i z - b_i)^2``. The derivative of
``z -> |P z|^2`` in direction ``h`` is ``2 <P z, h>``, so the residual
Jacobian has rows ``2 (P_i z)^T`` and ``grad F = 4 sum_i r_i P_i z``.

Each restart runs gradient descent with Armijo backtracking and then a
damped Gauss-Newton refinement; both only accept steps that lower ``F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidInput
from .injectivity import canonical_sign, measurement_map
from .projections import TOL_STRUCT, ProjectionCollection
from .rng import as_generator

TOL_RECON = 1e-10
DISTINCT = 1e-4


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    """Squared projection magnitudes; tiny negative entries are clamped to 0."""

    values: np.ndarray
    collection_ref: str | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if np.any(v < -TOL_STRUCT):
            raise InvalidInput(f"negative measurement {v.min()}")
        v = np.maximum(v, 0.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @classmethod
    def of(cls, collection, x):
        return cls(measurement_map(collection, x), collection.fingerprint())

    def to_dict(self):
        return {"values": self.values.tolist(), "collection_ref": self.collection_ref}


@dataclass(frozen=True)
class ReconstructionBudget:
    restarts: int = 20
    max_iter: int = 2000
    gd_iter: int = 100


@dataclass(eq=False)
class ReconstructionResult:
    x_hat: np.ndarray
    residual: float
    restarts_used: int
    converged: bool
    iterations: int
    alternatives: list = field(default_factory=list)

    def to_dict(self):
        return {
            "x_hat": self.x_hat.tolist(),
            "residual": self.residual,
            "restarts_used": self.restarts_used,
            "converged": self.converged,
            "iterations": self.iterations,
            "alternatives": [a.tolist() for a in self.alternatives],
        }


def _values(collection, b):
    vals = b.values if isinstance(b, MeasurementVector) else np.asarray(b, dtype=float)
    if vals.shape != (collection.count,):
        raise DimensionMismatch(
            f"{vals.shape[0] if vals.ndim else 0} measurements for {collection.count} projections"
        )
    return vals


def objective_and_gradient(collection, b, z):
    """``F(z)`` and its exact gradient ``4 sum_i (z^T P_i z - b_i) P_i z``."""
    vals = _values(collection, b)
    z = np.asarray(z, dtype=float)
    if z.shape != (collection.ambient_dim,):
        raise DimensionMismatch(f"point of shape {z.shape} in R^{collection.ambient_dim}")
    Pz = collection.stack @ z
    r = Pz @ z - vals
    return float(r @ r), 4.0 * (r @ Pz)


def residual_norm(collection, b, z):
    vals = _values(collection, b)
    r = (collection.stack @ z) @ z - vals
    return float(np.sqrt(r @ r))


def recovery_error(x_hat, x_true):
    """``min(|x_hat - x|, |x_hat + x|)``."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x_hat.shape != x_true.shape:
        raise DimensionMismatch(f"shapes {x_hat.shape} and {x_true.shape}")
    return float(min(np.linalg.norm(x_hat - x_true), np.linalg.norm(x_hat + x_true)))


def _descend(P, vals, z, budget, tol, history=None):
    """One restart. Returns ``(z, F, iterations)``."""
    def F_and_parts(z):
        Pz = P @ z
        r = Pz @ z - vals
        return float(r @ r), r, Pz

    F, r, Pz = F_and_parts(z)
    if history is not None:
        history.append(F)
    it = 0
    # gradient descent with Armijo backtracking
    step = 1.0
    while it < budget.gd_iter and math.sqrt(F) > tol:
        g = 4.0 * (r @ Pz)
        gg = float(g @ g)
        if gg == 0.0:
            break
        t = step
        while True:
            z_new = z - t * g
            F_new, r_new, Pz_new = F_and_parts(z_new)
            if F_new <= F - 1e-4 * t * gg:
                break
            t *= 0.5
            if t < 1e-20:
                break
        it += 1
        if F_new >= F:
            break
        z, F, r, Pz = z_new, F_new, r_new, Pz_new
        if history is not None:
            history.append(F)
        step = min(2.0 * t, 1e6)
    # damped Gauss-Newton (Levenberg-Marquardt)
    lam = 1e-3
    while it < budget.max_iter and math.sqrt(F) > tol:
        J = 2.0 * Pz
        JtJ = J.T @ J
        Jtr = J.T @ r
        scale = max(float(np.trace(JtJ)) / len(z), 1e-300)
        accepted = False
        while lam < 1e12:
            dz = np.linalg.solve(JtJ + lam * scale * np.eye(len(z)), -Jtr)
            F_new, r_new, Pz_new = F_and_parts(z + dz)
            if F_new < F:
                accepted = True
                break
            lam *= 10.0
        it += 1
        if not accepted:
            break
        z, F, r, Pz = z + dz, F_new, r_new, Pz_new
        if history is not None:
            history.append(F)
        lam = max(lam / 10.0, 1e-12)
    return z, F, it


def initial_points(collection, b, restarts, rng):
    """Spectral seed followed by ``restarts - 1`` scaled random unit vectors."""
    vals = _values(collection, b)
    P = collection.stack
    M = collection.ambient_dim
    total = float(vals.sum())
    w, V = np.linalg.eigh(np.tensordot(vals, P, axes=1))
    v = V[:, -1]
    denom = float(v @ (np.sum(P, axis=0) @ v))
    seeds = [v * math.sqrt(total / denom) if denom > 0 else np.zeros(M)]
    radius = math.sqrt(total * M / sum(collection.ranks))
    for _ in range(max(restarts - 1, 0)):
        u = rng.standard_normal(M)
        seeds.append(u / np.linalg.norm(u) * radius)
    return seeds


def reconstruct(collection, b, budget=None, rng=None, tol_recon=TOL_RECON):
    """Estimate ``x`` (up to sign) from ``b = measurement_map(collection, x)``.

    ``converged`` is true iff the recomputed residual is at most
    ``tol_recon * (1 + |b|)``. Distinct converged solutions found by other
    restarts are listed in ``alternatives``; on a non-injective collection
    they expose the ambiguity.
    """
    if not isinstance(collection, ProjectionCollection):
        collection = ProjectionCollection(tuple(collection))
    if not isinstance(b, MeasurementVector):
        b = MeasurementVector(b)
    vals = _values(collection, b)
    budget = budget or ReconstructionBudget()
    rng = as_generator(rng)
    tol = tol_recon * (1.0 + float(np.linalg.norm(vals)))
    P = collection.stack

    runs = []
    for k, z0 in enumerate(initial_points(collection, b, budget.restarts, rng)):
        z, _, it = _descend(P, vals, z0, budget, tol)
        z = canonical_sign(z)
        runs.append((residual_norm(collection, vals, z), k, z, it))
    runs.sort(key=lambda t: (t[0], t[1]))
    res, _, x_hat, it = runs[0]
    alternatives = []
    for r, _, z, _ in runs[1:]:
        if r > tol:
            continue
        if all(min(np.linalg.norm(z - a), np.linalg.norm(z + a)) > DISTINCT
               for a in [x_hat, *alternatives]):
            alternatives.append(z)
    return ReconstructionResult(x_hat, res, len(runs), res <= tol, it, alternatives)
