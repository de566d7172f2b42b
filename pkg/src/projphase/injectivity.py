"""Deciding whether ``x -> (|P_1 x|^2, ..., |P_N x|^2)`` is injective modulo sign.

The magnitude map of a collection fails to be injective exactly when some
nonzero ``x`` has images ``P_1 x, ..., P_N x`` that do not span R^M, i.e.
when there are nonzero ``x, y`` with ``y^T P_i x = 0`` for every ``i``.
Such a pair is a :class:`Witness`, and ``x + y``, ``x - y`` then have equal
measurements.

The quantitative form of the spanning condition is the *spanning defect*:
the smallest singular value of ``[P_1 x | ... | P_N x]`` for unit ``x``.
Since ``x -> P_i x`` is 1-Lipschitz, the defect is ``sqrt(N)``-Lipschitz on
the sphere, which is what makes grid certification possible.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .errors import (
    DegenerateWitness,
    DimensionMismatch,
    NonRankOne,
    PartitionCapExceeded,
    ZeroVector,
)
from .projections import TOL_RANK, ProjectionCollection, numerical_rank
from .rng import as_generator
from .spheres import NODE_CAP, projective_cover, search_grid, separated_minima

TOL_WITNESS = 1e-8
TOL_CERT = 1e-4
TOL_COLLISION = 1e-7

CERTIFIED = "CertifiedInjective"
WITNESS_FOUND = "WitnessFound"
INCONCLUSIVE = "Inconclusive"

_CHUNK = 50_000


def _as_collection(collection):
    if isinstance(collection, ProjectionCollection):
        return collection
    return ProjectionCollection(tuple(collection))


def _vector(collection, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (collection.ambient_dim,):
        raise DimensionMismatch(
            f"vector of shape {x.shape} for ambient dimension {collection.ambient_dim}"
        )
    return x


def canonical_sign(v, rtol=TOL_RANK):
    """Flip ``v`` so its first entry with ``|v_j| > rtol * max|v|`` is positive."""
    v = np.asarray(v, dtype=float)
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0.0:
        return v.copy()
    j = int(np.argmax(np.abs(v) > rtol * scale))
    return -v if v[j] < 0 else v.copy()


# --------------------------------------------------------------------------
# measurements and the spanning defect
# --------------------------------------------------------------------------


def measurement_map(collection, x):
    """``(x^T P_1 x, ..., x^T P_N x)``, i.e. the squared norms ``|P_i x|^2``."""
    collection = _as_collection(collection)
    x = _vector(collection, x)
    return np.einsum("i,nij,j->n", x, collection.stack, x)


def images(collection, x):
    """The ``M x N`` matrix ``[P_1 x | ... | P_N x]``."""
    collection = _as_collection(collection)
    return (collection.stack @ _vector(collection, x)).T


def gram(collection, x):
    """``G(x) = sum_i (P_i x)(P_i x)^T``; symmetric positive semidefinite."""
    A = images(collection, x)
    return A @ A.T


class SpanningDefect(NamedTuple):
    x: np.ndarray
    defect: float


def _defect_of_images(A):
    M, N = A.shape
    if N < M:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def spanning_defect(collection, x):
    """Smallest singular value of ``[P_1 u | ... | P_N u]`` with ``u = x/|x|``.

    Zero iff the images of ``x`` fail to span R^M. When ``N < M`` the
    images can never span and the defect is 0.
    """
    collection = _as_collection(collection)
    x = _vector(collection, x)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ZeroVector("spanning defect is undefined at x = 0")
    u = x / nx
    return SpanningDefect(u, _defect_of_images(images(collection, u)))


def defects_at(collection, X):
    """Spanning defects at each row of ``X`` (rows assumed unit)."""
    collection = _as_collection(collection)
    P = collection.stack
    M, N = collection.ambient_dim, collection.count
    out = np.zeros(len(X))
    if N < M:
        return out
    for s in range(0, len(X), _CHUNK):
        A = np.einsum("nij,rj->rin", P, X[s:s + _CHUNK])
        out[s:s + _CHUNK] = np.linalg.svd(A, compute_uv=False)[:, -1]
    return out


# --------------------------------------------------------------------------
# budgets, witnesses, verdicts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchBudget:
    """Effort limits for the witness and minimum-defect searches."""

    restarts: int = 50
    alternations: int = 200
    grid_points: int = 2000
    local_starts: int = 8
    local_iterations: int = 200
    polish_iterations: int = 30

    def scaled(self, factor):
        return SearchBudget(
            restarts=self.restarts * factor,
            alternations=self.alternations * factor,
            grid_points=self.grid_points * factor,
            local_starts=self.local_starts * factor,
            local_iterations=self.local_iterations,
            polish_iterations=self.polish_iterations,
        )


@dataclass(frozen=True, eq=False)
class Witness:
    """Unit vectors with ``y^T P_i x = 0`` for all ``i``, up to ``residual``."""

    x: np.ndarray
    y: np.ndarray
    residual: float

    def to_dict(self):
        return {"x": self.x.tolist(), "y": self.y.tolist(), "residual": self.residual}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["x"], float), np.asarray(d["y"], float), float(d["residual"]))


def witness_residual(collection, x, y):
    """``max_i |y^T P_i x|`` for the normalized pair."""
    collection = _as_collection(collection)
    x = _vector(collection, x)
    y = _vector(collection, y)
    x = x / np.linalg.norm(x)
    y = y / np.linalg.norm(y)
    return float(np.max(np.abs((collection.stack @ x) @ y)))


@dataclass(frozen=True, eq=False)
class CollisionPair:
    u: np.ndarray
    v: np.ndarray
    max_measurement_gap: float

    @property
    def relative_gap(self):
        scale = max(float(self.u @ self.u), float(self.v @ self.v))
        return self.max_measurement_gap / scale

    def to_dict(self):
        return {
            "u": self.u.tolist(),
            "v": self.v.tolist(),
            "max_measurement_gap": self.max_measurement_gap,
        }


@dataclass(eq=False)
class InjectivityVerdict:
    status: str
    min_defect_found: float
    witness: Witness | None = None
    search_budget: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    min_defect_x: np.ndarray | None = None

    def to_dict(self):
        return {
            "status": self.status,
            "min_defect": self.min_defect_found,
            "min_defect_x": None if self.min_defect_x is None else self.min_defect_x.tolist(),
            "witness": None if self.witness is None else self.witness.to_dict(),
            "budget": dict(self.search_budget),
            "tolerances": dict(self.tolerances),
        }


# --------------------------------------------------------------------------
# alternating least-eigenvector search for witnesses
# --------------------------------------------------------------------------


def _gram_batch(P, X):
    PX = np.einsum("nij,rj->rni", P, X)
    return np.einsum("rni,rnj->rij", PX, PX), PX


def _least_eigvecs(G, tie_rtol=1e-12):
    """Least eigenpairs of a stack of symmetric matrices, deterministically.

    Eigenvectors are sign-canonicalized. When the least eigenvalue is
    repeated, the eigenvector whose absolute entries are lexicographically
    largest is taken.
    """
    w, V = np.linalg.eigh(G)
    vecs = V[:, :, 0].copy()
    scale = np.maximum(np.abs(w[:, -1]), 1.0)
    tied = (w[:, 1] - w[:, 0]) <= tie_rtol * scale
    for r in np.flatnonzero(tied):
        cols = V[r][:, (w[r] - w[r, 0]) <= tie_rtol * scale[r]].T
        vecs[r] = max(cols, key=lambda c: tuple(np.abs(c)))
    # first entry above a relative threshold made positive
    amax = np.max(np.abs(vecs), axis=1, keepdims=True)
    first = np.argmax(np.abs(vecs) > TOL_RANK * amax, axis=1)
    signs = np.sign(vecs[np.arange(len(vecs)), first])
    signs[signs == 0] = 1.0
    return np.maximum(w[:, 0], 0.0), vecs * signs[:, None]


@dataclass(eq=False)
class AlternationTrace:
    """State of a batched alternating search.

    ``objective`` has one row per half-step and one column per restart;
    row ``2t`` is after the ``y``-update and row ``2t+1`` after the
    ``x``-update of alternation ``t``.
    """

    X: np.ndarray
    Y: np.ndarray
    residuals: np.ndarray
    objective: np.ndarray
    alternations: int


def alternating_descent(collection, X0, alternations=200, stop_below=None):
    """Minimize ``g(x, y) = sum_i (y^T P_i x)^2`` over unit ``x, y``.

    Each half-step is an exact minimization: for fixed ``x`` the best ``y``
    is the least eigenvector of ``G(x)``, and by the symmetry
    ``y^T P_i x = (P_i y)^T x`` the best ``x`` for fixed ``y`` is the least
    eigenvector of ``G(y)``. The objective is therefore nonincreasing.
    All rows of ``X0`` are run as independent restarts in one batch; the
    loop stops once any restart has residual below ``stop_below``.
    """
    collection = _as_collection(collection)
    P = collection.stack
    X = np.asarray(X0, dtype=float)
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    Y = X
    history = []
    residuals = np.full(len(X), np.inf)
    t = 0
    for t in range(1, alternations + 1):
        G, _ = _gram_batch(P, X)
        gy, Y = _least_eigvecs(G)
        G, PY = _gram_batch(P, Y)
        gx, X = _least_eigvecs(G)
        history.append(gy)
        history.append(gx)
        residuals = np.max(np.abs(np.einsum("rni,ri->rn", PY, X)), axis=1)
        if stop_below is not None and residuals.min() < stop_below:
            break
    return AlternationTrace(X, Y, residuals, np.array(history), t)


def polish_pair(collection, x, y, iterations=30):
    """Gauss-Newton refinement of a near-witness.

    Solves ``y^T P_i x = 0`` together with ``|x|^2 = |y|^2 = 1`` by
    least-squares Newton steps. Returns the best normalized pair seen and
    its residual; the input pair is returned if no step improves it.
    """
    collection = _as_collection(collection)
    P = collection.stack
    M, N = collection.ambient_dim, collection.count
    x = x / np.linalg.norm(x)
    y = y / np.linalg.norm(y)
    best = (witness_residual(collection, x, y), x, y)
    J = np.zeros((N + 2, 2 * M))
    for _ in range(iterations):
        Px, Py = P @ x, P @ y
        r = np.concatenate([Px @ y, [(x @ x - 1) / 2, (y @ y - 1) / 2]])
        J[:N, :M] = Py
        J[:N, M:] = Px
        J[N, :M] = x
        J[N + 1, M:] = y
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        x = x + step[:M]
        y = y + step[M:]
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        if nx == 0.0 or ny == 0.0:
            break
        x, y = x / nx, y / ny
        res = witness_residual(collection, x, y)
        if res < best[0]:
            best = (res, x, y)
        if res == 0.0 or np.linalg.norm(step) < 1e-15:
            break
    return best


def _shared_null_vectors(mats, max_subsets=12):
    """One vector from each maximal common null space among subsets of ``mats``.

    Ordered by subset size (largest first), then by bitmask.
    """
    N, M = mats.shape[0], mats.shape[1]
    if N > max_subsets:
        return []
    dims = {}
    vecs = {}
    for mask in range(1, 2**N):
        idx = [i for i in range(N) if mask >> i & 1]
        A = mats[idx].reshape(-1, M)
        _, s, Vt = np.linalg.svd(A)
        rank = int(np.sum(s > TOL_RANK * max(s[0], 1.0)))
        dims[mask] = M - rank
        vecs[mask] = Vt[-1]
    maximal = [
        m for m, d in dims.items()
        if d > 0 and all(dims[m | 1 << i] == 0 for i in range(N) if not m >> i & 1)
    ]
    maximal.sort(key=lambda m: (-bin(m).count("1"), m))
    return [vecs[m] for m in maximal]


def structured_seeds(collection, max_seeds=8):
    """Starting points suggested by shared kernels and shared images.

    A vector killed by several projections has few nonzero images, which
    is how critical directions typically arise; e.g. ``M-1`` rank-one
    projections always share a kernel vector, whose images cannot span when
    ``N <= 2M-2``. A vector ``w`` fixed by several projections pairs with
    some ``x`` into a witness ``(x, w)``, which the alternating search
    reaches from ``w`` by symmetry.
    """
    collection = _as_collection(collection)
    M = collection.ambient_dim
    P = collection.stack
    seeds = _shared_null_vectors(P) + _shared_null_vectors(np.eye(M) - P)
    return np.array(seeds[:max_seeds]).reshape(-1, M)


def _vanishing_images(P, x, tol=1e-6):
    return int(np.sum(np.linalg.norm(P @ x, axis=1) <= tol))


def _finish_pair(collection, x, y):
    """Orient and decouple a near-witness.

    The relation is symmetric, so ``x`` is chosen as the member with more
    vanishing images (the critical direction with the most structure). If
    ``x`` and ``y`` are nearly parallel, ``y`` is swapped for an equally good
    partner orthogonal to ``x`` when one exists.
    """
    P = collection.stack
    if _vanishing_images(P, y) > _vanishing_images(P, x):
        x, y = y, x
    res = witness_residual(collection, x, y)
    if min(np.linalg.norm(x - y), np.linalg.norm(x + y)) < 1e-3:
        G = gram(collection, x)
        G = G + (1.0 + np.trace(G)) * np.outer(x, x)
        _, v = _least_eigvecs(G[None])
        alt = v[0]
        alt_res = witness_residual(collection, x, alt)
        if alt_res <= res + TOL_WITNESS * 1e-3:
            y, res = alt, alt_res
    return canonical_sign(x), canonical_sign(y), res


@dataclass(eq=False)
class WitnessSearch:
    """Best pair found by :func:`search_witness`, accepted or not."""

    x: np.ndarray
    y: np.ndarray
    residual: float
    restart: int
    alternations: int
    restarts_run: int


def search_witness(collection, budget=None, rng=None, tol_witness=TOL_WITNESS):
    """Multi-start alternating search followed by Gauss-Newton polishing.

    Structural seeds come first, then ``budget.restarts`` Gaussian starts
    drawn from ``rng``. Restarts below ``tol_witness / 10`` are treated as
    tied and the lowest restart index is kept; otherwise the three lowest
    residuals are polished and the best one is returned.
    """
    collection = _as_collection(collection)
    budget = budget or SearchBudget()
    rng = as_generator(rng)
    M = collection.ambient_dim
    seeds = structured_seeds(collection)
    X0 = np.vstack([seeds, rng.standard_normal((budget.restarts, M))])
    trace = alternating_descent(
        collection, X0, budget.alternations, stop_below=tol_witness / 10
    )
    # every restart under the early-exit level counts as tied; lowest index wins
    tied = np.flatnonzero(trace.residuals < tol_witness / 10)
    if len(tied):
        order = tied[:1]
    else:
        order = np.argsort(trace.residuals, kind="stable")[:3]
    best = None
    for r in order:
        res, x, y = polish_pair(
            collection, trace.X[r], trace.Y[r], budget.polish_iterations
        )
        if best is None or res < best[0]:
            best = (res, x, y, int(r))
    _, x, y, r = best
    x, y, res = _finish_pair(collection, x, y)
    return WitnessSearch(x, y, res, r, trace.alternations, len(X0))


def find_witness(collection, budget=None, rng=None, tol_witness=TOL_WITNESS):
    """A :class:`Witness` with residual ``<= tol_witness``, or ``None``.

    ``None`` is a legitimate outcome: the search can stall at positive local
    minima and never proves injectivity.
    """
    found = search_witness(collection, budget, rng, tol_witness)
    if found.residual <= tol_witness:
        return Witness(found.x, found.y, found.residual)
    return None


# --------------------------------------------------------------------------
# minimum spanning-defect search
# --------------------------------------------------------------------------


def _smallest_eig_and_grad(P, x):
    nx = np.linalg.norm(x)
    u = x / nx
    A = (P @ u).T
    w, V = np.linalg.eigh(A @ A.T)
    y = V[:, 0]
    c = A.T @ y  # y^T P_i u
    g = 2.0 * (P @ y).T @ c
    g = (g - (g @ u) * u) / nx
    return float(w[0]), g


def min_defect_search(collection, budget=None):
    """Lowest spanning defect found on the projective sphere.

    A quasi-uniform grid is evaluated first; from well-separated low grid
    nodes a BFGS descent on ``lambda_min(G(x))`` runs, and each local result
    is offered to :func:`polish_pair`. Deterministic for a fixed budget.
    """
    collection = _as_collection(collection)
    budget = budget or SearchBudget()
    P = collection.stack
    X = search_grid(collection.ambient_dim, budget.grid_points)
    d = defects_at(collection, X)
    i0 = int(np.argmin(d))
    best = SpanningDefect(X[i0], float(d[i0]))
    if best.defect == 0.0:
        return best
    for i in separated_minima(X, d, budget.local_starts):
        res = minimize(
            lambda z: _smallest_eig_and_grad(P, z),
            X[i],
            jac=True,
            method="BFGS",
            options={"gtol": 1e-14, "maxiter": budget.local_iterations},
        )
        cand = spanning_defect(collection, res.x)
        A = images(collection, cand.x)
        y = np.linalg.svd(A)[0][:, -1]
        _, xp, _ = polish_pair(collection, cand.x, y, budget.polish_iterations)
        polished = spanning_defect(collection, xp)
        if polished.defect < cand.defect:
            cand = polished
        if cand.defect < best.defect:
            best = cand
    return SpanningDefect(canonical_sign(best.x), best.defect)


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------


def default_grid_spacing(M):
    """Certification mesh used when none is given (None above M = 4)."""
    return {2: 1e-3, 3: 1e-2, 4: 5e-2}.get(M)


def certify_injective(
    collection,
    tol_cert=TOL_CERT,
    grid_spacing=None,
    tol_witness=TOL_WITNESS,
    budget=None,
    rng=None,
    node_cap=NODE_CAP,
    refine_depth=10,
):
    """Three-way verdict on injectivity of the magnitude map.

    The sphere is covered by cells of radius at most ``grid_spacing``. A cell
    whose node has defect at least ``tol_cert + sqrt(N) * radius`` has defect
    ``>= tol_cert`` throughout, by the Lipschitz bound. Cells that fail the
    test but whose node value is still ``>= tol_cert`` are split, up to
    ``refine_depth`` times; ``refine_depth=0`` is the plain grid test. If all
    cells pass, the map is certified injective.

    Otherwise a witness search runs; failing that, the verdict is
    inconclusive and the lowest defect seen is reported. ``grid_spacing=None``
    skips the grid. Raises BudgetExceeded if the base grid exceeds
    ``node_cap`` nodes.
    """
    collection = _as_collection(collection)
    budget = budget or SearchBudget()
    lipschitz = math.sqrt(collection.count)
    tolerances = {"tol_cert": tol_cert, "tol_witness": tol_witness}
    info = asdict(budget)
    grid_min, grid_x = math.inf, None
    if grid_spacing is not None:
        cells = projective_cover(collection.ambient_dim, grid_spacing, node_cap)
        tolerances["certification_threshold"] = tol_cert + lipschitz * cells.radius
        info.update(grid_spacing=grid_spacing, grid_nodes=len(cells))
        evaluated, depth, certified = 0, 0, False
        while True:
            X = cells.points()
            d = defects_at(collection, X)
            evaluated += len(X)
            i = int(np.argmin(d))
            if d[i] < grid_min:
                grid_min, grid_x = float(d[i]), X[i]
            weak = d < tol_cert + lipschitz * cells.radius
            if not weak.any():
                certified = True
                break
            n_children = int(weak.sum()) * 2 ** (collection.ambient_dim - 1)
            if (d[weak].min() < tol_cert or depth >= refine_depth
                    or evaluated + n_children > node_cap):
                break
            cells = cells.split(weak)
            depth += 1
        info.update(nodes_evaluated=evaluated, refinement_depth=depth)
        if certified:
            return InjectivityVerdict(CERTIFIED, grid_min, None, info, tolerances, grid_x)

    w = find_witness(collection, budget, rng, tol_witness)
    if w is not None:
        d = spanning_defect(collection, w.x)
        return InjectivityVerdict(WITNESS_FOUND, d.defect, w, info, tolerances, d.x)

    found = min_defect_search(collection, budget)
    if grid_min < found.defect:
        found = SpanningDefect(grid_x, grid_min)
    return InjectivityVerdict(INCONCLUSIVE, found.defect, None, info, tolerances, found.x)


# --------------------------------------------------------------------------
# rank-one combinatorics and collisions
# --------------------------------------------------------------------------


class ComplementCheck(NamedTuple):
    holds: bool
    partition: tuple | None  # (S, S') violating the property, when it fails


def complement_property(lines, cap=16):
    """Whether every split ``S | S'`` of the lines has a spanning side.

    Enumerates the ``2^(N-1)`` unordered partitions (index ``N-1`` always
    sits in ``S'``). Ranks are decided by relative singular-value threshold.
    """
    lines = _as_collection(lines)
    if not lines.is_rank_one():
        raise NonRankOne(f"complement property needs rank-1 projections, got {lines.ranks}")
    N, M = lines.count, lines.ambient_dim
    if N > cap:
        raise PartitionCapExceeded(f"{N} lines exceeds the partition cap {cap}")
    V = np.array([p.generator() for p in lines])
    idx = np.arange(N)
    for mask in range(2 ** (N - 1)):
        in_s = ((mask >> idx) & 1).astype(bool)
        S, T = idx[in_s], idx[~in_s]
        if numerical_rank(V[S]) < M and numerical_rank(V[T]) < M:
            return ComplementCheck(False, (S.tolist(), T.tolist()))
    return ComplementCheck(True, None)


def collision_from_witness(collection, w):
    """Vectors ``x + y`` and ``x - y`` with equal measurements.

    ``|P_i(x+y)|^2 - |P_i(x-y)|^2 = 4 y^T P_i x``, so the measurement gap is
    at most ``4 * residual``.
    """
    collection = _as_collection(collection)
    x = _vector(collection, w.x)
    y = _vector(collection, w.y)
    u, v = x + y, x - y
    if min(np.linalg.norm(u), np.linalg.norm(v)) < TOL_RANK:
        raise DegenerateWitness("x and y are (anti)parallel; x +- y collapses")
    gap = float(np.max(np.abs(measurement_map(collection, u) - measurement_map(collection, v))))
    return CollisionPair(u, v, gap)
