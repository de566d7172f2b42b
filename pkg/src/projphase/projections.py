"""Orthogonal projections on R^M and ordered collections of them.

A projection is stored as a dense, read-only ``M x M`` float array together
with its rank. Ranks ``0`` and ``M`` are rejected: every projection here
projects onto a proper subspace.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateSample,
    DimensionMismatch,
    InvalidInput,
    InvalidRank,
    InvariantError,
    RankDeficientBasis,
)

TOL_STRUCT = 1e-8
TOL_RANK = 1e-10

SYMMETRY = "symmetry"
IDEMPOTENCY = "idempotency"
TRACE = "trace"
EIGENVALUES = "eigenvalues"


def numerical_rank(A, rtol=TOL_RANK):
    """Rank of ``A`` with singular values below ``rtol * s_max`` treated as zero."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def validate(P, rank=None, tol_struct=TOL_STRUCT):
    """List the projection invariants that ``P`` violates.

    ``P`` may be a :class:`Projection` or a raw square matrix. When ``rank``
    is omitted for a raw matrix the trace is compared with the numerical rank
    of ``P``; for a projection the two agree.

    Returns an empty list iff all invariants hold at ``tol_struct``.
    """
    if isinstance(P, Projection):
        rank = P.rank if rank is None else rank
        P = P.matrix
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {P.shape}")
    tr = float(np.trace(P))
    if rank is None:
        rank = numerical_rank(P)

    violations = []
    if np.max(np.abs(P - P.T)) > tol_struct:
        violations.append(SYMMETRY)
    if np.max(np.abs(P @ P - P)) > tol_struct:
        violations.append(IDEMPOTENCY)
    if abs(tr - rank) > tol_struct:
        violations.append(TRACE)
    ev = np.linalg.eigvals(P)
    if np.max(np.minimum(np.abs(ev), np.abs(ev - 1.0))) > tol_struct:
        violations.append(EIGENVALUES)
    return violations


@dataclass(frozen=True, eq=False)
class Projection:
    """Orthogonal projection of rank ``rank`` onto a proper subspace of R^M.

    Construction checks all invariants at ``TOL_STRUCT`` unless
    ``check=False`` is passed.
    """

    matrix: np.ndarray
    rank: int
    check: bool = field(default=True, repr=False)
    # set by complement() so that taking the complement twice is exact
    _complement_of: "Projection | None" = field(default=None, repr=False)

    def __post_init__(self):
        P = _frozen(self.matrix)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {P.shape}")
        M = P.shape[0]
        rank = int(self.rank)
        if not 1 <= rank <= M - 1:
            raise InvalidRank(f"rank must lie in [1, {M - 1}] for M={M}, got {rank}")
        object.__setattr__(self, "matrix", P)
        object.__setattr__(self, "rank", rank)
        if self.check:
            bad = validate(P, rank)
            if bad:
                raise InvariantError(f"not an orthogonal projection: {bad}", bad)

    @property
    def ambient_dim(self):
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ other

    def __eq__(self, other):
        if not isinstance(other, Projection):
            return NotImplemented
        return self.rank == other.rank and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def image_basis(self):
        """Orthonormal ``M x k`` basis of the image."""
        w, V = np.linalg.eigh(self.matrix)
        return V[:, np.argsort(w)[::-1][: self.rank]]

    def generator(self):
        """Unit generator of the line, for rank-1 projections.

        For ``P = v v^T`` the column with the largest diagonal entry is
        ``v_j v``; normalizing it recovers ``v`` with ``v_j > 0``.
        """
        if self.rank != 1:
            raise InvalidRank(f"generator() needs a rank-1 projection, got rank {self.rank}")
        j = int(np.argmax(np.diag(self.matrix)))
        col = self.matrix[:, j]
        return col / np.linalg.norm(col)


@dataclass(frozen=True, eq=False)
class Subspace:
    """A ``k``-dimensional subspace of R^M given by an orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        B = _frozen(self.basis)
        if B.ndim == 1:
            B = _frozen(B[:, None])
        M, k = B.shape
        if not 1 <= k <= M - 1:
            raise InvalidRank(f"subspace dimension must lie in [1, {M - 1}], got {k}")
        if np.max(np.abs(B.T @ B - np.eye(k))) > TOL_STRUCT:
            raise InvariantError("basis columns are not orthonormal")
        object.__setattr__(self, "basis", B)

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    def projection(self):
        B = self.basis
        return Projection(B @ B.T, self.dim)


def _orthonormal_basis(basis):
    B = np.asarray(basis, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    if B.ndim != 2:
        raise DimensionMismatch("basis must be a 2-d array")
    s = np.linalg.svd(B, compute_uv=False)
    if s.size == 0 or s[0] == 0.0 or s[-1] <= TOL_RANK * s[0]:
        raise RankDeficientBasis(
            f"basis columns are linearly dependent (singular values {s})"
        )
    Q, _ = np.linalg.qr(B)
    return Q


def projection_from_basis(basis):
    """Orthogonal projection onto the column span of ``basis``.

    Equivalent to ``B (B^T B)^{-1} B^T``, computed through a Householder QR
    so that the result is symmetric to rounding and basis-invariant.

    >>> projection_from_basis([[1.0], [1.0]]).matrix
    array([[0.5, 0.5],
           [0.5, 0.5]])
    """
    Q = _orthonormal_basis(basis)
    P = Q @ Q.T
    P = (P + P.T) / 2
    return Projection(P, Q.shape[1])


def sample_grassmannian(M, k, rng, max_retries=8):
    """Projection onto a uniformly random ``k``-plane of R^M.

    The plane is the column span of an ``M x k`` standard Gaussian matrix,
    whose law is invariant under rotations.
    """
    M, k = int(M), int(k)
    if M < 2 or not 1 <= k <= M - 1:
        raise InvalidRank(f"rank must lie in [1, {M - 1}] for M={M}, got {k}")
    for _ in range(max_retries):
        G = rng.standard_normal((M, k))
        try:
            return projection_from_basis(G)
        except RankDeficientBasis:
            continue
    raise DegenerateSample(f"{max_retries} rank-deficient Gaussian draws in a row")


def complement(P):
    """The projection ``I - P`` onto the orthogonal complement."""
    if P._complement_of is not None:
        return P._complement_of
    M = P.ambient_dim
    return Projection(np.eye(M) - P.matrix, M - P.rank, _complement_of=P)


@dataclass(frozen=True, eq=False)
class ProjectionCollection:
    """Ordered collection ``(P_1, ..., P_N)`` sharing one ambient dimension."""

    projections: tuple
    provenance: dict | None = None

    def __post_init__(self):
        ps = tuple(self.projections)
        if len(ps) == 0:
            raise InvalidInput("a collection needs at least one projection")
        for p in ps:
            if not isinstance(p, Projection):
                raise InvalidInput(f"expected Projection, got {type(p).__name__}")
        M = ps[0].ambient_dim
        if any(p.ambient_dim != M for p in ps):
            raise DimensionMismatch("projections do not share an ambient dimension")
        object.__setattr__(self, "projections", ps)
        if self.provenance is not None:
            prov = dict(self.provenance)
            ranks = prov.get("ranks")
            if ranks is not None and list(ranks) != self.ranks:
                raise InvariantError(
                    f"provenance rank profile {list(ranks)} != stored ranks {self.ranks}"
                )
            object.__setattr__(self, "provenance", prov)

    @classmethod
    def from_matrices(cls, matrices, ranks=None, provenance=None):
        mats = [np.asarray(m, dtype=float) for m in matrices]
        if ranks is None:
            ranks = [round(float(np.trace(m))) for m in mats]
        return cls(tuple(Projection(m, r) for m, r in zip(mats, ranks)), provenance)

    @property
    def ambient_dim(self):
        return self.projections[0].ambient_dim

    @property
    def count(self):
        return len(self.projections)

    @property
    def ranks(self):
        return [p.rank for p in self.projections]

    @cached_property
    def stack(self):
        """The projections as one read-only ``(N, M, M)`` array."""
        return _frozen(np.stack([p.matrix for p in self.projections]))

    def __len__(self):
        return len(self.projections)

    def __iter__(self):
        return iter(self.projections)

    def __getitem__(self, i):
        return self.projections[i]

    def __eq__(self, other):
        if not isinstance(other, ProjectionCollection):
            return NotImplemented
        return self.ranks == other.ranks and np.array_equal(self.stack, other.stack)

    __hash__ = None

    def fingerprint(self):
        """Short content hash, used to tie measurements to their collection."""
        h = hashlib.sha256()
        h.update(np.asarray(self.ranks, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.stack).tobytes())
        return h.hexdigest()[:16]

    def complements(self):
        return ProjectionCollection(tuple(complement(p) for p in self.projections))

    def is_rank_one(self):
        return all(r == 1 for r in self.ranks)


def sample_collection(M, ranks: Sequence[int], rng, seed=None, sampler="grassmannian"):
    """Independent Grassmannian samples with the given rank profile."""
    ranks = [int(k) for k in ranks]
    if not ranks:
        raise InvalidInput("rank profile is empty")
    projections = tuple(sample_grassmannian(M, k, rng) for k in ranks)
    prov = {"sampler": sampler, "ranks": ranks}
    if seed is not None:
        prov["seed"] = int(seed)
    return ProjectionCollection(projections, prov)


def random_ranks(M, N, rng, allowed=None):
    """Rank profile with entries drawn uniformly from ``allowed`` (default 1..M-1)."""
    allowed = list(range(1, M)) if allowed is None else list(allowed)
    return [int(r) for r in rng.choice(allowed, size=N)]


def basis_expansion(collection):
    """Rank-1 collection from one orthonormal basis of each subspace.

    Each ``P_i`` of rank ``k_i`` contributes ``k_i`` lines. A collection
    admits phase retrieval iff the expansion does for *every* choice of
    bases, so an injective expansion for this one choice is a necessary
    condition only and certifies nothing about the collection.
    """
    lines = []
    for p in collection:
        for b in p.image_basis().T:
            lines.append(Projection(np.outer(b, b), 1))
    return ProjectionCollection(tuple(lines))
