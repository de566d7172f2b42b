"""Bound predicates for the number of projections and the rank-one witness.

For ``M = 2^k + 1`` no collection of ``N <= 2M - 2`` projections is
injective; the obstruction rests on ``C(2M-2, M-1)`` not being divisible by
4. By Legendre, ``v_2(m!) = m - s_2(m)`` with ``s_2`` the binary digit sum,
hence ``v_2(C(2n, n)) = 2n - s_2(2n) - 2(n - s_2(n)) = s_2(n)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateSystem, InvalidInput, NonRankOne
from .injectivity import Witness, _as_collection, witness_residual
from .projections import TOL_RANK


def _positive(n, name="n"):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidInput(f"{name} must be a positive integer, got {n!r}")
    return int(n)


def digit_sum(n, base=2):
    s = 0
    while n:
        n, r = divmod(n, base)
        s += r
    return s


def legendre(m, p):
    """Exponent of the prime ``p`` in ``m!``: ``sum_j floor(m / p^j)``."""
    v, q = 0, p
    while q <= m:
        v += m // q
        q *= p
    return v


def valuation(n, p):
    """Exponent of ``p`` in the nonzero integer ``n``."""
    n = abs(int(n))
    if n == 0:
        raise InvalidInput("valuation of 0 is infinite")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def central_binomial_2adic(n):
    """``v_2(C(2n, n))``, which equals the number of ones in binary ``n``.

    >>> [central_binomial_2adic(n) for n in (1, 2, 3, 4)]
    [1, 1, 2, 1]
    """
    return digit_sum(_positive(n))


def central_binomial_2adic_exact(n):
    """Same quantity from the exact big integer ``C(2n, n)``."""
    n = _positive(n)
    return valuation(math.comb(2 * n, n), 2)


def is_power_of_two(n):
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class BoundReport:
    """What is proven about injectivity for ``N`` projections in R^M.

    ``status`` is ``"generic-sufficient"`` when ``N >= 2M - 1`` (a generic
    collection is injective), ``"obstructed"`` when ``M - 1`` is a power of
    two and ``N <= 2M - 2`` (no collection is injective) and ``"unknown"``
    otherwise.
    """

    M: int
    N: int
    generic_sufficient: bool
    obstruction_applies: bool
    central_binomial_2adic: int

    @property
    def status(self):
        if self.generic_sufficient:
            return "generic-sufficient"
        if self.obstruction_applies:
            return "obstructed"
        return "unknown"

    def to_dict(self):
        return {**asdict(self), "status": self.status}


def obstruction_predicate(M, N):
    M = _positive(M, "M")
    N = _positive(N, "N")
    if M < 2:
        raise InvalidInput("M must be at least 2")
    return BoundReport(
        M=M,
        N=N,
        generic_sufficient=N >= 2 * M - 1,
        obstruction_applies=is_power_of_two(M - 1) and N <= 2 * M - 2,
        central_binomial_2adic=central_binomial_2adic(M - 1),
    )


def _null_vector(V):
    _, s, Vt = np.linalg.svd(V)
    M = V.shape[1]
    rank = int(np.sum(s > TOL_RANK * s[0])) if s.size and s[0] > 0 else 0
    if rank >= M:
        raise DegenerateSystem("linear system has only the trivial solution")
    return Vt[-1]


def rank1_witness_by_linear_algebra(lines):
    """Witness for ``2M - 2`` lines in R^M from two null spaces.

    With generators ``v_i``, ``y^T P_i x = <y, v_i><x, v_i>``. Taking ``y``
    orthogonal to ``v_1..v_{M-1}`` and ``x`` orthogonal to
    ``v_M..v_{2M-2}`` kills every term.
    """
    lines = _as_collection(lines)
    M, N = lines.ambient_dim, lines.count
    if not lines.is_rank_one():
        raise NonRankOne(f"expected rank-1 projections, got ranks {lines.ranks}")
    if N != 2 * M - 2:
        raise InvalidInput(f"need exactly 2M-2 = {2 * M - 2} lines, got {N}")
    V = np.array([p.generator() for p in lines])
    y = _null_vector(V[: M - 1])
    x = _null_vector(V[M - 1:])
    return Witness(x, y, witness_residual(lines, x, y))
