"""Reproducible experiments: parameter sweeps and the two-bases example.

Trials draw from ``substream(seed, M, N, trial)`` so results are the same
however the pool schedules them.
"""

from __future__ import annotations

import itertools
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import injectivity as inj
from .errors import FullSparkSamplingFailed, InvalidInput, InvalidRank
from .projections import (
    ProjectionCollection,
    projection_from_basis,
    random_ranks,
    sample_collection,
)
from .rng import substream


def worker_count():
    """Pool size: ``PROJPHASE_THREADS`` if set, else the CPU count."""
    env = os.environ.get("PROJPHASE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidInput(f"PROJPHASE_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _int_range(raw, name):
    if isinstance(raw, bool):
        raise InvalidInput(f"{name} range must hold integers")
    if isinstance(raw, int):
        values = [raw]
    elif isinstance(raw, dict):
        try:
            values = list(range(int(raw["start"]), int(raw["stop"]) + 1))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"{name} range needs integer 'start' and 'stop'") from exc
    elif isinstance(raw, (list, tuple)):
        values = list(raw)
    else:
        raise InvalidInput(f"{name} range must be an int, a list or {{start, stop}}")
    if not values:
        raise InvalidInput(f"{name} range is empty")
    if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in values):
        raise InvalidInput(f"{name} range must hold positive integers")
    return values


@dataclass(frozen=True)
class SweepConfig:
    """Grid of ``(M, N)`` cells, each run for ``trials`` random collections.

    ``ranks`` is ``"random"`` (uniform in ``1..M-1`` per projection), a
    single integer used for every projection, or an explicit profile whose
    length must equal ``N``.
    """

    M: list
    N: list
    ranks: object = "random"
    trials: int = 100
    seed: int = 0
    tol_witness: float = inj.TOL_WITNESS
    tol_cert: float = inj.TOL_CERT
    grid: float | None = None
    restarts: int = 50
    out: str | None = None
    plot: str | None = None

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise InvalidInput("sweep config must be a JSON object")
        tol = doc.get("tolerances", {}) or {}
        trials = doc.get("trials", 100)
        if not isinstance(trials, int) or trials < 1:
            raise InvalidInput("trials must be a positive integer")
        ranks = doc.get("ranks", "random")
        if not (ranks == "random" or isinstance(ranks, (int, list))):
            raise InvalidInput("ranks must be 'random', an integer or a list")
        return cls(
            M=_int_range(doc.get("M"), "M"),
            N=_int_range(doc.get("N"), "N"),
            ranks=ranks,
            trials=trials,
            seed=int(doc.get("seed", 0)),
            tol_witness=float(tol.get("tol_witness", inj.TOL_WITNESS)),
            tol_cert=float(tol.get("tol_cert", inj.TOL_CERT)),
            grid=doc.get("grid"),
            restarts=int(doc.get("restarts", 50)),
            out=doc.get("out"),
            plot=doc.get("plot"),
        )

    def profile(self, M, N, rng):
        if self.ranks == "random":
            return random_ranks(M, N, rng)
        if isinstance(self.ranks, int):
            return [self.ranks] * N
        if len(self.ranks) != N:
            raise InvalidInput(f"rank profile has length {len(self.ranks)}, N = {N}")
        return list(self.ranks)

    def profile_label(self):
        if isinstance(self.ranks, list):
            return "-".join(map(str, self.ranks))
        return str(self.ranks)


@dataclass
class SweepCellResult:
    M: int
    N: int
    rank_profile: str
    trials: int
    injective_count: int = 0
    witness_count: int = 0
    inconclusive_count: int = 0
    median_min_defect: float = math.nan
    median_witness_residual: float = math.nan
    wall_time_s: float = 0.0
    defects: list = field(default_factory=list, repr=False)
    residuals: list = field(default_factory=list, repr=False)

    def as_row(self):
        return {
            "M": self.M,
            "N": self.N,
            "rank_profile": self.rank_profile,
            "trials": self.trials,
            "injective_count": self.injective_count,
            "witness_count": self.witness_count,
            "inconclusive_count": self.inconclusive_count,
            "median_min_defect": repr(self.median_min_defect),
            "median_witness_residual": repr(self.median_witness_residual),
            "wall_time_s": f"{self.wall_time_s:.3f}",
        }


def run_trial(config, M, N, trial):
    """One sweep trial; returns ``(status, min_defect, witness_residual, seconds)``."""
    t0 = time.perf_counter()
    rng = substream(config.seed, M, N, trial)
    ranks = config.profile(M, N, rng)
    collection = sample_collection(M, ranks, rng, seed=config.seed)
    spacing = config.grid if config.grid is not None else inj.default_grid_spacing(M)
    verdict = inj.certify_injective(
        collection,
        tol_cert=config.tol_cert,
        grid_spacing=spacing,
        tol_witness=config.tol_witness,
        budget=inj.SearchBudget(restarts=config.restarts),
        rng=substream(config.seed, M, N, trial, 1),
    )
    residual = verdict.witness.residual if verdict.witness is not None else None
    return verdict.status, verdict.min_defect_found, residual, time.perf_counter() - t0


def _run_trial_args(args):
    return run_trial(*args)


def run_sweep(config, workers=None):
    """Run every cell of ``config``; rows come back in ``(M, N)`` order."""
    for M in config.M:
        if M < 2:
            raise InvalidInput("M must be at least 2")
        if isinstance(config.ranks, int) and not 1 <= config.ranks <= M - 1:
            raise InvalidRank(f"rank {config.ranks} not in [1, {M - 1}]")
    jobs = [
        (config, M, N, t)
        for M, N in itertools.product(config.M, config.N)
        for t in range(config.trials)
    ]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_trial_args, jobs, chunksize=8))
    else:
        outcomes = [run_trial(*job) for job in jobs]

    cells = {}
    for (_, M, N, _), (status, defect, residual, secs) in zip(jobs, outcomes):
        cell = cells.setdefault(
            (M, N), SweepCellResult(M, N, config.profile_label(), config.trials)
        )
        if status == inj.CERTIFIED:
            cell.injective_count += 1
        elif status == inj.WITNESS_FOUND:
            cell.witness_count += 1
        else:
            cell.inconclusive_count += 1
        cell.defects.append(defect)
        if residual is not None:
            cell.residuals.append(residual)
        cell.wall_time_s += secs
    for cell in cells.values():
        cell.median_min_defect = statistics.median(cell.defects)
        if cell.residuals:
            cell.median_witness_residual = statistics.median(cell.residuals)
    return [cells[key] for key in itertools.product(config.M, config.N)]


def write_plot_data(cells, path):
    """Whitespace-separated columns for gnuplot, one block per M."""
    lines = ["# M N injective witness inconclusive median_min_defect"]
    last = None
    for c in cells:
        if last is not None and c.M != last:
            lines.append("")
        last = c.M
        lines.append(
            f"{c.M} {c.N} {c.injective_count} {c.witness_count} "
            f"{c.inconclusive_count} {c.median_min_defect!r}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# two orthonormal bases of R^3 in general position
# --------------------------------------------------------------------------


def random_rotation(rng, M=3):
    """Haar-random element of SO(M)."""
    Q, R = np.linalg.qr(rng.standard_normal((M, M)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def is_full_spark(vectors, tol=1e-10):
    """Every ``M``-subset of the columns is linearly independent.

    Columns are assumed unit, so ``|det|`` is compared against ``tol``
    directly.
    """
    V = np.asarray(vectors, dtype=float)
    M = V.shape[0]
    return all(
        abs(np.linalg.det(V[:, list(S)])) > tol
        for S in itertools.combinations(range(V.shape[1]), M)
    )


def ccpw_collections(phi, psi):
    """Subspaces ``W_1..W_5`` built from bases ``phi``, ``psi`` (columns)."""
    bases = [
        phi[:, [0, 2]],
        phi[:, [1, 2]],
        phi[:, [2]],
        psi[:, [0]],
        psi[:, [1]],
    ]
    W = ProjectionCollection(tuple(projection_from_basis(B) for B in bases))
    return W, W.complements()


def angular_distance(x, v):
    """Angle between the lines spanned by ``x`` and ``v``."""
    x = x / np.linalg.norm(x)
    v = v / np.linalg.norm(v)
    c = abs(float(x @ v))
    return math.atan2(float(np.linalg.norm(x - (x @ v) * v)), c)


def ccpw_demo(seed=0, grid_spacing=1e-2, tol_cert=inj.TOL_CERT,
              tol_witness=inj.TOL_WITNESS, restarts=50, max_tries=100):
    """Check both collections of the two-bases example in R^3.

    The five subspaces ``W_i`` should be certified injective; their
    complements are not, because ``phi_3`` is orthogonal to
    ``W_1^perp, W_2^perp, W_3^perp`` and leaves only two nonzero images.
    Returns a JSON-ready report.
    """
    rng = substream(seed)
    for attempt in range(1, max_tries + 1):
        phi, psi = random_rotation(rng), random_rotation(rng)
        if is_full_spark(np.hstack([phi, psi])):
            break
    else:
        raise FullSparkSamplingFailed(f"no full-spark pair in {max_tries} draws")

    W, W_perp = ccpw_collections(phi, psi)
    budget = inj.SearchBudget(restarts=restarts)
    v_w = inj.certify_injective(W, tol_cert, grid_spacing, tol_witness, budget,
                                substream(seed, 1))
    v_perp = inj.certify_injective(W_perp, tol_cert, grid_spacing, tol_witness, budget,
                                   substream(seed, 2))
    phi3 = phi[:, 2]
    report = {
        "seed": seed,
        "attempts": attempt,
        "phi": phi.T.tolist(),
        "psi": psi.T.tolist(),
        "W": v_w.to_dict(),
        "W_perp": v_perp.to_dict(),
        "defect_at_phi3": inj.spanning_defect(W_perp, phi3).defect,
        "witness_angle_to_phi3": None,
        "collision": None,
    }
    if v_perp.witness is not None:
        report["witness_angle_to_phi3"] = angular_distance(v_perp.witness.x, phi3)
        report["collision"] = inj.collision_from_witness(W_perp, v_perp.witness).to_dict()
    return report


# --------------------------------------------------------------------------
# single-collection reports shared by the CLI and library callers
# --------------------------------------------------------------------------


def check_report(collection, seed=0, tol_witness=inj.TOL_WITNESS, tol_cert=inj.TOL_CERT,
                 restarts=50, grid="auto", complement_cap=8):
    """Verdict for one collection plus cross-checks, as a JSON-ready dict.

    ``grid="auto"`` picks the default mesh for the ambient dimension (none
    above M = 4); ``None`` skips certification. Rank-one collections with
    at most ``complement_cap`` lines also get the combinatorial verdict.
    """
    M = collection.ambient_dim
    spacing = inj.default_grid_spacing(M) if grid == "auto" else grid
    verdict = inj.certify_injective(
        collection,
        tol_cert=tol_cert,
        grid_spacing=spacing,
        tol_witness=tol_witness,
        budget=inj.SearchBudget(restarts=restarts),
        rng=substream(seed, 1),
    )
    report = {
        "collection": {
            "ambient_dim": M,
            "count": collection.count,
            "ranks": collection.ranks,
            "fingerprint": collection.fingerprint(),
        },
        **verdict.to_dict(),
        "collision": None,
        "complement_property": None,
    }
    if verdict.witness is not None:
        report["collision"] = inj.collision_from_witness(collection, verdict.witness).to_dict()
    if collection.is_rank_one() and collection.count <= complement_cap:
        cp = inj.complement_property(collection, cap=complement_cap)
        report["complement_property"] = {
            "holds": cp.holds,
            "partition": cp.partition,
            "agrees": None if verdict.status == inj.INCONCLUSIVE
            else cp.holds == (verdict.status == inj.CERTIFIED),
        }
    return report
