"""Command-line entry point: ``projphase <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 budget exhausted or inconclusive
verdict under ``--strict``, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import experiments as exp
from . import injectivity as inj
from . import io
from .errors import BudgetExceeded, InvalidInput, InvariantError, ProjPhaseError, SchemaError
from .projections import random_ranks, sample_collection, validate
from .reconstruction import (
    MeasurementVector,
    ReconstructionBudget,
    reconstruct,
    recovery_error,
)
from .rng import substream
from .sharpness import obstruction_predicate

log = logging.getLogger("projphase")

EXIT_OK, EXIT_ERROR, EXIT_INPUT, EXIT_STRICT = 0, 1, 2, 3


class StrictFailure(Exception):
    pass


def _int_list(text):
    """``"1,2,3"`` or ``"3-5"`` (inclusive) to a list of ints."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    return out


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _emit(obj, out):
    text = io.dumps(obj)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _say(msg):
    print(msg, file=sys.stderr)


def cmd_sample(args):
    if args.M < 2:
        raise InvalidInput("M must be at least 2")
    rng = substream(args.seed)
    ranks = args.ranks if args.ranks is not None else random_ranks(args.M, args.N, rng)
    if len(ranks) != args.N:
        raise InvalidInput(f"--ranks has {len(ranks)} entries but N = {args.N}")
    collection = sample_collection(args.M, ranks, rng, seed=args.seed)
    doc = io.collection_to_dict(collection)
    _emit(doc, args.out)
    worst = max(
        max(np.max(np.abs(p.matrix - p.matrix.T)), np.max(np.abs(p.matrix @ p.matrix - p.matrix)))
        for p in collection
    )
    bad = sum(bool(validate(p)) for p in collection)
    _say(f"sampled {collection.count} projections in R^{collection.ambient_dim}, "
         f"ranks {collection.ranks}; {bad} invalid; worst structural error {worst:.2e}")


def _grid_arg(args):
    if args.no_grid:
        return None
    return "auto" if args.grid is None else args.grid


def cmd_check(args):
    collection = io.load_collection(args.collection)
    try:
        report = exp.check_report(collection, args.seed, args.tol_witness, args.tol_cert,
                                  args.restarts, _grid_arg(args))
    except BudgetExceeded as exc:
        if args.strict:
            raise
        log.warning("%s; falling back to witness search only", exc)
        report = exp.check_report(collection, args.seed, args.tol_witness, args.tol_cert,
                                  args.restarts, None)
    _emit(report, args.out)
    _say(f"status: {report['status']}  min defect: {report['min_defect']:.3e}")
    if report["witness"] is not None:
        _say(f"witness residual: {report['witness']['residual']:.3e}  "
             f"collision gap: {report['collision']['max_measurement_gap']:.3e}")
    cp = report["complement_property"]
    if cp is not None:
        _say(f"complement property: {cp['holds']}  agrees with verdict: {cp['agrees']}")
    if args.strict and report["status"] == inj.INCONCLUSIVE:
        raise StrictFailure("verdict is inconclusive")


def cmd_witness(args):
    collection = io.load_collection(args.collection)
    budget = inj.SearchBudget(restarts=args.restarts)
    found = inj.search_witness(collection, budget, substream(args.seed, 1), args.tol_witness)
    accepted = found.residual <= args.tol_witness
    doc = {
        "found": accepted,
        "witness": {"x": found.x.tolist(), "y": found.y.tolist(), "residual": found.residual},
        "spanning_defect_at_x": inj.spanning_defect(collection, found.x).defect,
        "restarts": found.restarts_run,
        "alternations": found.alternations,
        "collision": None,
    }
    if accepted:
        w = inj.Witness(found.x, found.y, found.residual)
        doc["collision"] = inj.collision_from_witness(collection, w).to_dict()
    _emit(doc, args.out)
    _say(f"witness {'found' if accepted else 'not found'}; best residual {found.residual:.3e}")
    if args.strict and not accepted:
        raise StrictFailure("no witness within tolerance")


def cmd_reconstruct(args):
    collection = io.load_collection(args.collection)
    x_true = None
    if args.from_x is not None:
        x_true = np.array(args.from_x, dtype=float)
        b = MeasurementVector.of(collection, x_true)
    elif args.measurements is not None:
        b = io.measurements_from_dict(io.load_json(args.measurements))
    else:
        raise InvalidInput("give --measurements FILE or --from-x X1,X2,...")
    budget = ReconstructionBudget(restarts=args.restarts)
    result = reconstruct(collection, b, budget, substream(args.seed, 1))
    doc = {"measurements": b.to_dict(), **result.to_dict(), "recovery_error": None}
    if x_true is not None:
        doc["recovery_error"] = recovery_error(result.x_hat, x_true)
    _emit(doc, args.out)
    if args.csv:
        row = {
            "seed": args.seed, "M": collection.ambient_dim, "N": collection.count,
            "rank_profile": "-".join(map(str, collection.ranks)),
            "residual": repr(result.residual),
            "recovery_error": "" if x_true is None else repr(doc["recovery_error"]),
            "restarts_used": result.restarts_used, "converged": result.converged,
        }
        io.write_csv([row], args.csv, io.RECON_COLUMNS)
    _say(f"converged: {result.converged}  residual: {result.residual:.3e}  "
         f"alternatives: {len(result.alternatives)}")
    if args.strict and not result.converged:
        raise StrictFailure("reconstruction did not converge")


def cmd_sweep(args):
    doc = io.load_json(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.restarts is not None:
        doc["restarts"] = args.restarts
    if args.grid is not None:
        doc["grid"] = args.grid
    tol = dict(doc.get("tolerances") or {})
    if args.tol_witness is not None:
        tol["tol_witness"] = args.tol_witness
    if args.tol_cert is not None:
        tol["tol_cert"] = args.tol_cert
    doc["tolerances"] = tol
    config = exp.SweepConfig.from_dict(doc)
    cells = exp.run_sweep(config)
    out = args.out or config.out
    rows = [c.as_row() for c in cells]
    if out:
        io.write_csv(rows, out, io.SWEEP_COLUMNS)
    else:
        import csv

        writer = csv.DictWriter(sys.stdout, fieldnames=io.SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    plot = args.plot or config.plot
    if plot:
        exp.write_plot_data(cells, plot)
    if args.strict and any(c.inconclusive_count for c in cells):
        raise StrictFailure("some trials were inconclusive")


def cmd_demo_ccpw(args):
    report = exp.ccpw_demo(
        seed=args.seed,
        grid_spacing=1e-2 if args.grid is None else args.grid,
        tol_cert=args.tol_cert,
        tol_witness=args.tol_witness,
        restarts=args.restarts,
    )
    _emit(report, args.out)
    angle = report["witness_angle_to_phi3"]
    _say(f"W: {report['W']['status']}  W_perp: {report['W_perp']['status']}  "
         f"witness angle to phi_3: {'n/a' if angle is None else f'{angle:.2e}'}")
    if args.strict and (report["W"]["status"] != inj.CERTIFIED
                        or report["W_perp"]["status"] != inj.WITNESS_FOUND):
        raise StrictFailure("demo did not reach the expected verdicts")


def cmd_bounds(args):
    rows = [obstruction_predicate(M, N).to_dict() for M in args.M for N in args.N]
    if args.out:
        _emit(rows, args.out)
    print(f"{'M':>4} {'N':>4} {'generic_sufficient':>18} {'obstruction_applies':>19} "
          f"{'v2':>3}  status")
    for r in rows:
        print(f"{r['M']:>4} {r['N']:>4} {str(r['generic_sufficient']):>18} "
              f"{str(r['obstruction_applies']):>19} {r['central_binomial_2adic']:>3}  "
              f"{r['status']}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="default 0")
    common.add_argument("--tol-witness", type=float, default=None,
                        help=f"default {inj.TOL_WITNESS:g}")
    common.add_argument("--tol-cert", type=float, default=None, help=f"default {inj.TOL_CERT:g}")
    common.add_argument("--restarts", type=int, default=None)
    common.add_argument("--grid", type=float, default=None,
                        help="certification mesh on the sphere")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--strict", action="store_true",
                        help="exit 3 on inconclusive or over-budget results")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="projphase",
        description="Phase retrieval from magnitudes of orthogonal projections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="sample a random collection")
    p.add_argument("-M", type=int, required=True)
    p.add_argument("-N", type=int, required=True)
    p.add_argument("--ranks", type=_int_list, default=None,
                   help="comma-separated rank profile (default: random in 1..M-1)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("check", parents=[common], help="decide injectivity")
    p.add_argument("collection")
    p.add_argument("--no-grid", action="store_true", help="skip grid certification")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("witness", parents=[common], help="search for a collision witness")
    p.add_argument("collection")
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("reconstruct", parents=[common], help="recover x from magnitudes")
    p.add_argument("collection")
    p.add_argument("--measurements", default=None)
    p.add_argument("--from-x", type=_float_list, default=None)
    p.add_argument("--csv", default=None, help="also write a one-row CSV summary")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo parameter sweep")
    p.add_argument("config")
    p.add_argument("--plot", default=None, help="gnuplot data file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("demo-ccpw", parents=[common],
                       help="two-bases example in R^3 and its complements")
    p.set_defaults(func=cmd_demo_ccpw)

    p = sub.add_parser("bounds", parents=[common], help="table of bound predicates")
    p.add_argument("-M", type=_int_list, required=True, help="e.g. 3-5 or 3,5,9")
    p.add_argument("-N", type=_int_list, required=True)
    p.set_defaults(func=cmd_bounds)
    return parser


_RESTART_DEFAULTS = {"reconstruct": 20}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    # the sweep config supplies its own defaults; flags only override it
    if args.command != "sweep":
        if args.restarts is None:
            args.restarts = _RESTART_DEFAULTS.get(args.command, 50)
        if args.seed is None:
            args.seed = 0
        if args.tol_witness is None:
            args.tol_witness = inj.TOL_WITNESS
        if args.tol_cert is None:
            args.tol_cert = inj.TOL_CERT
    try:
        args.func(args)
    except StrictFailure as exc:
        _say(f"strict: {exc}")
        return EXIT_STRICT
    except BudgetExceeded as exc:
        _say(f"budget exceeded: {exc}")
        return EXIT_STRICT if args.strict else EXIT_ERROR
    except (InvalidInput, SchemaError, InvariantError, OSError, json.JSONDecodeError) as exc:
        _say(f"error: {exc}")
        return EXIT_INPUT
    except ProjPhaseError as exc:
        _say(f"error: {exc}")
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
