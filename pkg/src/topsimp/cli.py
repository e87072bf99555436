"""Command line interface: ``topsimp diagram|simplify|compare|filaments``.

Exit codes: 0 success, 2 usage or input error, 3 size guard exceeded,
4 structural mismatch between diagrams.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .assignment import ExactSizeError, StructuralMismatch, wasserstein
from .grid import Grid, InputError, ScalarField
from .morse import cancel_saddle_pairs, extract_filaments, filament_cycles
from .persistence import OracleSizeError, brute_force_diagram, compute_diagram
from .solver import SolverConfig, TargetError, TargetSpec, run

EXIT_OK, EXIT_INPUT, EXIT_GUARD, EXIT_MISMATCH = 0, 2, 3, 4

log = logging.getLogger("topsimp")


def _load(path, normalize: bool = False) -> tuple[ScalarField, str]:
    field, tag = io.read_field(path)
    if normalize:
        v = field.values
        span = v.max() - v.min()
        field = field.with_values((v - v.min()) / span if span > 0 else np.zeros_like(v))
    return field, tag


def _write_diagram(D, out):
    io.write_diagram(out or sys.stdout, D)


def cmd_diagram(args) -> int:
    field, _ = _load(args.input, args.normalize)
    if args.method == "oracle":
        D = brute_force_diagram(field)
    else:
        D, _, _ = compute_diagram(field)
    _write_diagram(D, args.out)
    return EXIT_OK


def _target(args, field: ScalarField):
    if args.target is not None:
        return io.read_diagram(args.target)
    if args.threshold is not None:
        if not 0.0 <= args.threshold <= 1.0:
            raise InputError("--threshold is a fraction of the value range in [0, 1]")
        return TargetSpec(threshold=args.threshold)
    if args.keep_infinite_only:
        return TargetSpec(keep_infinite_only=True)
    d = len(field.dims)
    dims = tuple(range(1, d - 1))
    if not dims:
        log.warning("a %dD field has no saddle-saddle pairs; nothing to remove", d)
    return TargetSpec(remove_dims=dims)


def cmd_simplify(args) -> int:
    field, tag = _load(args.input, args.normalize)
    try:
        config = SolverConfig(method=args.method, alpha_b=args.alpha_b, alpha_d=args.alpha_d, stop=args.stop,
                              max_iter=args.max_iter, optimizer=args.optimizer, adam_lr=args.adam_lr)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    g, report = run(field, _target(args, field), config)
    if args.out:
        io.write_field(args.out, g, tag)
    if args.report:
        io.write_json(args.report, report.to_dict())
    if args.diagram_out:
        io.write_diagram(args.diagram_out, compute_diagram(g)[0])
    print(f"iterations {report.iterations}  loss {report.loss0:.6g} -> {report.lossFinal:.6g}"
          f"  linf {report.linf:.6g}{'  (iteration limit reached)' if report.maxIterations else ''}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.q < 1:
        raise InputError("--q must be at least 1")
    D1, D2 = io.read_diagram(args.d1), io.read_diagram(args.d2)
    dist, _ = wasserstein(D1, D2, args.q, exact=args.exact)
    print(f"{dist:.12g}")
    return EXIT_OK


def cmd_filaments(args) -> int:
    field, _ = _load(args.input, args.normalize)
    if len(field.dims) != 3:
        raise InputError("filaments need a 3D field")
    D, g, _ = compute_diagram(field, Grid(field.dims))
    hist = None
    if args.simplify_saddles is not None:
        cut = args.simplify_saddles * float(np.ptp(field.values))
        pairs = [p for p in D if p.dim == 1 and p.finite and p.persistence <= cut]
        g, hist = cancel_saddle_pairs(g, D, pairs)
    min_value = -np.inf if args.min_value is None else args.min_value
    fil = extract_filaments(g, field, min_value)
    if args.out:
        io.write_polylines(args.out, fil)
    hist_path = args.histogram or (Path(args.out).with_suffix(".skips.json") if args.out else None)
    if hist_path:
        io.write_json(hist_path, hist.to_dict() if hist else {"binEdges": [], "counts": [], "processed": 0,
                                                              "cancelled": 0, "skipped": 0})
    skipped = hist.n_skipped if hist else 0
    print(f"filaments {len(fil)}  cycles {filament_cycles(fil)}  skipped reversals {skipped}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topsimp", description="Topological simplification of scalar fields on grids.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def field_arg(sp):
        sp.add_argument("input", help="raw field file or its JSON header")
        sp.add_argument("--normalize", action="store_true", help="rescale values to [0, 1] on load")

    d = sub.add_parser("diagram", help="persistence diagram of a field")
    field_arg(d)
    d.add_argument("--out", help="CSV output (stdout when omitted)")
    d.add_argument("--method", choices=["dms", "oracle"], default="dms")
    d.set_defaults(func=cmd_diagram)

    s = sub.add_parser("simplify", help="remove non-signal persistence pairs")
    field_arg(s)
    tgt = s.add_mutually_exclusive_group(required=True)
    tgt.add_argument("--threshold", type=float, metavar="FRAC",
                     help="cancel pairs less persistent than FRAC of the value range")
    tgt.add_argument("--remove-saddle-pairs", action="store_true", help="cancel every saddle-saddle pair")
    tgt.add_argument("--keep-infinite-only", action="store_true", help="cancel every finite pair")
    tgt.add_argument("--target", metavar="FILE", help="target diagram CSV")
    s.add_argument("--method", choices=["baseline", "accelerated"], default="accelerated")
    s.add_argument("--optimizer", choices=["direct", "adam"], default="direct")
    s.add_argument("--alpha-b", type=float, default=0.5)
    s.add_argument("--alpha-d", type=float, default=0.5)
    s.add_argument("--adam-lr", type=float, default=1e-4)
    s.add_argument("--stop", type=float, default=0.01, help="stop once loss <= STOP * initial loss")
    s.add_argument("--max-iter", type=int, default=1000)
    s.add_argument("--out", help="simplified field output")
    s.add_argument("--report", help="JSON report output")
    s.add_argument("--diagram-out", help="diagram CSV of the simplified field")
    s.set_defaults(func=cmd_simplify)

    c = sub.add_parser("compare", help="Wasserstein distance between two diagram CSVs")
    c.add_argument("d1")
    c.add_argument("d2")
    c.add_argument("--q", type=float, default=2.0)
    c.add_argument("--exact", action="store_true", help="use the exact assignment solver")
    c.set_defaults(func=cmd_compare)

    f = sub.add_parser("filaments", help="integral lines from 2-saddles up to maxima")
    field_arg(f)
    f.add_argument("--min-value", type=float, help="skip 2-saddles with a vertex below this value")
    f.add_argument("--simplify-saddles", type=float, nargs="?", const=1.0, metavar="FRAC",
                   help="first cancel saddle pairs up to FRAC of the value range (all when FRAC is omitted)")
    f.add_argument("--out", help="polyline CSV output")
    f.add_argument("--histogram", help="skip histogram JSON (defaults next to --out)")
    f.set_defaults(func=cmd_filaments)
    return p


def _apply_threads():
    threads = os.environ.get("THREADS")
    if not threads:
        return
    import numba
    try:
        n = int(threads)
    except ValueError:
        raise InputError(f"THREADS must be an integer, got {threads!r}") from None
    if n < 1:
        raise InputError("THREADS must be positive")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        _apply_threads()
        return args.func(args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OracleSizeError, ExactSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (StructuralMismatch, TargetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
