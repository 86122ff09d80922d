"""Command-line entry point.

Subcommands: ``gen``, ``analyze``, ``encode``, ``phases``, ``solve`` and
``sequence``.  Data goes to stdout or ``--out``; warnings go to stderr via the
``qsvtemu.diagnostics`` logger.  Exit codes: 0 success, 2 input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import encoders, matrices, phases, qsvt
from .errors import InputError, NumericalError

EXIT_INPUT = 2
EXIT_NUMERIC = 3

SCHEME_NAMES = {"arcsin": "arcsin", "fable": "fable", "prepare-select": "prepare_select"}


def _scheme(name):
    return SCHEME_NAMES[name]


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _table(rows, fmt):
    """``rows`` is a list of (key, value) pairs; csv puts keys in a header."""
    if fmt == "csv":
        return ",".join(k for k, _ in rows) + "\n" + ",".join(str(v) for _, v in rows) + "\n"
    return "".join(f"{k}={v}\n" for k, v in rows)


def _stats_rows(a):
    st = matrices.spectral_stats(a)
    return [("n", a.nrows), ("nnz", a.nnz), ("kappa_A", repr(st.kappa_eig)), ("kappa_AH", repr(st.kappa)),
            ("sigma_min", repr(st.sigma_min)), ("sigma_max", repr(st.sigma_max))]


def cmd_gen(args):
    if args.kind == "laplacian":
        if not args.name:
            raise InputError("gen laplacian needs a case name such as l1d_8_dd")
        a = matrices.laplacian(args.name)
    else:
        if args.n is None:
            raise InputError("gen toeplitz needs --n")
        if args.kappa is not None:
            b = matrices.toeplitz_kappa_to_b(args.n, args.a, args.kappa)
            b = -b if args.negative else b
            c = b
        else:
            b = args.b or 0.0
            c = b if args.c is None else args.c
        a = matrices.gen_toeplitz(matrices.ToeplitzSpec(args.n, args.a, b, c))
    if args.out:
        matrices.write_matrix_market(a, args.out)
    sys.stdout.write(_table(_stats_rows(a), args.format))
    return 0


def cmd_analyze(args):
    a = matrices.read_matrix_market(args.matrix)
    rows = _stats_rows(a)
    schemes = [_scheme(args.scheme)] if args.scheme else list(encoders.SCHEMES)
    for sch in schemes:
        c = encoders.encode(a, sch, args.delta_c, args.trim, args.delta)
        oc = encoders.op_counts(c)
        tag = sch
        rows += [(f"{tag}_s", repr(c.s)), (f"{tag}_kappa_s", repr(encoders.kappa_s(a, sch, s=c.s))),
                 (f"{tag}_ops", oc.raw_count), (f"{tag}_ops_normalised", repr(oc.normalised))]
    _emit(_table(rows, args.format), args.out)
    return 0


def cmd_encode(args):
    a = matrices.read_matrix_market(args.matrix)
    c = encoders.encode(a, _scheme(args.scheme), args.delta_c, args.trim, args.delta)
    if args.scheme == "fable" and args.delta_c > 0:
        logging.getLogger("qsvtemu.diagnostics").warning(
            "FABLE threshold %g: block error bound %g", args.delta_c, encoders.fable_error_bound(c.n_sys, args.delta_c))
    text = c.to_json() if (args.out and args.out.endswith(".json")) else c.to_text()
    _emit(text, args.out)
    return 0


def cmd_phases(args):
    if args.kappa_s is None or args.epsilon is None:
        raise InputError("phases needs --kappa-s and --epsilon")
    p, ps = phases.generate(args.kappa_s, args.epsilon, args.max_degree, relative=not args.absolute)
    if args.out:
        phases.write_phases(ps, args.out)
    x = phases.domain_grid(args.kappa_s, 2001)
    qres = float(np.max(np.abs(phases.qsp_eval(ps, x).real - phases.inverse_target(x, args.kappa_s))))
    sys.stdout.write(_table([("kappa_s", repr(args.kappa_s)), ("epsilon", repr(args.epsilon)),
                             ("degree", p.degree), ("poly_residual", repr(p.residual)),
                             ("qsp_residual", repr(qres))], args.format))
    return 0


def _rhs(args, n):
    return matrices.read_vector(args.rhs) if args.rhs else matrices.rhs_polynomial(n)


def cmd_solve(args):
    if not args.phases:
        raise InputError("solve needs --phases")
    a = matrices.read_matrix_market(args.matrix)
    b = _rhs(args, a.nrows)
    if b.size != a.nrows:
        raise InputError(f"rhs length {b.size} does not match matrix size {a.nrows}")
    ps = phases.read_phases(args.phases)
    rep = qsvt.qsvt_solve(a, b, _scheme(args.scheme), ps, args.delta_c, args.trim, args.delta)
    if args.format == "records":
        text = rep.to_records()
    else:
        head = "scheme,s,kappa_s_used,kappa_s_matrix,epsilon_used,phase_count,success_probability,l2_error_vs_classical\n"
        text = head + (f"{rep.scheme},{rep.s!r},{rep.kappa_s_used!r},{rep.kappa_s_matrix!r},{rep.epsilon_used!r},"
                       f"{rep.phase_count},{rep.success_probability!r},{rep.l2_error_vs_classical!r}\n")
    _emit(text, args.out)
    return 0


def _load_manifest(path):
    doc = json.loads(Path(path).read_text())
    base = Path(path).parent
    mats = [matrices.read_matrix_market(base / m) for m in doc["matrices"]]
    rhs = doc.get("rhs")
    if rhs is None:
        b = matrices.rhs_polynomial(mats[0].nrows)
    elif isinstance(rhs, str):
        b = matrices.read_vector(base / rhs)
    else:
        b = [matrices.read_vector(base / r) for r in rhs]
    return mats, b


def cmd_sequence(args):
    if not args.phases:
        raise InputError("sequence needs --phases")
    if args.manifest:
        mats, b = _load_manifest(args.manifest)
    elif args.matrix:
        mats = [matrices.read_matrix_market(m) for m in args.matrix]
        b = _rhs(args, mats[0].nrows)
    elif args.synthetic:
        mats, b = qsvt.synthetic_sequence(n=args.synthetic, iterations=args.iterations)
    else:
        raise InputError("sequence needs --manifest, --matrix or --synthetic")
    ps = phases.read_phases(args.phases)
    rep = qsvt.run_sequence(mats, b, _scheme(args.scheme), ps, lu=not args.no_lu, delta_c=args.delta_c,
                            trim=args.trim, delta=args.delta)
    _emit(rep.to_csv() if args.format == "csv" else rep.to_records(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsvtemu", description="QSVT linear-solver emulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scheme=True, enc=True):
        p.add_argument("--out")
        p.add_argument("--format", choices=("csv", "records"), default="records")
        if scheme:
            p.add_argument("--scheme", choices=tuple(SCHEME_NAMES), default="prepare-select")
        if enc:
            p.add_argument("--delta-c", type=float, default=0.0, help="FABLE angle threshold")
            p.add_argument("--trim", choices=("none", "threshold", "hamming", "both"), default="none")
            p.add_argument("--delta", type=float, default=0.0, help="arcsin trimming threshold")

    p = sub.add_parser("gen", help="generate a test matrix")
    p.add_argument("kind", choices=("laplacian", "toeplitz"))
    p.add_argument("name", nargs="?")
    p.add_argument("--n", type=int)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--negative", action="store_true", help="use -b off-diagonals with --kappa")
    common(p, scheme=False, enc=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("analyze", help="condition numbers and operation counts")
    p.add_argument("--matrix", required=True)
    p.add_argument("--scheme", choices=tuple(SCHEME_NAMES), help="default: all schemes")
    common(p, scheme=False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("encode", help="export an encoding circuit")
    p.add_argument("--matrix", required=True)
    common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("phases", help="generate inverse-polynomial phase factors")
    p.add_argument("--kappa-s", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-degree", type=int, default=phases.MAX_DEGREE)
    p.add_argument("--absolute", action="store_true", help="epsilon bounds |P - 1/(4 kappa x)| directly")
    common(p, scheme=False, enc=False)
    p.set_defaults(func=cmd_phases)

    p = sub.add_parser("solve", help="QSVT solve of one system")
    p.add_argument("--matrix", required=True)
    p.add_argument("--rhs")
    p.add_argument("--phases")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sequence", help="replay a sequence of systems")
    p.add_argument("--manifest")
    p.add_argument("--matrix", action="append")
    p.add_argument("--rhs")
    p.add_argument("--synthetic", type=int, metavar="N", help="synthetic Toeplitz sequence of size N")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--phases")
    p.add_argument("--no-lu", action="store_true")
    common(p)
    p.set_defaults(func=cmd_sequence, format="csv")
    return ap


def _setup_diagnostics():
    log = logging.getLogger("qsvtemu.diagnostics")
    if not log.handlers:
        h = logging.StreamHandler(sys.stderr)
        h.setFormatter(logging.Formatter("qsvtemu: %(levelname)s: %(message)s"))
        log.addHandler(h)
        log.propagate = False
    log.setLevel(logging.WARNING)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_diagnostics()
    try:
        return args.func(args)
    except (InputError, OSError, KeyError, json.JSONDecodeError) as e:
        sys.stderr.write(f"qsvtemu: error: {e}\n")
        return EXIT_INPUT
    except NumericalError as e:
        sys.stderr.write(f"qsvtemu: numerical failure: {e}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
