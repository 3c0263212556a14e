"""Command-line entry point: ``ipsjoin <subcommand> ...``.

Exit codes: 0 on success, 1 when a verification or audit fails, 2 on usage
or input errors. Reports go to stdout as JSON (default) or CSV; every random
choice derives from ``--seed`` (default 0, echoed in JSON reports).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import core, dataio, embeddings, lowerbound, lsh, ovp, sketch

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


# -- output helpers ---------------------------------------------------------


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def to_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def to_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` inclusive of both ends, e.g. ``0.1:0.9:0.1`` has 9 points."""
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"grid must look like a:b:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise UsageError(f"grid {text!r} needs step > 0 and a <= b")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + i * step, 12) for i in range(count)]


def _read(path: str) -> dataio.Dataset:
    try:
        return dataio.read_dataset(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _emit(args, text: str) -> None:
    out = getattr(args, "output", None)
    if out and out != "-":
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------


def cmd_embed(args) -> int:
    ds = _read(args.input)
    if ds.domain is not core.Domain.BINARY:
        raise UsageError("embeddings take binary datasets")
    out = ovp.embed_rows(
        args.family, args.side, ds.vectors, args.param, budget=args.budget,
        strict=not args.no_strict, threads=args.threads,
    )
    domain = core.Domain.BINARY if args.family == 3 else core.Domain.SIGN
    text = dataio.format_dataset(out, domain)
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_profile(args) -> int:
    prof = embeddings.profile(args.family, args.d, args.param, strict=not args.no_strict)
    _emit(args, to_json(prof.to_dict()))
    return 0


def _joiner(name: str, args):
    if name == "brute":
        return lambda P, Q, **kw: ovp.brute_force_join(P, Q, threads=args.threads, **kw)
    if name == "lsh":
        return lambda P, Q, **kw: lsh.lsh_join(P, Q, tables=args.tables, k=args.bits, seed=args.seed, **kw)
    if name == "sketch":
        return sketch.sketch_joiner(args.kappa, args.seed, threads=args.threads)
    raise UsageError(f"unknown joiner {name!r}")


def cmd_ovp_reduce(args) -> int:
    rng = core.derive_rng(args.seed)
    inst = ovp.random_instance(args.n, args.n, args.d, rng, density=args.density, planted=args.planted)
    report = ovp.reduce_and_join(
        inst, args.family, args.param, _joiner(args.joiner, args),
        budget=args.budget, strict=not args.no_strict, threads=args.threads,
    )
    out = report.to_dict(with_timings=args.timings)
    out.update(seed=args.seed, n=args.n, d=args.d, planted=args.planted, joiner=args.joiner)
    _emit(args, to_json(out))
    # a heuristic joiner may miss pairs; only the exact one is held to agreement
    return 0 if report.agree or args.joiner != "brute" else 1


def cmd_join(args) -> int:
    P, Q = _read(args.data), _read(args.queries)
    if P.dim != Q.dim:
        raise UsageError(f"data dimension {P.dim} differs from query dimension {Q.dim}")
    spec = core.JoinSpec(args.s, args.c, core.JoinMode(args.mode))
    signed = spec.mode is core.JoinMode.SIGNED
    pairs = _joiner(args.method, args)(
        P.vectors.astype(np.float64), Q.vectors.astype(np.float64), s=spec.s, cs=spec.cs, signed=signed
    )
    pairs = sorted((int(i), int(j)) for i, j in pairs)
    if args.format == "csv":
        _emit(args, to_csv(["data_index", "query_index"], pairs))
    else:
        _emit(args, to_json({"seed": args.seed, "method": args.method, "s": spec.s, "c": spec.c,
                             "mode": spec.mode.value, "pairs": pairs}))
    return 0


def cmd_rho_curve(args) -> int:
    rows = []
    for s in parse_grid(args.s_grid):
        for c in parse_grid(args.c_grid):
            try:
                dd = lsh.rho_datadep(s, c).rho
            except ValueError:
                dd = math.nan
            try:
                simple = lsh.rho_simple(s, c)
            except ValueError:
                simple = math.nan
            rows.append((s, c, dd, simple))
    fmt = args.out or args.format or "csv"
    if fmt == "csv":
        _emit(args, to_csv(["s", "c", "rho_datadep", "rho_simple"], rows))
    else:
        _emit(args, to_json([dict(zip(("s", "c", "rho_datadep", "rho_simple"), r)) for r in rows]))
    return 0


def cmd_lsh_bench(args) -> int:
    thetas = [float(eval_angle(t)) for t in args.angles.split(",")]
    fam = lsh.HyperplaneFamily(args.dim, k=1, seed=args.seed)
    rows = []
    for t in thetas:
        x = np.zeros(args.dim)
        y = np.zeros(args.dim)
        x[0] = 1.0
        y[0], y[1] = math.cos(t), math.sin(t)
        p, se = lsh.estimate_collision(fam, x, y, args.trials, threads=args.threads)
        expected = 1 - t / math.pi
        z = (p - expected) / se if se > 0 else 0.0
        rows.append((t, p, se, expected, z))
    header = ["theta", "estimate", "stderr", "expected", "z"]
    if args.format == "csv":
        _emit(args, to_csv(header, rows))
    else:
        _emit(args, to_json({"seed": args.seed, "trials": args.trials,
                             "results": [dict(zip(header, r)) for r in rows]}))
    return 0


def eval_angle(text: str) -> float:
    """Parse an angle such as ``0.5``, ``pi/3`` or ``2pi/3``."""
    t = text.strip().lower().replace("π", "pi")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    mult = num.replace("pi", "").replace("*", "") or "1"
    return float(mult) * math.pi / (float(den) if den else 1.0)


def cmd_sketch_build(args) -> int:
    ds = _read(args.input)
    index = sketch.build_index(
        ds.vectors.astype(np.float64), args.kappa, args.seed,
        copies=args.copies, row_constant=args.row_constant, threads=args.threads,
    )
    sketch.save_index(index, args.out)
    _emit(args, to_json({
        "seed": args.seed, "n": index.n, "d": index.d, "kappa": index.kappa, "copies": index.copies,
        "nodes": len(index.sketches), "root_rows": index.root_rows, "total_rows": index.total_rows(),
    }))
    return 0


def cmd_sketch_query(args) -> int:
    try:
        index = sketch.load_index(args.index)
    except OSError as e:
        raise UsageError(f"cannot read {args.index}: {e.strerror}") from None
    Q = _read(args.queries).vectors.astype(np.float64)
    if Q.shape[1] != index.d:
        raise UsageError(f"queries have dimension {Q.shape[1]}, index has {index.d}")

    def answer(j: int):
        found = sketch.recover(index, Q[j])
        return j, found, sketch.estimate_max(index, (0, 0), Q[j])

    rows = core.parallel_map(answer, range(Q.shape[0]), args.threads)
    header = ["query", "index", "root_estimate"]
    if (args.report or args.format or "csv") == "csv":
        _emit(args, to_csv(header, rows))
    else:
        _emit(args, to_json([dict(zip(header, r)) for r in rows]))
    return 0


def _audit_options(tokens: list[str]) -> dict:
    opts = {"family": "hyperplane", "trials": 10_000}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or key not in opts:
            raise UsageError(f"audit options are family=... and trials=..., got {tok!r}")
        opts[key] = value if key == "family" else int(value)
    if opts["family"] != "hyperplane":
        raise UsageError("the only audit family is 'hyperplane' (lifted SimHash)")
    return opts


def cmd_lowerbound(args) -> int:
    seq = lowerbound.generate(args.case, args.s, args.c, args.U, args.d)
    out = {"case": seq.case, "n": seq.n, "dim": seq.d, "s": seq.s, "c": seq.c, "U": seq.U,
           "seed": args.seed, "meta": seq.meta}
    ok = True
    if args.verify:
        rep = lowerbound.verify_sequence(seq, args.mode, threads=args.threads)
        out["verification"] = rep.to_dict()
        ok &= rep.passed
    if args.audit is not None:
        opts = _audit_options(args.audit)
        fam = lsh.LiftedHyperplaneFamily(seq.d, seq.U, 1, args.seed)
        audit = lowerbound.gap_audit(seq, fam, opts["trials"], seed=args.seed, threads=args.threads)
        out["audit"] = audit.to_dict()
        ok &= audit.passed
    _emit(args, to_json(out))
    return 0 if ok else 1


def cmd_gen(args) -> int:
    rng = core.derive_rng(args.seed)
    n, d = args.n, args.d
    if n < 1 or d < 1:
        raise UsageError("n and d must be at least 1")
    domain = core.Domain(args.domain)
    if domain is core.Domain.BINARY:
        X = (rng.random((n, d)) < 0.5).astype(np.int8)
    elif domain is core.Domain.SIGN:
        X = np.where(rng.random((n, d)) < 0.5, -1, 1).astype(np.int8)
    else:
        X = core.unit_ball(n, d, rng)
    if args.planted != "none":
        if n < 2:
            raise UsageError("planting a pair needs n >= 2")
        i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
        if args.planted == "orthogonal":
            if domain is not core.Domain.BINARY:
                raise UsageError("orthogonal planting is for binary data")
            X[j] &= 1 - X[i]
        else:
            X[j] = X[i]
            if domain is core.Domain.REAL:
                norm = np.linalg.norm(X[i])
                if norm > 0:
                    X[i] = X[j] = X[i] / norm
    _emit(args, dataio.format_dataset(X, domain))
    return 0


# -- parser -----------------------------------------------------------------


def _global_flags(parser: argparse.ArgumentParser, defaults: bool) -> None:
    kw = {} if defaults else {"default": argparse.SUPPRESS}
    parser.add_argument("--seed", type=int, **({"default": DEFAULT_SEED} if defaults else kw),
                        help="random seed (default 0)")
    parser.add_argument("--threads", type=int, **({"default": 1} if defaults else kw),
                        help="worker threads (results do not depend on it)")
    parser.add_argument("--format", choices=("json", "csv"), **({"default": None} if defaults else kw),
                        help="report format")
    parser.add_argument("--output", **({"default": None} if defaults else kw),
                        help="write the report to a file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipsjoin", description="Inner-product similarity join toolkit.")
    _global_flags(parser, True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, False)
        p.set_defaults(func=fn)
        return p

    def embed_common(p):
        p.add_argument("--family", type=int, choices=(1, 2, 3), required=True)
        p.add_argument("--param", type=int, help="Chebyshev order q (family 2) or chunk count k (family 3)")
        p.add_argument("--no-strict", action="store_true", help="allow family 2 below d=8")

    p = add("embed", cmd_embed, "apply a gap embedding to a binary dataset")
    embed_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--side", choices=("data", "query"), required=True)
    p.add_argument("--out")
    p.add_argument("--budget", type=int)

    p = add("profile", cmd_profile, "dimensions and gap of an embedding")
    embed_common(p)
    p.add_argument("--d", type=int, required=True)

    def join_knobs(p):
        p.add_argument("--tables", type=int, default=16, help="LSH tables")
        p.add_argument("--bits", type=int, default=4, help="hash bits per LSH table")
        p.add_argument("--kappa", type=float, default=4.0, help="sketch norm order")

    p = add("ovp-reduce", cmd_ovp_reduce, "solve a random OVP instance through an embedding and a join")
    embed_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--planted", action="store_true")
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--joiner", choices=("brute", "lsh", "sketch"), default="brute")
    p.add_argument("--budget", type=int)
    p.add_argument("--timings", action="store_true", help="include wall-clock timings (not reproducible)")
    join_knobs(p)

    p = add("join", cmd_join, "(cs, s) join of two dataset files")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--mode", choices=("signed", "unsigned"), default="signed")
    p.add_argument("--method", choices=("brute", "lsh", "sketch"), default="brute")
    join_knobs(p)

    p = add("rho-curve", cmd_rho_curve, "rho of the lifted and plain hyperplane schemes over a grid")
    p.add_argument("--s-grid", required=True)
    p.add_argument("--c-grid", required=True)
    p.add_argument("--out", choices=("csv", "json"), help="same as --format")

    p = add("lsh-bench", cmd_lsh_bench, "hyperplane collision rates against 1 - theta/pi")
    p.add_argument("--angles", default="pi/6,pi/3,pi/2,2pi/3")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--dim", type=int, default=8)

    p = add("sketch-mips", lambda a: 2, "build or query a sketch index")
    ssub = p.add_subparsers(dest="action", required=True, metavar="ACTION")
    b = ssub.add_parser("build", help="sketch a dataset into an index file")
    _global_flags(b, False)
    b.set_defaults(func=cmd_sketch_build)
    b.add_argument("--in", dest="input", required=True)
    b.add_argument("--kappa", type=float, default=4.0)
    b.add_argument("--copies", type=int, default=sketch.DEFAULT_COPIES)
    b.add_argument("--row-constant", type=float, default=sketch.DEFAULT_ROW_CONSTANT)
    b.add_argument("--out", required=True)
    qp = ssub.add_parser("query", help="recover an index per query")
    _global_flags(qp, False)
    qp.set_defaults(func=cmd_sketch_query)
    qp.add_argument("--index", required=True)
    qp.add_argument("--queries", required=True)
    qp.add_argument("--report", choices=("csv", "json"))

    p = add("lowerbound", cmd_lowerbound, "generate, verify and audit staircase sequences")
    p.add_argument("--case", choices=("1a", "1b", "2", "3"), required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--U", type=float, required=True)
    p.add_argument("--d", type=int)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--mode", choices=("signed", "unsigned"), help="override the verification mode")
    p.add_argument("--audit", nargs="*", metavar="KEY=VALUE", help="e.g. family=hyperplane trials=100000")

    p = add("gen", cmd_gen, "generate a random dataset file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--domain", choices=("binary", "sign", "real"), default="binary")
    p.add_argument("--dist", choices=("uniform",), default="uniform",
                   help="uniform cube vectors, or uniform in the unit ball for real data")
    p.add_argument("--planted", choices=("none", "orthogonal", "high"), default="none")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.threads < 1:
        print("ipsjoin: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"ipsjoin: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
