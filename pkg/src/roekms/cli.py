"""Command-line front end: ``roekms <command> ...``.

Every artifact carries the tool version, the full run configuration and the
seed; floats are written with 17 significant digits so CSV output round
trips and identical configurations give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .asymptotics import critical_beta
from .errors import MagnitudeError, RoeKmsError
from .flow import POTENTIALS, Potential, default_potential_name, named_potential
from .kms import gibbs_state, kms_audit, log_partition_function, partition_function, random_pairs, random_translations
from .operator import band_decompose, random_band_operator, reassemble
from .space import TruncationSequence, growth_profile, make_interval, make_squares, make_tree, space_from_dict
from .tree import phase_report

EXIT_OK, EXIT_AUDIT, EXIT_USAGE, EXIT_MAGNITUDE = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def parse_space(spec: str):
    """``interval:N``, ``squares:N``, ``tree:n:D`` or ``file:path.json``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "interval":
            return make_interval(int(rest))
        if kind == "squares":
            return make_squares(int(rest))
        if kind == "tree":
            n, D = rest.split(":")
            return make_tree(int(n), int(D))
        if kind == "file":
            with open(rest) as fh:
                return space_from_dict(json.load(fh))
    except (ValueError, OSError) as exc:
        raise UsageError(f"bad space spec {spec!r}: {exc}") from None
    raise UsageError(f"unknown space kind in {spec!r}; use interval:N, squares:N, tree:n:D or file:PATH")


def parse_family(spec: str) -> TruncationSequence:
    """``interval``, ``squares`` or ``tree:n``."""
    kind, _, rest = spec.partition(":")
    if kind == "interval":
        return TruncationSequence.intervals()
    if kind == "squares":
        return TruncationSequence.squares()
    if kind == "tree":
        try:
            return TruncationSequence.trees(int(rest or 2))
        except ValueError:
            raise UsageError(f"bad family {spec!r}") from None
    raise UsageError(f"unknown family {spec!r}; use interval, squares or tree:n")


def parse_potential(spec: str | None, X) -> Potential:
    """A named potential, or ``table:v0,v1,...`` listing one value per point."""
    if spec is None:
        return named_potential(default_potential_name(X), X)
    if spec.startswith("table:"):
        try:
            vals = [float(v) for v in spec[6:].split(",")]
        except ValueError:
            raise UsageError(f"bad potential table {spec!r}") from None
        return Potential(X, np.array(vals), "table")
    if spec not in POTENTIALS:
        raise UsageError(f"unknown potential {spec!r}; choose from {sorted(POTENTIALS)} or table:...")
    return named_potential(spec, X)


def beta_grid(args) -> list[float]:
    if args.beta is not None:
        return [float(b) for b in args.beta]
    if args.beta_min is None or args.beta_max is None:
        raise UsageError("give --beta or both --beta-min and --beta-max")
    if args.steps < 1:
        raise UsageError("--steps must be positive")
    if args.steps == 1:
        return [args.beta_min]
    return np.linspace(args.beta_min, args.beta_max, args.steps).tolist()


def thread_count(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("ROE_KMS_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise UsageError(f"ROE_KMS_THREADS={env!r} is not an integer") from None


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return v


def config_of(args) -> dict:
    skip = {"func", "out", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def emit(args, payload: dict, rows: list[dict] | None = None) -> None:
    """Write ``payload`` as JSON, or ``rows`` as CSV behind a commented header."""
    meta = {"tool": "roekms", "version": __version__, "config": config_of(args), "seed": args.seed}
    if args.format == "json":
        text = json.dumps({**meta, **payload}, sort_keys=True, indent=2) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# roekms {__version__}\n# seed={args.seed}\n# config={json.dumps(meta['config'], sort_keys=True)}\n")
        rows = rows if rows is not None else [payload]
        if rows:
            fields = list(rows[0])
            wr = csv.writer(buf, lineterminator="\n")
            wr.writerow(fields)
            for r in rows:
                wr.writerow([_fmt(r[k]) for k in fields])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# Commands


def cmd_space(args) -> int:
    X = parse_space(args.space)
    prof = growth_profile(X, args.radii) if args.radii else []
    payload = {"space": X.to_dict(), "growth": [{"r": r, "max_ball": m} for r, m in prof]}
    rows = [{"id": x, "label": X.label(x)} for x in range(len(X))]
    emit(args, payload, rows)
    return EXIT_OK


def cmd_zsweep(args) -> int:
    X = parse_space(args.space)
    h = parse_potential(args.potential, X)

    def row(b):
        return {"beta": b, "log_Z": log_partition_function(X, h, b), "Z": partition_function(X, h, b)}

    rows = _map(row, beta_grid(args), thread_count(args))
    emit(args, {"space": args.space, "potential": h.name, "rows": rows}, rows)
    return EXIT_OK


def cmd_critical(args) -> int:
    seq = parse_family(args.family)
    potential = args.potential or ("log-sqrt-label" if seq.kind == "squares" else "word-length")
    if potential not in POTENTIALS:
        raise UsageError(f"unknown potential {potential!r}")
    est = critical_beta(seq, potential, beta_grid(args), args.depths)
    rows = [
        {"beta": v.beta, "verdict": v.verdict, "tail": v.tail, "growth": v.growth, "log_Z": v.evidence[-1][1]}
        for v in est.verdicts
    ]
    lo, hi = est.bracket
    payload = {
        "estimate": est.estimate,
        "bracket": [lo, hi if math.isfinite(hi) else None],
        "monotone": est.monotone,
        "overall": est.overall,
        "rows": rows,
    }
    emit(args, payload, rows)
    return EXIT_OK


def cmd_kms_audit(args) -> int:
    X = parse_space(args.space)
    h = parse_potential(args.potential, X)
    phi = gibbs_state(X, h, args.beta)
    rng = np.random.default_rng(args.seed)
    pairs = random_pairs(X, args.pairs, rng, r=args.radius)
    trans = random_translations(X, args.translations, rng, r=args.radius)
    rep = kms_audit(phi, h, args.beta, pairs, trans)
    ok = rep.worst() <= args.tol
    payload = {**rep.to_dict(), "worst": rep.worst(), "tol": args.tol, "pass": ok}
    row = {k: payload[k] for k in ("beta", "defect_direct", "defect_criterion", "samples", "worst", "tol", "pass")}
    emit(args, payload, [row])
    if args.weights:
        with open(args.weights, "w", newline="") as fh:
            fh.write(phi.to_csv())
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_decompose(args) -> int:
    X = parse_space(args.space)
    rng = np.random.default_rng(args.seed)
    a = random_band_operator(X, args.radius, rng)
    terms = band_decompose(a)
    back = reassemble(X, terms)
    diff = (back.matrix - a.matrix).tocoo()
    err = float(np.abs(diff.data).max()) if diff.nnz else 0.0
    rows = [
        {"term": k, "size": len(f), "displacement": float(f.displacement), "max_coeff": float(np.abs(d.values).max())}
        for k, (d, f) in enumerate(terms)
    ]
    payload = {
        "propagation": float(a.propagation),
        "nnz": a.nnz,
        "terms": [{**f.to_dict(), "coeff_re": d.values.real.tolist(), "coeff_im": d.values.imag.tolist()} for d, f in terms],
        "reconstruction_error": err,
    }
    emit(args, payload, rows)
    return EXIT_OK


def cmd_tree_report(args) -> int:
    if args.n < 1:
        raise UsageError("-n must be positive")
    rep = phase_report(
        args.n,
        beta_grid(args),
        depths=args.depths,
        kms_depth=args.kms_depth,
        seed=args.seed,
        pairs=args.pairs,
        tol=args.tol,
        threads=thread_count(args),
    )
    d = rep.to_dict()
    flip = rep.flip()
    d["flip"] = list(flip) if flip else None
    emit(args, d, d["rows"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roekms", description="KMS states on uniform Roe algebras at finite scale")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="write the artifact here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, help="worker threads (default: $ROE_KMS_THREADS or 1)")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--beta", type=float, nargs="+")
    grid.add_argument("--beta-min", type=float)
    grid.add_argument("--beta-max", type=float)
    grid.add_argument("--steps", type=int, default=11)

    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("space", parents=[common], help="build a space and report its growth")
    s.add_argument("--space", required=True)
    s.add_argument("--radii", type=float, nargs="*")
    s.set_defaults(func=cmd_space)

    s = sub.add_parser("zsweep", parents=[common, grid], help="partition function over a beta grid")
    s.add_argument("--space", required=True)
    s.add_argument("--potential")
    s.set_defaults(func=cmd_zsweep)

    s = sub.add_parser("critical", parents=[common, grid], help="bracket the critical beta of a family")
    s.add_argument("--family", required=True, help="interval, squares or tree:n")
    s.add_argument("--potential")
    s.add_argument("--depths", type=int, nargs="+", default=[250, 500, 1000, 2000])
    s.set_defaults(func=cmd_critical)

    s = sub.add_parser("kms-audit", parents=[common], help="check the Gibbs state against both KMS tests")
    s.add_argument("--space", required=True)
    s.add_argument("--potential")
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--pairs", type=int, default=200)
    s.add_argument("--translations", type=int, default=100)
    s.add_argument("--radius", type=float, default=2)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--weights", help="also write the state's weights as CSV here")
    s.set_defaults(func=cmd_kms_audit)

    s = sub.add_parser("decompose", parents=[common], help="split a random band operator into partial translations")
    s.add_argument("--space", required=True)
    s.add_argument("--radius", type=float, default=2)
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("tree-report", parents=[common, grid], help="phase report for the n-branching tree")
    s.add_argument("-n", type=int, default=2)
    s.add_argument("--depths", type=int, nargs="+", default=[10, 20, 40, 80, 160, 320, 640, 1280])
    s.add_argument("--kms-depth", type=int, default=5)
    s.add_argument("--pairs", type=int, default=30)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_tree_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except MagnitudeError as exc:
        print(f"roekms: numeric overflow: {exc}", file=sys.stderr)
        return EXIT_MAGNITUDE
    except (UsageError, RoeKmsError, ValueError, KeyError) as exc:
        print(f"roekms: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
