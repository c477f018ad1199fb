"""Command-line entry point.

Exit codes: 0 the property holds (or the command succeeded), 2 a violation
was found, 1 an error.  Results are printed as JSON on stdout.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .certify import hsp_ksparse, hsp_set
from .errors import HomsenseError, InputError
from .filtration import construct_witness
from .harness import ExperimentConfig, replay_trial, run_experiment
from .maps import parse_family, parse_map
from .numkit import Tolerance, column_space, matrix_from_json
from .pencil import audit_dimension_bound, dim_U, spectrum
from .recover import solve_sparse, solve_unlabeled, stability_report

EXIT_OK, EXIT_ERROR, EXIT_VIOLATED = 0, 1, 2


def load_matrix(path):
    """Matrix from a JSON file: the numkit matrix schema or nested lists (a flat list is a column)."""
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if isinstance(obj, dict):
        return matrix_from_json(obj)
    arr = np.array(obj)
    if arr.dtype == object or not np.issubdtype(arr.dtype, np.number):
        raise InputError(f"{path} does not hold a numeric array")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or not np.all(np.isfinite(arr)):
        raise InputError(f"{path} must hold a finite matrix")
    return arr.astype(float) if np.issubdtype(arr.dtype, np.integer) else arr


def load_vector(path):
    M = load_matrix(path)
    if 1 not in M.shape:
        raise InputError(f"{path} must hold a vector")
    return M.reshape(-1)


def _tol(args):
    return Tolerance(rel=args.tol) if getattr(args, "tol", None) is not None else Tolerance()


def _emit(obj):
    print(json.dumps(obj, indent=2, default=_json_default))


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, Tolerance):
        return x.to_json()
    return str(x)


def cmd_certify(args):
    tol = _tol(args)
    A = load_matrix(args.sensing) if args.sensing else None
    if args.sparse is not None:
        if A is None:
            raise InputError("--sparse needs --sensing")
        cert = hsp_ksparse(A, args.sparse, parse_family(args.family), args.pm, tol)
    else:
        if args.subspace is None:
            raise InputError("give --subspace or --sparse")
        V = column_space(load_matrix(args.subspace), tol)
        # with --sensing the subspace lives in the domain of A
        fam = parse_family(args.family, A)
        cert = hsp_set(V, fam, args.pm, tol)
    _emit(cert.to_json())
    return EXIT_OK if cert.holds else EXIT_VIOLATED


def _spectrum_report(t1, t2, n, tol):
    spec = spectrum(t1, t2, tol)
    m = t1.source_dim
    du, dpm = dim_U(spec, False), dim_U(spec, True)
    out = {"map1": t1.describe(), "map2": t2.describe(), "dimU": du, "dimU_pm": dpm, "spectrum": spec.to_json()}
    if n is not None:
        out["bound_checks"] = {"bound": m - n, "dimU_within": du <= m - n, "dimU_pm_within": dpm <= m - n}
    return out


def cmd_dimU(args):
    tol = _tol(args)
    if args.map1 or args.map2:
        if not (args.map1 and args.map2):
            raise InputError("give both --map1 and --map2")
        out = _spectrum_report(parse_map(args.map1), parse_map(args.map2), args.n, tol)
        key = "dimU_pm_within" if args.pm else "dimU_within"
        ok = args.n is None or out["bound_checks"][key]
        _emit(out)
        return EXIT_OK if ok else EXIT_VIOLATED
    if args.family is None:
        raise InputError("give --family (with --pair or --all) or --map1/--map2")
    fam = parse_family(args.family)
    if args.all:
        if args.n is None:
            raise InputError("--all needs --n")
        audit = audit_dimension_bound(fam, args.n, args.pm, True, tol=tol)
        _emit(audit.to_json())
        return EXIT_OK if audit.all_within and audit.all_agree else EXIT_VIOLATED
    if args.pair is None:
        raise InputError("give --pair i,j or --all")
    try:
        i, j = (int(v) for v in args.pair.split(","))
    except ValueError as exc:
        raise InputError(f"--pair expects i,j, got {args.pair!r}") from exc
    size = fam.cardinality()
    if not (0 <= i < size and 0 <= j < size):
        raise InputError(f"pair indices must lie in [0, {size})")
    out = _spectrum_report(fam.member(i), fam.member(j), args.n, tol)
    out["pair"] = [i, j]
    _emit(out)
    if args.n is None:
        return EXIT_OK
    key = "dimU_pm_within" if args.pm else "dimU_within"
    return EXIT_OK if out["bound_checks"][key] else EXIT_VIOLATED


def cmd_witness(args):
    seed = args.seed if args.seed is not None else args.global_seed
    w = construct_witness(parse_map(args.map1), parse_map(args.map2), args.d, _tol(args), rng_seed=seed)
    _emit(w.to_json())
    return EXIT_OK if w.certified else EXIT_ERROR


def cmd_recover(args):
    tol = _tol(args)
    y = load_vector(args.y)
    A = load_matrix(args.sensing)
    fam = parse_family(args.family)
    if args.sparse is not None:
        out = solve_sparse(y, A, args.sparse, fam, args.pm, tol)
        result = out.to_json()
    elif args.noise_report:
        eps = load_vector(args.noise_report)
        rep = stability_report(y, eps, A, fam, tol)
        result = rep.to_json()
    else:
        out = solve_unlabeled(y, A, fam, tol)
        result = out.to_json()
    _emit(result)
    return EXIT_OK


def cmd_sweep(args):
    cfg = ExperimentConfig.load(args.config)
    if args.global_seed is not None:
        cfg.seed = args.global_seed
    if args.output:
        cfg.output = args.output
    if args.replay:
        try:
            cell, trial = (int(v) for v in args.replay.split(","))
        except ValueError as exc:
            raise InputError(f"--replay expects cell,trial, got {args.replay!r}") from exc
        row = replay_trial(cfg, cell, trial)
        _emit(row)
        return EXIT_OK if row["success"] is not False else EXIT_VIOLATED
    report = run_experiment(cfg, workers=args.workers)
    _emit(report.summary())
    bad = [c for c in report.cells if c.matches_expectation is False]
    return EXIT_VIOLATED if bad else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="homsense", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=None, help="cap BLAS threads")
    p.add_argument("--seed", dest="global_seed", type=int, default=None, help="master seed")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="certify the homomorphic sensing property")
    c.add_argument("--subspace", help="JSON matrix whose columns span V")
    c.add_argument("--sparse", type=int, help="sparsity level k (needs --sensing)")
    c.add_argument("--sensing", help="JSON sensing matrix A")
    c.add_argument("--family", required=True, help="perm:m | sel:r,m | sign:m | selsign:r,m | file.json")
    c.add_argument("--pm", action="store_true", help="sign variant")
    c.add_argument("--tol", type=float)
    c.set_defaults(func=cmd_certify)

    d = sub.add_parser("dimU", help="pencil spectrum and dim U")
    d.add_argument("--family")
    g = d.add_mutually_exclusive_group()
    g.add_argument("--pair", help="member indices i,j")
    g.add_argument("--all", action="store_true", help="audit every pair")
    d.add_argument("--map1")
    d.add_argument("--map2")
    d.add_argument("--pm", action="store_true")
    d.add_argument("--n", type=int, help="data dimension for the m - n bound")
    d.add_argument("--tol", type=float)
    d.set_defaults(func=cmd_dimU)

    w = sub.add_parser("witness", help="construct a certified witness subspace")
    w.add_argument("--map1", required=True)
    w.add_argument("--map2", required=True)
    w.add_argument("--d", type=int, required=True)
    w.add_argument("--seed", type=int)
    w.add_argument("--tol", type=float)
    w.set_defaults(func=cmd_witness)

    r = sub.add_parser("recover", help="least-squares recovery over a family")
    r.add_argument("--y", required=True)
    r.add_argument("--sensing", required=True)
    r.add_argument("--family", required=True)
    r.add_argument("--sparse", type=int)
    r.add_argument("--pm", action="store_true")
    r.add_argument("--noise-report", help="JSON noise vector; y is then the clean observation")
    r.add_argument("--tol", type=float)
    r.set_defaults(func=cmd_recover)

    s = sub.add_parser("sweep", help="run a TOML-configured experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--output")
    s.add_argument("--workers", type=int)
    s.add_argument("--replay", help="cell,trial to re-run")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    limit = threadpool_limits(args.threads) if args.threads else contextlib.nullcontext()
    try:
        with limit:
            return args.func(args)
    except (HomsenseError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
