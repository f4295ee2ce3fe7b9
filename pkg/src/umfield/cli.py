"""Command-line interface: tree validation, spectra, kernels, sampling, checks.

Exit codes: 0 on success / verification pass, 1 on verification failure,
2 on usage or input errors.  Reports are JSON, tabular dumps are CSV; all
numbers are written with 17 significant digits so output is diff-stable.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import tree as treemod
from . import wavelets as wavmod
from . import pdo as pdomod
from . import field as fieldmod

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _fmt(x) -> str:
    if isinstance(x, float) or isinstance(x, np.floating):
        return format(float(x), ".17g")
    return str(x)


class _CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _load_tree(args) -> treemod.BallTree:
    if args.gen:
        try:
            p, depth, total = args.gen.split(":")
            return treemod.generate_homogeneous(int(p), int(depth), float(total))
        except (ValueError, treemod.TreeError) as e:
            raise _CliError(f"--gen expects p:depth:measure, got {args.gen!r} ({e})")
    if not args.tree:
        raise _CliError("a tree file (or --gen) is required")
    try:
        return treemod.load_tree(args.tree)
    except OSError as e:
        raise _CliError(f"cannot read {args.tree}: {e.strerror or e}")
    except treemod.TreeError as e:
        raise _CliError(f"invalid tree document {args.tree}: {e}")


def _load_symbol(t: treemod.BallTree, args) -> pdomod.Symbol:
    try:
        if t.symbol_hint is not None:
            return pdomod.symbol_from_tree(t)
        if args.gen:
            return pdomod.constant_symbol(t, 1.0)
        raise _CliError("tree document carries no symbol values (\"T\" fields)")
    except ValueError as e:
        raise _CliError(str(e))


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, obj) -> None:
    _emit(args, json.dumps(obj, indent=2) + "\n")


def _csv(rows) -> str:
    return "".join(",".join(_fmt(c) for c in row) + "\n" for row in rows)


# ------------------------------------------------------------------ commands

def cmd_validate(args) -> int:
    t = _load_tree(args)
    if not args.quiet:
        print(f"leaves: {t.n_leaves}")
        print(f"total_measure: {_fmt(t.total_measure)}")
        print(f"interior: {len(t.interior)}")
        print(f"depth: {max(t.depth)}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    t = _load_tree(args)
    s = _load_symbol(t, args)
    sp = pdomod.spectrum(t, s)
    rows = [("vertex_id", "depth", "nu", "T", "lambda")]
    for v in t.interior:
        rows.append((t.names[v], t.depth[v], t.measure[v], s.values[v], sp.lam[v]))
    _emit(args, _csv(rows))
    return EXIT_OK


def cmd_wavelets(args) -> int:
    t = _load_tree(args)
    basis = wavmod.build_basis(t)
    rows = [("vertex_id", "j", "child_id", "coefficient")]
    for w in basis.wavelets:
        for c, child in zip(w.coeffs, t.children[w.vertex]):
            rows.append((t.names[w.vertex], w.index, t.names[child], c))
    _emit(args, _csv(rows))
    return EXIT_OK


def cmd_kernel(args) -> int:
    t = _load_tree(args)
    s = _load_symbol(t, args)
    sp = pdomod.spectrum(t, s)
    try:
        kernel = fieldmod.covariance_kernel(t, sp)
    except fieldmod.ZeroEigenvalue as e:
        raise _CliError(str(e))
    if args.pairs == "profile":
        rows = [("vertex_id", "nu", "K")]
        for v in t.preorder:
            rows.append((t.names[v], t.measure[v], kernel.values[v]))
    else:
        rows = [("x", "y", "sup_vertex", "K")]
        for i, x in enumerate(t.leaf_order):
            for y in t.leaf_order[i:]:
                s_v = t.sup(x, y)
                rows.append((t.names[x], t.names[y], t.names[s_v], kernel.values[s_v]))
    _emit(args, _csv(rows))
    return EXIT_OK


def cmd_sample(args) -> int:
    t = _load_tree(args)
    s = _load_symbol(t, args)
    sp = pdomod.spectrum(t, s)
    basis = wavmod.build_basis(t)
    rows = [("sample_index", "leaf_id", "value")]
    for i in range(args.count):
        stream = np.random.SeedSequence([args.seed, i])
        try:
            sample = fieldmod.sample_field(t, sp, basis, stream)
        except fieldmod.ZeroEigenvalue as e:
            raise _CliError(str(e))
        for pos, leaf in enumerate(t.leaf_order):
            rows.append((i, t.names[leaf], sample.values[pos]))
    _emit(args, _csv(rows))
    return EXIT_OK


def cmd_mc_cov(args) -> int:
    t = _load_tree(args)
    s = _load_symbol(t, args)
    sp = pdomod.spectrum(t, s)
    basis = wavmod.build_basis(t)
    try:
        result = fieldmod.empirical_covariance(t, sp, basis, args.n, args.seed)
    except (fieldmod.ZeroEigenvalue, ValueError) as e:
        raise _CliError(str(e))
    dev = np.abs(result.matrix - result.analytic)
    ok = bool(np.all(dev <= args.tol_sigma * result.standard_error))
    _emit_json(args, {
        "n": args.n,
        "seed": args.seed,
        "tol_sigma": args.tol_sigma,
        "max_abs_dev": float(result.max_abs_dev),
        "worst_pair": list(result.worst_pair),
        "pass": ok,
    })
    return EXIT_OK if ok else EXIT_FAIL


def cmd_convergence(args) -> int:
    try:
        report = pdomod.convergence_report(args.p, args.mu, args.q, args.levels)
    except treemod.OutOfRange as e:
        raise _CliError(str(e))

    def verdict(v):
        out = {"converges": v.converges, "ratio": v.ratio if v.ratio != float("inf") else "inf"}
        if v.value is not None:
            out["value"] = v.value
        return out

    _emit_json(args, {
        "p": report.branching,
        "measure_ratio": report.measure_ratio,
        "symbol_ratio": report.symbol_ratio,
        "levels_probe": report.levels_probe,
        "conv1": verdict(report.conv1),
        "conv2": verdict(report.conv2),
    })
    return EXIT_OK


def cmd_verify(args) -> int:
    t = _load_tree(args)
    basis = wavmod.build_basis(t)
    report = {"check": args.what}

    if args.what == "ortho":
        G = wavmod.gram_matrix(basis)
        resid = float(np.abs(G - np.eye(G.shape[0])).max())
        tol = args.tol if args.tol is not None else 1e-10
        ok = resid <= tol
        report.update(residual=resid, tol=tol)
    elif args.what == "eigen":
        s = _load_symbol(t, args)
        resid = pdomod.verify_eigen(t, s, basis)
        tol = args.tol if args.tol is not None else 1e-9
        ok = resid <= tol
        report.update(residual=resid, tol=tol)
    elif args.what == "kernel":
        s = _load_symbol(t, args)
        sp = pdomod.spectrum(t, s)
        try:
            kernel = fieldmod.covariance_kernel(t, sp)
        except fieldmod.ZeroEigenvalue as e:
            raise _CliError(str(e))
        resid = 0.0
        for i, x in enumerate(t.leaf_order):
            for y in t.leaf_order[i:]:
                bf = fieldmod.kernel_bruteforce(t, sp, basis, x, y)
                resid = max(resid, abs(kernel.values[t.sup(x, y)] - bf))
        tol = args.tol if args.tol is not None else 1e-10
        ok = resid <= tol * max(1.0, kernel.max_abs())
        report.update(residual=resid, tol=tol)
    elif args.what == "equation":
        s = _load_symbol(t, args)
        sp = pdomod.spectrum(t, s)
        try:
            resid = fieldmod.check_equation(t, s, sp, basis, args.seed)
        except fieldmod.ZeroEigenvalue as e:
            raise _CliError(str(e))
        tol = args.tol if args.tol is not None else 1e-9
        ok = resid <= tol
        report.update(seed=args.seed, residual=resid, tol=tol)
    elif args.what == "markov":
        s = _load_symbol(t, args)
        sp = pdomod.spectrum(t, s)
        try:
            kernel = fieldmod.covariance_kernel(t, sp)
        except fieldmod.ZeroEigenvalue as e:
            raise _CliError(str(e))
        rng = np.random.default_rng(args.seed)
        worst = 0.0
        done = 0
        for _ in range(args.trials):
            inst = fieldmod.random_markov_instance(t, rng)
            if inst is None:
                break
            I, J, f, g = inst
            res = fieldmod.markov_check(t, kernel, I, J, f, g)
            scale = max(1.0, float(np.abs(f).max() * np.abs(g).max()) * kernel.max_abs()
                        * t.total_measure ** 2)
            worst = max(worst, abs(res.value) / scale)
            done += 1
        tol = args.tol if args.tol is not None else 1e-12
        ok = worst <= tol
        report.update(trials=done, seed=args.seed, max_scaled_value=worst, tol=tol)
    else:  # pragma: no cover - argparse restricts choices
        raise _CliError(f"unknown verification {args.what!r}")

    report["pass"] = bool(ok)
    _emit_json(args, report)
    return EXIT_OK if ok else EXIT_FAIL


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("tree", nargs="?", help="tree-spec JSON file")
    common.add_argument("--gen", metavar="p:depth:measure",
                        help="use a homogeneous generated tree instead of a file")
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--quiet", action="store_true", help="suppress informational output")

    parser = argparse.ArgumentParser(prog="umfield",
                                     description="Gaussian random fields on ultrametric ball-trees")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common]).set_defaults(func=cmd_validate)
    sub.add_parser("spectrum", parents=[common]).set_defaults(func=cmd_spectrum)
    sub.add_parser("wavelets", parents=[common]).set_defaults(func=cmd_wavelets)

    p = sub.add_parser("kernel", parents=[common])
    p.add_argument("--pairs", choices=["all", "profile"], default="all")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("sample", parents=[common])
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("mc-cov", parents=[common])
    p.add_argument("--n", type=int, default=200000)
    p.add_argument("--tol-sigma", type=float, default=5.0)
    p.set_defaults(func=cmd_mc_cov)

    # "what" must precede the optional tree positional, so no common parent here
    p = sub.add_parser("verify")
    p.add_argument("what", choices=["eigen", "kernel", "ortho", "markov", "equation"])
    p.add_argument("tree", nargs="?", help="tree-spec JSON file")
    p.add_argument("--gen", metavar="p:depth:measure")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("convergence")
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--mu", type=float, required=True, help="measure ratio per upward level")
    p.add_argument("--q", type=float, required=True, help="symbol ratio per upward level")
    p.add_argument("--levels", type=int, default=40)
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_convergence)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (treemod.TreeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
