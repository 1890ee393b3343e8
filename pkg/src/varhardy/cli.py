"""Batch front end: subcommands over .gf / .pspec / .atoms files.

Every run embeds its configuration, seed, grid, and library version in the
emitted JSON; ratio tables go to CSV.  Exit codes: 0 success, 2 validation
failure, 1 error.  VARHARDY_OUT overrides the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .atoms import read_atoms, synthesize, validate_atom, write_atoms, coefficient_norm
from .czdecomp import atomize, finite_atomize
from .duals import bmo_norm, cmo_norm, lip_norm, tilde_bmo_norm
from .errors import AnalysisError
from .exponent import build_exponent, read_pspec
from .families import get_family, materialize, seeded_atoms, STANDARD_SEED
from .grid import GridFunction, lq_norm, make_grid, read_gf, write_gf
from .littlewood_paley import build_filter_bank, hp_norm, square_function
from .luxemburg import luxemburg_norm
from .maximal import (
    default_dictionary,
    grand_maximal,
    hl_maximal,
    local_nontangential_maximal,
    local_vertical_maximal,
    peetre_maximal,
)
from .operators import (
    KERNEL_LIBRARY,
    apply_operator,
    boundedness_experiment,
    check_kernel,
    local_fractional,
    sobolev_pair,
)
from .profiles import bump


def _out_dir(args) -> str:
    out = os.environ.get("VARHARDY_OUT") or args.out
    os.makedirs(out, exist_ok=True)
    return out


def _report(args, payload: dict, extra: dict | None = None) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func" and not callable(v)}
    rep = {
        "version": __version__,
        "config": cfg,
        "seed": getattr(args, "seed", None),
    }
    if extra:
        rep.update(extra)
    rep.update(payload)
    return rep


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, default=_json_default)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return str(v)


def _load_exponent(path_or_inline: str, grid):
    if os.path.exists(path_or_inline):
        return build_exponent(read_pspec(path_or_inline), grid)
    try:
        return build_exponent(float(path_or_inline), grid)
    except ValueError:
        raise AnalysisError(f"exponent spec {path_or_inline!r} is neither a file nor a constant")


def _grid_meta(grid) -> dict:
    return {"n": grid.n, "L": grid.L, "J": grid.J}


# ---------------------------------------------------------------------------
# subcommands


def cmd_norm(args) -> int:
    f = read_gf(args.input)
    p = _load_exponent(args.p, f.grid)
    res = luxemburg_norm(f, p, tol=args.tol)
    out = _report(args, {
        "grid": _grid_meta(f.grid),
        "norm": res.value,
        "residual": res.residual,
        "iterations": res.iterations,
        "converged": res.converged,
    })
    path = os.path.join(_out_dir(args), "norm.json")
    _write_json(path, out)
    print(f"luxemburg norm = {res.value:.12g}  (residual {res.residual:.2e}, {res.iterations} iters)")
    return 0


def _parse_psi(spec: str):
    """Kernel spec "bump:<radius>" or "polybump:<degree>:<radius>"."""
    parts = spec.split(":")
    if parts[0] == "bump":
        return bump(float(parts[1]) if len(parts) > 1 else 0.5).normalized()
    if parts[0] == "polybump":
        from .profiles import poly_bump

        return poly_bump(int(parts[1]), float(parts[2])).normalized()
    raise AnalysisError(f"unknown test-function spec {spec!r}")


def cmd_maximal(args) -> int:
    f = read_gf(args.input)
    psi = _parse_psi(args.psi)
    if args.op == "hl":
        res = hl_maximal(f)
    elif args.op == "vert":
        res = local_vertical_maximal(f, psi)
    elif args.op == "nontan":
        res = local_nontangential_maximal(f, psi)
    elif args.op == "peetre":
        res = peetre_maximal(f, psi, A=args.A, B=args.B)
    elif args.op == "grand":
        d = default_dictionary(f.grid.n, N=args.N, box_halfwidth=f.grid.L)
        res = grand_maximal(f, d, mode=args.mode)
    else:
        raise AnalysisError(f"unknown maximal op {args.op}")
    out_dir = _out_dir(args)
    write_gf(os.path.join(out_dir, f"maximal_{args.op}.gf"), res.values)
    _write_json(os.path.join(out_dir, f"maximal_{args.op}.json"),
                _report(args, {"grid": _grid_meta(f.grid), "tag": res.tag, "params": res.params,
                               "sup": float(np.max(res.values.values))}))
    print(f"{res.tag}: sup = {np.max(res.values.values):.6g}")
    return 0


def cmd_squarefn(args) -> int:
    f = read_gf(args.input)
    bank = build_filter_bank(f.grid, args.jmax)
    sq = square_function(f, bank)
    out_dir = _out_dir(args)
    write_gf(os.path.join(out_dir, "squarefn.gf"), sq)
    _write_json(os.path.join(out_dir, "squarefn.json"),
                _report(args, {"grid": _grid_meta(f.grid), "J_max": bank.J_max,
                               "unity_residual": bank.unity_residual(),
                               "l2": lq_norm(sq, 2.0)}))
    print(f"square function written; L2 = {lq_norm(sq, 2.0):.6g}")
    return 0


def cmd_hpnorm(args) -> int:
    f = read_gf(args.input)
    p = _load_exponent(args.p, f.grid)
    bank = build_filter_bank(f.grid, args.jmax)
    val = hp_norm(f, p, bank)
    _write_json(os.path.join(_out_dir(args), "hpnorm.json"),
                _report(args, {"grid": _grid_meta(f.grid), "hp_norm": val,
                               "bank": {"J_max": bank.J_max, "unity_residual": bank.unity_residual()}}))
    print(f"hp norm = {val:.12g}")
    return 0


def cmd_atomize(args) -> int:
    f = read_gf(args.input)
    p = _load_exponent(args.p, f.grid)
    q = math.inf if args.q in ("inf", None) else float(args.q)
    try:
        if args.finite:
            dec = finite_atomize(f, p, q=q, eps=args.eps, d=args.d)
        else:
            dec = atomize(f, p, q=q, d=args.d)
    except AnalysisError as e:
        print(f"atomization failed: {e}", file=sys.stderr)
        return 2
    rec = synthesize(dec) if len(dec) else GridFunction.zeros(f.grid)
    err = lq_norm(GridFunction(f.grid, rec.values - f.values), 2.0)
    rel = err / max(lq_norm(f, 2.0), 1e-300)
    out_dir = _out_dir(args)
    write_atoms(os.path.join(out_dir, "f.atoms"), dec)
    cn = coefficient_norm(dec, p, 1.0) if len(dec) else 0.0
    dec.report.pop("order_tags", None)
    _write_json(os.path.join(out_dir, "atomize.json"),
                _report(args, {"grid": _grid_meta(f.grid), "atoms": len(dec),
                               "reconstruction_rel_l2": rel,
                               "coefficient_norm_s1": cn,
                               "construction": dec.report}))
    print(f"{len(dec)} atoms; reconstruction rel L2 = {rel:.3g}")
    return 0


def cmd_validate(args) -> int:
    dec = read_atoms(args.input)
    p = _load_exponent(args.p, dec.grid if len(dec) else make_grid(args.n, args.L, args.J))
    bad = 0
    rows = []
    for i, a in enumerate(dec.atoms):
        rep = validate_atom(a, p)
        rows.append({"atom": i, "passed": rep.passed, "size_ratio": rep.size_ratio,
                     "support_violations": rep.support_violations,
                     "max_moment_residual": rep.max_moment_residual})
        bad += 0 if rep.passed else 1
    _write_json(os.path.join(_out_dir(args), "validate.json"),
                _report(args, {"atoms": len(dec.atoms), "failed": bad, "results": rows}))
    print(f"{len(dec.atoms) - bad}/{len(dec.atoms)} atoms pass")
    return 0 if bad == 0 else 2


def cmd_dualnorm(args) -> int:
    f = read_gf(args.input)
    p = _load_exponent(args.p, f.grid)
    if args.space == "bmo":
        res = bmo_norm(f, p, q=args.q, d=args.d)
    elif args.space == "lip":
        res = lip_norm(f, p)
    elif args.space == "cmo":
        bank = build_filter_bank(f.grid)
        res = cmo_norm(f, p, bank)
    elif args.space == "tbmo":
        res = tilde_bmo_norm(f, p, q=args.q, d=args.d)
    else:
        raise AnalysisError(f"unknown dual space {args.space}")
    _write_json(os.path.join(_out_dir(args), f"dualnorm_{args.space}.json"),
                _report(args, {"grid": _grid_meta(f.grid), "value": res.value,
                               "small_term": res.small_term, "large_term": res.large_term,
                               "argmax_small": res.argmax_small, "argmax_large": res.argmax_large,
                               "skipped_small": res.skipped_small, "meta": res.meta}))
    print(f"{args.space} seminorm = {res.value:.12g}")
    return 0


def cmd_operator(args) -> int:
    if args.kernel not in KERNEL_LIBRARY and args.kernel != "fractional":
        raise AnalysisError(f"unknown kernel {args.kernel!r}; known: {sorted(KERNEL_LIBRARY)} + fractional")
    grid = make_grid(args.n, args.L, args.J)
    p = _load_exponent(args.p, grid)
    if args.family_dir:
        names = sorted(x for x in os.listdir(args.family_dir) if x.endswith(".gf"))
        fam = [read_gf(os.path.join(args.family_dir, x), grid) for x in names]
    else:
        fam = [a.samples for a in seeded_atoms(grid, args.seed, 10, d=0)]
    bank = build_filter_bank(grid)
    if args.kernel == "fractional":
        q_field = sobolev_pair(p, args.alpha)
        op = lambda m: local_fractional(m if isinstance(m, GridFunction) else m.samples, args.alpha)
        rep = boundedness_experiment(op, fam, p, args.out_space, bank=bank,
                                     in_space=args.in_space, p_out=q_field)
        kernel_info = {"alpha": args.alpha}
    else:
        spec = KERNEL_LIBRARY[args.kernel]()
        chk = check_kernel(spec, grid, seed=args.seed)
        op = lambda m: apply_operator(spec, m if isinstance(m, GridFunction) else m.samples)
        rep = boundedness_experiment(op, fam, p, args.out_space, bank=bank, in_space=args.in_space)
        kernel_info = {"size_constant": chk.size_constant, "smoothness_constant": chk.smoothness_constant,
                       "passed": chk.passed}
    _write_json(os.path.join(_out_dir(args), "operator.json"),
                _report(args, {"grid": _grid_meta(grid), "kernel": args.kernel, "kernel_info": kernel_info,
                               "max_ratio": rep.max_ratio, "median_ratio": rep.median_ratio,
                               "ratios": rep.ratios, "skipped": rep.skipped}))
    print(f"{args.kernel}: max ratio {rep.max_ratio:.6g}, median {rep.median_ratio:.6g}")
    return 0


def cmd_equivalence(args) -> int:
    grid = make_grid(args.n, args.L, args.J)
    p = _load_exponent(args.p, grid)
    recipes = get_family(args.family, args.seed)
    fam = materialize(recipes, grid)
    bank = build_filter_bank(grid)
    dictionary = default_dictionary(grid.n, box_halfwidth=grid.L)
    psi = bump(0.5).normalized()
    labels = ["grand-vert", "grand-vert-R1", "grand-nontan", "grand-nontan-R1",
              "vertical", "nontangential", "tangential"]
    norms = []
    hp_vals = []
    for f in fam:
        row = []
        for op in labels:
            res = _equiv_op(f, op, dictionary, psi, args)
            row.append(luxemburg_norm(res.values, p).value)
        norms.append(row)
        hp_vals.append(hp_norm(f, p, bank))
    norms = np.asarray(norms)
    hp_vals = np.asarray(hp_vals)
    k = len(labels)
    ratio_max = np.zeros((k, k))
    ratio_min = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            r = norms[:, i] / norms[:, j]
            ratio_max[i, j] = np.max(r)
            ratio_min[i, j] = np.min(r)
    out_dir = _out_dir(args)
    csv_path = os.path.join(out_dir, "equivalence.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["norm_i", "norm_j", "ratio_min", "ratio_max", "spread"])
        for i in range(k):
            for j in range(k):
                w.writerow([labels[i], labels[j], f"{ratio_min[i, j]:.12g}",
                            f"{ratio_max[i, j]:.12g}",
                            f"{ratio_max[i, j] / ratio_min[i, j]:.12g}"])
        for i in range(k):
            r = norms[:, i] / hp_vals
            w.writerow([labels[i], "hp-norm", f"{np.min(r):.12g}", f"{np.max(r):.12g}",
                        f"{np.max(r) / np.min(r):.12g}"])
    _write_json(os.path.join(out_dir, "equivalence.json"),
                _report(args, {"grid": _grid_meta(grid), "labels": labels,
                               "members": [r.label for r in recipes],
                               "csv": os.path.basename(csv_path)}))
    print(f"equivalence table written to {csv_path}")
    return 0


def _equiv_op(f, op, dictionary, psi, args):
    if op == "grand-vert":
        return grand_maximal(f, dictionary, mode="vertical")
    if op == "grand-vert-R1":
        return grand_maximal(f, dictionary, mode="vertical", R=1.0)
    if op == "grand-nontan":
        return grand_maximal(f, dictionary, mode="nontangential")
    if op == "grand-nontan-R1":
        return grand_maximal(f, dictionary, mode="nontangential", R=1.0)
    if op == "vertical":
        return local_vertical_maximal(f, psi)
    if op == "nontangential":
        return local_nontangential_maximal(f, psi)
    if op == "tangential":
        return peetre_maximal(f, psi, A=args.A, B=args.B)
    raise AnalysisError(op)


def cmd_generate(args) -> int:
    grid = make_grid(args.n, args.L, args.J)
    out_dir = _out_dir(args)
    if args.family == "atoms":
        atoms = seeded_atoms(grid, args.seed, 10, d=args.d)
        from .atoms import AtomicDecomposition, write_atoms as _wa

        dec = AtomicDecomposition(atoms, np.ones(len(atoms)), "manual")
        _wa(os.path.join(out_dir, "atoms.atoms"), dec)
        print(f"wrote {len(atoms)} atoms")
        return 0
    recipes = get_family(args.family, args.seed)
    for i, r in enumerate(recipes):
        f = r(grid)
        write_gf(os.path.join(out_dir, f"member_{i:02d}.gf"), f)
    manifest = _report(args, {"grid": _grid_meta(grid),
                              "members": [r.label for r in recipes]})
    _write_json(os.path.join(out_dir, "family.json"), manifest)
    print(f"wrote {len(recipes)} members to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varhardy", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(sp, grid_args=False):
        sp.add_argument("--out", default="out", help="output directory (VARHARDY_OUT overrides)")
        sp.add_argument("--seed", type=int, default=STANDARD_SEED)
        if grid_args:
            sp.add_argument("--n", type=int, default=1)
            sp.add_argument("--L", type=float, default=8.0)
            sp.add_argument("--J", type=int, default=9)

    sp = sub.add_parser("norm", help="Luxemburg norm of a .gf file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--p", required=True, help=".pspec file or a constant")
    sp.add_argument("--tol", type=float, default=1e-10)
    common(sp)
    sp.set_defaults(func=cmd_norm)

    sp = sub.add_parser("maximal", help="maximal functions")
    sp.add_argument("--input", required=True)
    sp.add_argument("--op", choices=["hl", "vert", "nontan", "peetre", "grand"], default="grand")
    sp.add_argument("--psi", default="bump:0.5", help="test function, e.g. bump:0.5")
    sp.add_argument("--A", type=float, default=4.0)
    sp.add_argument("--B", type=float, default=2.0)
    sp.add_argument("--N", type=int, default=5)
    sp.add_argument("--mode", choices=["vertical", "nontangential"], default="vertical")
    common(sp)
    sp.set_defaults(func=cmd_maximal)

    sp = sub.add_parser("squarefn", help="square function of a .gf file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--jmax", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_squarefn)

    sp = sub.add_parser("hpnorm", help="local Hardy quasi-norm")
    sp.add_argument("--input", required=True)
    sp.add_argument("--p", required=True)
    sp.add_argument("--jmax", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_hpnorm)

    sp = sub.add_parser("atomize", help="constructive atomic decomposition")
    sp.add_argument("--input", required=True)
    sp.add_argument("--p", required=True)
    sp.add_argument("--q", default="inf")
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--finite", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_atomize)

    sp = sub.add_parser("validate", help="validate an .atoms file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--p", required=True)
    common(sp, grid_args=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("dualnorm", help="dual-side seminorms")
    sp.add_argument("--input", required=True)
    sp.add_argument("--p", required=True)
    sp.add_argument("--space", choices=["bmo", "lip", "cmo", "tbmo"], default="bmo")
    sp.add_argument("--q", type=float, default=2.0)
    sp.add_argument("--d", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_dualnorm)

    sp = sub.add_parser("operator", help="kernel checks and boundedness ratios")
    sp.add_argument("--kernel", default="local-hilbert")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--p", required=True)
    sp.add_argument("--in-space", dest="in_space", choices=["hp", "Lp", "bmo"], default="hp")
    sp.add_argument("--out-space", dest="out_space", choices=["hp", "Lp", "bmo"], default="Lp")
    sp.add_argument("--family", dest="family_dir", default=None, help="directory of .gf members")
    common(sp, grid_args=True)
    sp.set_defaults(func=cmd_operator)

    sp = sub.add_parser("equivalence", help="maximal-norm ratio matrix over a family")
    sp.add_argument("--family", default="standard20")
    sp.add_argument("--p", required=True)
    sp.add_argument("--A", type=float, default=4.0)
    sp.add_argument("--B", type=float, default=2.0)
    common(sp, grid_args=True)
    sp.set_defaults(func=cmd_equivalence)

    sp = sub.add_parser("generate", help="write a deterministic test family")
    sp.add_argument("--family", default="standard20")
    sp.add_argument("--d", type=int, default=0)
    common(sp, grid_args=True)
    sp.set_defaults(func=cmd_generate)

    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except AnalysisError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
