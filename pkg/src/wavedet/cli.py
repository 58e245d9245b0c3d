"""Command-line front end.

Subcommands: jost, fredholm, expand, aux, simon, cylinder, index, converge.
Configuration comes from flags, optionally seeded by a flat key=value file
(--config); flags win.  Outputs: concise stdout, optional CSV (deterministic
column order, 17 significant digits) and a JSON summary.  Exit codes:
0 success, 2 precondition/usage errors, 3 numerical failures.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import NumericalError, PreconditionError
from .grids import gauss_legendre_composite
from .matdet import (AnalyticMatrixFamily, expansion_regular,
                     expansion_singular, riesz_projection)
from .policy import NumericPolicy
from .potentials import DEFAULT_NODES, DEFAULT_X_MAX, parse_potential
from .volterra import (jost_derivative_at_eigenvalue, jost_function,
                       locate_eigenvalues, solve_aux, solve_jost)
from . import cylinder as cyl
from . import fredholm1d as f1d
from . import stabindex as stx


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _parse_complex(s: str) -> complex:
    return complex(s.replace("i", "j").replace(" ", ""))


def _parse_z_list(args) -> list[complex]:
    if args.contour:
        kind, _, body = args.contour.partition(":")
        parts = body.split(",")
        if kind == "circle":
            cre, cim, rad, n = (float(parts[0]), float(parts[1]),
                                float(parts[2]), int(parts[3]))
            theta = 2.0 * np.pi * np.arange(n) / n
            return [complex(cre, cim) + rad * np.exp(1j * t) for t in theta]
        if kind == "segment":
            a, b, n = _parse_complex(parts[0]), _parse_complex(parts[1]), int(parts[2])
            return [a + (b - a) * t for t in np.linspace(0.0, 1.0, n)]
        raise PreconditionError(f"unknown contour kind {kind!r}")
    if args.z is None:
        raise PreconditionError("need --z or --contour")
    return [_parse_complex(tok) for tok in args.z.split(",")]


def _policy_from(args) -> NumericPolicy:
    kw = {}
    for name in ("cond_max", "rank_tol", "degenerate_tol", "eigen_tol",
                 "cross_tol"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    return NumericPolicy(**kw)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: str | None, payload: dict) -> None:
    if path:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _map_z(fn, zs, threads):
    if threads <= 1 or len(zs) <= 1:
        return [fn(z) for z in zs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, zs))


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def cmd_jost(args) -> dict:
    p = parse_potential(args.potential, args.x_max, args.nodes)
    zs = _parse_z_list(args)
    policy = _policy_from(args)

    def one(z):
        return jost_function(p, z, method=args.method, policy=policy)

    vals = _map_z(one, zs, args.threads)
    rows = [[z.real, z.imag, v.real, v.imag] for z, v in zip(zs, vals)]
    if args.out_csv:
        _write_csv(args.out_csv, ["z_re", "z_im", "F_re", "F_im"], rows)
    if len(zs) == 1:
        v = vals[0]
        if abs(v.imag) < 1e-12 * max(1.0, abs(v.real)):
            print(f"F = {v.real:.4e}")
        else:
            print(f"F = {v:.4e}")
    else:
        for z, v in zip(zs, vals):
            print(f"z = {z}  F = {v}")
    return {"values": [[_fmt(r) for r in row] for row in rows]}


def cmd_fredholm(args) -> dict:
    p = parse_potential(args.potential, args.x_max, args.nodes)
    zs = _parse_z_list(args)
    g = gauss_legendre_composite(-p.x_max, p.x_max, args.panels, args.per_panel)

    def one(z):
        return f1d.fredholm_det_refined(p, z, g, levels=args.levels,
                                        modified=args.modified)

    vals = _map_z(one, zs, args.threads)
    rows = [[z.real, z.imag, v.real, v.imag] for z, v in zip(zs, vals)]
    if args.out_csv:
        _write_csv(args.out_csv, ["z_re", "z_im", "det_re", "det_im"], rows)
    for z, v in zip(zs, vals):
        print(f"z = {z}  det = {v}")
    return {"values": [[_fmt(r) for r in row] for row in rows]}


def cmd_expand(args) -> dict:
    with open(args.family) as fh:
        data = json.load(fh)

    def to_matrix(entry):
        m = np.asarray(entry, dtype=float) if np.asarray(entry).ndim == 2 \
            else np.asarray(entry)
        arr = np.asarray(entry)
        if arr.ndim == 3 and arr.shape[-1] == 2:
            return arr[..., 0] + 1j * arr[..., 1]
        return np.asarray(entry, dtype=complex)

    coeffs = [to_matrix(c) for c in data["coefficients"]]
    fam = AnalyticMatrixFamily(tuple(coeffs), radius=data.get("radius", 1.0))
    policy = _policy_from(args)
    if args.singular:
        riesz = riesz_projection(fam.a0, center=args.center,
                                 radius=args.radius, policy=policy)
        res = expansion_singular(fam, riesz, modified=args.modified,
                                 policy=policy)
    else:
        res = expansion_regular(fam, modified=args.modified, policy=policy)
    print(f"order = {res.order}")
    print(f"leading_coefficient = {res.leading_coefficient}")
    print(f"next_order_bound = {res.next_order_bound:.6e}")
    return {"order": res.order,
            "leading_coefficient": [res.leading_coefficient.real,
                                    res.leading_coefficient.imag],
            "constant": [res.constant.real, res.constant.imag],
            "next_order_bound": res.next_order_bound}


def cmd_aux(args) -> dict:
    p = parse_potential(args.potential, args.x_max, args.nodes)
    policy = _policy_from(args)
    aux = solve_aux(p, policy=policy)
    zm = f1d.acquire_zero_mode(p, policy=policy)
    ff = f1d.first_factor_direct(p, aux, policy=policy)
    ffa = f1d.first_factor_aposteriori(p)
    sf = f1d.second_factor(zm, p)
    dF = jost_derivative_at_eigenvalue(p, 0.0, policy=policy)
    print(f"first_factor  = {ff:.10g}  (a posteriori {ffa:.10g})")
    print(f"second_factor = {sf:.10g}")
    print(f"product       = {ff * sf:.10g}   dF(0) = {dF.real:.10g}")
    return {"first_factor": ff, "first_factor_aposteriori": ffa,
            "second_factor": sf, "product": ff * sf, "dF0": dF.real,
            "residual_product_vs_dF0": abs(ff * sf - dF.real)}


def cmd_simon(args) -> dict:
    p = parse_potential(args.potential, args.x_max, args.nodes)
    zs = _parse_z_list(args)
    rows = []
    for z in zs:
        det_val = f1d.simon_jost(p, z, args.x, args.which)
        sol = solve_jost(p, z)
        i = int(np.argmin(np.abs(p.grid - args.x)))
        ref = sol.psi_plus[i] if args.which == "value" else sol.dpsi_plus[i]
        gap = abs(det_val - ref) / max(abs(ref), 1e-12)
        rows.append([z.real, z.imag, det_val.real, det_val.imag,
                     ref.real, ref.imag, gap])
        print(f"z = {z}  x = {args.x}  {args.which}: determinant {det_val}"
              f"  volterra {ref}  rel gap {gap:.2e}")
    if args.out_csv:
        _write_csv(args.out_csv,
                   ["z_re", "z_im", "det_re", "det_im",
                    "volterra_re", "volterra_im", "rel_gap"], rows)
    return {"rows": [[_fmt(v) for v in row] for row in rows]}


def _cylinder_potential(args) -> cyl.FourierPotential:
    spec = args.potential
    if spec.startswith("planar:"):
        base = parse_potential(spec[len("planar:"):], args.x_max, args.nodes)
        return cyl.planar_potential(base, d=args.d)
    if spec.startswith("ycos:"):
        rest = spec[len("ycos:"):]
        base_spec, _, amp = rest.rpartition(":")
        base = parse_potential(base_spec, args.x_max, args.nodes)
        return cyl.cosine_coupled_potential(base, float(amp), d=args.d)
    return load_cylinder_potential(spec)


def cmd_cylinder(args) -> dict:
    fp = _cylinder_potential(args)
    trunc = cyl.GalerkinTruncation(args.J, args.d)
    zs = _parse_z_list(args)
    rows = []
    results = []
    for z in zs:
        if args.check_equivalence:
            rep = cyl.equivalence_check(fp, trunc, z, route=args.route,
                                        levels=args.levels)
            rows.append([trunc.J, z.real, z.imag, rep.f2j.real, rep.f2j.imag,
                        rep.theta.real, rep.theta.imag,
                        rep.evans.real, rep.evans.imag, rep.residual])
            print(f"J={trunc.J} z={z}: F2J={rep.f2j:.8g} Theta={rep.theta:.8g}"
                  f" E={rep.evans:.8g} residual={rep.residual:.3e}")
            results.append({"z": [z.real, z.imag], "residual": rep.residual})
        else:
            v = cyl.f2j(fp, trunc, z, route=args.route, levels=args.levels)
            th = cyl.theta_j(fp, trunc, z)
            ej = cyl.evans_ej(fp, trunc, z)
            resid = abs(v - np.exp(th) * ej) / max(1.0, abs(v))
            rows.append([trunc.J, z.real, z.imag, v.real, v.imag,
                        th.real, th.imag, ej.real, ej.imag, resid])
            print(f"J={trunc.J} z={z}: F2J = {v}")
            results.append({"z": [z.real, z.imag],
                            "F2J": [v.real, v.imag]})
    if args.out_csv:
        _write_csv(args.out_csv,
                   ["J", "z_re", "z_im", "F2J_re", "F2J_im", "theta_re",
                    "theta_im", "EJ_re", "EJ_im", "residual"], rows)
    return {"rows": results}


def cmd_index(args) -> dict:
    p = parse_potential(args.potential, args.x_max, args.nodes)
    policy = _policy_from(args)
    rep = stx.stability_index_1d(p, policy=policy)
    payload = {
        "verdict": rep.verdict,
        "gamma": rep.gamma,
        "order_k": rep.order_k,
        "dF0": rep.dkF0,
        "f_at_infinity_sign": rep.f_at_infinity_sign,
        "unstable_parity": rep.unstable_parity,
        "f0_abs": rep.f0_abs,
        "cross_check_gap": rep.cross_check_gap,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return payload


def cmd_converge(args) -> dict:
    fp = _cylinder_potential(args)
    zs = _parse_z_list(args)
    j_list = [int(t) for t in args.j_list.split(",")]
    rows = []
    payload = []
    for z in zs:
        table = cyl.convergence_study(fp, z, j_list, route=args.route)
        for r in table.rows:
            rows.append([r.J, z.real, z.imag, r.hs_distance, r.f2_difference])
        print(f"z = {z}: HS slope {table.hs_slope:.3f} "
              f"(monotone {table.hs_monotone}), F2 slope {table.f2_slope:.3f} "
              f"(monotone {table.f2_monotone})")
        payload.append({"z": [z.real, z.imag],
                        "hs_slope": table.hs_slope,
                        "f2_slope": table.f2_slope,
                        "hs_monotone": table.hs_monotone,
                        "f2_monotone": table.f2_monotone})
    if args.out_csv:
        _write_csv(args.out_csv,
                   ["J", "z_re", "z_im", "hs_distance", "f2_difference"], rows)
    return {"tables": payload}


def load_cylinder_potential(path: str) -> cyl.FourierPotential:
    """Cylinder potential file: '# d = <2|3>', '# v_infinity = <val>' headers,
    rows (m-vector components..., x1, Re W_m, Im W_m)."""
    from scipy.interpolate import CubicSpline
    d = None
    vinf = None
    rows = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, val = (s.strip() for s in body.split("=", 1))
                    if key == "d":
                        d = int(val)
                    elif key == "v_infinity":
                        vinf = float(val)
                continue
            cols = line.split()
            if d is None or vinf is None:
                raise PreconditionError(f"{path}: headers must precede data")
            nm = d - 1
            key = tuple(int(float(c)) for c in cols[:nm])
            x1 = float(cols[nm])
            re, im = float(cols[nm + 1]), float(cols[nm + 2])
            rows.setdefault(key, []).append((x1, complex(re, im)))
    if d is None or vinf is None:
        raise PreconditionError(f"{path}: missing '# d' or '# v_infinity'")
    coeffs = {}
    m_max = 0
    for key, pts in rows.items():
        pts.sort()
        xs = np.array([t[0] for t in pts])
        vs = np.array([t[1] for t in pts])
        if np.max(np.abs(vs.imag)) < 1e-300:
            vs = vs.real
        spline = CubicSpline(xs, vs)
        lo, hi = xs[0], xs[-1]

        def fun(t, s=spline, lo=lo, hi=hi):
            t = np.asarray(t, dtype=float)
            return np.where((t >= lo) & (t <= hi), s(np.clip(t, lo, hi)), 0.0)

        coeffs[key] = fun
        m_max = max(m_max, int(np.ceil(np.sqrt(sum(c * c for c in key)))))
    x_any = rows[next(iter(rows))]
    x_max = float(max(abs(x_any[0][0]), abs(x_any[-1][0])))
    return cyl.FourierPotential(d, vinf, coeffs, m_max, x_max)


def save_cylinder_potential(fp: cyl.FourierPotential, path: str,
                            n_nodes: int = 801) -> None:
    xs = np.linspace(-fp.x_max, fp.x_max, n_nodes)
    with open(path, "w") as fh:
        fh.write(f"# d = {fp.d}\n")
        fh.write(f"# v_infinity = {fp.v_infinity:.17g}\n")
        for key in sorted(fp.coefficients):
            vals = np.asarray(fp.coefficients[key](xs), dtype=complex)
            for x, v in zip(xs, vals):
                mcols = " ".join(str(c) for c in key)
                fh.write(f"{mcols} {x:.17g} {v.real:.17g} {v.imag:.17g}\n")


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------

def _add_common(sp, potential=True):
    if potential:
        sp.add_argument("--potential", required=True,
                        help="kdv:<n>[:<kappa>[:<c>]], planar:/ycos: forms "
                             "for cylinder commands, or a file path")
    sp.add_argument("--x-max", type=float, default=DEFAULT_X_MAX)
    sp.add_argument("--nodes", type=int, default=DEFAULT_NODES)
    sp.add_argument("--config", default=None,
                    help="flat key=value file; flags win")
    sp.add_argument("--out-csv", default=None)
    sp.add_argument("--out-json", default=None)
    sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    for name in ("cond-max", "rank-tol", "degenerate-tol", "eigen-tol",
                 "cross-tol"):
        sp.add_argument(f"--{name}", type=float, default=None)


def _add_zargs(sp):
    sp.add_argument("--z", default=None,
                    help="comma-separated spectral parameters, e.g. -8,-1+1j")
    sp.add_argument("--contour", default=None,
                    help="circle:<cre>,<cim>,<radius>,<nodes> or "
                         "segment:<a>,<b>,<n>")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wavedet",
        description="Jost/Evans functions and stability indices via "
                    "(modified) Fredholm determinants")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("jost", help="Jost function values")
    _add_common(sp); _add_zargs(sp)
    sp.add_argument("--method", choices=["integral", "wronskian", "both"],
                    default="integral")
    sp.set_defaults(fn=cmd_jost)

    sp = sub.add_parser("fredholm", help="Nystrom Fredholm determinant")
    _add_common(sp); _add_zargs(sp)
    sp.add_argument("--panels", type=int, default=40)
    sp.add_argument("--per-panel", type=int, default=10)
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--modified", action="store_true")
    sp.set_defaults(fn=cmd_fredholm)

    sp = sub.add_parser("expand", help="determinant perturbation expansion")
    _add_common(sp, potential=False)
    sp.add_argument("--family", required=True,
                    help="JSON file with 'coefficients' (list of matrices; "
                         "entries may be [re, im] pairs) and 'radius'")
    sp.add_argument("--center", type=float, default=1.0)
    sp.add_argument("--radius", type=float, default=0.1)
    sp.add_argument("--singular", action="store_true")
    sp.add_argument("--modified", action="store_true")
    sp.set_defaults(fn=cmd_expand)

    sp = sub.add_parser("aux", help="auxiliary solutions and dF(0) factors")
    _add_common(sp)
    sp.set_defaults(fn=cmd_aux)

    sp = sub.add_parser("simon", help="half-line determinant Jost values")
    _add_common(sp); _add_zargs(sp)
    sp.add_argument("--x", type=float, default=0.0)
    sp.add_argument("--which", choices=["value", "derivative"],
                    default="value")
    sp.set_defaults(fn=cmd_simon)

    sp = sub.add_parser("cylinder", help="Galerkin pipeline on the cylinder")
    _add_common(sp); _add_zargs(sp)
    sp.add_argument("--d", type=int, choices=[2, 3], default=2)
    sp.add_argument("--J", type=int, default=0)
    sp.add_argument("--route", choices=["nystrom", "semiseparable"],
                    default="nystrom")
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--check-equivalence", action="store_true")
    sp.set_defaults(fn=cmd_cylinder)

    sp = sub.add_parser("index", help="1D stability index")
    _add_common(sp)
    sp.set_defaults(fn=cmd_index)

    sp = sub.add_parser("converge", help="Galerkin convergence study")
    _add_common(sp); _add_zargs(sp)
    sp.add_argument("--d", type=int, choices=[2, 3], default=2)
    sp.add_argument("--j-list", default="1,2,4,8")
    sp.add_argument("--route", choices=["nystrom", "semiseparable"],
                    default="semiseparable")
    sp.set_defaults(fn=cmd_converge)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Prepend defaults from --config as early flags (flags win)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    known = set()
    for action in ap._subparsers._group_actions[0].choices[argv[0]]._actions:  # noqa: SLF001
        for opt in action.option_strings:
            known.add(opt.lstrip("-").replace("-", "_"))
    extra: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            key = key.strip().replace("-", "_")
            val = val.strip()
            if key not in known:
                raise PreconditionError(f"unknown config key {key!r}")
            flag = "--" + key.replace("_", "-")
            if flag in argv:
                continue            # explicit flag wins
            if val.lower() in ("true", "yes", "on"):
                extra.append(flag)
            else:
                extra.extend([flag, val])
    return [argv[0]] + extra + argv[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        if argv and not argv[0].startswith("-"):
            argv = _apply_config(ap, argv)
        args = ap.parse_args(argv)
        payload = args.fn(args)
        summary = {
            "command": args.command,
            "version": __version__,
            "inputs": {k: v for k, v in sorted(vars(args).items())
                       if k not in ("fn",) and v is not None
                       and not callable(v)},
            "results": payload,
        }
        _write_json(getattr(args, "out_json", None), summary)
        return 0
    except PreconditionError as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
