"""Command-line entry points, flat-file configuration and run artifacts.

Subcommands:

``stagdg run <config>``
    Run a benchmark case described by a flat ``key = value`` config file and
    write CSV (and optionally legacy-VTK) artifacts.
``stagdg convergence <case> --levels K``
    Run a mesh-refinement ladder and print the error/order table.
``stagdg reference <case>``
    Emit the semi-analytic reference profile for a case as CSV.
``stagdg check``
    Run the fast invariant self-checks and exit nonzero on failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import cases as cs
from . import mesh as msh
from . import reference as ref

# ----------------------------------------------------------------------
# configuration


_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def parse_config(path):
    """Parse a flat ``key = value`` ASCII config file into a dict.

    Values are coerced to int/float/bool when they look like one; ``#``
    starts a comment.  Unknown keys are passed through to the case factory
    so cases can expose extra knobs without CLI changes.
    """
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key] = _coerce(val)
    return out


def _coerce(val):
    low = val.lower()
    if low in _BOOL:
        return _BOOL[low]
    for kind in (int, float):
        try:
            return kind(val)
        except ValueError:
            pass
    return val


# ----------------------------------------------------------------------
# field sampling helpers


def cell_averages(ops, state, gas):
    """Per-triangle averages of (rho, u, v, p) by sub-cell quadrature."""
    x, w, fields = cs.solution_points(ops, state, gas)
    n_tri = ops.mesh.primal.n_tri
    area = np.zeros(n_tri)
    np.add.at(area, ops.c_tri, w.sum(axis=-1))
    out = {}
    for key in ("rho", "u", "v", "p"):
        acc = np.zeros(n_tri)
        np.add.at(acc, ops.c_tri, (w * fields[key]).sum(axis=-1))
        out[key] = acc / area
    return out


def write_csv(path, header, columns):
    cols = [np.asarray(c).ravel() for c in columns]
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in zip(*cols):
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_vtk(path, mesh, cell_data):
    """Legacy ASCII VTK unstructured grid with per-triangle cell data."""
    pm = mesh.primal
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\nstagdg solution\nASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(pm.nodes)} double\n")
        for x, y in pm.nodes:
            f.write(f"{x:.17g} {y:.17g} 0\n")
        n = len(pm.triangles)
        f.write(f"CELLS {n} {4 * n}\n")
        for a, b, c in pm.triangles:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {n}\n")
        f.write("5\n" * n)
        f.write(f"CELL_DATA {n}\n")
        for key, vals in cell_data.items():
            f.write(f"SCALARS {key} double 1\nLOOKUP_TABLE default\n")
            for v in vals:
                f.write(f"{v:.17g}\n")


def slice_points(ops, state, gas, y0=0.0, width=None):
    """Quadrature-point samples in a horizontal band around y = y0,
    sorted by x — a cheap line cut for 1D comparisons."""
    x, w, fields = cs.solution_points(ops, state, gas)
    if width is None:
        width = ops.mesh.primal.h_min
    sel = np.abs(x[..., 1] - y0) <= 0.5 * width
    order = np.argsort(x[..., 0][sel])
    cols = [x[..., 0][sel][order], x[..., 1][sel][order]]
    cols += [fields[k][sel][order] for k in ("rho", "u", "v", "p")]
    return cols


def riemann_rh_residual(name, t=0.1):
    """Max Rankine-Hugoniot flux-jump residual across the right shock of a
    Riemann solution, using the shock speed implied by mass conservation."""
    state = ref.RIEMANN_PROBLEMS[name]
    g = state.gamma
    x = np.linspace(-0.5, 0.5, 20001)
    rho, u, p = ref.exact_riemann(state, x, t)
    # locate the strongest density jump travelling right of the contact
    j = int(np.argmax(np.abs(np.diff(rho)) * (x[:-1] > 0)))
    ql = rho[j - 2], u[j - 2], p[j - 2]
    qr = rho[j + 3], u[j + 3], p[j + 3]
    (rl, ul, pl), (rr, ur, pr) = ql, qr
    if abs(rl - rr) < 1e-12:
        return 0.0
    s = (rl * ul - rr * ur) / (rl - rr)
    el = pl / (g - 1.0) + 0.5 * rl * ul**2
    er = pr / (g - 1.0) + 0.5 * rr * ur**2
    res_m = (rl * ul**2 + pl - s * rl * ul) - (rr * ur**2 + pr - s * rr * ur)
    res_e = (ul * (el + pl) - s * el) - (ur * (er + pr) - s * er)
    return max(abs(res_m), abs(res_e))


# ----------------------------------------------------------------------
# subcommands


def cmd_run(args):
    import os

    cfg = parse_config(args.config)
    case_name = cfg.pop("case", "vortex")
    out_dir = cfg.pop("output_dir", ".")
    want_vtk = cfg.pop("vtk", False)
    mesh_file = cfg.pop("mesh_file", None)
    t_end = cfg.pop("t_end", None)

    case = cs.make_case(case_name, **cfg)
    if mesh_file is not None:
        if not os.path.exists(mesh_file):
            print(f"error: mesh file not found: {mesh_file}", file=sys.stderr)
            return 2
        primal, tags = msh.read_mesh(mesh_file)
        case.mesh = msh.build_staggered(primal, tags)
    if t_end is not None:
        case.t_end = float(t_end)

    os.makedirs(out_dir, exist_ok=True)
    ops, stepper, state = case.build()
    logs = []
    state, logs = stepper.run(state, case.t_end)

    avg = cell_averages(ops, state, case.gas)
    cx, cy = case.mesh.primal.barycenter.T
    write_csv(os.path.join(out_dir, "cell_averages.csv"),
              ["x", "y", "rho", "u", "v", "p"],
              [cx, cy, avg["rho"], avg["u"], avg["v"], avg["p"]])
    write_csv(os.path.join(out_dir, "slice_y0.csv"),
              ["x", "y", "rho", "u", "v", "p"],
              slice_points(ops, state, case.gas))
    mask = getattr(stepper, "last_troubled", None)
    if mask is None:
        mask = np.zeros(case.mesh.primal.n_tri, dtype=bool)
    write_csv(os.path.join(out_dir, "troubled.csv"),
              ["cell", "troubled"],
              [np.arange(len(mask)), mask.astype(int)])
    write_csv(os.path.join(out_dir, "run_log.csv"),
              ["t", "dt", "pressure_iters", "troubled", "retries"],
              [[l.t for l in logs], [l.dt for l in logs],
               [l.pressure_iters for l in logs], [l.troubled for l in logs],
               [l.retries for l in logs]])
    if want_vtk:
        write_vtk(os.path.join(out_dir, "solution.vtk"), case.mesh, avg)
    if case.exact is not None:
        errs = cs.error_norms(ops, state, case.exact, case.gas)
        for var, norms in errs.items():
            print(f"{var}: " + "  ".join(f"{k}={v:.6e}" for k, v in norms.items()))
    print(f"completed {len(logs)} steps to t = {state.t:.6g}; "
          f"artifacts in {out_dir}")
    return 0


def cmd_convergence(args):
    n0 = args.n0
    ladder = [round(n0 * 2**k) for k in range(args.levels)]
    rows = cs.convergence_study(args.case, ladder, args.p, args.p_gamma,
                                t_end=args.t_end, norm=args.norm, var=args.var)
    print(f"{'N_i':>8} {'h':>12} {'error':>14} {'order':>8} {'steps':>7}")
    for r in rows:
        o = f"{r['order']:.3f}" if r["order"] is not None else "n/a"
        print(f"{r['n_tri']:>8} {r['h']:>12.5e} {r['error']:>14.6e} "
              f"{o:>8} {r['steps']:>7}")
    return 0


def cmd_reference(args):
    t = args.time
    name = args.case
    if name in ref.RIEMANN_PROBLEMS:
        state = ref.RIEMANN_PROBLEMS[name]
        t = state.t_end if t is None else t
        x = np.linspace(-0.5, 0.5, args.samples)
        rho, u, p = ref.exact_riemann(state, x, max(t, 1e-12))
        cols, hdr = [x, rho, u, p], ["x", "rho", "u", "p"]
    elif name == "becker":
        shock = ref.BeckerShock(mach=2.0, mu=2e-2)
        t = 0.0 if t is None else t
        x = np.linspace(-0.1, 1.1, args.samples)
        rho, u, p = ref.becker_traveling(shock, x, t)
        cols, hdr = [x, rho, u, p], ["x", "rho", "u", "p"]
    elif name in ("explosion", "acoustic"):
        case = cs.make_case(name)
        t = case.t_end if t is None else t
        r, rho, u, p = case.radial(t)
        cols, hdr = [r, rho, u, p], ["r", "rho", "u", "p"]
    elif name == "vortex":
        t = 0.0 if t is None else t
        x = np.linspace(-10.0, 10.0, args.samples)
        rho, u, v, p = ref.vortex_state(x, np.zeros_like(x), t)
        cols, hdr = [x, rho, u, p], ["x", "rho", "u", "p"]
    else:
        print(f"error: no reference profile for case {name!r}", file=sys.stderr)
        return 1
    write_csv(args.output, hdr, cols) if args.output else _print_csv(hdr, cols)
    return 0


def _print_csv(header, columns):
    print(",".join(header))
    for row in zip(*(np.asarray(c).ravel() for c in columns)):
        print(",".join(f"{v:.17g}" for v in row))


def cmd_check(args):
    """Fast invariant suite: reference-kit identities plus basic operator
    checks on a small mesh."""
    failures = []

    def check(name, ok, detail=""):
        status = "ok" if ok else "FAIL"
        print(f"  [{status}] {name}" + (f"  ({detail})" if detail else ""))
        if not ok:
            failures.append(name)

    print("reference kit:")
    res = riemann_rh_residual("rp1")
    check("exact Riemann Rankine-Hugoniot residual < 1e-10", res < 1e-10,
          f"res={res:.2e}")
    shock = ref.BeckerShock(mach=2.0, mu=2e-2)
    x = np.linspace(-0.3, 0.3, 1001)
    rho, u, _ = ref.becker_profile(shock, x)
    flux = rho * u
    check("viscous-shock mass flux constant to 1e-12",
          float(np.ptp(flux)) < 1e-12 * abs(flux[0]),
          f"ptp={np.ptp(flux):.2e}")
    check("viscous-shock lambda^2(M=2) = 0.375",
          abs(shock.lam2 - 0.375) < 1e-12, f"lam2={shock.lam2:.15f}")

    print("operators (small mesh):")
    from .basis import SpaceTimeBasis
    from .operators import Operators

    pm, tags = msh.generate_rectangle(
        0.0, 1.0, 0.0, 1.0, 4, 4,
        {"left": "periodic:x", "right": "periodic:x",
         "bottom": "periodic:y", "top": "periodic:y"},
        jitter=0.1, seed=1)
    sm = msh.build_staggered(pm, tags)
    ops = Operators(sm, SpaceTimeBasis(2, 1))

    zc = np.stack([ops.project_dual(lambda x, y: np.full_like(x, 0.7)),
                   ops.project_dual(lambda x, y: np.full_like(x, -1.3))],
                  axis=-1)
    div = ops.apply_div(zc)
    check("weak divergence of a constant field vanishes",
          float(np.abs(div).max()) < 1e-12, f"max={np.abs(div).max():.2e}")

    # linears are not periodic; use a wall-bounded mesh for this check
    pm2, tags2 = msh.generate_rectangle(
        0.0, 1.0, 0.0, 1.0, 4, 4, {s: "transmissive" for s in
                                   ("left", "right", "bottom", "top")},
        jitter=0.1, seed=2)
    ops2 = Operators(msh.build_staggered(pm2, tags2), SpaceTimeBasis(2, 1))
    lin = lambda x, y: 2.0 * x - 3.0 * y + 1.0
    avg = ops2.avg_dual_to_primal(ops2.project_dual(lin))
    err = float(np.abs(ops2.primal_values(avg)
                       - lin(ops2.sub_x[..., 0], ops2.sub_x[..., 1])).max())
    check("dual-to-primal averaging exact on linears", err < 1e-11,
          f"max={err:.2e}")
    if failures:
        print(f"{len(failures)} check(s) failed")
        return 1
    print("all checks passed")
    return 0


# ----------------------------------------------------------------------


def main(argv=None):
    ap = argparse.ArgumentParser(prog="stagdg",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run a case from a config file")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser("convergence", help="mesh-refinement study")
    p_conv.add_argument("case")
    p_conv.add_argument("--levels", type=int, default=3)
    p_conv.add_argument("--n0", type=int, default=700)
    p_conv.add_argument("--p", type=int, default=1)
    p_conv.add_argument("--p-gamma", dest="p_gamma", type=int, default=1)
    p_conv.add_argument("--t-end", dest="t_end", type=float, default=None)
    p_conv.add_argument("--norm", default="l2", choices=("l1", "l2", "linf"))
    p_conv.add_argument("--var", default="rho")
    p_conv.set_defaults(func=cmd_convergence)

    p_ref = sub.add_parser("reference", help="emit a reference profile CSV")
    p_ref.add_argument("case")
    p_ref.add_argument("--time", type=float, default=None)
    p_ref.add_argument("--samples", type=int, default=2001)
    p_ref.add_argument("--output", default=None)
    p_ref.set_defaults(func=cmd_reference)

    p_chk = sub.add_parser("check", help="fast invariant self-checks")
    p_chk.set_defaults(func=cmd_check)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
